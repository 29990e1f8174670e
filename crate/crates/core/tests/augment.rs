use dfas_core::augment::*;
use dfas_core::disparity::{SampleStack, StackMeta};
use dfas_core::ingest::{FaceRect, SensorId};
use dfas_core::landmarks::{LandmarkPair, LandmarkSet, Point2, NUM_LANDMARKS};
use dfas_core::planes::Planes;
use dfas_core::rng;
use proptest::prelude::*;
use rand::Rng;

fn face_pair() -> LandmarkPair {
    let rect = FaceRect::new(200.0, 150.0, 120.0, 150.0).unwrap();
    let pts: Vec<Point2> = (0..NUM_LANDMARKS)
        .map(|i| Point2::new(210.0 + (i % 9) as f64 * 12.0, 160.0 + (i / 9) as f64 * 25.0))
        .collect();
    let shifted: Vec<Point2> = pts.iter().map(|p| Point2::new(p.x + 30.0, p.y)).collect();
    LandmarkPair::new(
        LandmarkSet::new(SensorId::Left, pts, rect).unwrap(),
        LandmarkSet::new(SensorId::Right, shifted, rect.translated(30.0, 0.0)).unwrap(),
    )
    .unwrap()
}

fn random_stack(seed: u64, side: usize) -> SampleStack {
    let mut r = rng::stream(seed, 1);
    let data = (0..10 * side * side).map(|_| r.random_range(0.0f32..1.0)).collect();
    SampleStack {
        planes: Planes::from_vec(10, side, side, data).unwrap(),
        label: None,
        attack_kind: None,
        meta: StackMeta::default(),
    }
}

#[test]
fn outliers_respect_count_and_magnitude_bounds() {
    let cfg = AugmentConfig::default();
    let set = face_pair().left;
    let mut r = rng::stream(77, 0);
    for _ in 0..10_000 {
        let out = add_outliers(&set, cfg.outlier_min, cfg.outlier_max, cfg.outlier_max_count, &mut r).unwrap();
        let disp = relative_displacement(&set, &out);
        let moved = disp.iter().filter(|(dx, dy)| *dx > 0.0 || *dy > 0.0).count();
        assert!((1..=4).contains(&moved));
        for (dx, dy) in disp {
            assert!(dx <= 0.14 + 1e-9 && dy <= 0.14 + 1e-9);
            if dx > 0.0 || dy > 0.0 {
                assert!(dx >= 0.06 - 1e-9 && dy >= 0.06 - 1e-9);
            }
        }
    }
}

#[test]
fn jitter_stays_within_bound() {
    let set = face_pair().left;
    let mut r = rng::stream(3, 0);
    for _ in 0..1000 {
        let out = jitter_landmarks(&set, 0.06, &mut r).unwrap();
        for (dx, dy) in relative_displacement(&set, &out) {
            assert!(dx <= 0.06 + 1e-9 && dy <= 0.06 + 1e-9);
        }
    }
}

#[test]
fn landmark_augmentation_is_seed_deterministic() {
    let cfg = AugmentConfig::default();
    let pair = face_pair();
    let a = augment_landmarks(&pair, &cfg, &mut rng::stream(5, 9)).unwrap();
    let b = augment_landmarks(&pair, &cfg, &mut rng::stream(5, 9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stack_intensity_never_touches_maps() {
    let cfg = AugmentConfig {
        intensity_prob: 1.0,
        blur_prob: 1.0,
        ..AugmentConfig::default()
    };
    for seed in 0..20 {
        let s = random_stack(seed, 24);
        let out = augment_stack_intensity(&s, &cfg, &mut rng::stream(seed, 2));
        assert_eq!(out.planes.plane(8), s.planes.plane(8));
        assert_eq!(out.planes.plane(9), s.planes.plane(9));
        assert_ne!(out.planes.plane(0), s.planes.plane(0));
    }
}

#[test]
fn identity_spatial_is_exact() {
    let s = random_stack(1, 32);
    assert_eq!(apply_spatial(&s, &SpatialParams::IDENTITY), s);
}

#[test]
fn double_flip_restores_stack() {
    let s = random_stack(2, 32);
    let flip = SpatialParams {
        flip: true,
        ..SpatialParams::IDENTITY
    };
    let once = apply_spatial(&s, &flip);
    assert_eq!(once.planes.get(8, 0, 3), -s.planes.get(8, 31, 3));
    assert_eq!(once.planes.get(9, 0, 3), s.planes.get(9, 31, 3));
    let twice = apply_spatial(&once, &flip);
    for (a, b) in twice.planes.data().iter().zip(s.planes.data()) {
        assert!((a - b).abs() <= 1e-4);
    }
}

#[test]
fn rotation_round_trip_in_the_interior() {
    let side = 64;
    // Smooth content so bilinear resampling is nearly lossless.
    let mut planes = Planes::zeros(10, side, side);
    for c in 0..10 {
        for i in 0..side {
            for j in 0..side {
                planes.set(c, j, i, (0.1 * c as f32) + 0.01 * i as f32 + 0.02 * j as f32);
            }
        }
    }
    let fwd = SpatialParams { rotation_deg: 10.0, ..SpatialParams::IDENTITY };
    let back = SpatialParams { rotation_deg: -10.0, ..SpatialParams::IDENTITY };
    let out = warp_planes(&warp_planes(&planes, &fwd), &back);
    for c in 0..10 {
        for i in 16..48 {
            for j in 16..48 {
                assert!((out.get(c, j, i) - planes.get(c, j, i)).abs() < 1e-4);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spatial_transform_is_channel_consistent(
        seed in 0u64..1000,
        flip in any::<bool>(),
        rot in -15.0f64..15.0,
        shear in -0.1f64..0.1,
        cut in proptest::option::of((0usize..20, 0usize..20, 1usize..12, 1usize..12)),
    ) {
        let s = random_stack(seed, 32);
        let p = SpatialParams { flip, rotation_deg: rot, shear, cutout: cut };
        let whole = warp_planes(&s.planes, &p);
        for c in 0..10 {
            let single = warp_planes(&s.planes.select(&[c]), &p);
            prop_assert_eq!(single.plane(0), whole.plane(c));
        }
    }

    #[test]
    fn augmentation_keeps_intensity_range(seed in 0u64..1000) {
        let cfg = AugmentConfig { intensity_prob: 1.0, ..AugmentConfig::default() };
        let s = random_stack(seed, 16);
        let out = augment_stack_intensity(&s, &cfg, &mut rng::stream(seed, 4));
        prop_assert!(out.planes.data()[..8 * 256].iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
