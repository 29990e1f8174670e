//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Numeric arguments select criteria, e.g.
//! `cargo test --release -p dfas-core --test acceptance -- 3 7`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::*;
use dfas_core::disparity::{interpolate_maps, sparse_disparity, SparseDisparity};
use dfas_core::eval::*;
use dfas_core::ingest::{repack_bayer, unpack_bayer, RawBayerFrame, SensorId};
use dfas_core::labels::{Label, SceneKind};
use dfas_core::landmarks::Point2;
use dfas_core::model::*;
use dfas_core::rng::stream;
use dfas_core::synthrig::{
    generate_dataset, make_geometry, sample_scene, scene_landmarks, DatasetConfig, Mix, RigPreset, SceneSpec, Split,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const GRID_W: usize = 200;
const GRID_H: usize = 150;

/// Largest deviation from the brute-force interpolant over pixels strictly
/// inside some oracle triangle, and how many such pixels there were.
fn oracle_gap(anchors: &[Point2], dx: &[f64], dy: &[f64]) -> (f64, usize) {
    let sparse = SparseDisparity {
        dx: dx.to_vec(),
        dy: dy.to_vec(),
        anchors: anchors.to_vec(),
    };
    let maps = interpolate_maps(&sparse, GRID_W, GRID_H).unwrap();
    let tris = brute_delaunay(anchors);
    let (mut worst, mut n) = (0.0f64, 0);
    for y in 0..GRID_H {
        for x in 0..GRID_W {
            let hit = tris.iter().find_map(|t| {
                let w = barycentric(anchors[t[0]], anchors[t[1]], anchors[t[2]], x as f64, y as f64);
                w.iter().all(|&l| l > 1e-9).then_some((t, w))
            });
            let Some((t, w)) = hit else { continue };
            let want = |v: &[f64]| (0..3).map(|k| w[k] * v[t[k]]).sum::<f64>();
            let (mx, my) = maps.at(x, y);
            worst = worst.max((mx as f64 - want(dx)).abs()).max((my as f64 - want(dy)).abs());
            n += 1;
        }
    }
    (worst, n)
}

fn interpolation_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(101, 0);
    let (mut worst, mut worst_affine, mut pixels) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let anchors: Vec<Point2> = (0..45)
            .map(|_| Point2::new(rng.random_range(5.0..GRID_W as f64 - 5.0), rng.random_range(5.0..GRID_H as f64 - 5.0)))
            .collect();
        let dx: Vec<f64> = (0..45).map(|_| rng.random_range(-10.0..10.0)).collect();
        let dy: Vec<f64> = (0..45).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (gap, n) = oracle_gap(&anchors, &dx, &dy);
        worst = worst.max(gap);
        pixels += n;

        let (a, b, c) = (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-5.0..5.0));
        let affine: Vec<f64> = anchors.iter().map(|p| a * p.x + b * p.y + c).collect();
        let (gap, _) = oracle_gap(&anchors, &affine, &affine);
        worst_affine = worst_affine.max(gap);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && worst_affine <= 1e-5 && secs < 60.0,
        format!("max gap {worst:.2e} over {pixels} interior pixels, affine {worst_affine:.2e}, {secs:.1} s"),
    )
}

fn rectified() -> DatasetConfig {
    DatasetConfig {
        rig: RigPreset::Rectified,
        ..DatasetConfig::default()
    }
}

fn landmarks_of(spec: &SceneSpec, subject: &dfas_core::synthrig::FaceTemplate45) -> dfas_core::landmarks::LandmarkPair {
    scene_landmarks(spec, &make_geometry(spec, subject)).unwrap()
}

fn rectified_plane() -> Outcome {
    let cfg = rectified();
    let (mut worst_y, mut worst_fit) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let (spec, subject) = sample_scene(&cfg, SceneKind::Plane, i);
        let pair = landmarks_of(&spec, &subject);
        let maps = interpolate_maps(&sparse_disparity(&pair), 640, 480).unwrap();
        worst_y = maps.map_y().iter().fold(worst_y, |m, v| m.max(v.abs() as f64));
        let hull = convex_hull(pair.left.points());
        let mut samples = Vec::new();
        for y in 0..480 {
            for x in 0..640 {
                if inside_hull(&hull, x as f64, y as f64, 1e-6) {
                    samples.push((x as f64, y as f64, maps.at(x, y).0 as f64));
                }
            }
        }
        worst_fit = worst_fit.max(affine_fit(&samples).1);
    }
    outcome(
        worst_y < 1e-6 && worst_fit < 1e-5,
        format!("max |map_y| {worst_y:.2e}, max map_x affine residual {worst_fit:.2e}"),
    )
}

/// Planarity scores of every scene in `cfg`'s plan that lies in `split`
/// (all scenes when `None`), from landmarks alone.
fn planarity_set(cfg: &DatasetConfig, split: Option<Split>) -> ScoreSet {
    let entries = cfg
        .plan()
        .into_iter()
        .enumerate()
        .filter(|(_, (_, s))| split.is_none_or(|want| *s == want))
        .map(|(i, (kind, _))| {
            let (spec, subject) = sample_scene(cfg, kind, i);
            let p = pair_planarity(&landmarks_of(&spec, &subject), DEFAULT_TAU).unwrap();
            ScoreEntry {
                score: p.score,
                label: kind.label(),
                kind,
            }
        })
        .collect();
    ScoreSet::new(entries).unwrap()
}

fn relief_separation() -> Outcome {
    let cfg = rectified();
    let mut min_ratio = f64::INFINITY;
    for i in 0..50 {
        let (live, subject) = sample_scene(&cfg, SceneKind::Live, i);
        let plane = SceneSpec {
            kind: SceneKind::Plane,
            ..live.clone()
        };
        let r = |s: &SceneSpec| pair_planarity(&landmarks_of(s, &subject), DEFAULT_TAU).unwrap().normalized_residual;
        min_ratio = min_ratio.min(r(&live) / r(&plane).max(1e-300));
    }
    let split = DatasetConfig {
        n: 1000,
        mix: Mix::uniform(&[SceneKind::Live, SceneKind::Plane]).unwrap(),
        seed: 3,
        ..DatasetConfig::default()
    };
    let set = planarity_set(&split, Some(Split::Test));
    let e = eer(&set).unwrap();
    outcome(
        min_ratio >= 10.0 && e == 0.0,
        format!("min live/plane residual ratio {min_ratio:.3e}, planarity EER {e} on {} test scenes", set.len()),
    )
}

fn noise_robustness() -> Outcome {
    let sigmas = [0.0, 0.5, 1.0, 2.0];
    let mut ok = true;
    let mut rows = Vec::new();
    for seed in 0..3 {
        let curve: Vec<f64> = sigmas
            .iter()
            .map(|&s| {
                let cfg = DatasetConfig {
                    n: 500,
                    mix: Mix::uniform(&[SceneKind::Live, SceneKind::Plane]).unwrap(),
                    seed,
                    landmark_noise: s,
                    distance_range: (300.0, 500.0),
                    ..DatasetConfig::default()
                };
                eer(&planarity_set(&cfg, None)).unwrap()
            })
            .collect();
        ok &= curve.windows(2).all(|w| w[0] <= w[1]);
        rows.push(format!("[{}]", curve.iter().map(|v| format!("{:.3}", v)).collect::<Vec<_>>().join(" ")));
    }
    outcome(ok, format!("EER at sigma 0/0.5/1/2 px per seed: {}", rows.join(" ")))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn batch_loss(net: &mut TinyCnn<f64>, x: &Tensor<f64>, labels: &[Label]) -> (f64, Vec<[f64; 2]>, ForwardCache<f64>) {
    let (ev, cache) = net.forward_train(x, false).unwrap();
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut d = Vec::new();
    for (e, l) in ev.iter().zip(labels) {
        let r = edl_loss(*e, *l, 0.07).unwrap();
        loss += r.loss / n;
        d.push([r.grad[0] / n, r.grad[1] / n]);
    }
    (loss, d, cache)
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut r = stream(505, 0);
    let h = 1e-4;
    let mut worst_edl = 0.0f64;
    for i in 0..100 {
        let e = [r.random_range(0.2..20.0), r.random_range(0.2..20.0)];
        let label = if i % 2 == 0 { Label::Live } else { Label::Spoof };
        let kl = [0.0, 0.05, 0.1][i % 3];
        let g = edl_loss(e, label, kl).unwrap().grad;
        for k in 0..2 {
            let (mut up, mut down) = (e, e);
            up[k] += h;
            down[k] -= h;
            let fd = (edl_loss(up, label, kl).unwrap().loss - edl_loss(down, label, kl).unwrap().loss) / (2.0 * h);
            worst_edl = worst_edl.max(rel_err(fd, g[k]));
        }
    }

    let spec = NetSpec {
        input_channels: 2,
        widths: vec![3, 4],
        strides: vec![2, 1],
        ..NetSpec::desk(2)
    };
    let mut net = TinyCnn::<f64>::new(spec, &mut stream(505, 1)).unwrap();
    for v in net.params.iter_mut() {
        *v += r.random_range(-0.1..0.1);
    }
    let x = Tensor {
        n: 4,
        c: 2,
        h: 7,
        w: 6,
        data: (0..4 * 2 * 7 * 6).map(|_| r.random_range(-1.0..1.0)).collect(),
    };
    let labels = [Label::Live, Label::Spoof, Label::Spoof, Label::Live];
    let (_, d, cache) = batch_loss(&mut net, &x, &labels);
    let grad = net.backward(&cache, &d);
    let base = net.params.clone();
    let step = 1e-5;
    let mut worst_net = 0.0f64;
    for _ in 0..20 {
        let dir: Vec<f64> = (0..base.len()).map(|_| StandardNormal.sample(&mut r)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, v)| g * v / norm).sum();
        net.params = base.iter().zip(&dir).map(|(p, v)| p + step * v / norm).collect();
        let up = batch_loss(&mut net, &x, &labels).0;
        net.params = base.iter().zip(&dir).map(|(p, v)| p - step * v / norm).collect();
        let down = batch_loss(&mut net, &x, &labels).0;
        worst_net = worst_net.max(rel_err((up - down) / (2.0 * step), analytic));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_edl <= 1e-4 && worst_net <= 1e-3 && secs < 120.0,
        format!("max relative error: loss {worst_edl:.2e}, network {worst_net:.2e}, {secs:.1} s"),
    )
}

fn split_samples(rows: &[dfas_core::synthrig::ManifestRow], dir: &Path) -> [Vec<SampleRef>; 3] {
    Split::ALL.map(|s| samples_in(rows, dir, s))
}

fn test_eer(kind: ModelKind, sets: &[Vec<SampleRef>; 3], cfg: &TrainConfig) -> f64 {
    let model = train_model(kind, &sets[0], &sets[1], cfg).unwrap();
    let scores = score_model(&model, &sets[2], 32).unwrap();
    let entries = sets[2]
        .iter()
        .zip(scores)
        .map(|(s, score)| ScoreEntry {
            score,
            label: s.label,
            kind: s.kind,
        })
        .collect();
    eer(&ScoreSet::new(entries).unwrap()).unwrap()
}

fn training_smoke() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        n: 2000,
        mix: "live=0.5,plane=0.25,cylinder=0.25".parse().unwrap(),
        seed: 6,
        ..DatasetConfig::default()
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = generate_dataset(&cfg, dir.path(), jobs).unwrap();
    let sets = split_samples(&rows, dir.path());
    let train = TrainConfig {
        lr: 1e-3,
        epochs: 10,
        seed: 6,
        ..TrainConfig::default()
    };
    let full = test_eer(ModelKind::Disparity, &sets, &train);
    let no_maps = test_eer(ModelKind::Sensors8, &sets, &train);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        full <= 0.05 && full <= no_maps && secs < 900.0,
        format!(
            "10-channel EER {:.2}%, 8-channel EER {:.2}% on {} test samples, {secs:.0} s",
            full * 100.0,
            no_maps * 100.0,
            sets[2].len()
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = stream(707, 0);
    let targets = [0.01, 0.05, 0.2];
    let (mut worst_eer, mut mismatches) = (0.0f64, 0);
    for i in 0..1000 {
        let n = rng.random_range(50..800);
        let frac = rng.random_range(0.2..0.8);
        let set = random_set(&mut rng, n, frac, (i % 5) as f64 * 0.15);
        let rates = brute_rates(&set);
        worst_eer = worst_eer.max((eer(&set).unwrap() - brute_eer(&rates)).abs());
        let brute = brute_fnr_at_fprs(&rates, &targets);
        for (t, b) in targets.iter().zip(brute) {
            if fnr_at_fpr(&set, *t).unwrap().fnr != b {
                mismatches += 1;
            }
        }
    }
    outcome(
        worst_eer <= 1e-3 && mismatches == 0,
        format!("max EER gap {worst_eer:.2e}, {mismatches} FNR@FPR mismatches over 1000 sets"),
    )
}

fn ensemble_identities() -> Outcome {
    let mut rng = stream(808, 0);
    let mut violations = 0;
    for _ in 0..200 {
        let set = random_triples(&mut rng, 60);
        let t = [rng.random(), rng.random(), rng.random()];
        let (fnr, fpr) = ensemble_rates(&set, &EnsembleDecision { thresholds: t }).unwrap();
        for m in 0..3 {
            let (mfnr, mfpr) = count_rates(&set.model(m), t[m]);
            if fpr > mfpr || fnr < mfnr {
                violations += 1;
            }
        }
        let r = threshold_search(&set, 0.05).unwrap();
        if r.fnr > r.stage1_fnr || (!r.fallback && r.fpr > 0.05) {
            violations += 1;
        }
    }
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..5 {
        let set = model_like_triples(&mut rng, 200, 6.0);
        let r = threshold_search(&set, 0.05).unwrap();
        worst_gap = worst_gap.max(r.fnr - fine_oracle_fnr(&set, 0.05, 500));
    }
    outcome(
        violations == 0 && worst_gap <= 0.005,
        format!("{violations} identity violations over 200 sets, search minus fine oracle at most {worst_gap:.4}"),
    )
}

fn bayer_round_trip() -> Outcome {
    let mut rng = stream(909, 0);
    let mut failures = 0;
    for i in 0..1000 {
        let (w, h) = (2 * rng.random_range(1..40), 2 * rng.random_range(1..40));
        let data: Vec<u16> = (0..w * h).map(|_| rng.random_range(0..=1024)).collect();
        let frame = RawBayerFrame::new(w, h, data).unwrap();
        let sensor = if i % 2 == 0 { SensorId::Left } else { SensorId::Right };
        if unpack_bayer(&repack_bayer(&frame, sensor)).unwrap() != frame {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} of 1000 frames differ after the round trip"))
}

/// Synthesizes, trains, scores and writes scores plus report; returns the bytes.
fn pipeline_run(dir: &Path, jobs: usize) -> Vec<(String, Vec<u8>)> {
    let cfg = DatasetConfig {
        n: 80,
        mix: "live=0.5,plane=0.25,cylinder=0.25".parse().unwrap(),
        seed: 10,
        ..DatasetConfig::default()
    };
    let rows = generate_dataset(&cfg, dir, jobs).unwrap();
    let sets = split_samples(&rows, dir);
    let train = TrainConfig {
        lr: 1e-3,
        epochs: 2,
        batch_size: 16,
        seed: 10,
        net: NetSpec {
            widths: vec![4, 8],
            strides: vec![2, 2],
            ..NetSpec::default()
        },
        ..TrainConfig::default()
    };
    let model = train_model(ModelKind::Disparity, &sets[0], &sets[1], &train).unwrap();
    model.save(dir.join("disparity.model")).unwrap();
    let scores = score_model(&model, &sets[2], 8).unwrap();
    let rows: Vec<ScoreRow> = sets[2]
        .iter()
        .zip(&scores)
        .map(|(s, &v)| ScoreRow {
            id: s.id.clone(),
            label: s.label,
            attack_kind: s.kind,
            score_left: None,
            score_right: None,
            score_disp: Some(v),
        })
        .collect();
    write_scores_csv(dir.join("scores.csv"), &rows).unwrap();
    let set = ScoreSet::new(
        rows.iter()
            .map(|r| ScoreEntry {
                score: r.score_disp.unwrap(),
                label: r.label,
                kind: r.attack_kind,
            })
            .collect(),
    )
    .unwrap();
    write_report_csv(dir.join("report.csv"), &report(&set, &DEFAULT_FPR_TARGETS).unwrap()).unwrap();
    ["manifest.jsonl", "disparity.model", "scores.csv", "report.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline_run(a.path(), 1);
    let second = pipeline_run(b.path(), 2);
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "manifest, checkpoint, scores and report byte-identical across two runs".into()
        } else {
            format!("differing outputs: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("interpolation oracle", interpolation_oracle),
        ("rectified plane maps", rectified_plane),
        ("relief separation", relief_separation),
        ("noise robustness", noise_robustness),
        ("gradient correctness", gradient_correctness),
        ("training smoke", training_smoke),
        ("metric oracles", metric_oracles),
        ("ensemble identities", ensemble_identities),
        ("bayer round trip", bayer_round_trip),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {id}: {} {name}: {} [{:.1} s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
