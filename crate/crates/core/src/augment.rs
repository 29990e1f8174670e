//! Training-time augmentation: landmark perturbations (which propagate into
//! the disparity maps), sensor-intensity changes, and spatial transforms
//! shared by every channel of a stack.
//!
//! Intensity magnitudes are fractions of the full scale, so the same config
//! drives raw sensor images (scale 1024) and normalized stacks (scale 1).

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::disparity::{build_stack, SampleStack, StackOptions};
use crate::error::Result;
use crate::ingest::{SensorImage, DEFAULT_EXTENSION, MAX_INTENSITY};
use crate::landmarks::{LandmarkPair, LandmarkSet, Point2, Region, NUM_LANDMARKS};
use crate::planes::Planes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub landmark_noise_prob: f64,
    pub organ_bias_prob: f64,
    pub outlier_prob: f64,
    /// Largest landmark / organ translation, fraction of the face dimension.
    pub landmark_noise_max: f64,
    pub outlier_min: f64,
    pub outlier_max: f64,
    pub outlier_max_count: usize,

    pub intensity_prob: f64,
    pub gain_jitter: f64,
    pub offset_jitter: f64,
    pub contrast_jitter: f64,
    pub brightness_jitter: f64,
    pub noise_sigma: f64,
    pub blur_prob: f64,
    pub blur_max_len: usize,

    pub spatial_prob: f64,
    pub flip_prob: f64,
    pub rotation_max_deg: f64,
    pub shear_max: f64,
    pub cutout_prob: f64,
    /// Cutout side range, fraction of the stack side.
    pub cutout_min: f64,
    pub cutout_max: f64,

    pub crop_prob: f64,
    pub bbox_translate_max: f64,
    pub face_bg_ratio_min: f64,
    pub face_bg_ratio_max: f64,

    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            landmark_noise_prob: 0.5,
            organ_bias_prob: 0.5,
            outlier_prob: 0.5,
            landmark_noise_max: 0.06,
            outlier_min: 0.06,
            outlier_max: 0.14,
            outlier_max_count: 4,
            intensity_prob: 0.5,
            gain_jitter: 0.1,
            offset_jitter: 0.02,
            contrast_jitter: 0.15,
            brightness_jitter: 0.05,
            noise_sigma: 0.01,
            blur_prob: 0.5,
            blur_max_len: 7,
            spatial_prob: 0.5,
            flip_prob: 0.5,
            rotation_max_deg: 15.0,
            shear_max: 0.1,
            cutout_prob: 0.5,
            cutout_min: 0.1,
            cutout_max: 0.3,
            crop_prob: 0.5,
            bbox_translate_max: 0.2,
            face_bg_ratio_min: 0.4,
            face_bg_ratio_max: 0.8,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Every family disabled.
    pub fn none() -> Self {
        Self {
            landmark_noise_prob: 0.0,
            organ_bias_prob: 0.0,
            outlier_prob: 0.0,
            intensity_prob: 0.0,
            blur_prob: 0.0,
            spatial_prob: 0.0,
            cutout_prob: 0.0,
            crop_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            self.landmark_noise_max,
            self.outlier_min,
            self.outlier_max,
            self.gain_jitter,
            self.offset_jitter,
            self.contrast_jitter,
            self.brightness_jitter,
            self.noise_sigma,
            self.rotation_max_deg,
            self.shear_max,
            self.cutout_min,
            self.cutout_max,
            self.bbox_translate_max,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0))
            || self.outlier_min > self.outlier_max
            || self.cutout_min > self.cutout_max
            || !(self.face_bg_ratio_min > 0.0 && self.face_bg_ratio_min <= self.face_bg_ratio_max)
        {
            return Err(crate::Error::Config("augmentation ranges must be non-negative and ordered".into()));
        }
        Ok(())
    }
}

fn signed(rng: &mut impl Rng, max: f64) -> f64 {
    if max > 0.0 {
        rng.random_range(-max..=max)
    } else {
        0.0
    }
}

fn hit(rng: &mut impl Rng, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

/// Translates a random subset of landmarks independently, each by at most
/// `max` of the face width / height.
pub fn jitter_landmarks(set: &LandmarkSet, max: f64, rng: &mut impl Rng) -> Result<LandmarkSet> {
    let (fw, fh) = (set.face_rect.w, set.face_rect.h);
    let count = rng.random_range(1..=NUM_LANDMARKS);
    let mut pts = set.points().to_vec();
    for i in sample_indices(rng, NUM_LANDMARKS, count).into_iter() {
        pts[i].x += signed(rng, max) * fw;
        pts[i].y += signed(rng, max) * fh;
    }
    set.with_points(pts)
}

/// Moves every landmark of `region` by the same vector.
pub fn shift_region(set: &LandmarkSet, region: Region, dx: f64, dy: f64) -> Result<LandmarkSet> {
    let mut pts = set.points().to_vec();
    for p in &mut pts[region.indices()] {
        p.x += dx;
        p.y += dy;
    }
    set.with_points(pts)
}

/// Displaces up to `max_count` landmarks by a per-axis magnitude drawn from
/// `[min, max]` of the face dimension, with random sign.
pub fn add_outliers(
    set: &LandmarkSet,
    min: f64,
    max: f64,
    max_count: usize,
    rng: &mut impl Rng,
) -> Result<LandmarkSet> {
    if max_count == 0 {
        return Ok(set.clone());
    }
    let (fw, fh) = (set.face_rect.w, set.face_rect.h);
    let count = rng.random_range(1..=max_count.min(NUM_LANDMARKS));
    let mut pts = set.points().to_vec();
    let magnitude = |rng: &mut dyn rand::RngCore| {
        let m = if max > min { rng.random_range(min..=max) } else { min };
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    };
    for i in sample_indices(rng, NUM_LANDMARKS, count).into_iter() {
        pts[i].x += magnitude(rng) * fw;
        pts[i].y += magnitude(rng) * fh;
    }
    set.with_points(pts)
}

fn augment_set(set: &LandmarkSet, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<LandmarkSet> {
    let mut out = set.clone();
    if hit(rng, cfg.landmark_noise_prob) {
        out = jitter_landmarks(&out, cfg.landmark_noise_max, rng)?;
    }
    if hit(rng, cfg.organ_bias_prob) {
        let region = Region::ALL[rng.random_range(0..Region::ALL.len())];
        let dx = signed(rng, cfg.landmark_noise_max) * set.face_rect.w;
        let dy = signed(rng, cfg.landmark_noise_max) * set.face_rect.h;
        out = shift_region(&out, region, dx, dy)?;
    }
    if hit(rng, cfg.outlier_prob) {
        out = add_outliers(&out, cfg.outlier_min, cfg.outlier_max, cfg.outlier_max_count, rng)?;
    }
    Ok(out)
}

/// Applies the landmark families to each sensor's set independently.
pub fn augment_landmarks(pair: &LandmarkPair, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<LandmarkPair> {
    LandmarkPair::new(augment_set(&pair.left, cfg, rng)?, augment_set(&pair.right, cfg, rng)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlurDirection {
    Horizontal,
    Vertical,
}

/// Concrete intensity transform for one 4-channel sensor group.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityParams {
    pub gains: [f64; 4],
    /// Fractions of full scale.
    pub offsets: [f64; 4],
    pub contrast: f64,
    pub brightness: f64,
    pub noise_sigma: f64,
    pub blur: Option<(usize, BlurDirection)>,
}

impl IntensityParams {
    pub const IDENTITY: IntensityParams = IntensityParams {
        gains: [1.0; 4],
        offsets: [0.0; 4],
        contrast: 1.0,
        brightness: 0.0,
        noise_sigma: 0.0,
        blur: None,
    };

    pub fn sample(cfg: &AugmentConfig, rng: &mut impl Rng) -> Self {
        if !hit(rng, cfg.intensity_prob) {
            return Self::IDENTITY;
        }
        let mut p = Self::IDENTITY;
        for c in 0..4 {
            p.gains[c] = 1.0 + signed(rng, cfg.gain_jitter);
            p.offsets[c] = signed(rng, cfg.offset_jitter);
        }
        p.contrast = 1.0 + signed(rng, cfg.contrast_jitter);
        p.brightness = signed(rng, cfg.brightness_jitter);
        p.noise_sigma = if cfg.noise_sigma > 0.0 {
            rng.random_range(0.0..=cfg.noise_sigma)
        } else {
            0.0
        };
        if cfg.blur_max_len >= 3 && hit(rng, cfg.blur_prob) {
            let len = 2 * rng.random_range(1..=(cfg.blur_max_len - 1) / 2) + 1;
            let dir = if rng.random::<bool>() {
                BlurDirection::Horizontal
            } else {
                BlurDirection::Vertical
            };
            p.blur = Some((len, dir));
        }
        p
    }
}

/// Box filter of odd length `len` along one axis, edge-clamped.
pub fn motion_blur(planes: &Planes, channels: std::ops::Range<usize>, len: usize, dir: BlurDirection) -> Planes {
    let (w, h) = (planes.width(), planes.height());
    let r = (len / 2) as isize;
    let mut out = planes.clone();
    for c in channels {
        let src = planes.plane(c);
        let dst = out.plane_mut(c);
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0f64;
                for k in -r..=r {
                    let v = match dir {
                        BlurDirection::Horizontal => {
                            let jj = (j as isize + k).clamp(0, w as isize - 1) as usize;
                            src[i * w + jj]
                        }
                        BlurDirection::Vertical => {
                            let ii = (i as isize + k).clamp(0, h as isize - 1) as usize;
                            src[ii * w + j]
                        }
                    };
                    acc += v as f64;
                }
                dst[i * w + j] = (acc / (2 * r + 1) as f64) as f32;
            }
        }
    }
    out
}

/// Gain/offset, mean-variance adjustment, noise, then blur on `channels`
/// (exactly four); values are clamped to `[0, full_scale]`.
pub fn apply_intensity(
    planes: &mut Planes,
    first_channel: usize,
    full_scale: f64,
    params: &IntensityParams,
    rng: &mut impl Rng,
) {
    if *params == IntensityParams::IDENTITY {
        return;
    }
    let normal = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    for k in 0..4 {
        let c = first_channel + k;
        let plane = planes.plane_mut(c);
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / plane.len() as f64;
        for v in plane.iter_mut() {
            let mut x = *v as f64 * params.gains[k] + params.offsets[k] * full_scale;
            x = (x - mean) * params.contrast + mean + params.brightness * full_scale;
            if params.noise_sigma > 0.0 {
                x += normal.sample(rng) * full_scale;
            }
            *v = x.clamp(0.0, full_scale) as f32;
        }
    }
    if let Some((len, dir)) = params.blur {
        *planes = motion_blur(planes, first_channel..first_channel + 4, len, dir);
    }
}

pub fn augment_intensity(img: &SensorImage, cfg: &AugmentConfig, rng: &mut impl Rng) -> SensorImage {
    let params = IntensityParams::sample(cfg, rng);
    let mut out = img.clone();
    apply_intensity(&mut out.planes, 0, MAX_INTENSITY as f64, &params, rng);
    out
}

/// Intensity augmentation of the two sensor groups of a normalized stack.
/// Disparity channels are never touched.
pub fn augment_stack_intensity(stack: &SampleStack, cfg: &AugmentConfig, rng: &mut impl Rng) -> SampleStack {
    let mut out = stack.clone();
    for first in [0, 4] {
        let params = IntensityParams::sample(cfg, rng);
        apply_intensity(&mut out.planes, first, 1.0, &params, rng);
    }
    out
}

/// Output-pixel cutout rectangle `(x, y, w, h)`.
pub type Cutout = (usize, usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialParams {
    pub flip: bool,
    pub rotation_deg: f64,
    pub shear: f64,
    pub cutout: Option<Cutout>,
}

impl SpatialParams {
    pub const IDENTITY: SpatialParams = SpatialParams {
        flip: false,
        rotation_deg: 0.0,
        shear: 0.0,
        cutout: None,
    };

    pub fn sample(cfg: &AugmentConfig, side: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::IDENTITY;
        if hit(rng, cfg.spatial_prob) {
            p.flip = hit(rng, cfg.flip_prob);
            p.rotation_deg = signed(rng, cfg.rotation_max_deg);
            p.shear = signed(rng, cfg.shear_max);
        }
        if hit(rng, cfg.cutout_prob) {
            let frac = |rng: &mut dyn rand::RngCore| {
                if cfg.cutout_max > cfg.cutout_min {
                    rng.random_range(cfg.cutout_min..=cfg.cutout_max)
                } else {
                    cfg.cutout_min
                }
            };
            let cw = ((frac(rng) * side as f64).round() as usize).clamp(1, side);
            let ch = ((frac(rng) * side as f64).round() as usize).clamp(1, side);
            let x = rng.random_range(0..=side - cw);
            let y = rng.random_range(0..=side - ch);
            p.cutout = Some((x, y, cw, ch));
        }
        p
    }

    /// Maps output coordinates (relative to the center) to source coordinates.
    fn inverse(&self) -> [[f64; 2]; 2] {
        let (s, c) = (-self.rotation_deg).to_radians().sin_cos();
        let rot_inv = [[c, -s], [s, c]];
        let shear_inv = [[1.0, -self.shear], [0.0, 1.0]];
        let fx = if self.flip { -1.0 } else { 1.0 };
        let m = [
            [
                shear_inv[0][0] * rot_inv[0][0] + shear_inv[0][1] * rot_inv[1][0],
                shear_inv[0][0] * rot_inv[0][1] + shear_inv[0][1] * rot_inv[1][1],
            ],
            [
                shear_inv[1][0] * rot_inv[0][0] + shear_inv[1][1] * rot_inv[1][0],
                shear_inv[1][0] * rot_inv[0][1] + shear_inv[1][1] * rot_inv[1][1],
            ],
        ];
        [[fx * m[0][0], fx * m[0][1]], [m[1][0], m[1][1]]]
    }
}

/// Resamples every channel through the same flip/rotation/shear and zeroes
/// the cutout. Channel values are not altered otherwise.
pub fn warp_planes(planes: &Planes, params: &SpatialParams) -> Planes {
    let (w, h) = (planes.width(), planes.height());
    let mut out = if params.flip || params.rotation_deg != 0.0 || params.shear != 0.0 {
        let m = params.inverse();
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let mut out = Planes::zeros(planes.channels(), w, h);
        for i in 0..h {
            for j in 0..w {
                let (u, v) = (j as f64 - cx, i as f64 - cy);
                let sx = m[0][0] * u + m[0][1] * v + cx;
                let sy = m[1][0] * u + m[1][1] * v + cy;
                for c in 0..planes.channels() {
                    out.set(c, j, i, planes.sample_bilinear(c, sx, sy));
                }
            }
        }
        out
    } else {
        planes.clone()
    };
    if let Some((x, y, cw, ch)) = params.cutout {
        for c in 0..out.channels() {
            for i in y..(y + ch).min(h) {
                for j in x..(x + cw).min(w) {
                    out.set(c, j, i, 0.0);
                }
            }
        }
    }
    out
}

/// Index of the horizontal disparity channel in a stack.
pub const MAP_X_CHANNEL: usize = 8;

pub fn apply_spatial(stack: &SampleStack, params: &SpatialParams) -> SampleStack {
    let mut planes = warp_planes(&stack.planes, params);
    // Mirroring swaps the horizontal geometry, so horizontal disparity changes sign.
    if params.flip && planes.channels() > MAP_X_CHANNEL {
        for v in planes.plane_mut(MAP_X_CHANNEL) {
            *v = -*v;
        }
    }
    SampleStack {
        planes,
        ..stack.clone()
    }
}

pub fn augment_spatial(stack: &SampleStack, cfg: &AugmentConfig, rng: &mut impl Rng) -> SampleStack {
    let params = SpatialParams::sample(cfg, stack.side(), rng);
    apply_spatial(stack, &params)
}

/// Face-box translation and face/background ratio for one crop.
pub fn sample_crop_options(cfg: &AugmentConfig, face_w: f64, face_h: f64, rng: &mut impl Rng) -> StackOptions {
    let mut opts = StackOptions::default();
    if hit(rng, cfg.crop_prob) {
        opts.extension = DEFAULT_EXTENSION;
        opts.face_bg_ratio = if cfg.face_bg_ratio_max > cfg.face_bg_ratio_min {
            rng.random_range(cfg.face_bg_ratio_min..=cfg.face_bg_ratio_max)
        } else {
            cfg.face_bg_ratio_min
        };
        opts.rect_shift = (
            signed(rng, cfg.bbox_translate_max) * face_w,
            signed(rng, cfg.bbox_translate_max) * face_h,
        );
    }
    opts
}

/// Full training-sample assembly: landmark perturbation, per-sensor intensity
/// changes, randomized crop, stack construction, then a shared spatial
/// transform.
pub fn assemble_training_sample(
    left: &SensorImage,
    right: &SensorImage,
    pair: &LandmarkPair,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<SampleStack> {
    let pair = augment_landmarks(pair, cfg, rng)?;
    let left = augment_intensity(left, cfg, rng);
    let right = augment_intensity(right, cfg, rng);
    let rect = pair.left.face_rect;
    let opts = sample_crop_options(cfg, rect.w, rect.h, rng);
    let stack = build_stack(&left, &right, &pair, &opts)?;
    Ok(augment_spatial(&stack, cfg, rng))
}

/// Relative displacement of each landmark, per axis, in face-dimension units.
pub fn relative_displacement(before: &LandmarkSet, after: &LandmarkSet) -> Vec<(f64, f64)> {
    let (fw, fh) = (before.face_rect.w, before.face_rect.h);
    before
        .points()
        .iter()
        .zip(after.points())
        .map(|(a, b): (&Point2, &Point2)| ((b.x - a.x).abs() / fw, (b.y - a.y).abs() / fh))
        .collect()
}
