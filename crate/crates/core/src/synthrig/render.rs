//! Procedural stand-in for near-infrared face texture.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CameraModel, SceneSpec};
use crate::error::Result;
use crate::ingest::{SensorId, SensorImage, MAX_INTENSITY};
use crate::labels::SceneKind;
use crate::landmarks::{LandmarkSet, Region};
use crate::planes::Planes;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    pub background: f64,
    pub skin: f64,
    /// Blob amplitude per region, in `Region::ALL` order.
    pub region_amplitude: [f64; 6],
    /// Blob std-dev as a fraction of face width.
    pub blob_sigma: f64,
    pub left_gains: [f64; 4],
    pub right_gains: [f64; 4],
    pub noise_sigma: f64,
    /// Relative change of region amplitudes for latex masks.
    pub latex_shift: f64,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            background: 60.0,
            skin: 380.0,
            region_amplitude: [-120.0, -120.0, -150.0, -150.0, 90.0, -80.0],
            blob_sigma: 0.035,
            left_gains: [0.85, 1.0, 1.0, 1.15],
            right_gains: [0.9, 1.0, 0.95, 1.2],
            noise_sigma: 3.0,
            latex_shift: 0.2,
        }
    }
}

fn add_gaussian(base: &mut [f64], w: usize, h: usize, cx: f64, cy: f64, sx: f64, sy: f64, amp: f64) {
    let x0 = (cx - 3.0 * sx).floor().max(0.0) as usize;
    let x1 = ((cx + 3.0 * sx).ceil().max(0.0) as usize).min(w.saturating_sub(1));
    let y0 = (cy - 3.0 * sy).floor().max(0.0) as usize;
    let y1 = ((cy + 3.0 * sy).ceil().max(0.0) as usize).min(h.saturating_sub(1));
    if x0 > x1 || y0 > y1 {
        return;
    }
    let gx: Vec<f64> = (x0..=x1)
        .map(|x| (-0.5 * ((x as f64 - cx) / sx).powi(2)).exp())
        .collect();
    for y in y0..=y1 {
        let gy = amp * (-0.5 * ((y as f64 - cy) / sy).powi(2)).exp();
        let row = &mut base[y * w..];
        for (k, x) in (x0..=x1).enumerate() {
            row[x] += gy * gx[k];
        }
    }
}

/// Renders one sensor with the default texture parameters.
pub fn render_sensor(lms: &LandmarkSet, spec: &SceneSpec, cam: &CameraModel) -> Result<SensorImage> {
    render_with(lms, spec, cam, &TextureParams::default())
}

/// Sum of Gaussian blobs at the landmarks over a skin ellipse, scaled by a
/// per-scene illumination factor and per-channel gains, plus pixel noise.
/// Deterministic in `spec.seed`.
pub fn render_with(
    lms: &LandmarkSet,
    spec: &SceneSpec,
    cam: &CameraModel,
    tex: &TextureParams,
) -> Result<SensorImage> {
    let (w, h) = (cam.width, cam.height);
    // Illumination is a scene property, shared by both sensors.
    let illum = rng::stream(spec.seed, 0x111).random_range(0.75..1.25);
    let mut base = vec![tex.background * illum; w * h];

    let rect = lms.face_rect;
    let (cx, cy) = rect.center();
    add_gaussian(&mut base, w, h, cx, cy, 0.45 * rect.w, 0.55 * rect.h, tex.skin * illum);

    let shift = if spec.kind == SceneKind::LatexMask {
        1.0 - tex.latex_shift
    } else {
        1.0
    };
    let sigma = (tex.blob_sigma * rect.w).max(0.8);
    for (r, region) in Region::ALL.iter().enumerate() {
        let amp = tex.region_amplitude[r] * illum * shift;
        for i in region.indices() {
            let p = lms.points()[i];
            add_gaussian(&mut base, w, h, p.x, p.y, sigma, sigma, amp);
        }
    }

    let gains = match lms.sensor {
        SensorId::Left => tex.left_gains,
        SensorId::Right => tex.right_gains,
    };
    let mut noise_rng = rng::stream(spec.seed, rng::mix(&[0x222, lms.sensor as u64]));
    let normal = Normal::new(0.0, tex.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let max = MAX_INTENSITY as f64;
    let mut planes = Planes::zeros(4, w, h);
    for (c, g) in gains.iter().enumerate() {
        for (dst, &b) in planes.plane_mut(c).iter_mut().zip(&base) {
            let n = if tex.noise_sigma > 0.0 {
                normal.sample(&mut noise_rng)
            } else {
                0.0
            };
            *dst = (b * g + n).clamp(0.0, max) as f32;
        }
    }
    SensorImage::new(lms.sensor, planes)
}
