use serde::{Deserialize, Serialize};

use crate::disparity::{fit_affine, interpolate_window, sparse_disparity, DisparityMaps};
use crate::error::{Error, Result};
use crate::ingest::CropWindow;
use crate::landmarks::{LandmarkPair, LandmarkSet, Point2};

pub const DEFAULT_TAU: f64 = 0.02;

/// How far the horizontal map departs from a plane at the landmark pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarityScore {
    /// RMS residual of the affine fit, pixels.
    pub residual_rms: f64,
    /// `residual_rms` over the inter-ocular distance.
    pub normalized_residual: f64,
    /// `1 - exp(-normalized_residual / tau)`; higher is more live.
    pub score: f64,
}

impl PlanarityScore {
    pub fn from_residual(residual_rms: f64, inter_ocular: f64, tau: f64) -> Self {
        let normalized_residual = residual_rms / inter_ocular;
        Self {
            residual_rms,
            normalized_residual,
            score: 1.0 - (-normalized_residual / tau).exp(),
        }
    }
}

/// Fits `map_x ≈ a x + b y + c` at the pixel nearest each left landmark.
/// `origin` is the left-sensor position of the map's top-left pixel.
pub fn planarity_score(
    maps: &DisparityMaps,
    origin: (usize, usize),
    lms: &LandmarkSet,
    tau: f64,
) -> Result<PlanarityScore> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("planarity tau must be positive, got {tau}")));
    }
    let (w, h) = (maps.width() as f64, maps.height() as f64);
    let mut pts = Vec::with_capacity(lms.points().len());
    let mut vals = Vec::with_capacity(lms.points().len());
    for p in lms.points() {
        let x = (p.x.round() - origin.0 as f64).clamp(0.0, w - 1.0);
        let y = (p.y.round() - origin.1 as f64).clamp(0.0, h - 1.0);
        pts.push(Point2::new(x, y));
        vals.push(maps.at(x as usize, y as usize).0 as f64);
    }
    let fit = fit_affine(&pts, &vals)?;
    let iod = lms.inter_ocular();
    if !(iod > 0.0) {
        return Err(Error::Degenerate("zero inter-ocular distance".into()));
    }
    Ok(PlanarityScore::from_residual(fit.rms, iod, tau))
}

/// Planarity of a pair, with maps interpolated over the landmarks' bounding box.
pub fn pair_planarity(pair: &LandmarkPair, tau: f64) -> Result<PlanarityScore> {
    let r = pair.left.face_rect;
    let x0 = r.x.floor().max(0.0) as usize;
    let y0 = r.y.floor().max(0.0) as usize;
    let win = CropWindow {
        x: x0,
        y: y0,
        w: (r.x + r.w).ceil() as usize + 1 - x0,
        h: (r.y + r.h).ceil() as usize + 1 - y0,
    };
    let maps = interpolate_window(&sparse_disparity(pair), &win)?;
    planarity_score(&maps, (x0, y0), &pair.left, tau)
}
