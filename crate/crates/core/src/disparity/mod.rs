//! Landmark disparities, dense disparity maps, cross-sensor alignment and
//! model-input assembly.

pub mod delaunay;
pub mod interp;
mod stack;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use delaunay::{triangulate, TriMesh};
pub use interp::{interpolate_grid, Locator, Weights};
pub use stack::{
    build_sensor_crop, build_stack, SampleStack, StackMeta, StackOptions, DISPARITY_SCALE,
    STACK_CHANNELS, STACK_SIDE,
};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::ingest::CropWindow;
use crate::landmarks::{LandmarkPair, Point2};
use crate::planes::Planes;

/// Per-landmark disparity (right minus left), anchored at the left landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDisparity {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub anchors: Vec<Point2>,
}

pub fn sparse_disparity(pair: &LandmarkPair) -> SparseDisparity {
    let (l, r) = (pair.left.points(), pair.right.points());
    SparseDisparity {
        dx: l.iter().zip(r).map(|(l, r)| r.x - l.x).collect(),
        dy: l.iter().zip(r).map(|(l, r)| r.y - l.y).collect(),
        anchors: l.to_vec(),
    }
}

/// Dense horizontal (channel 0) and vertical (channel 1) disparity maps in
/// full-resolution sensor pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMaps {
    planes: Planes,
}

impl DisparityMaps {
    pub fn new(planes: Planes) -> Result<Self> {
        if planes.channels() != 2 {
            return Err(Error::Dimension(format!(
                "disparity maps need 2 channels, got {}",
                planes.channels()
            )));
        }
        Ok(Self { planes })
    }

    pub fn width(&self) -> usize {
        self.planes.width()
    }

    pub fn height(&self) -> usize {
        self.planes.height()
    }

    pub fn map_x(&self) -> &[f32] {
        self.planes.plane(0)
    }

    pub fn map_y(&self) -> &[f32] {
        self.planes.plane(1)
    }

    pub fn planes(&self) -> &Planes {
        &self.planes
    }

    pub fn into_planes(self) -> Planes {
        self.planes
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        (self.planes.get(0, x, y), self.planes.get(1, x, y))
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let mut w = Writer::new(w);
        w.magic(b"DSPM")?;
        w.u32(self.width() as u32)?;
        w.u32(self.height() as u32)?;
        w.u32(2)?;
        w.f32s(self.planes.data())?;
        w.finish()?;
        Ok(())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new("DSPM maps", buf);
        r.magic(b"DSPM")?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let channels = r.u32()? as usize;
        if channels != 2 {
            return Err(r.error(format!("expected 2 channels, found {channels}")));
        }
        let data = r.f32s(2 * width * height)?;
        r.expect_end()?;
        Self::new(Planes::from_vec(2, width, height, data)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Interpolates both maps over the full `width x height` left-sensor grid.
pub fn interpolate_maps(sparse: &SparseDisparity, width: usize, height: usize) -> Result<DisparityMaps> {
    interpolate_window(
        sparse,
        &CropWindow {
            x: 0,
            y: 0,
            w: width,
            h: height,
        },
    )
}

/// Same values as [`interpolate_maps`] restricted to `win`, computed without
/// materializing the full grid.
pub fn interpolate_window(sparse: &SparseDisparity, win: &CropWindow) -> Result<DisparityMaps> {
    if win.w == 0 || win.h == 0 {
        return Err(Error::Dimension("empty disparity grid".into()));
    }
    let loc = Locator::new(&sparse.anchors)?;
    let weights = loc.locate_grid(win.x as f64, win.y as f64, win.w, win.h);
    let mut data = Vec::with_capacity(2 * weights.len());
    data.extend(weights.iter().map(|w| w.apply(&sparse.dx) as f32));
    data.extend(weights.iter().map(|w| w.apply(&sparse.dy) as f32));
    DisparityMaps::new(Planes::from_vec(2, win.w, win.h, data)?)
}

/// Per-axis scale and translation mapping right-sensor coordinates onto the
/// left sensor: `left ≈ scale * right + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub scale_x: f64,
    pub scale_y: f64,
    pub t_x: f64,
    pub t_y: f64,
}

impl Alignment {
    pub const IDENTITY: Alignment = Alignment {
        scale_x: 1.0,
        scale_y: 1.0,
        t_x: 0.0,
        t_y: 0.0,
    };

    /// Right-sensor location that maps onto left-sensor `(x, y)`.
    pub fn left_to_right(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.t_x) / self.scale_x, (y - self.t_y) / self.scale_y)
    }

    pub fn sum_squared_residual(&self, pair: &LandmarkPair) -> f64 {
        pair.left
            .points()
            .iter()
            .zip(pair.right.points())
            .map(|(l, r)| {
                let ex = self.scale_x * r.x + self.t_x - l.x;
                let ey = self.scale_y * r.y + self.t_y - l.y;
                ex * ex + ey * ey
            })
            .sum()
    }
}

/// Closed-form 1-D least squares `target ≈ s * source + t`.
fn fit_axis(source: &[f64], target: &[f64], axis: &'static str) -> Result<(f64, f64)> {
    let n = source.len() as f64;
    let ms = source.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (s, t) in source.iter().zip(target) {
        sxx += (s - ms) * (s - ms);
        sxy += (s - ms) * (t - mt);
    }
    let spread = source.iter().fold(0.0f64, |m, s| m.max((s - ms).abs()));
    if sxx <= 0.0 || spread <= 1e-12 * ms.abs().max(1.0) {
        return Err(Error::SingularFit(axis));
    }
    let s = sxy / sxx;
    Ok((s, mt - s * ms))
}

pub fn estimate_alignment(pair: &LandmarkPair) -> Result<Alignment> {
    let (l, r) = (pair.left.points(), pair.right.points());
    let rx: Vec<f64> = r.iter().map(|p| p.x).collect();
    let ry: Vec<f64> = r.iter().map(|p| p.y).collect();
    let lx: Vec<f64> = l.iter().map(|p| p.x).collect();
    let ly: Vec<f64> = l.iter().map(|p| p.y).collect();
    let (scale_x, t_x) = fit_axis(&rx, &lx, "x")?;
    let (scale_y, t_y) = fit_axis(&ry, &ly, "y")?;
    Ok(Alignment {
        scale_x,
        scale_y,
        t_x,
        t_y,
    })
}

/// Least-squares plane `v ≈ a x + b y + c` over scattered samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms: f64,
}

impl AffineFit {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }
}

pub fn fit_affine(points: &[Point2], values: &[f64]) -> Result<AffineFit> {
    if points.len() != values.len() || points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "affine fit needs >= 3 matched samples, got {} / {}",
            points.len(),
            values.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mv = values.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, v) in points.iter().zip(values) {
        let (x, y, v) = (p.x - mx, p.y - my, v - mv);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxv += x * v;
        syv += y * v;
    }
    let det = sxx * syy - sxy * sxy;
    if !(det > 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("affine fit over collinear samples".into()));
    }
    let a = (sxv * syy - syv * sxy) / det;
    let b = (syv * sxx - sxv * sxy) / det;
    let c = mv - a * mx - b * my;
    let ss: f64 = points
        .iter()
        .zip(values)
        .map(|(p, v)| {
            let e = a * p.x + b * p.y + c - v;
            e * e
        })
        .sum();
    Ok(AffineFit {
        a,
        b,
        c,
        rms: (ss / n).sqrt(),
    })
}
