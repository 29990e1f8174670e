//! Piecewise-linear interpolation over a Delaunay mesh of scattered anchors.
//!
//! Inside the convex hull a pixel takes the barycentric combination of its
//! containing triangle's vertex values. Outside, it takes the value at the
//! nearest point of the hull boundary (linear along the nearest hull edge).

use std::cmp::Ordering;

use super::delaunay::{triangulate, TriMesh};
use crate::error::{Error, Result};
use crate::landmarks::Point2;

/// Vertex indices and weights reproducing the interpolant at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub vertices: [usize; 3],
    pub weights: [f64; 3],
    pub inside: bool,
}

impl Weights {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.weights[0] * values[self.vertices[0]]
            + self.weights[1] * values[self.vertices[1]]
            + self.weights[2] * values[self.vertices[2]]
    }
}

fn cmp_point(a: &Point2, b: &Point2) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Anchor geometry prepared for repeated evaluation.
///
/// Triangles and hull edges are ordered by vertex coordinates, not by anchor
/// index, so relabeling the anchors never changes a single output bit.
#[derive(Debug, Clone)]
pub struct Locator {
    mesh: TriMesh,
    hull: Vec<[usize; 2]>,
}

impl Locator {
    pub fn new(anchors: &[Point2]) -> Result<Self> {
        let mut mesh = triangulate(anchors)?;
        let pts = mesh.points.clone();
        for t in &mut mesh.triangles {
            let k = (0..3)
                .min_by(|&i, &j| cmp_point(&pts[t[i]], &pts[t[j]]))
                .unwrap();
            *t = [t[k], t[(k + 1) % 3], t[(k + 2) % 3]];
        }
        let key = |t: &[usize; 3]| t.map(|i| pts[i]);
        mesh.triangles.sort_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            (0..3)
                .map(|i| cmp_point(&ka[i], &kb[i]))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        let mut hull = mesh.hull_edges();
        hull.sort_by(|a, b| {
            cmp_point(&pts[a[0]], &pts[b[0]]).then(cmp_point(&pts[a[1]], &pts[b[1]]))
        });
        Ok(Self { mesh, hull })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    fn barycentric(&self, t: &[usize; 3], x: f64, y: f64) -> [f64; 3] {
        let [a, b, c] = t.map(|i| self.mesh.points[i]);
        let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        let lb = ((x - a.x) * (c.y - a.y) - (y - a.y) * (c.x - a.x)) / det;
        let lc = ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x)) / det;
        [1.0 - lb - lc, lb, lc]
    }

    fn nearest_hull(&self, x: f64, y: f64) -> Weights {
        let mut best = (f64::INFINITY, Weights {
            vertices: [0; 3],
            weights: [0.0; 3],
            inside: false,
        });
        for e in &self.hull {
            let (a, b) = (self.mesh.points[e[0]], self.mesh.points[e[1]]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (a.x + t * dx, a.y + t * dy);
            let d2 = (x - px) * (x - px) + (y - py) * (y - py);
            if d2 < best.0 {
                best = (d2, Weights {
                    vertices: [e[0], e[1], e[1]],
                    weights: [1.0 - t, t, 0.0],
                    inside: false,
                });
            }
        }
        best.1
    }

    /// Interpolation weights at an arbitrary point.
    pub fn locate(&self, x: f64, y: f64) -> Weights {
        for t in &self.mesh.triangles {
            let w = self.barycentric(t, x, y);
            if w.iter().all(|&l| l >= -1e-12) {
                return Weights {
                    vertices: *t,
                    weights: w,
                    inside: true,
                };
            }
        }
        self.nearest_hull(x, y)
    }

    /// Weights for every pixel center `(x0 + j, y0 + i)` of a `w x h` grid, row-major.
    pub fn locate_grid(&self, x0: f64, y0: f64, w: usize, h: usize) -> Vec<Weights> {
        let mut out: Vec<Option<Weights>> = vec![None; w * h];
        for t in &self.mesh.triangles {
            let [a, b, c] = t.map(|i| self.mesh.points[i]);
            let span = |lo: f64, hi: f64, origin: f64, n: usize| {
                let a = (lo - origin).floor().max(0.0);
                let b = (hi - origin).ceil().min(n as f64 - 1.0);
                (b >= a).then(|| (a as usize, b as usize))
            };
            let (Some((lo_x, hi_x)), Some((lo_y, hi_y))) = (
                span(a.x.min(b.x).min(c.x), a.x.max(b.x).max(c.x), x0, w),
                span(a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y), y0, h),
            ) else {
                continue;
            };
            for i in lo_y..=hi_y {
                for j in lo_x..=hi_x {
                    let slot = &mut out[i * w + j];
                    if slot.is_some() {
                        continue;
                    }
                    let wts = self.barycentric(t, x0 + j as f64, y0 + i as f64);
                    if wts.iter().all(|&l| l >= -1e-12) {
                        *slot = Some(Weights {
                            vertices: *t,
                            weights: wts,
                            inside: true,
                        });
                    }
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(k, slot)| {
                slot.unwrap_or_else(|| {
                    self.nearest_hull(x0 + (k % w) as f64, y0 + (k / w) as f64)
                })
            })
            .collect()
    }
}

/// Interpolates `values` anchored at `anchors` onto a `w x h` grid whose
/// pixel `(i, j)` sits at `(x0 + j, y0 + i)`.
pub fn interpolate_grid(
    anchors: &[Point2],
    values: &[f64],
    x0: f64,
    y0: f64,
    w: usize,
    h: usize,
) -> Result<Vec<f32>> {
    if anchors.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} anchors but {} values",
            anchors.len(),
            values.len()
        )));
    }
    let loc = Locator::new(anchors)?;
    Ok(loc
        .locate_grid(x0, y0, w, h)
        .iter()
        .map(|wt| wt.apply(values) as f32)
        .collect())
}
