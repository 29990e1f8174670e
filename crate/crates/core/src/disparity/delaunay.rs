//! Bowyer-Watson Delaunay triangulation with exact orientation and
//! in-circle predicates.
//!
//! Points are inserted in lexicographic `(x, y)` order and cocircular
//! configurations never flip an existing triangle, so the mesh depends only
//! on the point set, not on the order the caller lists it in.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};
use crate::landmarks::Point2;

/// Triangle mesh over caller-indexed points. Triangles are positively
/// oriented (`orient2d > 0`) and index into the caller's point slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub points: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Edges that belong to exactly one triangle, oriented as in that triangle.
    pub fn hull_edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<([usize; 2], [usize; 2])> = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.push(([a.min(b), a.max(b)], [a, b]));
            }
        }
        edges.sort();
        let mut out = Vec::new();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 {
                j += 1;
            }
            if j - i == 1 {
                out.push(edges[i].1);
            }
            i = j;
        }
        out
    }
}

#[inline]
fn coord(p: Point2) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

pub fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    orient2d(coord(a), coord(b), coord(c))
}

/// Positive iff `d` is strictly inside the circumcircle of positively oriented `a, b, c`.
pub fn in_circumcircle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    incircle(coord(a), coord(b), coord(c), coord(d))
}

pub fn triangulate(points: &[Point2]) -> Result<TriMesh> {
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Degenerate("non-finite anchor".into()));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.x.total_cmp(&pb.x)
            .then(pa.y.total_cmp(&pb.y))
            .then(a.cmp(&b))
    });
    order.dedup_by(|b, a| points[*a] == points[*b]);
    if order.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 distinct anchors, got {}",
            order.len()
        )));
    }
    let p0 = points[order[0]];
    let p1 = points[order[1]];
    if order[2..].iter().all(|&i| orientation(p0, p1, points[i]) == 0.0) {
        return Err(Error::Degenerate("all anchors are collinear".into()));
    }

    // Working vertex list: the unique points followed by three super vertices.
    let mut verts: Vec<Point2> = order.iter().map(|&i| points[i]).collect();
    let n = verts.len();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &verts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    // Hull triangles with circumradius beyond ~1e6 extents would be lost; such
    // slivers are numerically collinear anyway.
    let s = (x1 - x0).max(y1 - y0).max(1.0) * 1.0e6;
    verts.push(Point2::new(cx - 2.0 * s, cy - s));
    verts.push(Point2::new(cx + 2.0 * s, cy - s));
    verts.push(Point2::new(cx, cy + 2.0 * s));
    let mut tris: Vec<[usize; 3]> = vec![oriented([n, n + 1, n + 2], &verts)];

    let mut edges: Vec<[usize; 2]> = Vec::new();
    for p in 0..n {
        let pt = verts[p];
        edges.clear();
        let mut kept = Vec::with_capacity(tris.len() + 2);
        for t in tris.drain(..) {
            if in_circumcircle(verts[t[0]], verts[t[1]], verts[t[2]], pt) > 0.0 {
                for k in 0..3 {
                    edges.push([t[k], t[(k + 1) % 3]]);
                }
            } else {
                kept.push(t);
            }
        }
        tris = kept;
        // Boundary of the cavity: edges not shared by two removed triangles.
        for (i, e) in edges.iter().enumerate() {
            let shared = edges
                .iter()
                .enumerate()
                .any(|(j, f)| i != j && f[0] == e[1] && f[1] == e[0]);
            if !shared {
                tris.push([e[0], e[1], p]);
            }
        }
    }

    let mut triangles: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .map(|t| {
            let t = [order[t[0]], order[t[1]], order[t[2]]];
            let k = (0..3).min_by_key(|&k| t[k]).unwrap();
            [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
        })
        .collect();
    if triangles.is_empty() {
        return Err(Error::Degenerate("triangulation produced no triangles".into()));
    }
    triangles.sort_unstable();
    Ok(TriMesh {
        points: points.to_vec(),
        triangles,
    })
}

fn oriented(t: [usize; 3], verts: &[Point2]) -> [usize; 3] {
    if orientation(verts[t[0]], verts[t[1]], verts[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}
