//! Brute-force oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use dfas_core::eval::{ScoreEntry, ScoreSet, TripleEntry, TripleSet};
use dfas_core::labels::{Label, SceneKind};
use dfas_core::landmarks::Point2;
use rand::Rng;

/// `(fnr, fpr)` by direct counting at threshold `t`.
pub fn count_rates(set: &ScoreSet, t: f64) -> (f64, f64) {
    let (mut nl, mut ns, mut fneg, mut fpos) = (0, 0, 0, 0);
    for e in set.entries() {
        if e.label.is_live() {
            nl += 1;
            if e.score < t {
                fneg += 1;
            }
        } else {
            ns += 1;
            if e.score >= t {
                fpos += 1;
            }
        }
    }
    (fneg as f64 / nl as f64, fpos as f64 / ns as f64)
}

/// Scores on the 1e-5 lattice, so the 1e5-step grid hits every operating point.
pub fn random_set(rng: &mut impl Rng, n: usize, live_frac: f64, shift: f64) -> ScoreSet {
    let mut e = Vec::with_capacity(n);
    for i in 0..n {
        let live = (i as f64) < live_frac * n as f64;
        let base: f64 = rng.random::<f64>() * (1.0 - shift) + if live { shift } else { 0.0 };
        let score = (base * 1e5).round() / 1e5;
        e.push(ScoreEntry {
            score,
            label: if live { Label::Live } else { Label::Spoof },
            kind: if live { SceneKind::Live } else { SceneKind::Plane },
        });
    }
    ScoreSet::new(e).unwrap()
}

/// Midpoint of FNR and FPR at the grid threshold minimizing |FNR - FPR|.
pub fn grid_eer(set: &ScoreSet, steps: usize) -> f64 {
    // Count by histogram over the grid cells so 1e5 thresholds stay cheap.
    let mut live_at = vec![0usize; steps + 2];
    let mut spoof_at = vec![0usize; steps + 2];
    let (mut nl, mut ns) = (0, 0);
    for e in set.entries() {
        // First grid index whose threshold exceeds the score.
        let at = |k: usize| k as f64 / steps as f64;
        let mut k = (e.score * steps as f64).floor().max(0.0) as usize;
        while k <= steps && at(k) <= e.score {
            k += 1;
        }
        while k > 0 && at(k - 1) > e.score {
            k -= 1;
        }
        if e.label.is_live() {
            live_at[k] += 1;
            nl += 1;
        } else {
            spoof_at[k] += 1;
            ns += 1;
        }
    }
    let (mut live_below, mut spoof_below) = (0usize, 0usize);
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        live_below += live_at[k];
        spoof_below += spoof_at[k];
        let fnr = live_below as f64 / nl as f64;
        let fpr = (ns - spoof_below) as f64 / ns as f64;
        let gap = (fnr - fpr).abs();
        if gap < best.0 {
            best = (gap, (fnr + fpr) / 2.0);
        }
    }
    best.1
}

/// Lowest FNR over every score (and +inf) used as threshold with FPR <= target.
pub fn brute_fnr_at_fpr(set: &ScoreSet, target: f64) -> f64 {
    set.entries()
        .iter()
        .map(|e| e.score)
        .chain([f64::INFINITY])
        .map(|t| count_rates(set, t))
        .filter(|&(_, fpr)| fpr <= target)
        .map(|(fnr, _)| fnr)
        .fold(f64::INFINITY, f64::min)
}

/// `(threshold, fnr, fpr)` counted afresh at -inf, every distinct score and +inf.
pub fn brute_rates(set: &ScoreSet) -> Vec<(f64, f64, f64)> {
    let mut ts: Vec<f64> = set.entries().iter().map(|e| e.score).collect();
    ts.extend([f64::NEG_INFINITY, f64::INFINITY]);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.into_iter()
        .map(|t| {
            let (fnr, fpr) = count_rates(set, t);
            (t, fnr, fpr)
        })
        .collect()
}

/// Linear interpolation of FNR at the first sign change of FNR - FPR.
pub fn brute_eer(rates: &[(f64, f64, f64)]) -> f64 {
    let i = rates.iter().position(|r| r.1 >= r.2).unwrap();
    let (_, fnr1, fpr1) = rates[i];
    if i == 0 || fnr1 == fpr1 {
        return fnr1;
    }
    let (_, fnr0, fpr0) = rates[i - 1];
    let (a, b) = (fpr0 - fnr0, fnr1 - fpr1);
    fnr0 + (fnr1 - fnr0) * a / (a + b)
}

/// Lowest FNR with FPR <= target, for several targets over the same rates.
pub fn brute_fnr_at_fprs(rates: &[(f64, f64, f64)], targets: &[f64]) -> Vec<f64> {
    targets
        .iter()
        .map(|&target| {
            rates
                .iter()
                .filter(|r| r.2 <= target)
                .map(|r| r.1)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn random_triples(rng: &mut impl Rng, n: usize) -> TripleSet {
    let mut e = Vec::with_capacity(n);
    for i in 0..n {
        let live = i % 2 == 0 || rng.random_bool(0.2);
        let mut scores = [0.0; 3];
        for s in &mut scores {
            let mu = if live { rng.random_range(0.45..0.8) } else { rng.random_range(0.2..0.55) };
            *s = (mu + rng.random_range(-0.2..0.2f64)).clamp(0.0, 1.0);
        }
        e.push(TripleEntry {
            id: format!("t{i}"),
            label: if live { Label::Live } else { Label::Spoof },
            kind: if live { SceneKind::Live } else { SceneKind::Cylinder },
            scores,
        });
    }
    TripleSet::new(e).unwrap()
}

/// Ensemble counts `(false negatives, false positives)` by direct evaluation.
pub fn ensemble_counts(set: &TripleSet, t: [f64; 3]) -> (usize, usize) {
    let (mut fneg, mut fpos) = (0, 0);
    for e in set.entries() {
        let live = (0..3).all(|m| e.scores[m] >= t[m]);
        if e.label.is_live() && !live {
            fneg += 1;
        }
        if !e.label.is_live() && live {
            fpos += 1;
        }
    }
    (fneg, fpos)
}

/// Minimum ensemble FNR with FPR <= target over the full `step` grid.
/// For each (t1, t2) the best t3 is found by scanning the passing samples'
/// third scores in descending order.
pub fn fine_oracle_fnr(set: &TripleSet, target: f64, steps: usize) -> f64 {
    let (n_live, n_spoof) = set.counts();
    let max_fpos = (target * n_spoof as f64 + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut best = n_live;
    for &t1 in &grid {
        for &t2 in &grid {
            let mut pass: Vec<(f64, bool)> = set
                .entries()
                .iter()
                .filter(|e| e.scores[0] >= t1 && e.scores[1] >= t2)
                .map(|e| (e.scores[2], e.label.is_live()))
                .collect();
            let all_live = pass.iter().filter(|p| p.1).count();
            if n_live - all_live >= best {
                continue;
            }
            pass.sort_by(|a, b| b.0.total_cmp(&a.0));
            // Lower t3 step by step; admitting all samples with s3 >= t3.
            let mut j = 0;
            let (mut live_ok, mut spoof_ok) = (0, 0);
            for &t3 in grid.iter().rev() {
                while j < pass.len() && pass[j].0 >= t3 {
                    if pass[j].1 {
                        live_ok += 1;
                    } else {
                        spoof_ok += 1;
                    }
                    j += 1;
                }
                if spoof_ok > max_fpos {
                    break;
                }
                best = best.min(n_live - live_ok);
            }
        }
    }
    best as f64 / n_live as f64
}

/// Triples resembling trained scorers: live scores ~ Beta(a, 1), spoof
/// scores ~ Beta(1, a), independent per model, alternating labels.
pub fn model_like_triples(rng: &mut impl Rng, n: usize, a: f64) -> TripleSet {
    use rand_distr::{Beta, Distribution};
    let live_d = Beta::new(a, 1.0).unwrap();
    let spoof_d = Beta::new(1.0, a).unwrap();
    let e = (0..n)
        .map(|i| {
            let live = i % 2 == 0;
            let mut scores = [0.0; 3];
            for s in &mut scores {
                *s = if live { live_d.sample(rng) } else { spoof_d.sample(rng) };
            }
            TripleEntry {
                id: format!("t{i}"),
                label: if live { Label::Live } else { Label::Spoof },
                kind: if live { SceneKind::Live } else { SceneKind::Plane },
                scores,
            }
        })
        .collect();
    TripleSet::new(e).unwrap()
}

fn circumcircle_contains(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    // Sign of the lifted determinant, corrected for the triangle's orientation.
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    let orient = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    det * orient.signum() > 0.0
}

/// Delaunay triangles straight from the definition: every triple whose
/// circumcircle holds no other point. Needs points in general position.
pub fn brute_delaunay(p: &[Point2]) -> Vec<[usize; 3]> {
    let n = p.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let orient = (p[j].x - p[i].x) * (p[k].y - p[i].y) - (p[j].y - p[i].y) * (p[k].x - p[i].x);
                if orient.abs() < 1e-12 {
                    continue;
                }
                if (0..n).all(|m| m == i || m == j || m == k || !circumcircle_contains(p[i], p[j], p[k], p[m])) {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

pub fn barycentric(a: Point2, b: Point2, c: Point2, x: f64, y: f64) -> [f64; 3] {
    let det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
    let l0 = ((b.y - c.y) * (x - c.x) + (c.x - b.x) * (y - c.y)) / det;
    let l1 = ((c.y - a.y) * (x - c.x) + (a.x - c.x) * (y - c.y)) / det;
    [l0, l1, 1.0 - l0 - l1]
}

/// Counter-clockwise convex hull (monotone chain).
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Strictly inside the hull by at least `margin` pixels.
pub fn inside_hull(hull: &[Point2], x: f64, y: f64, margin: f64) -> bool {
    (0..hull.len()).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let len = a.dist(&b);
        ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x)) / len > margin
    })
}

/// Least-squares plane `v = a x + b y + c` through `(x, y, v)` samples;
/// returns the coefficients and the largest absolute residual.
pub fn affine_fit(samples: &[(f64, f64, f64)]) -> ([f64; 3], f64) {
    let n = samples.len() as f64;
    let (mx, my) = samples.iter().fold((0.0, 0.0), |(sx, sy), s| (sx + s.0 / n, sy + s.1 / n));
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for &(x, y, v) in samples {
        let row = [x - mx, y - my, 1.0];
        for i in 0..3 {
            r[i] += row[i] * v;
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
        }
    }
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    let mut coef = [0.0; 3];
    for (k, c) in coef.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = r[i];
        }
        *c = det3(&mk) / d;
    }
    let worst = samples
        .iter()
        .map(|&(x, y, v)| (coef[0] * (x - mx) + coef[1] * (y - my) + coef[2] - v).abs())
        .fold(0.0, f64::max);
    ([coef[0], coef[1], coef[2] - coef[0] * mx - coef[1] * my], worst)
}
