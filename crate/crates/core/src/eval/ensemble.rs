use serde::{Deserialize, Serialize};

use super::{ScoreEntry, ScoreSet};
use crate::error::{Error, Result};
use crate::labels::{Label, SceneKind};

/// Per-model thresholds in `[left, right, disparity]` order. A sample is
/// live iff every score reaches its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub thresholds: [f64; 3],
}

pub fn ensemble_predict(scores: [f64; 3], d: &EnsembleDecision) -> Label {
    if scores.iter().zip(&d.thresholds).all(|(s, t)| s >= t) {
        Label::Live
    } else {
        Label::Spoof
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleEntry {
    pub id: String,
    pub label: Label,
    pub kind: SceneKind,
    pub scores: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripleSet {
    entries: Vec<TripleEntry>,
}

impl TripleSet {
    pub fn new(entries: Vec<TripleEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| e.scores.iter().any(|s| !(0.0..=1.0).contains(s))) {
            return Err(Error::Config(format!("scores of {} outside [0, 1]", e.id)));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TripleEntry] {
        &self.entries
    }

    pub fn counts(&self) -> (usize, usize) {
        let live = self.entries.iter().filter(|e| e.label.is_live()).count();
        (live, self.entries.len() - live)
    }

    /// Single-model view of score column `m`.
    pub fn model(&self, m: usize) -> ScoreSet {
        ScoreSet {
            entries: self
                .entries
                .iter()
                .map(|e| ScoreEntry {
                    score: e.scores[m],
                    label: e.label,
                    kind: e.kind,
                })
                .collect(),
        }
    }
}

/// `(FNR, FPR)` of the ensemble rule.
pub fn ensemble_rates(set: &TripleSet, d: &EnsembleDecision) -> Result<(f64, f64)> {
    let (n_live, n_spoof) = set.counts();
    if n_live == 0 || n_spoof == 0 {
        return Err(Error::SingleClass);
    }
    let (mut fneg, mut fpos) = (0, 0);
    for e in &set.entries {
        let live = ensemble_predict(e.scores, d).is_live();
        match (e.label.is_live(), live) {
            (true, false) => fneg += 1,
            (false, true) => fpos += 1,
            _ => {}
        }
    }
    Ok((fneg as f64 / n_live as f64, fpos as f64 / n_spoof as f64))
}

/// One score per sample whose `>= 0.5` decision equals the ensemble rule:
/// `(min_m (s_m - t_m) + 1) / 2`.
pub fn ensemble_scores(set: &TripleSet, d: &EnsembleDecision) -> ScoreSet {
    ScoreSet {
        entries: set
            .entries
            .iter()
            .map(|e| {
                let margin = (0..3)
                    .map(|m| e.scores[m] - d.thresholds[m])
                    .fold(f64::INFINITY, f64::min);
                ScoreEntry {
                    score: ((margin + 1.0) / 2.0).clamp(0.0, 1.0),
                    label: e.label,
                    kind: e.kind,
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub decision: EnsembleDecision,
    pub fnr: f64,
    pub fpr: f64,
    pub stage1: EnsembleDecision,
    pub stage1_fnr: f64,
    pub stage1_fpr: f64,
    /// No grid point met the target; thresholds are all 1.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    fneg: usize,
    fpos: usize,
    t: [f64; 3],
}

impl Candidate {
    fn better_than(&self, o: &Candidate) -> bool {
        (self.fneg, self.fpos)
            .cmp(&(o.fneg, o.fpos))
            .then_with(|| {
                self.t
                    .iter()
                    .zip(&o.t)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|c| c.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .is_lt()
    }
}

/// Best feasible point of the Cartesian grid `axes` under the objective
/// (fewest false negatives, then fewest false positives, then smallest
/// thresholds lexicographically).
fn grid_best(set: &TripleSet, target: f64, axes: &[Vec<f64>; 3]) -> Option<Candidate> {
    let (_, n_spoof) = set.counts();
    // pass[m] = number of grid values on axis m that the score reaches.
    let pass: Vec<[usize; 3]> = set
        .entries
        .iter()
        .map(|e| {
            let mut p = [0; 3];
            for m in 0..3 {
                p[m] = axes[m].partition_point(|t| *t <= e.scores[m]);
            }
            p
        })
        .collect();
    let n3 = axes[2].len();
    let mut best: Option<Candidate> = None;
    let mut live_hist = vec![0usize; n3 + 1];
    let mut spoof_hist = vec![0usize; n3 + 1];
    let n_live = set.entries.len() - n_spoof;
    for (i1, &t1) in axes[0].iter().enumerate() {
        for (i2, &t2) in axes[1].iter().enumerate() {
            live_hist.fill(0);
            spoof_hist.fill(0);
            for (e, p) in set.entries.iter().zip(&pass) {
                if p[0] > i1 && p[1] > i2 {
                    if e.label.is_live() {
                        live_hist[p[2]] += 1;
                    } else {
                        spoof_hist[p[2]] += 1;
                    }
                }
            }
            // Sweep t3 upwards: predicted live = those with pass3 > i3.
            let mut live_ok: usize = live_hist.iter().sum();
            let mut spoof_ok: usize = spoof_hist.iter().sum();
            for (i3, &t3) in axes[2].iter().enumerate() {
                live_ok -= live_hist[i3];
                spoof_ok -= spoof_hist[i3];
                if spoof_ok as f64 / n_spoof as f64 > target {
                    continue;
                }
                let c = Candidate {
                    fneg: n_live - live_ok,
                    fpos: spoof_ok,
                    t: [t1, t2, t3],
                };
                if best.is_none_or(|b| c.better_than(&b)) {
                    best = Some(c);
                }
            }
        }
    }
    best
}

fn axis(lo: i64, hi: i64) -> Vec<f64> {
    (lo.max(0)..=hi.min(200)).map(|k| k as f64 / 200.0).collect()
}

/// Coarse search on a 0.05 grid over `[0, 1]^3`, then a 0.005 grid within
/// ±0.05 of the coarse winner. Objective: minimize ensemble FNR subject to
/// FPR <= `target`.
pub fn threshold_search(set: &TripleSet, target: f64) -> Result<SearchResult> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!("FPR target {target} outside (0, 1)")));
    }
    let (n_live, n_spoof) = set.counts();
    if n_live == 0 || n_spoof == 0 {
        return Err(Error::SingleClass);
    }
    let coarse: Vec<f64> = (0..=20).map(|i| (10 * i) as f64 / 200.0).collect();
    let rates = |c: &Candidate| (c.fneg as f64 / n_live as f64, c.fpos as f64 / n_spoof as f64);
    let Some(s1) = grid_best(set, target, &[coarse.clone(), coarse.clone(), coarse]) else {
        let d = EnsembleDecision { thresholds: [1.0; 3] };
        let (fnr, fpr) = ensemble_rates(set, &d)?;
        return Ok(SearchResult {
            decision: d,
            fnr,
            fpr,
            stage1: d,
            stage1_fnr: fnr,
            stage1_fpr: fpr,
            fallback: true,
        });
    };
    let k: Vec<i64> = s1.t.iter().map(|t| (t * 200.0).round() as i64).collect();
    let fine = [axis(k[0] - 10, k[0] + 10), axis(k[1] - 10, k[1] + 10), axis(k[2] - 10, k[2] + 10)];
    let s2 = grid_best(set, target, &fine).expect("the coarse winner lies on the fine grid");
    let (fnr, fpr) = rates(&s2);
    let (stage1_fnr, stage1_fpr) = rates(&s1);
    Ok(SearchResult {
        decision: EnsembleDecision { thresholds: s2.t },
        fnr,
        fpr,
        stage1: EnsembleDecision { thresholds: s1.t },
        stage1_fnr,
        stage1_fpr,
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(label: Label, scores: [f64; 3]) -> TripleEntry {
        TripleEntry {
            id: String::new(),
            label,
            kind: if label.is_live() { SceneKind::Live } else { SceneKind::Plane },
            scores,
        }
    }

    #[test]
    fn or_rule() {
        let d = EnsembleDecision { thresholds: [0.5, 0.6, 1.0] };
        assert_eq!(ensemble_predict([1.0; 3], &d), Label::Live);
        assert_eq!(ensemble_predict([1.0, 0.59, 1.0], &d), Label::Spoof);
    }

    #[test]
    fn separable_triples_reach_zero_fnr() {
        let mut e = Vec::new();
        for i in 0..50 {
            let v = 0.7 + i as f64 * 0.005;
            e.push(entry(Label::Live, [v, v, v]));
            e.push(entry(Label::Spoof, [0.6 - v / 2.0, 0.9, 0.2]));
        }
        let r = threshold_search(&TripleSet::new(e).unwrap(), 0.01).unwrap();
        assert_eq!((r.fnr, r.fpr), (0.0, 0.0));
        assert!(!r.fallback);
    }

    #[test]
    fn ensemble_margin_score_matches_rule() {
        let d = EnsembleDecision { thresholds: [0.3, 0.45, 0.7] };
        let set = TripleSet::new(vec![
            entry(Label::Live, [0.3, 0.9, 0.7]),
            entry(Label::Spoof, [0.29, 0.9, 0.9]),
        ])
        .unwrap();
        let s = ensemble_scores(&set, &d);
        assert!(s.entries()[0].score >= 0.5);
        assert!(s.entries()[1].score < 0.5);
    }
}
