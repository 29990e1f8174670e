//! Error rates with live as the positive class: a sample is predicted live
//! iff its score is at least the threshold.

mod ensemble;
mod report;

use serde::{Deserialize, Serialize};

pub use ensemble::{
    ensemble_predict, ensemble_rates, ensemble_scores, threshold_search, EnsembleDecision, SearchResult,
    TripleEntry, TripleSet,
};
pub use report::{
    format_report, read_report_csv, read_roc_csv, read_scores_csv, report, write_report_csv, write_roc_csv,
    write_scores_csv, ReportRow, ScoreRow, DEFAULT_FPR_TARGETS,
};

use crate::error::{Error, Result};
use crate::labels::{Label, SceneKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub score: f64,
    pub label: Label,
    pub kind: SceneKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !(0.0..=1.0).contains(&e.score)) {
            return Err(Error::Config(format!("score {} outside [0, 1]", e.score)));
        }
        Ok(Self { entries })
    }

    /// Entries labeled by kind (`Live` kinds are live, everything else spoof).
    pub fn from_scores(scores: &[f64], kinds: &[SceneKind]) -> Result<Self> {
        if scores.len() != kinds.len() {
            return Err(Error::Dimension("scores and kinds differ in length".into()));
        }
        Self::new(
            scores
                .iter()
                .zip(kinds)
                .map(|(&score, &kind)| ScoreEntry {
                    score,
                    label: kind.label(),
                    kind,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        let live = self.entries.iter().filter(|e| e.label.is_live()).count();
        (live, self.entries.len() - live)
    }

    fn require_both(&self) -> Result<(usize, usize)> {
        let (live, spoof) = self.counts();
        if self.entries.is_empty() {
            return Err(Error::Empty("score set"));
        }
        if live == 0 || spoof == 0 {
            return Err(Error::SingleClass);
        }
        Ok((live, spoof))
    }

    /// Live samples plus the spoofs of one attack kind.
    pub fn restricted_to(&self, kind: SceneKind) -> ScoreSet {
        ScoreSet {
            entries: self
                .entries
                .iter()
                .filter(|e| e.label.is_live() || e.kind == kind)
                .copied()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fnr: f64,
    pub fpr: f64,
}

/// Operating points at `-inf`, every distinct score (ascending) and `+inf`.
pub fn roc_curve(set: &ScoreSet) -> Result<Vec<RocPoint>> {
    let (n_live, n_spoof) = set.require_both()?;
    let mut sorted: Vec<(f64, bool)> = set.entries.iter().map(|e| (e.score, e.label.is_live())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(sorted.len() + 2);
    out.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fnr: 0.0,
        fpr: 1.0,
    });
    // Counts of samples strictly below the current threshold.
    let (mut live_below, mut spoof_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        out.push(RocPoint {
            threshold: t,
            fnr: live_below as f64 / n_live as f64,
            fpr: (n_spoof - spoof_below) as f64 / n_spoof as f64,
        });
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                live_below += 1;
            } else {
                spoof_below += 1;
            }
            i += 1;
        }
    }
    out.push(RocPoint {
        threshold: f64::INFINITY,
        fnr: 1.0,
        fpr: 0.0,
    });
    Ok(out)
}

/// Rate where FNR meets FPR, interpolating linearly between the two
/// operating points that bracket the crossing.
pub fn eer(set: &ScoreSet) -> Result<f64> {
    Ok(eer_from_roc(&roc_curve(set)?))
}

pub fn eer_from_roc(roc: &[RocPoint]) -> f64 {
    let i = roc
        .iter()
        .position(|p| p.fnr >= p.fpr)
        .expect("the +inf point always has fnr >= fpr");
    let p = roc[i];
    if p.fnr == p.fpr || i == 0 {
        return p.fnr;
    }
    let q = roc[i - 1];
    let d0 = q.fpr - q.fnr;
    let d1 = p.fnr - p.fpr;
    let lambda = d0 / (d0 + d1);
    q.fnr + lambda * (p.fnr - q.fnr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnrAtFpr {
    pub fnr: f64,
    pub fpr: f64,
    pub threshold: f64,
    /// False when there are too few spoof samples (`n_spoof * target < 1`)
    /// for any nonzero FPR to fit under the target; the reported point is
    /// then the zero-FPR boundary.
    pub attainable: bool,
}

/// Lowest FNR over thresholds whose FPR does not exceed `target`.
pub fn fnr_at_fpr(set: &ScoreSet, target: f64) -> Result<FnrAtFpr> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!("FPR target {target} outside (0, 1)")));
    }
    let (_, n_spoof) = set.require_both()?;
    let roc = roc_curve(set)?;
    // FNR is non-decreasing in the threshold, so the first feasible point wins.
    let p = roc
        .iter()
        .find(|p| p.fpr <= target)
        .expect("the +inf point has zero FPR");
    Ok(FnrAtFpr {
        fnr: p.fnr,
        fpr: p.fpr,
        threshold: p.threshold,
        attainable: n_spoof as f64 * target >= 1.0,
    })
}
