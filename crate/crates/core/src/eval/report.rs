use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{eer, fnr_at_fpr, RocPoint, ScoreSet};
use crate::error::{Error, Result};
use crate::labels::{Label, SceneKind};

pub const DEFAULT_FPR_TARGETS: [f64; 3] = [0.05, 0.03, 0.01];

/// One line of the score file. Missing model scores are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub label: Label,
    pub attack_kind: SceneKind,
    pub score_left: Option<f64>,
    pub score_right: Option<f64>,
    pub score_disp: Option<f64>,
}

pub fn write_scores_csv(path: impl AsRef<Path>, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let expected = ["id", "label", "attack_kind", "score_left", "score_right", "score_disp"];
    let headers = r.headers()?.clone();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Config(format!(
            "score file header {:?} differs from {}",
            headers.iter().collect::<Vec<_>>(),
            expected.join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?)
}

pub fn write_roc_csv(path: impl AsRef<Path>, roc: &[RocPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in roc {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_roc_csv(path: impl AsRef<Path>) -> Result<Vec<RocPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<RocPoint>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnrCell {
    pub target: f64,
    pub fnr: f64,
    pub attainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Attack kind, or `All`.
    pub group: String,
    pub n_live: usize,
    pub n_spoof: usize,
    /// NaN when the group lacks a class.
    pub eer: f64,
    pub fnr_at: Vec<FnrCell>,
}

fn row(group: String, set: &ScoreSet, targets: &[f64]) -> Result<ReportRow> {
    let (n_live, n_spoof) = set.counts();
    let both = n_live > 0 && n_spoof > 0;
    let eer = if both { eer(set)? } else { f64::NAN };
    let fnr_at = targets
        .iter()
        .map(|&t| {
            if both {
                let r = fnr_at_fpr(set, t)?;
                Ok(FnrCell {
                    target: t,
                    fnr: r.fnr,
                    attainable: r.attainable,
                })
            } else {
                Ok(FnrCell {
                    target: t,
                    fnr: f64::NAN,
                    attainable: false,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportRow {
        group,
        n_live,
        n_spoof,
        eer,
        fnr_at,
    })
}

/// One row per attack kind present (its spoofs against all live samples),
/// then the overall `All` row.
pub fn report(set: &ScoreSet, targets: &[f64]) -> Result<Vec<ReportRow>> {
    let mut kinds: Vec<SceneKind> = set
        .entries
        .iter()
        .filter(|e| !e.label.is_live())
        .map(|e| e.kind)
        .collect();
    kinds.sort();
    kinds.dedup();
    let mut rows = kinds
        .into_iter()
        .map(|k| row(k.to_string(), &set.restricted_to(k), targets))
        .collect::<Result<Vec<_>>>()?;
    rows.push(row("All".into(), set, targets)?);
    Ok(rows)
}

fn header(targets: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["group", "n_live", "n_spoof", "eer"].map(String::from).to_vec();
    for t in targets {
        h.push(format!("fnr@fpr={t}"));
        h.push(format!("attainable@fpr={t}"));
    }
    h
}

pub fn write_report_csv(path: impl AsRef<Path>, rows: &[ReportRow]) -> Result<()> {
    let targets: Vec<f64> = rows.first().map(|r| r.fnr_at.iter().map(|c| c.target).collect()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header(&targets))?;
    for r in rows {
        let mut rec = vec![r.group.clone(), r.n_live.to_string(), r.n_spoof.to_string(), r.eer.to_string()];
        for c in &r.fnr_at {
            rec.push(c.fnr.to_string());
            rec.push(c.attainable.to_string());
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let targets: Vec<f64> = headers
        .iter()
        .filter_map(|h| h.strip_prefix("fnr@fpr="))
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad report header: {e}")))?;
    let bad = |line: usize, what: &str| Error::Config(format!("report line {line}: bad {what}"));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(line, "field count"));
        let mut fnr_at = Vec::new();
        for (j, &target) in targets.iter().enumerate() {
            fnr_at.push(FnrCell {
                target,
                fnr: field(4 + 2 * j)?.parse().map_err(|_| bad(line, "fnr"))?,
                attainable: field(5 + 2 * j)?.parse().map_err(|_| bad(line, "flag"))?,
            });
        }
        rows.push(ReportRow {
            group: field(0)?.to_string(),
            n_live: field(1)?.parse().map_err(|_| bad(line, "count"))?,
            n_spoof: field(2)?.parse().map_err(|_| bad(line, "count"))?,
            eer: field(3)?.parse().map_err(|_| bad(line, "eer"))?,
            fnr_at,
        });
    }
    Ok(rows)
}

/// Fixed-width table; `*` marks an FPR target too small for the spoof count.
pub fn format_report(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<14} {:>7} {:>7} {:>8}", "group", "live", "spoof", "EER%");
    if let Some(r) = rows.first() {
        for c in &r.fnr_at {
            let _ = write!(out, " {:>13}", format!("FNR%@FPR{}%", c.target * 100.0));
        }
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<14} {:>7} {:>7} {:>8.3}", r.group, r.n_live, r.n_spoof, r.eer * 100.0);
        for c in &r.fnr_at {
            let mark = if c.attainable { " " } else { "*" };
            let _ = write!(out, " {:>12.3}{mark}", c.fnr * 100.0);
        }
        out.push('\n');
    }
    out
}
