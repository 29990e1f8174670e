use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dfas_core::augment::AugmentConfig;
use dfas_core::disparity::{interpolate_maps, sparse_disparity};
use dfas_core::eval::{
    ensemble_scores, format_report, read_scores_csv, report, roc_curve, threshold_search, write_report_csv,
    write_roc_csv, write_scores_csv, ScoreEntry, ScoreRow, ScoreSet, SearchResult, TripleEntry, TripleSet,
};
use dfas_core::landmarks::load_landmarks;
use dfas_core::model::{score_model, train_model, ModelKind, SampleRef, TrainedModel};
use dfas_core::synthrig::{generate_dataset, load_manifest, ManifestRow, Split};

use crate::config::RunConfig;
use crate::{parse_split, Column, EvalArgs, MapsArgs, ScoreArgs, SynthArgs, ThresholdArgs, TrainArgs};

const MANIFEST: &str = "manifest.jsonl";

fn manifest(data: &Path) -> Result<Vec<ManifestRow>> {
    let path = data.join(MANIFEST);
    load_manifest(&path).with_context(|| format!("loading {}", path.display()))
}

pub fn synth(mut cfg: RunConfig, a: SynthArgs, out: &Path) -> Result<()> {
    let s = &mut cfg.synth;
    if let Some(n) = a.n {
        s.n = n;
    }
    if let Some(mix) = a.mix {
        s.mix = mix;
    }
    if let Some(rig) = a.rig {
        s.rig = rig;
    }
    if let Some(v) = a.landmark_noise {
        s.landmark_noise = v;
    }
    if a.augment && s.augment.is_none() {
        s.augment = Some(AugmentConfig {
            seed: s.seed,
            ..AugmentConfig::default()
        });
    }
    s.validate()?;
    cfg.write(out)?;
    let rows = generate_dataset(&cfg.synth, out, cfg.jobs)?;
    println!("{} samples written to {}", rows.len(), out.display());
    Ok(())
}

/// Per-landmark disparities next to the dense maps, for plotting.
fn sparse_csv(pair: &dfas_core::landmarks::LandmarkPair) -> String {
    let sp = sparse_disparity(pair);
    let mut s = String::from("index,x,y,dx,dy\n");
    for (i, p) in sp.anchors.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{},{}", p.x, p.y, sp.dx[i], sp.dy[i]);
    }
    s
}

pub fn maps(cfg: RunConfig, a: MapsArgs, out: &Path) -> Result<()> {
    let inputs: Vec<(String, PathBuf)> = match &a.data {
        Some(data) => manifest(data)?
            .into_iter()
            .take(a.limit.unwrap_or(usize::MAX))
            .map(|r| (r.id, data.join(r.files.landmarks)))
            .collect(),
        None => a
            .landmarks
            .iter()
            .map(|p| {
                let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (id, p.clone())
            })
            .collect(),
    };
    ensure!(!inputs.is_empty(), "no landmarks given: pass --data or --landmarks");
    let dir = out.join("maps");
    fs::create_dir_all(&dir)?;
    cfg.write(out)?;
    for (id, path) in &inputs {
        let pair = load_landmarks(path).with_context(|| format!("landmarks of {id}"))?;
        let maps = interpolate_maps(&sparse_disparity(&pair), a.width, a.height)?;
        maps.save(dir.join(format!("{id}.dspm")))?;
        fs::write(dir.join(format!("{id}_sparse.csv")), sparse_csv(&pair))?;
    }
    println!("{} map pairs written to {}", inputs.len(), dir.display());
    Ok(())
}

fn history_csv(model: &TrainedModel) -> String {
    let history = match model {
        TrainedModel::Cnn(c) => &c.meta.history,
        TrainedModel::Pairs(p) => &p.history,
    };
    let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
    for h in history {
        let _ = writeln!(s, "{},{},{},{}", h.epoch, h.train_loss, h.val_loss, h.val_accuracy);
    }
    s
}

pub fn train(mut cfg: RunConfig, a: TrainArgs, out: &Path) -> Result<()> {
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.lr {
        t.lr = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if a.augment && t.augment.is_none() {
        t.augment = Some(AugmentConfig {
            seed: t.seed,
            ..AugmentConfig::default()
        });
    }
    t.validate()?;
    let rows = manifest(&a.data)?;
    let pick = |split| -> Vec<SampleRef> {
        rows.iter()
            .filter(|r| r.split == split)
            .map(|r| SampleRef::from_row(r, &a.data))
            .collect()
    };
    let (tr, val) = (pick(Split::Train), pick(Split::Val));
    log::info!("training {} on {} samples ({} validation)", a.model, tr.len(), val.len());
    cfg.write(out)?;
    let model = train_model(a.model, &tr, &val, &cfg.train)?;
    let path = out.join(format!("{}.model", a.model));
    model.save(&path)?;
    fs::write(out.join(format!("{}_history.csv", a.model)), history_csv(&model))?;
    println!("model saved to {}", path.display());
    Ok(())
}

pub fn score(cfg: RunConfig, a: ScoreArgs, out: &Path) -> Result<()> {
    ensure!(
        a.left.is_some() || a.right.is_some() || a.disp.is_some(),
        "give at least one of --left, --right, --disp"
    );
    let split = parse_split(&a.split)?;
    let samples: Vec<SampleRef> = manifest(&a.data)?
        .iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .map(|r| SampleRef::from_row(r, &a.data))
        .collect();
    ensure!(!samples.is_empty(), "no samples in split {}", a.split);
    let column = |path: &Option<PathBuf>, expect: &[ModelKind]| -> Result<Option<Vec<f64>>> {
        let Some(p) = path else { return Ok(None) };
        let model = TrainedModel::load(p).with_context(|| format!("loading model {}", p.display()))?;
        if !expect.contains(&model.kind()) {
            bail!("{} holds a {} model, expected one of {:?}", p.display(), model.kind(), expect);
        }
        Ok(Some(score_model(&model, &samples, a.batch_size)?))
    };
    use ModelKind::*;
    let left = column(&a.left, &[Left])?;
    let right = column(&a.right, &[Right])?;
    let disp = column(&a.disp, &[Disparity, Sensors8, Left, Right, Pairs])?;
    let rows: Vec<ScoreRow> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| ScoreRow {
            id: s.id.clone(),
            label: s.label,
            attack_kind: s.kind,
            score_left: left.as_ref().map(|v| v[i]),
            score_right: right.as_ref().map(|v| v[i]),
            score_disp: disp.as_ref().map(|v| v[i]),
        })
        .collect();
    cfg.write(out)?;
    let path = out.join("scores.csv");
    write_scores_csv(&path, &rows)?;
    println!("{} scores written to {}", rows.len(), path.display());
    Ok(())
}

fn pick(r: &ScoreRow, c: Column) -> Option<f64> {
    match c {
        Column::Left => r.score_left,
        Column::Right => r.score_right,
        Column::Disp => r.score_disp,
    }
}

fn column_set(rows: &[ScoreRow], c: Column) -> Result<ScoreSet> {
    let entries = rows
        .iter()
        .map(|r| {
            let score = pick(r, c).with_context(|| format!("sample {} has no {} score", r.id, c.name()))?;
            Ok(ScoreEntry {
                score,
                label: r.label,
                kind: r.attack_kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreSet::new(entries)?)
}

fn triples(rows: &[ScoreRow]) -> Result<TripleSet> {
    let entries = rows
        .iter()
        .map(|r| {
            let s = [r.score_left, r.score_right, r.score_disp];
            let [Some(l), Some(rt), Some(d)] = s else {
                bail!("sample {} lacks one of the three model scores", r.id);
            };
            Ok(TripleEntry {
                id: r.id.clone(),
                label: r.label,
                kind: r.attack_kind,
                scores: [l, rt, d],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TripleSet::new(entries)?)
}

/// Writes report text to stdout; a reader that went away (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn search_text(r: &SearchResult, target: f64) -> String {
    let [l, rt, d] = r.decision.thresholds;
    format!(
        "ensemble thresholds at FPR <= {}%: left {l:.3} right {rt:.3} disp {d:.3}{}\nensemble FNR {:.3}% FPR {:.3}%\n",
        target * 100.0,
        if r.fallback { " (fallback: no feasible grid point)" } else { "" },
        r.fnr * 100.0,
        r.fpr * 100.0
    )
}

pub fn eval(cfg: RunConfig, a: EvalArgs, out: Option<&Path>) -> Result<()> {
    let rows = read_scores_csv(&a.scores).with_context(|| format!("reading {}", a.scores.display()))?;
    ensure!(!rows.is_empty(), "{} holds no scores", a.scores.display());
    let targets = if a.fpr_targets.is_empty() { cfg.eval.fpr_targets.clone() } else { a.fpr_targets.clone() };
    let column = match a.column {
        Some(c) => c,
        None => [Column::Disp, Column::Left, Column::Right]
            .into_iter()
            .find(|&c| pick(&rows[0], c).is_some())
            .context("the score file has no score columns filled")?,
    };
    let set = column_set(&rows, column)?;
    let table = report(&set, &targets)?;
    let mut text = format!("model: {}\n{}", column.name(), format_report(&table));
    let all = table.last().expect("report ends with the All row");
    for c in &all.fnr_at {
        let _ = writeln!(
            text,
            "FNR@FPR={}%: {:.3}%{}",
            c.target * 100.0,
            c.fnr * 100.0,
            if c.attainable { "" } else { " (too few spoofs for this target)" }
        );
    }

    let report_dir = a.report_out.as_deref().or(out);
    if let Some(dir) = report_dir {
        fs::create_dir_all(dir)?;
        write_report_csv(dir.join("report.csv"), &table)?;
        write_roc_csv(dir.join("roc.csv"), &roc_curve(&set)?)?;
    }

    if a.search {
        let target = targets.first().copied().context("no FPR target")?;
        let trip = triples(&rows)?;
        let r = threshold_search(&trip, target)?;
        text += &search_text(&r, target);
        let ens = ensemble_scores(&trip, &r.decision);
        let ens_table = report(&ens, &targets)?;
        text += "ensemble (margin score):\n";
        text += &format_report(&ens_table);
        if let Some(dir) = report_dir {
            write_report_csv(dir.join("ensemble_report.csv"), &ens_table)?;
            fs::write(dir.join("thresholds.json"), search_json(&r))?;
        }
    }
    if let Some(dir) = report_dir {
        cfg.write(dir)?;
    }
    emit(&text)
}

fn search_json(r: &SearchResult) -> String {
    serde_json::to_string_pretty(r).expect("search result serializes") + "\n"
}

pub fn thresholds(cfg: RunConfig, a: ThresholdArgs, out: &Path) -> Result<()> {
    let rows = read_scores_csv(&a.scores).with_context(|| format!("reading {}", a.scores.display()))?;
    let r = threshold_search(&triples(&rows)?, a.fpr_target)?;
    cfg.write(out)?;
    fs::write(out.join("thresholds.json"), search_json(&r))?;
    emit(&search_text(&r, a.fpr_target))
}
