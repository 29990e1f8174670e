//! Python bindings: Bayer ingest, landmark disparity maps, the planarity and
//! pairs baselines, evidential scoring, metrics and the dataset/training
//! drivers. Images cross the boundary as flat lists in channel-major order.

use std::path::PathBuf;

use dfas_core::disparity::{interpolate_maps, sparse_disparity, triangulate};
use dfas_core::eval::{self, ScoreEntry, ScoreSet, TripleEntry, TripleSet};
use dfas_core::ingest::{repack_bayer, unpack_bayer, RawBayerFrame, SensorId};
use dfas_core::labels::{Label, SceneKind};
use dfas_core::landmarks::{load_landmarks, LandmarkSet, Point2};
use dfas_core::model::{self as m, ModelKind, SampleRef, TrainConfig, TrainedModel};
use dfas_core::synthrig::{generate_dataset, load_manifest, DatasetConfig, Split};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sensor(name: &str) -> PyResult<SensorId> {
    match name {
        "left" => Ok(SensorId::Left),
        "right" => Ok(SensorId::Right),
        _ => Err(err(format!("sensor must be 'left' or 'right', got {name:?}"))),
    }
}

/// Four-channel half-resolution sensor image (B, G1, G2, R).
#[pyclass(name = "SensorImage", module = "dfas")]
struct PySensorImage {
    inner: dfas_core::ingest::SensorImage,
}

#[pymethods]
impl PySensorImage {
    /// Repacks a row-major raw Bayer frame.
    #[staticmethod]
    #[pyo3(signature = (width, height, data, sensor_id = "left"))]
    fn from_raw(width: usize, height: usize, data: Vec<u16>, sensor_id: &str) -> PyResult<Self> {
        let frame = RawBayerFrame::new(width, height, data).map_err(err)?;
        Ok(Self {
            inner: repack_bayer(&frame, sensor(sensor_id)?),
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn channel(&self, c: usize) -> PyResult<Vec<f32>> {
        if c >= 4 {
            return Err(err(format!("channel {c} out of range 0..4")));
        }
        Ok(self.inner.planes.plane(c).to_vec())
    }

    /// Inverse repack back to the raw frame data.
    fn to_raw(&self) -> PyResult<Vec<u16>> {
        Ok(unpack_bayer(&self.inner).map_err(err)?.data().to_vec())
    }
}

/// Dense horizontal and vertical disparity maps.
#[pyclass(name = "DisparityMaps", module = "dfas")]
struct PyDisparityMaps {
    inner: dfas_core::disparity::DisparityMaps,
}

#[pymethods]
impl PyDisparityMaps {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dfas_core::disparity::DisparityMaps::load(path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn map_x(&self) -> Vec<f32> {
        self.inner.map_x().to_vec()
    }

    fn map_y(&self) -> Vec<f32> {
        self.inner.map_y().to_vec()
    }

    fn at(&self, x: usize, y: usize) -> PyResult<(f32, f32)> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(err(format!("pixel ({x}, {y}) outside the map")));
        }
        Ok(self.inner.at(x, y))
    }
}

/// 45 corresponding landmarks in each sensor.
#[pyclass(name = "LandmarkPair", module = "dfas")]
struct PyLandmarkPair {
    inner: dfas_core::landmarks::LandmarkPair,
}

fn points(v: Vec<(f64, f64)>) -> Vec<Point2> {
    v.into_iter().map(|(x, y)| Point2::new(x, y)).collect()
}

#[pymethods]
impl PyLandmarkPair {
    #[new]
    fn new(left: Vec<(f64, f64)>, right: Vec<(f64, f64)>) -> PyResult<Self> {
        let l = LandmarkSet::with_bounding_rect(SensorId::Left, points(left)).map_err(err)?;
        let r = LandmarkSet::with_bounding_rect(SensorId::Right, points(right)).map_err(err)?;
        Ok(Self {
            inner: dfas_core::landmarks::LandmarkPair::new(l, r).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_landmarks(path).map_err(err)?,
        })
    }

    fn left(&self) -> Vec<(f64, f64)> {
        self.inner.left.points().iter().map(|p| (p.x, p.y)).collect()
    }

    fn right(&self) -> Vec<(f64, f64)> {
        self.inner.right.points().iter().map(|p| (p.x, p.y)).collect()
    }

    /// Per-landmark `(dx, dy)`, right minus left.
    fn sparse_disparity(&self) -> (Vec<f64>, Vec<f64>) {
        let s = sparse_disparity(&self.inner);
        (s.dx, s.dy)
    }

    fn maps(&self, width: usize, height: usize) -> PyResult<PyDisparityMaps> {
        Ok(PyDisparityMaps {
            inner: interpolate_maps(&sparse_disparity(&self.inner), width, height).map_err(err)?,
        })
    }

    /// 2025 cross-sensor landmark distances, row-major.
    fn feature_pairs(&self) -> Vec<f64> {
        m::feature_pairs(&self.inner)
    }

    /// `(residual_rms, normalized_residual, score)` of the affine fit to map_x.
    #[pyo3(signature = (tau = m::DEFAULT_TAU))]
    fn planarity(&self, tau: f64) -> PyResult<(f64, f64, f64)> {
        let p = m::pair_planarity(&self.inner, tau).map_err(err)?;
        Ok((p.residual_rms, p.normalized_residual, p.score))
    }
}

/// Delaunay triangles (vertex indices) of 2D points.
#[pyfunction]
fn delaunay(pts: Vec<(f64, f64)>) -> PyResult<Vec<(usize, usize, usize)>> {
    let mesh = triangulate(&points(pts)).map_err(err)?;
    Ok(mesh.triangles.iter().map(|t| (t[0], t[1], t[2])).collect())
}

fn label(live: bool) -> Label {
    if live {
        Label::Live
    } else {
        Label::Spoof
    }
}

fn score_set(scores: Vec<f64>, live: Vec<bool>) -> PyResult<ScoreSet> {
    if scores.len() != live.len() {
        return Err(err("scores and labels differ in length"));
    }
    let entries = scores
        .into_iter()
        .zip(live)
        .map(|(score, l)| ScoreEntry {
            score,
            label: label(l),
            kind: if l { SceneKind::Live } else { SceneKind::Plane },
        })
        .collect();
    ScoreSet::new(entries).map_err(err)
}

/// `(loss, [d/d e_live, d/d e_spoof])` of the evidential loss.
#[pyfunction]
#[pyo3(signature = (evidence, live, kl_coef = 0.0))]
fn edl_loss(evidence: [f64; 2], live: bool, kl_coef: f64) -> PyResult<(f64, [f64; 2])> {
    let l = m::edl_loss(evidence, label(live), kl_coef).map_err(err)?;
    Ok((l.loss, l.grad))
}

/// `(score, uncertainty)` from `[evidence_live, evidence_spoof]`.
#[pyfunction]
fn liveness(evidence: [f64; 2]) -> (f64, f64) {
    m::liveness(evidence)
}

#[pyfunction]
fn eer(scores: Vec<f64>, live: Vec<bool>) -> PyResult<f64> {
    eval::eer(&score_set(scores, live)?).map_err(err)
}

/// `(threshold, fnr, fpr)` operating points.
#[pyfunction]
fn roc_curve(scores: Vec<f64>, live: Vec<bool>) -> PyResult<Vec<(f64, f64, f64)>> {
    let roc = eval::roc_curve(&score_set(scores, live)?).map_err(err)?;
    Ok(roc.iter().map(|p| (p.threshold, p.fnr, p.fpr)).collect())
}

/// `(fnr, fpr, threshold, attainable)`.
#[pyfunction]
fn fnr_at_fpr(scores: Vec<f64>, live: Vec<bool>, target: f64) -> PyResult<(f64, f64, f64, bool)> {
    let r = eval::fnr_at_fpr(&score_set(scores, live)?, target).map_err(err)?;
    Ok((r.fnr, r.fpr, r.threshold, r.attainable))
}

/// Ensemble thresholds `[left, right, disp]` for per-sample score triples;
/// returns `(thresholds, fnr, fpr, fallback)`.
#[pyfunction]
fn threshold_search(scores: Vec<[f64; 3]>, live: Vec<bool>, target: f64) -> PyResult<([f64; 3], f64, f64, bool)> {
    if scores.len() != live.len() {
        return Err(err("scores and labels differ in length"));
    }
    let entries = scores
        .into_iter()
        .zip(live)
        .enumerate()
        .map(|(i, (scores, l))| TripleEntry {
            id: i.to_string(),
            label: label(l),
            kind: if l { SceneKind::Live } else { SceneKind::Plane },
            scores,
        })
        .collect();
    let set = TripleSet::new(entries).map_err(err)?;
    let r = eval::threshold_search(&set, target).map_err(err)?;
    Ok((r.decision.thresholds, r.fnr, r.fpr, r.fallback))
}

/// Writes a synthetic dataset to `out`; returns the sample count.
#[pyfunction]
#[pyo3(signature = (out, n, seed = 0, mix = None, rig = None, jobs = 1))]
fn synth(out: PathBuf, n: usize, seed: u64, mix: Option<&str>, rig: Option<&str>, jobs: usize) -> PyResult<usize> {
    let mut cfg = DatasetConfig {
        n,
        seed,
        ..DatasetConfig::default()
    };
    if let Some(m) = mix {
        cfg.mix = m.parse().map_err(err)?;
    }
    if let Some(r) = rig {
        cfg.rig = r.parse().map_err(err)?;
    }
    Ok(generate_dataset(&cfg, &out, jobs).map_err(err)?.len())
}

fn samples(data: &PathBuf, split: Option<Split>) -> PyResult<Vec<SampleRef>> {
    let rows = load_manifest(data.join("manifest.jsonl")).map_err(err)?;
    Ok(rows
        .iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .map(|r| SampleRef::from_row(r, data))
        .collect())
}

/// Trains `kind` on the dataset's train split and saves the checkpoint;
/// returns the best validation accuracy.
#[pyfunction]
#[pyo3(signature = (data, kind, out, epochs = 10, lr = 1e-3, seed = 0))]
fn train(data: PathBuf, kind: &str, out: PathBuf, epochs: usize, lr: f64, seed: u64) -> PyResult<f64> {
    let kind: ModelKind = kind.parse().map_err(err)?;
    let cfg = TrainConfig {
        epochs,
        lr,
        seed,
        ..TrainConfig::default()
    };
    let model = m::train_model(
        kind,
        &samples(&data, Some(Split::Train))?,
        &samples(&data, Some(Split::Val))?,
        &cfg,
    )
    .map_err(err)?;
    model.save(out).map_err(err)?;
    Ok(match model {
        TrainedModel::Cnn(c) => c.meta.val_accuracy,
        TrainedModel::Pairs(p) => p.val_accuracy,
    })
}

/// `(id, is_live, attack_kind, score)` for every sample of `split`
/// (`"all"` for the whole dataset).
#[pyfunction]
#[pyo3(signature = (model, data, split = "test"))]
fn score(model: PathBuf, data: PathBuf, split: &str) -> PyResult<Vec<(String, bool, String, f64)>> {
    let split = if split == "all" { None } else { Some(split.parse().map_err(err)?) };
    let s = samples(&data, split)?;
    let model = TrainedModel::load(model).map_err(err)?;
    let scores = m::score_model(&model, &s, 32).map_err(err)?;
    Ok(s.iter()
        .zip(scores)
        .map(|(s, v)| (s.id.clone(), s.label.is_live(), s.kind.to_string(), v))
        .collect())
}

#[pymodule]
fn dfas(module: &Bound<'_, PyModule>) -> PyResult<()> {
    module.add_class::<PySensorImage>()?;
    module.add_class::<PyDisparityMaps>()?;
    module.add_class::<PyLandmarkPair>()?;
    module.add_function(wrap_pyfunction!(delaunay, module)?)?;
    module.add_function(wrap_pyfunction!(edl_loss, module)?)?;
    module.add_function(wrap_pyfunction!(liveness, module)?)?;
    module.add_function(wrap_pyfunction!(eer, module)?)?;
    module.add_function(wrap_pyfunction!(roc_curve, module)?)?;
    module.add_function(wrap_pyfunction!(fnr_at_fpr, module)?)?;
    module.add_function(wrap_pyfunction!(threshold_search, module)?)?;
    module.add_function(wrap_pyfunction!(synth, module)?)?;
    module.add_function(wrap_pyfunction!(train, module)?)?;
    module.add_function(wrap_pyfunction!(score, module)?)?;
    Ok(())
}
