use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::edl::{edl_loss, liveness, EdlConfig};
use super::net::{NetSpec, Tensor, TinyCnn};
use super::scalar::Scalar;
use super::ModelKind;
use crate::augment::{apply_intensity, augment_spatial, augment_stack_intensity, warp_planes, AugmentConfig, IntensityParams, SpatialParams};
use crate::disparity::SampleStack;
use crate::error::{Error, Result};
use crate::ingest::{SensorId, SensorImage, MAX_INTENSITY};
use crate::labels::{Label, SceneKind};
use crate::planes::Planes;
use crate::rng;
use crate::synthrig::{ManifestRow, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub edl: EdlConfig,
    /// Intensity and spatial augmentation applied to training inputs.
    pub augment: Option<AugmentConfig>,
    /// Network layout; `input_channels` is overridden by the model kind.
    pub net: NetSpec,
    /// Hidden width of the landmark-pairs perceptron.
    pub pairs_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-7,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            edl: EdlConfig::default(),
            augment: None,
            net: NetSpec::default(),
            pairs_hidden: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("lr must be >= 0, batch size and epochs > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("Adam betas must lie in [0, 1) and eps be positive".into()));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step<T: Scalar>(&mut self, params: &mut [T], grad: &[T]) {
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i].f64();
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let step = self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
            params[i] = params[i] - T::of(step);
        }
    }
}

/// One dataset sample with resolved file paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRef {
    pub id: String,
    pub label: Label,
    pub kind: SceneKind,
    pub split: Split,
    pub stack: PathBuf,
    pub right: PathBuf,
    pub landmarks: PathBuf,
}

impl SampleRef {
    pub fn from_row(row: &ManifestRow, root: &Path) -> Self {
        Self {
            id: row.id.clone(),
            label: row.label,
            kind: row.kind,
            split: row.split,
            stack: root.join(&row.files.stack),
            right: root.join(&row.files.right),
            landmarks: root.join(&row.files.landmarks),
        }
    }
}

pub fn samples_in(rows: &[ManifestRow], root: &Path, split: Split) -> Vec<SampleRef> {
    rows.iter()
        .filter(|r| r.split == split)
        .map(|r| SampleRef::from_row(r, root))
        .collect()
}

/// Network input for `kind`, optionally augmented with `aug` drawn from the
/// given stream.
pub fn load_input(kind: ModelKind, s: &SampleRef, aug: Option<(&AugmentConfig, u64)>) -> Result<Planes> {
    match kind {
        ModelKind::Disparity | ModelKind::Sensors8 | ModelKind::Left => {
            let mut stack = SampleStack::load(&s.stack)?;
            if let Some((cfg, stream)) = aug {
                let mut r = rng::stream(cfg.seed, stream);
                stack = augment_stack_intensity(&stack, cfg, &mut r);
                stack = augment_spatial(&stack, cfg, &mut r);
            }
            Ok(match kind {
                ModelKind::Disparity => stack.planes,
                ModelKind::Sensors8 => stack.planes.select(&[0, 1, 2, 3, 4, 5, 6, 7]),
                _ => stack.planes.select(&[0, 1, 2, 3]),
            })
        }
        ModelKind::Right => {
            let mut p = SensorImage::load(&s.right, SensorId::Right)?.planes;
            let inv = 1.0 / MAX_INTENSITY as f32;
            p.map_inplace(|v| (v * inv).clamp(0.0, 1.0));
            if let Some((cfg, stream)) = aug {
                let mut r = rng::stream(cfg.seed, stream);
                let ip = IntensityParams::sample(cfg, &mut r);
                apply_intensity(&mut p, 0, 1.0, &ip, &mut r);
                let sp = SpatialParams::sample(cfg, p.width(), &mut r);
                p = warp_planes(&p, &sp);
            }
            Ok(p)
        }
        ModelKind::Pairs => Err(Error::Config("the pairs model takes landmark features, not images".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Model from the epoch with the best validation accuracy.
    pub model: M,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

pub(crate) fn check_classes(train: &[SampleRef]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let live = train.iter().filter(|s| s.label.is_live()).count();
    if live == 0 || live == train.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Mean EDL loss and accuracy (live iff score >= 0.5) of `evidence` against labels.
pub(crate) fn loss_and_accuracy(evidence: &[[f64; 2]], labels: &[Label], kl: f64) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for (e, l) in evidence.iter().zip(labels) {
        loss += edl_loss(*e, *l, kl)?.loss;
        if (liveness(*e).0 >= 0.5) == l.is_live() {
            correct += 1;
        }
    }
    let n = evidence.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

fn batch_tensor(kind: ModelKind, batch: &[&SampleRef], aug: Option<(&AugmentConfig, &[u64])>) -> Result<Tensor<f32>> {
    let planes = batch
        .iter()
        .enumerate()
        .map(|(i, s)| load_input(kind, s, aug.map(|(c, streams)| (c, streams[i]))))
        .collect::<Result<Vec<_>>>()?;
    Tensor::from_planes(&planes.iter().collect::<Vec<_>>())
}

/// Evidence for every sample, inference mode, in batches.
pub fn predict_cnn(net: &TinyCnn<f32>, kind: ModelKind, samples: &[SampleRef], batch: usize) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch.max(1)) {
        let refs: Vec<&SampleRef> = chunk.iter().collect();
        out.extend(net.forward(&batch_tensor(kind, &refs, None)?)?);
    }
    Ok(out)
}

/// Liveness score `alpha_live / S` for every sample.
pub fn score_cnn(net: &TinyCnn<f32>, kind: ModelKind, samples: &[SampleRef], batch: usize) -> Result<Vec<f64>> {
    Ok(predict_cnn(net, kind, samples, batch)?.into_iter().map(|e| liveness(e).0).collect())
}

/// Mini-batch training with Adam on the evidential loss. The returned model
/// is the one with the highest validation accuracy (earliest on ties); with
/// no validation samples the final epoch is kept.
pub fn train_cnn(
    kind: ModelKind,
    mut net: TinyCnn<f32>,
    train: &[SampleRef],
    val: &[SampleRef],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<TinyCnn<f32>>> {
    cfg.validate()?;
    check_classes(train)?;
    if net.input_channels() != kind.input_channels() {
        return Err(Error::ChannelMismatch {
            expected: kind.input_channels(),
            got: net.input_channels(),
        });
    }
    let mut adam = Adam::new(net.param_count(), cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, TinyCnn<f32>)> = None;
    let val_labels: Vec<Label> = val.iter().map(|s| s.label).collect();

    for epoch in 0..cfg.epochs {
        let kl = cfg.edl.kl_coefficient(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, rng::mix(&[0x0e90c, epoch as u64])));
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&SampleRef> = idx.iter().map(|&i| &train[i]).collect();
            let streams: Vec<u64> = idx.iter().map(|&i| rng::mix(&[cfg.seed, epoch as u64, i as u64])).collect();
            let x = batch_tensor(kind, &batch, cfg.augment.as_ref().map(|a| (a, streams.as_slice())))?;
            let (evidence, cache) = net.forward_train(&x, true)?;
            let inv_n = 1.0 / batch.len() as f64;
            let mut d = Vec::with_capacity(batch.len());
            for (e, s) in evidence.iter().zip(&batch) {
                let l = edl_loss(*e, s.label, kl)?;
                total += l.loss;
                d.push([l.grad[0] * inv_n, l.grad[1] * inv_n]);
            }
            let grad = net.backward(&cache, &d);
            adam.step(&mut net.params, &grad);
        }
        let train_loss = total / train.len() as f64;
        let (val_loss, val_accuracy) = if val.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let ev = predict_cnn(&net, kind, val, cfg.batch_size)?;
            loss_and_accuracy(&ev, &val_labels, kl)?
        };
        log::info!(
            "{kind} epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}, val acc {val_accuracy:.4}"
        );
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        let better = match &best {
            None => true,
            Some((acc, _, _)) => val.is_empty() || val_accuracy > *acc,
        };
        if better {
            best = Some((val_accuracy, epoch, net.clone()));
        }
    }
    let (best_val_accuracy, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_accuracy,
    })
}
