//! Landmark-pairs baseline: all cross-sensor landmark distances fed to a
//! one-hidden-layer perceptron with an evidential head.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::edl::{edl_loss, liveness};
use super::train::{check_classes, loss_and_accuracy, Adam, EpochStats, SampleRef, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::labels::Label;
use crate::landmarks::{load_landmarks, LandmarkPair, NUM_LANDMARKS};
use crate::rng;

pub const PAIR_FEATURES: usize = NUM_LANDMARKS * NUM_LANDMARKS;

/// Entry `i * 45 + j` is the distance between left landmark `i` and right
/// landmark `j`.
pub fn feature_pairs(pair: &LandmarkPair) -> Vec<f64> {
    let mut out = Vec::with_capacity(PAIR_FEATURES);
    for l in pair.left.points() {
        for r in pair.right.points() {
            out.push(l.dist(r));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsMlp {
    pub hidden: usize,
    /// Per-feature standardization fitted on the training set.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `hidden x 2025`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `2 x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

impl PairsMlp {
    pub fn new(hidden: usize, rng: &mut impl Rng) -> Self {
        let b1 = (6.0 / PAIR_FEATURES as f64).sqrt();
        let b2 = (3.0 / hidden as f64).sqrt();
        Self {
            hidden,
            mean: vec![0.0; PAIR_FEATURES],
            std: vec![1.0; PAIR_FEATURES],
            w1: (0..hidden * PAIR_FEATURES).map(|_| rng.random_range(-b1..b1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..2 * hidden).map(|_| rng.random_range(-b2..b2)).collect(),
            b2: vec![0.0; 2],
        }
    }

    fn standardize(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Returns `(hidden activations, logits)` for standardized input `x`.
    fn layers(&self, x: &[f64]) -> (Vec<f64>, [f64; 2]) {
        let h: Vec<f64> = (0..self.hidden)
            .map(|k| {
                let row = &self.w1[k * PAIR_FEATURES..(k + 1) * PAIR_FEATURES];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[k]).max(0.0)
            })
            .collect();
        let mut z = [0.0; 2];
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = self.b2[c] + (0..self.hidden).map(|k| self.w2[c * self.hidden + k] * h[k]).sum::<f64>();
        }
        (h, z)
    }

    pub fn evidence(&self, features: &[f64]) -> Result<[f64; 2]> {
        if features.len() != PAIR_FEATURES {
            return Err(Error::Dimension(format!(
                "expected {PAIR_FEATURES} pair features, got {}",
                features.len()
            )));
        }
        let (_, z) = self.layers(&self.standardize(features));
        Ok([softplus(z[0]), softplus(z[1])])
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        Ok(liveness(self.evidence(features)?).0)
    }

    fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// Accumulates the gradient of `d . evidence` at standardized input `x`.
    fn backward(&self, x: &[f64], d_evidence: [f64; 2], grads: &mut [Vec<f64>; 4]) {
        let (h, z) = self.layers(x);
        let dz = [
            d_evidence[0] / (1.0 + (-z[0]).exp()),
            d_evidence[1] / (1.0 + (-z[1]).exp()),
        ];
        for c in 0..2 {
            grads[3][c] += dz[c];
            for k in 0..self.hidden {
                grads[2][c * self.hidden + k] += dz[c] * h[k];
            }
        }
        for k in 0..self.hidden {
            if h[k] <= 0.0 {
                continue;
            }
            let dh = dz[0] * self.w2[k] + dz[1] * self.w2[self.hidden + k];
            grads[1][k] += dh;
            let row = &mut grads[0][k * PAIR_FEATURES..(k + 1) * PAIR_FEATURES];
            for (g, v) in row.iter_mut().zip(x) {
                *g += dh * v;
            }
        }
    }
}

pub fn load_features(samples: &[SampleRef]) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| Ok(feature_pairs(&load_landmarks(&s.landmarks)?)))
        .collect()
}

pub fn train_pairs(train: &[SampleRef], val: &[SampleRef], cfg: &TrainConfig) -> Result<TrainOutcome<PairsMlp>> {
    cfg.validate()?;
    check_classes(train)?;
    let xs = load_features(train)?;
    let vx = load_features(val)?;
    let mut model = PairsMlp::new(cfg.pairs_hidden.max(1), &mut rng::stream(cfg.seed, 0x9a125));
    let n = xs.len() as f64;
    for j in 0..PAIR_FEATURES {
        let m = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        let v = xs.iter().map(|x| (x[j] - m).powi(2)).sum::<f64>() / n;
        model.mean[j] = m;
        model.std[j] = v.sqrt().max(1e-6);
    }
    let std_x: Vec<Vec<f64>> = xs.iter().map(|x| model.standardize(x)).collect();
    let labels: Vec<Label> = train.iter().map(|s| s.label).collect();
    let val_labels: Vec<Label> = val.iter().map(|s| s.label).collect();

    let sizes = [model.w1.len(), model.b1.len(), model.w2.len(), model.b2.len()];
    let mut adams: Vec<Adam> = sizes.iter().map(|&s| Adam::new(s, cfg)).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, PairsMlp)> = None;
    for epoch in 0..cfg.epochs {
        let kl = cfg.edl.kl_coefficient(epoch);
        let mut order: Vec<usize> = (0..std_x.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, rng::mix(&[0x0e90c, epoch as u64])));
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let mut grads: [Vec<f64>; 4] = sizes.map(|s| vec![0.0; s]);
            for &i in idx {
                let (_, z) = model.layers(&std_x[i]);
                let e = [softplus(z[0]), softplus(z[1])];
                let l = edl_loss(e, labels[i], kl)?;
                total += l.loss;
                let inv = 1.0 / idx.len() as f64;
                model.backward(&std_x[i], [l.grad[0] * inv, l.grad[1] * inv], &mut grads);
            }
            for ((p, g), a) in model.params_mut().into_iter().zip(&grads).zip(&mut adams) {
                a.step(p, g);
            }
        }
        let (val_loss, val_accuracy) = if val.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let ev = vx.iter().map(|x| model.evidence(x)).collect::<Result<Vec<_>>>()?;
            loss_and_accuracy(&ev, &val_labels, kl)?
        };
        history.push(EpochStats {
            epoch,
            train_loss: total / n,
            val_loss,
            val_accuracy,
        });
        let better = match &best {
            None => true,
            Some((acc, _, _)) => val.is_empty() || val_accuracy > *acc,
        };
        if better {
            best = Some((val_accuracy, epoch, model.clone()));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SensorId;
    use crate::landmarks::{LandmarkSet, Point2};

    fn pair(shift: (f64, f64)) -> LandmarkPair {
        let pts: Vec<Point2> = (0..45).map(|i| Point2::new(i as f64 * 1.5, (i * i % 17) as f64)).collect();
        let right = pts.iter().map(|p| Point2::new(p.x + shift.0, p.y + shift.1)).collect();
        LandmarkPair::new(
            LandmarkSet::with_bounding_rect(SensorId::Left, pts).unwrap(),
            LandmarkSet::with_bounding_rect(SensorId::Right, right).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn diagonal_entries() {
        let f = feature_pairs(&pair((0.0, 0.0)));
        assert_eq!(f.len(), PAIR_FEATURES);
        assert!((0..45).all(|i| f[i * 45 + i] == 0.0));
        let g = feature_pairs(&pair((3.0, 4.0)));
        assert!((0..45).all(|i| (g[i * 45 + i] - 5.0).abs() < 1e-12));
        assert!(g.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut model = PairsMlp::new(5, &mut rng::stream(1, 1));
        let mut r = rng::stream(2, 2);
        let x: Vec<f64> = (0..PAIR_FEATURES).map(|_| r.random_range(-1.0..1.0)).collect();
        let d = [0.7, -0.3];
        let f = |m: &PairsMlp| {
            let (_, z) = m.layers(&x);
            d[0] * softplus(z[0]) + d[1] * softplus(z[1])
        };
        let mut grads = [vec![0.0; model.w1.len()], vec![0.0; 5], vec![0.0; 10], vec![0.0; 2]];
        model.backward(&x, d, &mut grads);
        let h = 1e-6;
        for (pi, idx) in [(0usize, 17usize), (0, 3000), (1, 2), (2, 7), (3, 1)] {
            let orig = model.params_mut()[pi][idx];
            model.params_mut()[pi][idx] = orig + h;
            let up = f(&model);
            model.params_mut()[pi][idx] = orig - h;
            let down = f(&model);
            model.params_mut()[pi][idx] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grads[pi][idx]).abs() < 1e-6 * (1.0 + fd.abs()), "{pi}/{idx}: {fd} vs {}", grads[pi][idx]);
        }
    }
}
