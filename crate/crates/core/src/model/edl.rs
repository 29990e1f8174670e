//! Evidential loss for two classes (index 0 = live, 1 = spoof).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdlConfig {
    /// Final weight of the KL regularizer.
    pub kl_weight: f64,
    /// Epochs over which the KL weight ramps linearly from 0.
    pub kl_anneal_epochs: usize,
}

impl Default for EdlConfig {
    fn default() -> Self {
        Self {
            kl_weight: 0.1,
            kl_anneal_epochs: 10,
        }
    }
}

impl EdlConfig {
    /// KL coefficient for 0-based `epoch`: `min(1, epoch / ramp) * weight`.
    pub fn kl_coefficient(&self, epoch: usize) -> f64 {
        if self.kl_anneal_epochs == 0 {
            return self.kl_weight;
        }
        (epoch as f64 / self.kl_anneal_epochs as f64).min(1.0) * self.kl_weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdlLoss {
    pub loss: f64,
    /// Derivative of `loss` with respect to each evidence value.
    pub grad: [f64; 2],
}

fn one_hot(label: Label) -> [f64; 2] {
    let mut y = [0.0; 2];
    y[label.index()] = 1.0;
    y
}

/// Mean-square Dirichlet loss plus `kl_coef` times the KL divergence from the
/// evidence on the wrong class to the uniform Dirichlet.
pub fn edl_loss(evidence: [f64; 2], label: Label, kl_coef: f64) -> Result<EdlLoss> {
    for &e in &evidence {
        if !(e >= 0.0) {
            return Err(Error::NegativeEvidence(e));
        }
    }
    let y = one_hot(label);
    let alpha = [evidence[0] + 1.0, evidence[1] + 1.0];
    let s = alpha[0] + alpha[1];
    let p = [alpha[0] / s, alpha[1] / s];

    let mut loss = 0.0;
    for j in 0..2 {
        loss += (y[j] - p[j]).powi(2) + p[j] * (1.0 - p[j]) / (s + 1.0);
    }
    let dl_dp: Vec<f64> = (0..2)
        .map(|j| -2.0 * (y[j] - p[j]) + (1.0 - 2.0 * p[j]) / (s + 1.0))
        .collect();
    let dl_ds_direct: f64 = -(0..2).map(|j| p[j] * (1.0 - p[j])).sum::<f64>() / (s + 1.0).powi(2);
    let mut grad = [0.0; 2];
    for (k, g) in grad.iter_mut().enumerate() {
        let via_p: f64 = (0..2)
            .map(|j| dl_dp[j] * (if j == k { 1.0 } else { 0.0 } - p[j]) / s)
            .sum();
        *g = via_p + dl_ds_direct;
    }

    if kl_coef != 0.0 {
        // With the true class removed the Dirichlet is (1, a); against the
        // uniform prior the divergence reduces to ln a - 1 + 1/a.
        let wrong = 1 - label.index();
        let a = alpha[wrong];
        loss += kl_coef * (a.ln() - 1.0 + 1.0 / a);
        grad[wrong] += kl_coef * (1.0 / a - 1.0 / (a * a));
    }
    Ok(EdlLoss { loss, grad })
}

/// Expected live probability `alpha_live / S` and uncertainty `2 / S`.
pub fn liveness(evidence: [f64; 2]) -> (f64, f64) {
    let s = evidence[0] + evidence[1] + 2.0;
    ((evidence[0] + 1.0) / s, 2.0 / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_point_closed_form() {
        for label in [Label::Live, Label::Spoof] {
            let l = edl_loss([0.0, 0.0], label, 0.0).unwrap();
            assert!((l.loss - 2.0 * (0.25 + 0.25 / 3.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct_evidence_is_cheap() {
        assert!(edl_loss([1000.0, 0.0], Label::Live, 0.0).unwrap().loss < 0.01);
        assert!(edl_loss([0.0, 1000.0], Label::Live, 0.0).unwrap().loss > 1.9);
    }

    #[test]
    fn kl_vanishes_without_wrong_evidence() {
        let a = edl_loss([5.0, 0.0], Label::Live, 0.0).unwrap();
        let b = edl_loss([5.0, 0.0], Label::Live, 1.0).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-15);
        assert!(edl_loss([5.0, 3.0], Label::Live, 1.0).unwrap().loss > edl_loss([5.0, 3.0], Label::Live, 0.0).unwrap().loss);
    }

    #[test]
    fn negative_evidence_rejected() {
        assert!(matches!(edl_loss([-0.1, 0.0], Label::Live, 0.0), Err(Error::NegativeEvidence(_))));
    }

    #[test]
    fn liveness_closed_forms() {
        assert_eq!(liveness([0.0, 0.0]), (0.5, 1.0));
        assert!((liveness([9.0, 0.0]).0 - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn annealing_ramp() {
        let c = EdlConfig::default();
        assert_eq!(c.kl_coefficient(0), 0.0);
        assert!((c.kl_coefficient(5) - 0.05).abs() < 1e-15);
        assert!((c.kl_coefficient(30) - 0.1).abs() < 1e-15);
    }
}
