//! Liveness classifiers: the analytic planarity baseline, the landmark-pairs
//! perceptron and the evidential CNN with its training loop.

mod checkpoint;
mod edl;
mod net;
mod pairs;
mod planarity;
mod scalar;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta, PairsCheckpoint, TrainedModel, INIT_SCHEME};
pub use edl::{edl_loss, liveness, EdlConfig, EdlLoss};
pub use net::{ForwardCache, NetSpec, Tensor, TinyCnn};
pub use pairs::{feature_pairs, load_features, train_pairs, PairsMlp, PAIR_FEATURES};
pub use planarity::{pair_planarity, planarity_score, PlanarityScore, DEFAULT_TAU};
pub use scalar::{gemm, Scalar};
pub use train::{
    load_input, predict_cnn, samples_in, score_cnn, train_cnn, Adam, EpochStats, SampleRef, TrainConfig,
    TrainOutcome,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Both sensors plus the two disparity maps (10 channels).
    Disparity,
    /// Both sensors without maps (8 channels); the maps ablation.
    Sensors8,
    /// Left sensor crop (4 channels).
    Left,
    /// Right sensor's own crop (4 channels).
    Right,
    /// Cross-sensor landmark distances.
    Pairs,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Disparity,
        ModelKind::Sensors8,
        ModelKind::Left,
        ModelKind::Right,
        ModelKind::Pairs,
    ];

    pub fn input_channels(self) -> usize {
        match self {
            ModelKind::Disparity => 10,
            ModelKind::Sensors8 => 8,
            ModelKind::Left | ModelKind::Right => 4,
            ModelKind::Pairs => 0,
        }
    }

    /// Disparity channels are standardized per sample inside the network:
    /// relief is a few percent of the offset and tilt that dominate raw maps.
    pub fn standardized_channels(self) -> Vec<usize> {
        match self {
            ModelKind::Disparity => vec![8, 9],
            _ => Vec::new(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Disparity => "disparity",
            ModelKind::Sensors8 => "sensors8",
            ModelKind::Left => "left",
            ModelKind::Right => "right",
            ModelKind::Pairs => "pairs",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairs-baseline" => Ok(ModelKind::Pairs),
            _ => ModelKind::ALL
                .into_iter()
                .find(|k| k.as_str() == s)
                .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Liveness score of one stack's evidence.
pub fn liveness_score(net: &TinyCnn<f32>, input: &crate::planes::Planes) -> Result<f64> {
    let ev = net.forward(&Tensor::from_planes(&[input])?)?;
    Ok(liveness(ev[0]).0)
}

/// Trains the model of `kind` and wraps it as a checkpoint.
pub fn train_model(
    kind: ModelKind,
    train: &[SampleRef],
    val: &[SampleRef],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    if kind == ModelKind::Pairs {
        let out = train_pairs(train, val, cfg)?;
        return Ok(TrainedModel::Pairs(PairsCheckpoint {
            kind,
            seed: cfg.seed,
            epochs: cfg.epochs,
            best_epoch: out.best_epoch,
            val_accuracy: out.best_val_accuracy,
            history: out.history,
            model: out.model,
        }));
    }
    let spec = NetSpec {
        input_channels: kind.input_channels(),
        standardize: kind.standardized_channels(),
        ..cfg.net.clone()
    };
    let net = TinyCnn::new(spec, &mut crate::rng::stream(cfg.seed, 0x1417))?;
    let out = train_cnn(kind, net, train, val, cfg)?;
    Ok(TrainedModel::Cnn(Checkpoint {
        meta: CheckpointMeta {
            kind,
            seed: cfg.seed,
            epochs: cfg.epochs,
            best_epoch: out.best_epoch,
            val_accuracy: out.best_val_accuracy,
            init: INIT_SCHEME.into(),
            bn_eps: cfg.net.bn_eps,
            bn_momentum: cfg.net.bn_momentum,
            standardize: kind.standardized_channels(),
            history: out.history,
        },
        net: out.model,
    }))
}

/// Liveness scores of a trained model over `samples`.
pub fn score_model(model: &TrainedModel, samples: &[SampleRef], batch: usize) -> Result<Vec<f64>> {
    match model {
        TrainedModel::Cnn(c) => score_cnn(&c.net, c.meta.kind, samples, batch),
        TrainedModel::Pairs(p) => load_features(samples)?
            .iter()
            .map(|f| p.model.score(f))
            .collect(),
    }
}
