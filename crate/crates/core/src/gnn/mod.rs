//! Edge classifier: message-passing network, hybrid loss and training.

pub mod loss;
pub mod mlp;
pub mod model;
pub mod train;

use serde::{Deserialize, Serialize};

pub use loss::{hybrid_loss, LossConfig, Weighting};
pub use model::{Architecture, FeatureSet, GnnParams};
pub use train::{gradients, train, Sample, TrainConfig, TrainReport};

use crate::error::Result;

/// Serialized model: architecture, parameters, training config and the
/// hash of the dataset manifest it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub params: GnnParams,
    pub config: TrainConfig,
    pub dataset_manifest_hash: String,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl Checkpoint {
    pub fn parse(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        ckpt.params.validate()?;
        if ckpt.params.depth() != ckpt.arch.layers {
            return Err(crate::Error::Dimension {
                layer: "checkpoint layers".into(),
                expected: ckpt.arch.layers,
                got: ckpt.params.depth(),
            });
        }
        Ok(ckpt)
    }

    pub fn to_json(&self) -> String {
        crate::io::to_json(self)
    }
}
