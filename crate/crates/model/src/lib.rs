//! HM-Conformer: a Conformer encoder whose content tokens are pooled between
//! stages while three CLS tokens collect stage-level evidence, each scored by
//! its own OC-Softmax head.

pub mod config;
pub mod conformer;
mod error;
pub mod head;
pub mod layers;
pub mod model;
pub mod train;

pub use config::{
    ConformerConfig, Embedding, McaConfig, ModelConfig, OcSoftmaxConfig, PoolingConfig, PoolingKind,
};
pub use conformer::{ConformerBlock, SeqPool, TokenSequence};
pub use error::{ModelError, Result};
pub use head::{oc_softmax, top_k_indices, total_loss, Classifier, Pool};
pub use layers::ForwardCtx;
pub use model::{ForwardOutput, HmConformer, TraceEntry, NUM_CLS, NUM_STAGES};
pub use train::{StepMetrics, Trainer};
