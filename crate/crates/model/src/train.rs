use hmc_tensor::rng;
use hmc_tensor::{Adam, ParamStore, Tensor};

use crate::error::{ModelError, Result};
use crate::layers::ForwardCtx;
use crate::model::{HmConformer, NUM_STAGES};

/// Losses of one optimisation step, before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub stage_losses: [Option<f32>; NUM_STAGES],
    pub total: f32,
}

impl StepMetrics {
    /// `step<TAB>L1 … L5<TAB>total`; absent stages print as `-`.
    pub fn log_line(&self) -> String {
        let parts: Vec<String> = self
            .stage_losses
            .iter()
            .map(|l| l.map_or_else(|| "-".to_string(), |v| format!("{v:.6}")))
            .collect();
        format!("{}\t{}\t{:.6}", self.step, parts.join("\t"), self.total)
    }
}

/// Model, parameters and optimiser state for sequential training.
pub struct Trainer {
    pub model: HmConformer,
    pub store: ParamStore,
    pub adam: Adam,
    seed: u64,
    step: u64,
}

impl Trainer {
    pub fn new(model: HmConformer, store: ParamStore, lr: f32, seed: u64) -> Self {
        Trainer {
            model,
            store,
            adam: Adam::new(lr),
            seed,
            step: 0,
        }
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// Forward, weighted loss, backward and one Adam update. A non-finite
    /// loss or gradient aborts before the update and names the first
    /// affected parameter.
    pub fn train_step(&mut self, x: &Tensor, labels: &[u8]) -> Result<StepMetrics> {
        self.store.zero_grad();
        let mut ctx = ForwardCtx::train(rng::substream(self.seed, "dropout", self.step));
        let out = self.model.forward(&self.store, x, &mut ctx)?;
        let (total, losses) = self.model.loss(&self.store, &out, labels)?;
        total.backward()?;
        let total_v = total.item();
        let bad = self.store.iter().find(|p| {
            p.tensor
                .grad()
                .is_some_and(|g| g.iter().any(|v| !v.is_finite()))
        });
        if !total_v.is_finite() || bad.is_some() {
            let detail = match bad {
                Some(p) => format!("loss {total_v}; first non-finite gradient in {}", p.name),
                None => format!("loss {total_v}; all gradients finite"),
            };
            return Err(ModelError::NonFinite {
                step: self.step,
                detail,
            });
        }
        let momentum = self.model.config().conformer.bn_momentum;
        ctx.commit_batch_stats(&mut self.store, momentum)?;
        self.adam.step(&mut self.store)?;
        let metrics = StepMetrics {
            step: self.step,
            stage_losses: losses.map(|l| l.map(|t| t.item())),
            total: total_v,
        };
        self.step += 1;
        Ok(metrics)
    }

    pub fn score(&self, x: &Tensor) -> Result<Vec<f32>> {
        self.model.score(&self.store, x)
    }
}
