//! Parameter-holding building blocks shared by the encoder and the head.

use hmc_tensor::rng::Rng;
use hmc_tensor::{BatchNormState, BatchStats, Init, Mode, ParamId, ParamStore, Tensor, DEFAULT_EPS};

use crate::error::Result;

/// Mode, dropout randomness and batch-norm statistics gathered during one
/// forward pass.
pub struct ForwardCtx {
    pub mode: Mode,
    rng: Option<Rng>,
    bn_updates: Vec<(ParamId, ParamId, BatchStats)>,
}

impl ForwardCtx {
    pub fn train(rng: Rng) -> Self {
        ForwardCtx {
            mode: Mode::Train,
            rng: Some(rng),
            bn_updates: Vec::new(),
        }
    }

    pub fn eval() -> Self {
        ForwardCtx {
            mode: Mode::Eval,
            rng: None,
            bn_updates: Vec::new(),
        }
    }

    pub fn is_train(&self) -> bool {
        self.mode.is_train()
    }

    pub fn dropout(&mut self, x: &Tensor, p: f32) -> Tensor {
        match (&mut self.rng, self.mode) {
            (Some(r), Mode::Train) => x.dropout(p, true, r),
            _ => x.clone(),
        }
    }

    /// Blends the recorded batch statistics into the running buffers.
    pub fn commit_batch_stats(&mut self, store: &mut ParamStore, momentum: f32) -> Result<()> {
        for (mean_id, var_id, stats) in self.bn_updates.drain(..) {
            let mut state = BatchNormState {
                running_mean: store.get(mean_id).to_vec(),
                running_var: store.get(var_id).to_vec(),
                momentum,
            };
            state.absorb(&stats);
            store.set_data(mean_id, state.running_mean)?;
            store.set_data(var_id, state.running_var)?;
        }
        Ok(())
    }

    pub fn pending_batch_stats(&self) -> usize {
        self.bn_updates.len()
    }
}

/// `x·W + b` over the last axis, `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new(init: &mut Init<'_>, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Result<Self> {
        let mut s = init.sub(name);
        let weight = s.uniform_fan_in("weight", &[fan_in, fan_out], fan_in)?;
        let bias = if bias {
            Some(s.constant("bias", &[fan_out], 0.0)?)
        } else {
            None
        };
        Ok(Linear { weight, bias })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        Ok(x.linear(store.get(self.weight), self.bias.map(|b| store.get(b)))?)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(init: &mut Init<'_>, name: &str, d: usize) -> Result<Self> {
        let mut s = init.sub(name);
        Ok(LayerNorm {
            gain: s.constant("gain", &[d], 1.0)?,
            bias: s.constant("bias", &[d], 0.0)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        Ok(x.layer_norm(store.get(self.gain), store.get(self.bias), DEFAULT_EPS)?)
    }
}

/// Batch normalisation over every axis but the last, with running buffers.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm {
    pub fn new(init: &mut Init<'_>, name: &str, d: usize) -> Result<Self> {
        let mut s = init.sub(name);
        Ok(BatchNorm {
            gain: s.constant("gain", &[d], 1.0)?,
            bias: s.constant("bias", &[d], 0.0)?,
            running_mean: s.buffer("running_mean", &[d], 0.0)?,
            running_var: s.buffer("running_var", &[d], 1.0)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let (gain, bias) = (store.get(self.gain), store.get(self.bias));
        if ctx.is_train() {
            let (y, stats) = x.batch_norm_train(gain, bias, DEFAULT_EPS)?;
            ctx.bn_updates.push((self.running_mean, self.running_var, stats));
            Ok(y)
        } else {
            Ok(x.batch_norm_eval(
                gain,
                bias,
                store.get(self.running_mean).data(),
                store.get(self.running_var).data(),
                DEFAULT_EPS,
            )?)
        }
    }
}
