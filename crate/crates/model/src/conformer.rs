//! Convolutional sub-sampling, the Conformer block and SeqPool.
//!
//! ```text
//! subsample:  [B, 400, 120] as a 1-channel image
//!             → n × (Conv 3×3 stride 2 pad 1 → Swish), c = d/4 channels
//!             → [B, T', c·F'] → Linear → [B, T', d]
//! block:      h  + ½·FFN(h)
//!             h' = h + MHSA(h)
//!             h''= h' + Conv(h')
//!             LayerNorm(h'' + ½·FFN(h''))
//! FFN:        LN → Linear(d, 4d) → Swish → Dropout → Linear(4d, d) → Dropout
//! MHSA:       LN → Q,K,V → attention → Linear(d, d) → Dropout
//! Conv:       LN → Linear(d, 2d) → GLU → depthwise k → BatchNorm → Swish
//!             → Linear(d, d) → Dropout
//! ```
//!
//! Parameter names, per block `i`:
//!
//! ```text
//! blocks.{i}.ffn1.{norm.gain,norm.bias,w1.weight,w1.bias,w2.weight,w2.bias}
//! blocks.{i}.mhsa.{norm.*,wq.*,wk.*,wv.*,wo.*}
//! blocks.{i}.conv.{norm.*,pw1.*,dw.weight,dw.bias,bn.gain,bn.bias,
//!                  bn.running_mean,bn.running_var,pw2.*}
//! blocks.{i}.ffn2.*
//! blocks.{i}.norm.{gain,bias}
//! ```

use hmc_tensor::{Init, ParamId, ParamStore, Tensor};

use crate::config::ConformerConfig;
use crate::error::{ModelError, Result};
use crate::layers::{BatchNorm, ForwardCtx, LayerNorm, Linear};

/// Tokens `[B, L, d]` whose first `cls_count` positions are CLS tokens.
#[derive(Debug, Clone)]
pub struct TokenSequence {
    pub tokens: Tensor,
    pub cls_count: usize,
}

impl TokenSequence {
    pub fn new(tokens: Tensor, cls_count: usize) -> Result<Self> {
        if tokens.rank() != 3 {
            return Err(ModelError::Contract(format!(
                "token sequence must be [B, L, d], got {:?}",
                tokens.shape()
            )));
        }
        if cls_count >= tokens.shape()[1] {
            return Err(ModelError::Contract(format!(
                "{cls_count} CLS tokens leave no content in {:?}",
                tokens.shape()
            )));
        }
        Ok(TokenSequence { tokens, cls_count })
    }

    pub fn len(&self) -> usize {
        self.tokens.shape()[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn content_len(&self) -> usize {
        self.len() - self.cls_count
    }

    pub fn content(&self) -> Result<Tensor> {
        Ok(self.tokens.slice_axis(1, self.cls_count, self.len())?)
    }

    /// CLS tokens `[B, cls_count, d]`, if any.
    pub fn cls(&self) -> Result<Option<Tensor>> {
        if self.cls_count == 0 {
            return Ok(None);
        }
        Ok(Some(self.tokens.slice_axis(1, 0, self.cls_count)?))
    }
}

#[derive(Debug, Clone)]
pub struct Subsample {
    convs: Vec<(ParamId, ParamId)>,
    proj: Linear,
    frames: usize,
    features: usize,
}

impl Subsample {
    pub fn new(init: &mut Init<'_>, cfg: &ConformerConfig) -> Result<Self> {
        let mut s = init.sub("subsample");
        let c = cfg.subsample_channels();
        let mut convs = Vec::new();
        let mut cin = 1;
        for i in 0..cfg.n_subsample_layers {
            let mut l = s.sub(format!("conv{i}"));
            let w = l.uniform_fan_in("weight", &[c, cin, 3, 3], cin * 9)?;
            let b = l.constant("bias", &[c], 0.0)?;
            convs.push((w, b));
            cin = c;
        }
        let flat = c * cfg.subsampled(cfg.feature_dim);
        let proj = Linear::new(&mut s, "proj", flat, cfg.d, true)?;
        Ok(Subsample {
            convs,
            proj,
            frames: cfg.input_frames,
            features: cfg.feature_dim,
        })
    }

    /// `[B, frames, features]` → `[B, T/2ⁿ, d]`.
    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 3 || s[1] != self.frames || s[2] != self.features {
            return Err(ModelError::Contract(format!(
                "expected [B, {}, {}] features, got {:?}",
                self.frames, self.features, s
            )));
        }
        let mut h = x.reshape(&[s[0], 1, s[1], s[2]])?;
        for &(w, b) in &self.convs {
            h = h.conv2d(store.get(w), Some(store.get(b)), 2, 1)?.swish();
        }
        let (b, c, t, f) = (h.shape()[0], h.shape()[1], h.shape()[2], h.shape()[3]);
        let h = h.permute(&[0, 2, 1, 3])?.reshape(&[b, t, c * f])?;
        self.proj.forward(store, &h)
    }
}

/// Pre-norm feed-forward module used as a half-step residual.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub norm: LayerNorm,
    pub w1: Linear,
    pub w2: Linear,
    dropout: f32,
}

impl FeedForward {
    pub fn new(init: &mut Init<'_>, name: &str, cfg: &ConformerConfig) -> Result<Self> {
        let mut s = init.sub(name);
        let hidden = cfg.d * cfg.ffn_expansion;
        Ok(FeedForward {
            norm: LayerNorm::new(&mut s, "norm", cfg.d)?,
            w1: Linear::new(&mut s, "w1", cfg.d, hidden, true)?,
            w2: Linear::new(&mut s, "w2", hidden, cfg.d, true)?,
            dropout: cfg.dropout,
        })
    }

    /// The branch alone, without residual.
    pub fn branch(&self, store: &ParamStore, h: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let y = self.norm.forward(store, h)?;
        let y = self.w1.forward(store, &y)?.swish();
        let y = ctx.dropout(&y, self.dropout);
        let y = self.w2.forward(store, &y)?;
        Ok(ctx.dropout(&y, self.dropout))
    }

    /// `h + ½·FFN(h)`.
    pub fn forward(&self, store: &ParamStore, h: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        Ok(h.add(&self.branch(store, h, ctx)?.scale(0.5))?)
    }
}

#[derive(Debug, Clone)]
pub struct Mhsa {
    pub norm: LayerNorm,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    heads: usize,
    dropout: f32,
}

impl Mhsa {
    pub fn new(init: &mut Init<'_>, cfg: &ConformerConfig) -> Result<Self> {
        let mut s = init.sub("mhsa");
        let d = cfg.d;
        Ok(Mhsa {
            norm: LayerNorm::new(&mut s, "norm", d)?,
            wq: Linear::new(&mut s, "wq", d, d, true)?,
            wk: Linear::new(&mut s, "wk", d, d, true)?,
            wv: Linear::new(&mut s, "wv", d, d, true)?,
            wo: Linear::new(&mut s, "wo", d, d, true)?,
            heads: cfg.heads,
            dropout: cfg.dropout,
        })
    }

    pub fn forward(&self, store: &ParamStore, h: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let y = self.norm.forward(store, h)?;
        let q = self.wq.forward(store, &y)?;
        let k = self.wk.forward(store, &y)?;
        let v = self.wv.forward(store, &y)?;
        let a = Tensor::multi_head_attention(&q, &k, &v, self.heads)?;
        let o = self.wo.forward(store, &a)?;
        Ok(h.add(&ctx.dropout(&o, self.dropout))?)
    }
}

#[derive(Debug, Clone)]
pub struct ConvModule {
    pub norm: LayerNorm,
    pub pw1: Linear,
    pub dw_weight: ParamId,
    pub dw_bias: ParamId,
    pub bn: BatchNorm,
    pub pw2: Linear,
    dropout: f32,
}

impl ConvModule {
    pub fn new(init: &mut Init<'_>, cfg: &ConformerConfig) -> Result<Self> {
        let mut s = init.sub("conv");
        let d = cfg.d;
        let k = cfg.depthwise_kernel;
        let norm = LayerNorm::new(&mut s, "norm", d)?;
        let pw1 = Linear::new(&mut s, "pw1", d, 2 * d, true)?;
        let (dw_weight, dw_bias) = {
            let mut dw = s.sub("dw");
            (dw.uniform_fan_in("weight", &[k, d], k)?, dw.constant("bias", &[d], 0.0)?)
        };
        Ok(ConvModule {
            norm,
            pw1,
            dw_weight,
            dw_bias,
            bn: BatchNorm::new(&mut s, "bn", d)?,
            pw2: Linear::new(&mut s, "pw2", d, d, true)?,
            dropout: cfg.dropout,
        })
    }

    pub fn forward(&self, store: &ParamStore, h: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let y = self.norm.forward(store, h)?;
        let y = self.pw1.forward(store, &y)?.glu()?;
        let y = y.depthwise_conv1d(store.get(self.dw_weight), Some(store.get(self.dw_bias)))?;
        let y = self.bn.forward(store, &y, ctx)?.swish();
        let y = self.pw2.forward(store, &y)?;
        Ok(h.add(&ctx.dropout(&y, self.dropout))?)
    }
}

#[derive(Debug, Clone)]
pub struct ConformerBlock {
    pub ffn1: FeedForward,
    pub mhsa: Mhsa,
    pub conv: ConvModule,
    pub ffn2: FeedForward,
    pub norm: LayerNorm,
}

impl ConformerBlock {
    pub fn new(init: &mut Init<'_>, cfg: &ConformerConfig) -> Result<Self> {
        Ok(ConformerBlock {
            ffn1: FeedForward::new(init, "ffn1", cfg)?,
            mhsa: Mhsa::new(init, cfg)?,
            conv: ConvModule::new(init, cfg)?,
            ffn2: FeedForward::new(init, "ffn2", cfg)?,
            norm: LayerNorm::new(init, "norm", cfg.d)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, h: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let h = self.ffn1.forward(store, h, ctx)?;
        let h = self.mhsa.forward(store, &h, ctx)?;
        let h = self.conv.forward(store, &h, ctx)?;
        let h = self.ffn2.forward(store, &h, ctx)?;
        self.norm.forward(store, &h)
    }
}

/// Attention-weighted average of content tokens.
#[derive(Debug, Clone)]
pub struct SeqPool {
    pub proj: Linear,
}

impl SeqPool {
    pub fn new(init: &mut Init<'_>, d: usize) -> Result<Self> {
        Ok(SeqPool {
            proj: Linear::new(init, "seqpool", d, 1, true)?,
        })
    }

    /// `[B, L, d]` → `[B, d]` with weights `softmax(h·w + b)` over `L`.
    pub fn forward(&self, store: &ParamStore, h: &Tensor) -> Result<Tensor> {
        let s = h.shape();
        if s.len() != 3 {
            return Err(ModelError::Contract(format!("seqpool expects [B, L, d], got {s:?}")));
        }
        let scores = self.proj.forward(store, h)?.reshape(&[s[0], s[1]])?;
        let weights = scores.softmax(1)?;
        Ok(h.weighted_sum_seq(&weights)?)
    }
}
