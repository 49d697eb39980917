use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Encoder hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformerConfig {
    pub d: usize,
    pub heads: usize,
    pub ffn_expansion: usize,
    pub depthwise_kernel: usize,
    pub n_subsample_layers: usize,
    pub n_blocks: usize,
    pub dropout: f32,
    pub input_frames: usize,
    pub feature_dim: usize,
    /// Learned absolute positions added to content tokens after the tokenizer.
    pub positional_embedding: bool,
    pub bn_momentum: f32,
}

impl Default for ConformerConfig {
    fn default() -> Self {
        ConformerConfig {
            d: 64,
            heads: 4,
            ffn_expansion: 4,
            depthwise_kernel: 15,
            n_subsample_layers: 2,
            n_blocks: 6,
            dropout: 0.1,
            input_frames: 400,
            feature_dim: 120,
            positional_embedding: true,
            bn_momentum: 0.1,
        }
    }
}

impl ConformerConfig {
    /// d = 144, the full-size model.
    pub fn full_width() -> Self {
        ConformerConfig {
            d: 144,
            ..Self::default()
        }
    }

    /// Channels of the sub-sampling convolutions.
    pub fn subsample_channels(&self) -> usize {
        (self.d / 4).max(1)
    }

    /// Extent after `n` stride-2, pad-1, 3-wide convolutions.
    pub fn subsampled(&self, extent: usize) -> usize {
        (0..self.n_subsample_layers).fold(extent, |e, _| (e - 1) / 2 + 1)
    }

    /// Content tokens produced by the tokenizer.
    pub fn num_tokens(&self) -> usize {
        self.subsampled(self.input_frames)
    }

    /// Blocks after which stages 1, 2 and 3 end: `ceil(s·n/3)`, so 2, 4, 6
    /// for six blocks.
    pub fn stage_ends(&self) -> [usize; 3] {
        let n = self.n_blocks;
        [n.div_ceil(3), (2 * n).div_ceil(3), n]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d == 0 || self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return bad(format!("d = {} must be a positive multiple of heads = {}", self.d, self.heads));
        }
        if !self.d.is_multiple_of(2) {
            return bad(format!("d = {} must be even for the classifier bottleneck", self.d));
        }
        if self.depthwise_kernel.is_multiple_of(2) {
            return bad(format!("depthwise_kernel = {} must be odd", self.depthwise_kernel));
        }
        if self.n_subsample_layers == 0 {
            return bad("n_subsample_layers must be at least 1".into());
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1".into());
        }
        if self.ffn_expansion == 0 {
            return bad("ffn_expansion must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout = {} outside [0, 1)", self.dropout));
        }
        if self.input_frames == 0 || self.feature_dim == 0 {
            return bad("input_frames and feature_dim must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    Max,
    Average,
    TopK,
    Convolution,
    GPool,
}

impl PoolingKind {
    pub const ALL: [PoolingKind; 5] = [
        PoolingKind::Max,
        PoolingKind::Average,
        PoolingKind::TopK,
        PoolingKind::Convolution,
        PoolingKind::GPool,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingConfig {
    pub enabled: bool,
    pub kind: PoolingKind,
    pub rate: usize,
    pub conv_kernel: usize,
    pub conv_stride: usize,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig {
            enabled: true,
            kind: PoolingKind::Max,
            rate: 2,
            conv_kernel: 7,
            conv_stride: 2,
        }
    }
}

impl PoolingConfig {
    /// Tokens left after pooling `l` content tokens.
    pub fn output_len(&self, l: usize) -> usize {
        match self.kind {
            PoolingKind::Convolution => {
                let pad = self.conv_kernel / 2;
                (l + 2 * pad - self.conv_kernel) / self.conv_stride + 1
            }
            _ => l.div_ceil(self.rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate < 2 {
            return Err(ModelError::Config(format!("pooling rate {} must be at least 2", self.rate)));
        }
        if self.kind == PoolingKind::Convolution && (self.conv_kernel.is_multiple_of(2) || self.conv_stride == 0) {
            return Err(ModelError::Config(format!(
                "convolution pooling needs an odd kernel and positive stride, got {} / {}",
                self.conv_kernel, self.conv_stride
            )));
        }
        Ok(())
    }
}

/// One of the four embeddings that can feed the final embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedding {
    E1,
    E2,
    E3,
    E4,
}

impl Embedding {
    pub const ALL: [Embedding; 4] = [Embedding::E1, Embedding::E2, Embedding::E3, Embedding::E4];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Multi-level CLS aggregation: which stage embeddings form `e5` and how
/// the five stage losses are weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McaConfig {
    pub enabled: bool,
    pub mask: Vec<Embedding>,
    pub weights: [f32; 5],
}

impl Default for McaConfig {
    fn default() -> Self {
        McaConfig {
            enabled: true,
            mask: Embedding::ALL.to_vec(),
            weights: [4.0, 3.0, 2.0, 1.0, 1.0],
        }
    }
}

impl McaConfig {
    pub fn is_enabled(&self, e: Embedding) -> bool {
        self.mask.contains(&e)
    }

    /// Stage `k` (0-based, 0..5) contributes a loss.
    pub fn stage_active(&self, k: usize) -> bool {
        k == 4 || self.is_enabled(Embedding::ALL[k])
    }

    /// Weights over active stages scaled to sum to one; inactive stages get 0.
    pub fn normalized_weights(&self) -> Result<[f32; 5]> {
        let mut w = [0.0f32; 5];
        for (k, slot) in w.iter_mut().enumerate() {
            if self.stage_active(k) {
                *slot = self.weights[k];
            }
        }
        let total: f32 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(ModelError::Config(format!(
                "loss weights {:?} must be nonnegative and not all zero over enabled stages",
                self.weights
            )));
        }
        w.iter_mut().for_each(|v| *v /= total);
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if self.mask.is_empty() {
            return Err(ModelError::Config("mca.mask must enable at least one embedding".into()));
        }
        let mut sorted = self.mask.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.mask.len() {
            return Err(ModelError::Config(format!("mca.mask {:?} repeats an entry", self.mask)));
        }
        self.normalized_weights().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcSoftmaxConfig {
    pub alpha: f32,
    pub m0: f32,
    pub m1: f32,
    pub init_scale: f32,
}

impl Default for OcSoftmaxConfig {
    fn default() -> Self {
        OcSoftmaxConfig {
            alpha: 20.0,
            m0: 0.9,
            m1: 0.2,
            init_scale: 1.0,
        }
    }
}

impl OcSoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.m0 > self.m1) {
            return Err(ModelError::Config(format!(
                "oc-softmax needs alpha > 0 and m0 > m1, got alpha={} m0={} m1={}",
                self.alpha, self.m0, self.m1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub conformer: ConformerConfig,
    pub pooling: PoolingConfig,
    pub mca: McaConfig,
    pub oc_softmax: OcSoftmaxConfig,
}

impl ModelConfig {
    /// Plain Conformer: no pooling, no CLS tokens, one classifier on SeqPool.
    pub fn baseline() -> Self {
        ModelConfig {
            pooling: PoolingConfig {
                enabled: false,
                ..PoolingConfig::default()
            },
            mca: McaConfig {
                enabled: false,
                ..McaConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.conformer.validate()?;
        self.pooling.validate()?;
        self.mca.validate()?;
        self.oc_softmax.validate()?;
        if self.pooling.enabled {
            let mut l = self.conformer.num_tokens();
            for _ in 0..2 {
                if l < self.pooling.rate {
                    return Err(ModelError::Config(format!(
                        "{l} content tokens cannot be pooled at rate {}",
                        self.pooling.rate
                    )));
                }
                l = self.pooling.output_len(l);
            }
        }
        Ok(())
    }

    /// Loss weights per stage; only stage 5 counts without aggregation.
    pub fn loss_weights(&self) -> Result<[f32; 5]> {
        if self.mca.enabled {
            self.mca.normalized_weights()
        } else {
            Ok([0.0, 0.0, 0.0, 0.0, 1.0])
        }
    }
}
