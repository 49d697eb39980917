//! The full detector: encoder, CLS lifecycle across three stages, and the
//! five scoring heads.
//!
//! ```text
//! tokens = [cls1, cls2, cls3, t1 … tL]           L = T/2ⁿ
//! blocks 1..6; at the end of stage s ∈ {1, 2}:
//!     e_s   = stage_embed_s(CLS[0])
//!     tokens = CLS[1:] ++ pool(content)
//! at the end of stage 3:
//!     e3 = stage_embed_3(CLS[0]),  e4 = SeqPool(content)
//! e5 = fuse(concat(enabled e1..e4));  Score_k = classifier_k(e_k)
//! ```
//!
//! Head parameter names:
//!
//! ```text
//! pos_emb, cls
//! pool.{1,2}.score | pool.{1,2}.conv.{weight,bias}
//! stage_embed.{1,2,3}.{weight,bias}
//! seqpool.{weight,bias}
//! fuse.{weight,bias}
//! classifier.{1..5}.{w1.weight,w1.bias,w2.weight}
//! oc.{1..5}.scale
//! ```
//!
//! With aggregation disabled the model is a plain Conformer: no CLS tokens,
//! SeqPool over the final tokens and a single classifier in slot 5.

use hmc_tensor::rng::{self, Rng};
use hmc_tensor::{no_grad, Init, ParamId, ParamStore, Tensor};

use crate::config::{Embedding, ModelConfig};
use crate::conformer::{ConformerBlock, SeqPool, Subsample, TokenSequence};
use crate::error::{ModelError, Result};
use crate::head::{oc_softmax, total_loss, Classifier, Pool};
use crate::layers::{ForwardCtx, Linear};

pub const NUM_CLS: usize = 3;
pub const NUM_STAGES: usize = 5;

/// Token counts around each block boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    /// 0 for the sequence entering block 1.
    pub block: usize,
    pub cls_before: usize,
    pub content_before: usize,
    pub cls_after: usize,
    pub content_after: usize,
}

impl TraceEntry {
    pub fn len_before(&self) -> usize {
        self.cls_before + self.content_before
    }

    pub fn len_after(&self) -> usize {
        self.cls_after + self.content_after
    }
}

/// Per-stage embeddings `[B, d]` and raw scores `[B]`. Slots 0..4 hold
/// e1..e4 / Score1..Score4, slot 4 holds e5 / Score5.
pub struct ForwardOutput {
    pub embeddings: [Option<Tensor>; NUM_STAGES],
    pub scores: [Option<Tensor>; NUM_STAGES],
    pub trace: Vec<TraceEntry>,
}

pub struct HmConformer {
    cfg: ModelConfig,
    subsample: Subsample,
    pos_emb: Option<ParamId>,
    cls: Option<ParamId>,
    blocks: Vec<ConformerBlock>,
    pools: Vec<Pool>,
    stage_embed: [Option<Linear>; NUM_CLS],
    seqpool: Option<SeqPool>,
    fuse: Option<Linear>,
    classifiers: [Option<Classifier>; NUM_STAGES],
    oc_scale: [Option<ParamId>; NUM_STAGES],
}

impl HmConformer {
    pub fn new(cfg: ModelConfig, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let c = &cfg.conformer;
        let d = c.d;
        let mut init = Init::new(store, rng);
        let subsample = Subsample::new(&mut init, c)?;
        let pos_emb = if c.positional_embedding {
            Some(init.normal("pos_emb", &[c.num_tokens(), d], 0.02)?)
        } else {
            None
        };
        let mca = cfg.mca.enabled;
        let cls = if mca {
            Some(init.normal("cls", &[NUM_CLS, d], 0.02)?)
        } else {
            None
        };
        let mut blocks = Vec::with_capacity(c.n_blocks);
        {
            let mut b = init.sub("blocks");
            for i in 0..c.n_blocks {
                blocks.push(ConformerBlock::new(&mut b.sub(i), c)?);
            }
        }
        let mut pools = Vec::new();
        if cfg.pooling.enabled {
            let mut p = init.sub("pool");
            for s in 1..=2 {
                pools.push(Pool::new(&mut p, &s.to_string(), &cfg.pooling, d)?);
            }
        }
        let enabled = |e: Embedding| mca && cfg.mca.is_enabled(e);
        let mut stage_embed: [Option<Linear>; NUM_CLS] = Default::default();
        {
            let mut s = init.sub("stage_embed");
            for (j, slot) in stage_embed.iter_mut().enumerate() {
                if enabled(Embedding::ALL[j]) {
                    *slot = Some(Linear::new(&mut s, &(j + 1).to_string(), d, d, true)?);
                }
            }
        }
        let seqpool = if !mca || enabled(Embedding::E4) {
            Some(SeqPool::new(&mut init, d)?)
        } else {
            None
        };
        let fuse = if mca {
            Some(Linear::new(&mut init, "fuse", cfg.mca.mask.len() * d, d, true)?)
        } else {
            None
        };
        let mut classifiers: [Option<Classifier>; NUM_STAGES] = Default::default();
        let mut oc_scale: [Option<ParamId>; NUM_STAGES] = Default::default();
        {
            let active: Vec<bool> = (0..NUM_STAGES)
                .map(|k| if mca { cfg.mca.stage_active(k) } else { k == 4 })
                .collect();
            let mut cl = init.sub("classifier");
            for k in 0..NUM_STAGES {
                if active[k] {
                    classifiers[k] = Some(Classifier::new(&mut cl, &(k + 1).to_string(), d)?);
                }
            }
            let mut oc = init.sub("oc");
            for k in 0..NUM_STAGES {
                if active[k] {
                    oc_scale[k] = Some(oc.sub(k + 1).constant("scale", &[1], cfg.oc_softmax.init_scale)?);
                }
            }
        }
        Ok(HmConformer {
            cfg,
            subsample,
            pos_emb,
            cls,
            blocks,
            pools,
            stage_embed,
            seqpool,
            fuse,
            classifiers,
            oc_scale,
        })
    }

    /// Fresh parameters drawn from the `init` stream of `seed`.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let mut r = rng::stream(seed, "init");
        let model = Self::new(cfg, &mut store, &mut r)?;
        Ok((model, store))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn has_stage(&self, k: usize) -> bool {
        self.classifiers[k].is_some()
    }

    /// Prepends the three CLS tokens to a CLS-free sequence.
    pub fn attach_cls(&self, store: &ParamStore, h: &TokenSequence) -> Result<TokenSequence> {
        if h.cls_count != 0 {
            return Err(ModelError::Contract(format!(
                "CLS tokens already attached ({} present)",
                h.cls_count
            )));
        }
        let id = self
            .cls
            .ok_or_else(|| ModelError::Contract("model has no CLS tokens".into()))?;
        let b = h.tokens.shape()[0];
        let cls = store.get(id).expand_leading(b);
        TokenSequence::new(Tensor::concat(&[cls, h.tokens.clone()], 1)?, NUM_CLS)
    }

    /// Sub-sampled, tokenised input with positions added, `[B, L, d]`.
    pub fn tokenize(&self, store: &ParamStore, x: &Tensor) -> Result<TokenSequence> {
        let mut h = self.subsample.forward(store, x)?;
        if let Some(p) = self.pos_emb {
            h = h.add(store.get(p))?;
        }
        TokenSequence::new(h, 0)
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor, ctx: &mut ForwardCtx) -> Result<ForwardOutput> {
        let mut seq = self.tokenize(store, x)?;
        if self.cls.is_some() {
            seq = self.attach_cls(store, &seq)?;
        }
        let mut embeddings: [Option<Tensor>; NUM_STAGES] = Default::default();
        let mut trace = vec![TraceEntry {
            block: 0,
            cls_before: seq.cls_count,
            content_before: seq.content_len(),
            cls_after: seq.cls_count,
            content_after: seq.content_len(),
        }];
        let ends = self.cfg.conformer.stage_ends();
        let mut stage = 0;
        let mut g = None;
        for (i, block) in self.blocks.iter().enumerate() {
            let n = i + 1;
            seq = TokenSequence::new(block.forward(store, &seq.tokens, ctx)?, seq.cls_count)?;
            let (cls_before, content_before) = (seq.cls_count, seq.content_len());
            while stage < 3 && ends[stage] == n {
                if seq.cls_count > 0 {
                    let cls0 = seq.tokens.slice_axis(1, 0, 1)?;
                    let cls0 = cls0.reshape(&[cls0.shape()[0], cls0.shape()[2]])?;
                    if let Some(proj) = &self.stage_embed[stage] {
                        embeddings[stage] = Some(proj.forward(store, &cls0)?);
                    }
                }
                if stage < 2 {
                    let rest = if seq.cls_count > 1 {
                        Some(seq.tokens.slice_axis(1, 1, seq.cls_count)?)
                    } else {
                        None
                    };
                    let mut content = seq.content()?;
                    if let Some(pool) = self.pools.get(stage) {
                        content = pool.forward(store, &content)?;
                    }
                    let cls_left = seq.cls_count.saturating_sub(1);
                    let tokens = match rest {
                        Some(r) => Tensor::concat(&[r, content], 1)?,
                        None => content,
                    };
                    seq = TokenSequence::new(tokens, cls_left)?;
                } else {
                    if let Some(sp) = &self.seqpool {
                        g = Some(sp.forward(store, &seq.content()?)?);
                    }
                    seq = TokenSequence::new(seq.content()?, 0)?;
                }
                stage += 1;
            }
            trace.push(TraceEntry {
                block: n,
                cls_before,
                content_before,
                cls_after: seq.cls_count,
                content_after: seq.content_len(),
            });
        }
        if let Some(fuse) = &self.fuse {
            embeddings[3] = g;
            let parts: Vec<Tensor> = Embedding::ALL
                .iter()
                .filter(|e| self.cfg.mca.is_enabled(**e))
                .map(|e| embeddings[e.index()].clone().expect("enabled embedding computed"))
                .collect();
            embeddings[4] = Some(fuse.forward(store, &Tensor::concat(&parts, 1)?)?);
        } else {
            embeddings[4] = g;
        }
        let mut scores: [Option<Tensor>; NUM_STAGES] = Default::default();
        for k in 0..NUM_STAGES {
            if let (Some(c), Some(e)) = (&self.classifiers[k], &embeddings[k]) {
                scores[k] = Some(c.forward(store, e)?);
            }
        }
        Ok(ForwardOutput {
            embeddings,
            scores,
            trace,
        })
    }

    /// Per-stage OC-Softmax losses; `labels[i]` is 0 for bona-fide, 1 for spoof.
    pub fn stage_losses(
        &self,
        store: &ParamStore,
        out: &ForwardOutput,
        labels: &[u8],
    ) -> Result<[Option<Tensor>; NUM_STAGES]> {
        let mut losses: [Option<Tensor>; NUM_STAGES] = Default::default();
        for k in 0..NUM_STAGES {
            if let (Some(s), Some(w)) = (&out.scores[k], self.oc_scale[k]) {
                losses[k] = Some(oc_softmax(s, store.get(w), labels, &self.cfg.oc_softmax)?);
            }
        }
        Ok(losses)
    }

    /// Weighted total loss and its per-stage parts.
    pub fn loss(
        &self,
        store: &ParamStore,
        out: &ForwardOutput,
        labels: &[u8],
    ) -> Result<(Tensor, [Option<Tensor>; NUM_STAGES])> {
        let losses = self.stage_losses(store, out, labels)?;
        let total = total_loss(&losses, &self.cfg.loss_weights()?)?;
        Ok((total, losses))
    }

    /// `ŵ5·Score5`; larger means more bona-fide.
    pub fn decision_scores(&self, store: &ParamStore, out: &ForwardOutput) -> Vec<f32> {
        let s = out.scores[4].as_ref().expect("final score");
        let w = store.get(self.oc_scale[4].expect("final scale")).item();
        s.data().iter().map(|v| w * v).collect()
    }

    /// Eval-mode decision scores for a batch `[B, frames, features]`.
    pub fn score(&self, store: &ParamStore, x: &Tensor) -> Result<Vec<f32>> {
        no_grad(|| {
            let out = self.forward(store, x, &mut ForwardCtx::eval())?;
            Ok(self.decision_scores(store, &out))
        })
    }
}
