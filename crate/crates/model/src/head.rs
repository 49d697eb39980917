//! Hierarchical pooling, stage projections, classifiers and the OC-Softmax
//! loss.

use hmc_tensor::{Init, ParamId, ParamStore, Tensor};

use crate::config::{OcSoftmaxConfig, PoolingConfig, PoolingKind};
use crate::error::{ModelError, Result};
use crate::layers::Linear;

/// Down-samples content tokens `[B, L, d]` between stages.
#[derive(Debug, Clone)]
pub struct Pool {
    cfg: PoolingConfig,
    /// Score vector for top-k and gPool, `[d]`.
    score: Option<ParamId>,
    /// Projection for convolution pooling, `[k·d, d]`.
    conv: Option<Linear>,
}

impl Pool {
    pub fn new(init: &mut Init<'_>, name: &str, cfg: &PoolingConfig, d: usize) -> Result<Self> {
        let mut s = init.sub(name);
        let (score, conv) = match cfg.kind {
            PoolingKind::Max | PoolingKind::Average => (None, None),
            PoolingKind::TopK | PoolingKind::GPool => (Some(s.uniform_fan_in("score", &[d], d)?), None),
            PoolingKind::Convolution => (
                None,
                Some(Linear::new(&mut s, "conv", cfg.conv_kernel * d, d, true)?),
            ),
        };
        Ok(Pool {
            cfg: cfg.clone(),
            score,
            conv,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let l = x.shape()[1];
        let rate = self.cfg.rate;
        if l < rate {
            return Err(ModelError::Contract(format!("cannot pool {l} tokens at rate {rate}")));
        }
        match self.cfg.kind {
            PoolingKind::Max => Ok(x.max_pool_seq(rate)?),
            PoolingKind::Average => Ok(x.avg_pool_seq(rate)?),
            PoolingKind::TopK => {
                let p = store.get(self.score.expect("top-k score"));
                let scores = token_scores(x, p)?;
                let (kept, gate) = select_top(x, &scores, l.div_ceil(rate))?;
                Ok(kept.scale_rows(&gate.tanh())?)
            }
            PoolingKind::GPool => {
                let p = store.get(self.score.expect("gpool score"));
                let inv_norm = p.mul(p)?.sum().powf(-0.5);
                let scores = token_scores(x, &p.mul(&inv_norm)?)?;
                let (kept, gate) = select_top(x, &scores, l.div_ceil(rate))?;
                Ok(kept.scale_rows(&gate.sigmoid())?)
            }
            PoolingKind::Convolution => {
                let k = self.cfg.conv_kernel;
                let windows = x.unfold_seq(k, self.cfg.conv_stride, k / 2)?;
                self.conv.as_ref().expect("conv pooling").forward(store, &windows)
            }
        }
    }
}

/// `x·p` per token: `[B, L, d]`, `[d]` → `[B, L]`.
fn token_scores(x: &Tensor, p: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    let d = s[2];
    Ok(x.linear(&p.reshape(&[d, 1])?, None)?.reshape(&[s[0], s[1]])?)
}

/// The `k` highest-scoring tokens of each row, kept in their original order,
/// together with their scores `[B, k]`. Ties go to the earlier token.
fn select_top(x: &Tensor, scores: &Tensor, k: usize) -> Result<(Tensor, Tensor)> {
    let (b, l) = (scores.shape()[0], scores.shape()[1]);
    let indices: Vec<Vec<usize>> = scores
        .data()
        .chunks_exact(l)
        .map(|row| top_k_indices(row, k))
        .collect();
    let kept = x.gather_seq(&indices)?;
    let gate = scores.reshape(&[b, l, 1])?.gather_seq(&indices)?.reshape(&[b, k])?;
    Ok((kept, gate))
}

/// Indices of the `k` largest values in ascending index order.
pub fn top_k_indices(values: &[f32], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    keep
}

/// Affine-Swish-affine head producing one score per utterance.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub hidden: Linear,
    pub out: Linear,
}

impl Classifier {
    pub fn new(init: &mut Init<'_>, name: &str, d: usize) -> Result<Self> {
        let mut s = init.sub(name);
        Ok(Classifier {
            hidden: Linear::new(&mut s, "w1", d, d / 2, true)?,
            out: Linear::new(&mut s, "w2", d / 2, 1, false)?,
        })
    }

    /// `[B, d]` → `[B]`.
    pub fn forward(&self, store: &ParamStore, e: &Tensor) -> Result<Tensor> {
        let b = e.shape()[0];
        let h = self.hidden.forward(store, e)?.swish();
        Ok(self.out.forward(store, &h)?.reshape(&[b])?)
    }
}

/// Mean over the batch of `softplus(α·(m_y − ŵ·s)·(−1)^y)`, with `y = 0` for
/// bona-fide and `y = 1` for spoof.
pub fn oc_softmax(scores: &Tensor, scale: &Tensor, labels: &[u8], cfg: &OcSoftmaxConfig) -> Result<Tensor> {
    if scores.shape() != [labels.len()] {
        return Err(ModelError::Contract(format!(
            "{} labels for scores of shape {:?}",
            labels.len(),
            scores.shape()
        )));
    }
    let z = scores.mul(scale)?;
    let (a, c): (Vec<f32>, Vec<f32>) = labels
        .iter()
        .map(|&y| {
            if y == 0 {
                (-cfg.alpha, cfg.alpha * cfg.m0)
            } else {
                (cfg.alpha, -cfg.alpha * cfg.m1)
            }
        })
        .unzip();
    Ok(z.mul_add_const(&a, &c)?.softplus().mean())
}

/// `Σ w_k·L_k` with weights scaled to sum to one. Missing stages count zero.
pub fn total_loss(losses: &[Option<Tensor>; 5], weights: &[f32; 5]) -> Result<Tensor> {
    let sum: f32 = weights.iter().sum();
    if !(sum > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(ModelError::Config(format!("loss weights {weights:?} must be nonnegative and not all zero")));
    }
    let mut total: Option<Tensor> = None;
    for (loss, &w) in losses.iter().zip(weights) {
        let Some(loss) = loss else { continue };
        if w == 0.0 {
            continue;
        }
        let term = loss.scale(w / sum);
        total = Some(match total {
            Some(t) => t.add(&term)?,
            None => term,
        });
    }
    total.ok_or_else(|| ModelError::Config("no stage with positive weight has a loss".into()))
}
