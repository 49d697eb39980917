use crate::error::{Result, TensorError};
use crate::ops::linalg::gemm;
use crate::tensor::Tensor;

impl Tensor {
    /// Scaled dot-product attention over `[B, L, d]` projections split into
    /// `heads` contiguous slices of width `d / heads`. Every position attends
    /// to every position.
    pub fn multi_head_attention(
        q: &Tensor,
        k: &Tensor,
        v: &Tensor,
        heads: usize,
    ) -> Result<Tensor> {
        let s = q.shape();
        if s.len() != 3 || k.shape() != s || v.shape() != s {
            return Err(TensorError::dim("multi_head_attention", s, k.shape()));
        }
        if heads == 0 || !s[2].is_multiple_of(heads) {
            return Err(TensorError::config(
                "multi_head_attention",
                format!("width {} not divisible by {heads} heads", s[2]),
            ));
        }
        let (b, l, d) = (s[0], s[1], s[2]);
        let dh = d / heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let mut probs = vec![0.0; b * heads * l * l];
        let mut out = vec![0.0; b * l * d];
        for bi in 0..b {
            for h in 0..heads {
                let base = bi * l * d + h * dh;
                let p = &mut probs[(bi * heads + h) * l * l..(bi * heads + h + 1) * l * l];
                // scores = Q Kᵀ
                gemm(
                    l,
                    dh,
                    l,
                    &q.data()[base..],
                    (d, 1),
                    &k.data()[base..],
                    (1, d),
                    p,
                    (l, 1),
                    false,
                );
                for row in p.chunks_exact_mut(l) {
                    let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v * scale));
                    let mut total = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v * scale - max).exp();
                        total += *v;
                    }
                    row.iter_mut().for_each(|v| *v /= total);
                }
                gemm(
                    l,
                    l,
                    dh,
                    p,
                    (l, 1),
                    &v.data()[base..],
                    (d, 1),
                    &mut out[base..],
                    (d, 1),
                    false,
                );
            }
        }
        let (qt, kt, vt) = (q.clone(), k.clone(), v.clone());
        Ok(Tensor::from_op(
            out,
            vec![b, l, d],
            vec![q.clone(), k.clone(), v.clone()],
            move |g, _| {
                let mut gq = vec![0.0; b * l * d];
                let mut gk = vec![0.0; b * l * d];
                let mut gv = vec![0.0; b * l * d];
                let mut gp = vec![0.0; l * l];
                for bi in 0..b {
                    for h in 0..heads {
                        let base = bi * l * d + h * dh;
                        let p = &probs[(bi * heads + h) * l * l..(bi * heads + h + 1) * l * l];
                        let go = &g[base..];
                        // dV = Pᵀ dO
                        gemm(
                            l,
                            l,
                            dh,
                            p,
                            (1, l),
                            go,
                            (d, 1),
                            &mut gv[base..],
                            (d, 1),
                            false,
                        );
                        // dP = dO Vᵀ
                        gemm(
                            l,
                            dh,
                            l,
                            go,
                            (d, 1),
                            &vt.data()[base..],
                            (1, d),
                            &mut gp,
                            (l, 1),
                            false,
                        );
                        for (gr, pr) in gp.chunks_exact_mut(l).zip(p.chunks_exact(l)) {
                            let dot: f32 = gr.iter().zip(pr).map(|(a, b)| a * b).sum();
                            for (gv, pv) in gr.iter_mut().zip(pr) {
                                *gv = pv * (*gv - dot) * scale;
                            }
                        }
                        // dQ = dS K, dK = dSᵀ Q
                        gemm(
                            l,
                            l,
                            dh,
                            &gp,
                            (l, 1),
                            &kt.data()[base..],
                            (d, 1),
                            &mut gq[base..],
                            (d, 1),
                            false,
                        );
                        gemm(
                            l,
                            l,
                            dh,
                            &gp,
                            (1, l),
                            &qt.data()[base..],
                            (d, 1),
                            &mut gk[base..],
                            (d, 1),
                            false,
                        );
                    }
                }
                vec![Some(gq), Some(gk), Some(gv)]
            },
        ))
    }
}
