//! Operations on token sequences laid out as `[batch, length, width]`.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

fn dims3(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [b, l, d] => Ok((b, l, d)),
        _ => Err(TensorError::dim(op, t.shape(), &[0, 0, 0])),
    }
}

fn check_rate(op: &'static str, len: usize, rate: usize) -> Result<()> {
    if rate < 2 {
        return Err(TensorError::config(op, format!("rate {rate} < 2")));
    }
    if len < rate {
        return Err(TensorError::contract(
            op,
            format!("length {len} shorter than rate {rate}"),
        ));
    }
    Ok(())
}

impl Tensor {
    /// Max over non-overlapping windows of `rate` tokens; the last window may be short.
    pub fn max_pool_seq(&self, rate: usize) -> Result<Tensor> {
        let (b, l, d) = dims3("max_pool_seq", self)?;
        check_rate("max_pool_seq", l, rate)?;
        let lo = l.div_ceil(rate);
        let x = self.data();
        let mut out = vec![0.0; b * lo * d];
        let mut arg = vec![0usize; b * lo * d];
        for bi in 0..b {
            for w in 0..lo {
                let start = w * rate;
                let end = (start + rate).min(l);
                let o = (bi * lo + w) * d;
                for c in 0..d {
                    let mut best = (bi * l + start) * d + c;
                    for t in start + 1..end {
                        let idx = (bi * l + t) * d + c;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out[o + c] = x[best];
                    arg[o + c] = best;
                }
            }
        }
        let n = self.numel();
        Ok(Tensor::from_op(
            out,
            vec![b, lo, d],
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; n];
                for (gv, &a) in g.iter().zip(&arg) {
                    gx[a] += gv;
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Mean over non-overlapping windows of `rate` tokens; a short last
    /// window is averaged over the tokens it has.
    pub fn avg_pool_seq(&self, rate: usize) -> Result<Tensor> {
        let (b, l, d) = dims3("avg_pool_seq", self)?;
        check_rate("avg_pool_seq", l, rate)?;
        let lo = l.div_ceil(rate);
        let x = self.data();
        let mut out = vec![0.0; b * lo * d];
        for bi in 0..b {
            for w in 0..lo {
                let start = w * rate;
                let end = (start + rate).min(l);
                let inv = 1.0 / (end - start) as f32;
                let o = &mut out[(bi * lo + w) * d..(bi * lo + w + 1) * d];
                for t in start..end {
                    let row = &x[(bi * l + t) * d..(bi * l + t + 1) * d];
                    o.iter_mut().zip(row).for_each(|(o, v)| *o += v * inv);
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![b, lo, d],
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; b * l * d];
                for bi in 0..b {
                    for w in 0..lo {
                        let start = w * rate;
                        let end = (start + rate).min(l);
                        let inv = 1.0 / (end - start) as f32;
                        let gr = &g[(bi * lo + w) * d..(bi * lo + w + 1) * d];
                        for t in start..end {
                            let dst = &mut gx[(bi * l + t) * d..(bi * l + t + 1) * d];
                            dst.iter_mut().zip(gr).for_each(|(a, g)| *a = g * inv);
                        }
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Selects, per batch row, the listed token positions (all lists the same length).
    pub fn gather_seq(&self, indices: &[Vec<usize>]) -> Result<Tensor> {
        let (b, l, d) = dims3("gather_seq", self)?;
        let k = indices.first().map_or(0, Vec::len);
        if indices.len() != b
            || k == 0
            || indices
                .iter()
                .any(|ix| ix.len() != k || ix.iter().any(|&i| i >= l))
        {
            return Err(TensorError::contract(
                "gather_seq",
                "index lists must be non-empty, equal-length and in range",
            ));
        }
        let mut out = Vec::with_capacity(b * k * d);
        for (bi, ix) in indices.iter().enumerate() {
            for &t in ix {
                out.extend_from_slice(&self.data()[(bi * l + t) * d..(bi * l + t + 1) * d]);
            }
        }
        let indices = indices.to_vec();
        Ok(Tensor::from_op(
            out,
            vec![b, k, d],
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; b * l * d];
                for (bi, ix) in indices.iter().enumerate() {
                    for (j, &t) in ix.iter().enumerate() {
                        let src = &g[(bi * k + j) * d..(bi * k + j + 1) * d];
                        let dst = &mut gx[(bi * l + t) * d..(bi * l + t + 1) * d];
                        dst.iter_mut().zip(src).for_each(|(a, s)| *a += s);
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Multiplies every token `x[b, l, :]` by the scalar `s[b, l]`.
    pub fn scale_rows(&self, s: &Tensor) -> Result<Tensor> {
        let (b, l, d) = dims3("scale_rows", self)?;
        if s.shape() != [b, l] {
            return Err(TensorError::dim("scale_rows", self.shape(), s.shape()));
        }
        let mut out = self.data().to_vec();
        for (row, &sv) in out.chunks_exact_mut(d).zip(s.data()) {
            row.iter_mut().for_each(|v| *v *= sv);
        }
        let (x, sc) = (self.clone(), s.clone());
        Ok(Tensor::from_op(
            out,
            vec![b, l, d],
            vec![self.clone(), s.clone()],
            move |g, _| {
                let gx = x.requires_grad().then(|| {
                    let mut gx = g.to_vec();
                    for (row, &sv) in gx.chunks_exact_mut(d).zip(sc.data()) {
                        row.iter_mut().for_each(|v| *v *= sv);
                    }
                    gx
                });
                let gs = sc.requires_grad().then(|| {
                    g.chunks_exact(d)
                        .zip(x.data().chunks_exact(d))
                        .map(|(gr, xr)| gr.iter().zip(xr).map(|(a, b)| a * b).sum())
                        .collect()
                });
                vec![gx, gs]
            },
        ))
    }

    /// Sliding windows over time: `[B, L, d] -> [B, L', k·d]` with zero
    /// padding `pad` on both ends and `L' = (L + 2·pad − k) / stride + 1`.
    pub fn unfold_seq(&self, kernel: usize, stride: usize, pad: usize) -> Result<Tensor> {
        let (b, l, d) = dims3("unfold_seq", self)?;
        if kernel == 0 || stride == 0 || l + 2 * pad < kernel {
            return Err(TensorError::dim(
                "unfold_seq",
                self.shape(),
                &[kernel, stride, pad],
            ));
        }
        let lo = (l + 2 * pad - kernel) / stride + 1;
        let width = kernel * d;
        let mut out = vec![0.0; b * lo * width];
        let x = self.data();
        for bi in 0..b {
            for t in 0..lo {
                for j in 0..kernel {
                    let src = (t * stride + j) as isize - pad as isize;
                    if src < 0 || src as usize >= l {
                        continue;
                    }
                    let src = src as usize;
                    let dst = (bi * lo + t) * width + j * d;
                    out[dst..dst + d]
                        .copy_from_slice(&x[(bi * l + src) * d..(bi * l + src + 1) * d]);
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![b, lo, width],
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; b * l * d];
                for bi in 0..b {
                    for t in 0..lo {
                        for j in 0..kernel {
                            let src = (t * stride + j) as isize - pad as isize;
                            if src < 0 || src as usize >= l {
                                continue;
                            }
                            let src = src as usize;
                            let from = (bi * lo + t) * width + j * d;
                            let dst = &mut gx[(bi * l + src) * d..(bi * l + src + 1) * d];
                            dst.iter_mut()
                                .zip(&g[from..from + d])
                                .for_each(|(a, v)| *a += v);
                        }
                    }
                }
                vec![Some(gx)]
            },
        ))
    }
}
