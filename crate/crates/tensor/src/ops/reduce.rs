use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// (outer, extent, inner) decomposition of a shape around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Tensor {
    /// Sum of all elements as a one-element tensor.
    pub fn sum(&self) -> Tensor {
        let s: f32 = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(vec![s], vec![1], vec![self.clone()], move |g, _| {
            vec![Some(vec![g[0]; n])]
        })
    }

    pub fn mean(&self) -> Tensor {
        self.sum().scale(1.0 / self.numel() as f32)
    }

    /// Softmax along `axis`, stabilised by subtracting each slice's max.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(TensorError::config(
                "softmax",
                format!("axis {axis} for rank {}", self.rank()),
            ));
        }
        let (outer, n, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * n * inner + j * inner + i;
                let max = (0..n).map(|j| x[at(j)]).fold(f32::NEG_INFINITY, f32::max);
                let mut total = 0.0;
                for j in 0..n {
                    let e = (x[at(j)] - max).exp();
                    out[at(j)] = e;
                    total += e;
                }
                for j in 0..n {
                    out[at(j)] /= total;
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, y| {
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let dot: f32 = (0..n).map(|j| g[at(j)] * y[at(j)]).sum();
                        for j in 0..n {
                            gx[at(j)] = y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    /// For `self: [B, L, d]` and `weights: [B, L]`, returns `Σ_l w[b,l]·x[b,l,:]` as `[B, d]`.
    pub fn weighted_sum_seq(&self, weights: &Tensor) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 3 || weights.shape() != [s[0], s[1]] {
            return Err(TensorError::dim("weighted_sum_seq", s, weights.shape()));
        }
        let (b, l, d) = (s[0], s[1], s[2]);
        let mut out = vec![0.0; b * d];
        for bi in 0..b {
            let o = &mut out[bi * d..(bi + 1) * d];
            for li in 0..l {
                let w = weights.data()[bi * l + li];
                let row = &self.data()[(bi * l + li) * d..(bi * l + li + 1) * d];
                o.iter_mut().zip(row).for_each(|(o, x)| *o += w * x);
            }
        }
        let (x, w) = (self.clone(), weights.clone());
        Ok(Tensor::from_op(
            out,
            vec![b, d],
            vec![self.clone(), weights.clone()],
            move |g, _| {
                let gx = x.requires_grad().then(|| {
                    let mut gx = vec![0.0; b * l * d];
                    for bi in 0..b {
                        let gr = &g[bi * d..(bi + 1) * d];
                        for li in 0..l {
                            let wv = w.data()[bi * l + li];
                            let dst = &mut gx[(bi * l + li) * d..(bi * l + li + 1) * d];
                            dst.iter_mut().zip(gr).for_each(|(d, g)| *d = wv * g);
                        }
                    }
                    gx
                });
                let gw = w.requires_grad().then(|| {
                    let mut gw = vec![0.0; b * l];
                    for bi in 0..b {
                        let gr = &g[bi * d..(bi + 1) * d];
                        for li in 0..l {
                            let row = &x.data()[(bi * l + li) * d..(bi * l + li + 1) * d];
                            gw[bi * l + li] = row.iter().zip(gr).map(|(x, g)| x * g).sum();
                        }
                    }
                    gw
                });
                vec![gx, gw]
            },
        ))
    }
}
