use crate::error::{Result, TensorError};
use crate::ops::reduce::split_axis;
use crate::tensor::{numel_of, Tensor};

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != self.numel() || shape.contains(&0) {
            return Err(TensorError::dim("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op(
            self.data().to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            |g, _| vec![Some(g.to_vec())],
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank
            || axes
                .iter()
                .any(|&a| a >= rank || std::mem::replace(&mut seen[a], true))
        {
            return Err(TensorError::dim("permute", self.shape(), axes));
        }
        let in_shape = self.shape();
        let mut in_strides = vec![1usize; rank];
        for i in (0..rank.saturating_sub(1)).rev() {
            in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let n = self.numel();
        let mut src = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        for _ in 0..n {
            src.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>());
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                if idx[ax] < out_shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        let x = self.data();
        let data = src.iter().map(|&s| x[s]).collect();
        Ok(Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; n];
                for (gv, &s) in g.iter().zip(&src) {
                    gx[s] = *gv;
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Elements `start..end` along `axis`.
    pub fn slice_axis(&self, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        if axis >= self.rank() || start >= end || end > self.shape()[axis] {
            return Err(TensorError::config(
                "slice_axis",
                format!("range {start}..{end} on axis {axis} of {:?}", self.shape()),
            ));
        }
        let (outer, n, inner) = split_axis(self.shape(), axis);
        let len = end - start;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner;
            data.extend_from_slice(&self.data()[base + start * inner..base + end * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        let total = self.numel();
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; total];
                for o in 0..outer {
                    let base = o * n * inner;
                    gx[base + start * inner..base + end * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::contract("concat", "no inputs"))?;
        if axis >= first.rank() {
            return Err(TensorError::config(
                "concat",
                format!("axis {axis} for rank {}", first.rank()),
            ));
        }
        for p in parts {
            let ok = p.rank() == first.rank()
                && p.shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::dim("concat", first.shape(), p.shape()));
            }
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let extents: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = extents.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &e) in parts.iter().zip(&extents) {
                data.extend_from_slice(&p.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        let rg: Vec<bool> = parts.iter().map(Tensor::requires_grad).collect();
        Ok(Tensor::from_op(data, shape, parts.to_vec(), move |g, _| {
            let mut grads: Vec<Option<Vec<f32>>> = extents
                .iter()
                .zip(&rg)
                .map(|(&e, &r)| r.then(|| Vec::with_capacity(outer * e * inner)))
                .collect();
            let mut off = 0;
            for _ in 0..outer {
                for (gp, &e) in grads.iter_mut().zip(&extents) {
                    if let Some(gp) = gp {
                        gp.extend_from_slice(&g[off..off + e * inner]);
                    }
                    off += e * inner;
                }
            }
            grads
        }))
    }

    /// Repeats the whole tensor `n` times along a new leading axis.
    pub fn expand_leading(&self, n: usize) -> Tensor {
        let mut data = Vec::with_capacity(n * self.numel());
        for _ in 0..n {
            data.extend_from_slice(self.data());
        }
        let mut shape = vec![n];
        shape.extend_from_slice(self.shape());
        let m = self.numel();
        Tensor::from_op(data, shape, vec![self.clone()], move |g, _| {
            let mut gx = vec![0.0; m];
            for chunk in g.chunks_exact(m) {
                gx.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
            }
            vec![Some(gx)]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_transposes() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]).unwrap();
        let y = x.permute(&[1, 0]).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert!(x.permute(&[0, 0]).is_err());
    }

    #[test]
    fn slice_and_concat_round_trip() {
        let x = Tensor::param((0..24).map(|v| v as f32).collect(), &[2, 4, 3]).unwrap();
        let a = x.slice_axis(1, 0, 1).unwrap();
        let b = x.slice_axis(1, 1, 4).unwrap();
        let y = Tensor::concat(&[a, b], 1).unwrap();
        assert_eq!(y.data(), x.data());
        y.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 24]);
    }

    #[test]
    fn expand_leading_folds_grad() {
        let c = Tensor::param(vec![1.0, 2.0], &[1, 2]).unwrap();
        let e = c.expand_leading(3);
        assert_eq!(e.shape(), &[3, 1, 2]);
        e.sum().backward().unwrap();
        assert_eq!(c.grad().unwrap(), vec![3.0, 3.0]);
    }
}
