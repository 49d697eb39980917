use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Strided `C = A·B (+ C)` with `A: m×k`, `B: k×n`, `C: m×n`.
///
/// Each operand is given as a slice plus (row stride, column stride), so
/// transposed views cost nothing.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    c: &mut [f32],
    (rsc, csc): (usize, usize),
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(
        (m - 1) * rsc + (n - 1) * csc < c.len(),
        "gemm: C out of bounds"
    );
    if k == 0 {
        if !accumulate {
            for i in 0..m {
                for j in 0..n {
                    c[i * rsc + j * csc] = 0.0;
                }
            }
        }
        return;
    }
    assert!(
        (m - 1) * rsa + (k - 1) * csa < a.len(),
        "gemm: A out of bounds"
    );
    assert!(
        (k - 1) * rsb + (n - 1) * csb < b.len(),
        "gemm: B out of bounds"
    );
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

impl Tensor {
    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), rhs.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::dim("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.data(),
            (k, 1),
            rhs.data(),
            (n, 1),
            &mut out,
            (n, 1),
            false,
        );
        let (a, b) = (self.clone(), rhs.clone());
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            vec![self.clone(), rhs.clone()],
            move |g, _| {
                let ga = a.requires_grad().then(|| {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g, (n, 1), b.data(), (1, n), &mut ga, (k, 1), false);
                    ga
                });
                let gb = b.requires_grad().then(|| {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, a.data(), (1, k), g, (n, 1), &mut gb, (n, 1), false);
                    gb
                });
                vec![ga, gb]
            },
        ))
    }

    /// `x·W + b` applied over the last axis; `weight` is `[in, out]`.
    pub fn linear(&self, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let sx = self.shape();
        let sw = weight.shape();
        let fan_in = *sx.last().expect("rank >= 1");
        if sw.len() != 2 || sw[0] != fan_in {
            return Err(TensorError::dim("linear", sx, sw));
        }
        let fan_out = sw[1];
        if let Some(b) = bias {
            if b.shape() != [fan_out] {
                return Err(TensorError::dim("linear(bias)", sw, b.shape()));
            }
        }
        let rows = self.numel() / fan_in;
        let mut out = vec![0.0; rows * fan_out];
        if let Some(b) = bias {
            for row in out.chunks_exact_mut(fan_out) {
                row.copy_from_slice(b.data());
            }
        }
        gemm(
            rows,
            fan_in,
            fan_out,
            self.data(),
            (fan_in, 1),
            weight.data(),
            (fan_out, 1),
            &mut out,
            (fan_out, 1),
            true,
        );
        let mut shape = sx.to_vec();
        *shape.last_mut().unwrap() = fan_out;
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let (x, w) = (self.clone(), weight.clone());
        let bias_rg = bias.map(Tensor::requires_grad);
        Ok(Tensor::from_op(out, shape, parents, move |g, _| {
            let gx = x.requires_grad().then(|| {
                let mut gx = vec![0.0; rows * fan_in];
                gemm(
                    rows,
                    fan_out,
                    fan_in,
                    g,
                    (fan_out, 1),
                    w.data(),
                    (1, fan_out),
                    &mut gx,
                    (fan_in, 1),
                    false,
                );
                gx
            });
            let gw = w.requires_grad().then(|| {
                let mut gw = vec![0.0; fan_in * fan_out];
                gemm(
                    fan_in,
                    rows,
                    fan_out,
                    x.data(),
                    (1, fan_in),
                    g,
                    (fan_out, 1),
                    &mut gw,
                    (fan_out, 1),
                    false,
                );
                gw
            });
            let mut grads = vec![gx, gw];
            if let Some(rg) = bias_rg {
                grads.push(rg.then(|| {
                    let mut gb = vec![0.0; fan_out];
                    for row in g.chunks_exact(fan_out) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    gb
                }));
            }
            grads
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul() {
        let i = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        assert_eq!(i.matmul(&x).unwrap().data(), x.data());
    }

    #[test]
    fn row_times_column() {
        let a = Tensor::new(vec![1.0, 0.0], &[1, 2]).unwrap();
        let b = Tensor::new(vec![0.0, 5.0], &[2, 1]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data(), &[0.0]);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn grad_of_sum_wrt_a_is_row_sums_of_b() {
        let a = Tensor::param(vec![0.5; 12], &[3, 4]).unwrap();
        let bvals: Vec<f32> = (0..8).map(|i| i as f32 * 0.25 - 1.0).collect();
        let b = Tensor::new(bvals.clone(), &[4, 2]).unwrap();
        a.matmul(&b).unwrap().sum().backward().unwrap();
        let ga = a.grad().unwrap();
        for r in 0..3 {
            for c in 0..4 {
                let row_sum = bvals[c * 2] + bvals[c * 2 + 1];
                assert!((ga[r * 4 + c] - row_sum).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn linear_over_batched_rows() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], &[2, 2, 2]).unwrap();
        let w = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        let b = Tensor::new(vec![0.5, -0.5], &[2]).unwrap();
        let y = x.linear(&w, Some(&b)).unwrap();
        assert_eq!(y.shape(), &[2, 2, 2]);
        assert_eq!(y.data(), &[1.5, 1.5, 3.5, 3.5, 5.5, 5.5, 7.5, 7.5]);
    }
}
