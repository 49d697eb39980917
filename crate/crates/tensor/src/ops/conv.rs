use crate::error::{Result, TensorError};
use crate::ops::linalg::gemm;
use crate::tensor::Tensor;

#[derive(Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn cols_rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }

    /// Visits `(col_row, position, input_offset)` for every in-bounds tap.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for ci in 0..self.c {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= self.h {
                            continue;
                        }
                        for ox in 0..self.wo {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix < 0 || ix as usize >= self.w {
                                continue;
                            }
                            f(
                                row,
                                oy * self.wo + ox,
                                (ci * self.h + iy as usize) * self.w + ix as usize,
                            );
                        }
                    }
                }
            }
        }
    }

    fn im2col(&self, x: &[f32], cols: &mut [f32]) {
        cols.iter_mut().for_each(|v| *v = 0.0);
        let p = self.positions();
        self.for_each_tap(|row, pos, src| cols[row * p + pos] = x[src]);
    }

    fn col2im(&self, cols: &[f32], gx: &mut [f32]) {
        let p = self.positions();
        self.for_each_tap(|row, pos, dst| gx[dst] += cols[row * p + pos]);
    }
}

impl Tensor {
    /// 2-D convolution of `[B, C, H, W]` by `[O, C, kh, kw]` kernels with a
    /// shared stride and zero padding on both spatial axes.
    pub fn conv2d(
        &self,
        kernels: &Tensor,
        bias: Option<&Tensor>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor> {
        let (xs, ks) = (self.shape(), kernels.shape());
        let (&[b, c, h, w], &[o, kc, kh, kw]) = (xs, ks) else {
            return Err(TensorError::dim("conv2d", xs, ks));
        };
        if kc != c || stride == 0 {
            return Err(TensorError::dim("conv2d", xs, ks));
        }
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(TensorError::dim("conv2d", xs, ks));
        }
        if let Some(bt) = bias {
            if bt.shape() != [o] {
                return Err(TensorError::dim("conv2d(bias)", ks, bt.shape()));
            }
        }
        let geom = Geom {
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad: padding,
            ho: (h + 2 * padding - kh) / stride + 1,
            wo: (w + 2 * padding - kw) / stride + 1,
        };
        let (rows, p) = (geom.cols_rows(), geom.positions());
        let in_size = c * h * w;
        let out_size = o * p;
        let mut out = vec![0.0; b * out_size];
        let mut cols = vec![0.0; rows * p];
        for bi in 0..b {
            geom.im2col(&self.data()[bi * in_size..(bi + 1) * in_size], &mut cols);
            let dst = &mut out[bi * out_size..(bi + 1) * out_size];
            if let Some(bt) = bias {
                for (oc, chunk) in dst.chunks_exact_mut(p).enumerate() {
                    chunk.iter_mut().for_each(|v| *v = bt.data()[oc]);
                }
            }
            gemm(
                o,
                rows,
                p,
                kernels.data(),
                (rows, 1),
                &cols,
                (p, 1),
                dst,
                (p, 1),
                true,
            );
        }
        let mut parents = vec![self.clone(), kernels.clone()];
        if let Some(bt) = bias {
            parents.push(bt.clone());
        }
        let (x, k) = (self.clone(), kernels.clone());
        let bias_rg = bias.map(Tensor::requires_grad);
        Ok(Tensor::from_op(
            out,
            vec![b, o, geom.ho, geom.wo],
            parents,
            move |g, _| {
                let mut gx = x.requires_grad().then(|| vec![0.0; b * in_size]);
                let mut gk = k.requires_grad().then(|| vec![0.0; k.numel()]);
                let mut cols = vec![0.0; rows * p];
                let mut gcols = vec![0.0; rows * p];
                for bi in 0..b {
                    let gout = &g[bi * out_size..(bi + 1) * out_size];
                    if let Some(gk) = gk.as_mut() {
                        geom.im2col(&x.data()[bi * in_size..(bi + 1) * in_size], &mut cols);
                        gemm(o, p, rows, gout, (p, 1), &cols, (1, p), gk, (rows, 1), true);
                    }
                    if let Some(gx) = gx.as_mut() {
                        gemm(
                            rows,
                            o,
                            p,
                            k.data(),
                            (1, rows),
                            gout,
                            (p, 1),
                            &mut gcols,
                            (p, 1),
                            false,
                        );
                        geom.col2im(&gcols, &mut gx[bi * in_size..(bi + 1) * in_size]);
                    }
                }
                let mut grads = vec![gx, gk];
                if let Some(rg) = bias_rg {
                    grads.push(rg.then(|| {
                        let mut gb = vec![0.0; o];
                        for chunk in g.chunks_exact(p).enumerate() {
                            gb[chunk.0 % o] += chunk.1.iter().sum::<f32>();
                        }
                        gb
                    }));
                }
                grads
            },
        ))
    }

    /// Per-channel temporal convolution of `[B, L, d]` by `[k, d]` taps with
    /// "same" zero padding; `k` must be odd.
    pub fn depthwise_conv1d(&self, kernel: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let (xs, ks) = (self.shape(), kernel.shape());
        let (&[b, l, d], &[k, kd]) = (xs, ks) else {
            return Err(TensorError::dim("depthwise_conv1d", xs, ks));
        };
        if kd != d {
            return Err(TensorError::dim("depthwise_conv1d", xs, ks));
        }
        if k % 2 == 0 {
            return Err(TensorError::config(
                "depthwise_conv1d",
                format!("kernel size {k} must be odd"),
            ));
        }
        if let Some(bt) = bias {
            if bt.shape() != [d] {
                return Err(TensorError::dim("depthwise_conv1d(bias)", ks, bt.shape()));
            }
        }
        let half = (k / 2) as isize;
        let x = self.data();
        let kv = kernel.data();
        let mut out = vec![0.0; b * l * d];
        for bi in 0..b {
            for t in 0..l {
                let dst = &mut out[(bi * l + t) * d..(bi * l + t + 1) * d];
                if let Some(bt) = bias {
                    dst.copy_from_slice(bt.data());
                }
                for j in 0..k {
                    let src = t as isize + j as isize - half;
                    if src < 0 || src as usize >= l {
                        continue;
                    }
                    let row = &x[(bi * l + src as usize) * d..(bi * l + src as usize + 1) * d];
                    let taps = &kv[j * d..(j + 1) * d];
                    for c in 0..d {
                        dst[c] += taps[c] * row[c];
                    }
                }
            }
        }
        let mut parents = vec![self.clone(), kernel.clone()];
        if let Some(bt) = bias {
            parents.push(bt.clone());
        }
        let (xt, kt) = (self.clone(), kernel.clone());
        let bias_rg = bias.map(Tensor::requires_grad);
        Ok(Tensor::from_op(out, vec![b, l, d], parents, move |g, _| {
            let x = xt.data();
            let kv = kt.data();
            let mut gx = xt.requires_grad().then(|| vec![0.0; b * l * d]);
            let mut gk = kt.requires_grad().then(|| vec![0.0; k * d]);
            for bi in 0..b {
                for t in 0..l {
                    let gr = &g[(bi * l + t) * d..(bi * l + t + 1) * d];
                    for j in 0..k {
                        let src = t as isize + j as isize - half;
                        if src < 0 || src as usize >= l {
                            continue;
                        }
                        let base = (bi * l + src as usize) * d;
                        if let Some(gx) = gx.as_mut() {
                            let taps = &kv[j * d..(j + 1) * d];
                            for c in 0..d {
                                gx[base + c] += taps[c] * gr[c];
                            }
                        }
                        if let Some(gk) = gk.as_mut() {
                            for c in 0..d {
                                gk[j * d + c] += x[base + c] * gr[c];
                            }
                        }
                    }
                }
            }
            let mut grads = vec![gx, gk];
            if let Some(rg) = bias_rg {
                grads.push(rg.then(|| {
                    let mut gb = vec![0.0; d];
                    for row in g.chunks_exact(d) {
                        gb.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    gb
                }));
            }
            grads
        }))
    }
}
