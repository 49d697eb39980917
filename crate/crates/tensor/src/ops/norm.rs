use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn is_train(self) -> bool {
        self == Mode::Train
    }
}

/// Per-channel statistics of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f32>,
    /// Unbiased (n − 1) variance, the estimator blended into running stats.
    pub var: Vec<f32>,
}

/// Running statistics carried by a batch-norm layer between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
}

impl BatchNormState {
    pub fn new(channels: usize, momentum: f32) -> Self {
        BatchNormState {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum,
        }
    }

    /// `running ← (1 − momentum)·running + momentum·batch`.
    pub fn absorb(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(&stats.var) {
            *r = (1.0 - m) * *r + m * b;
        }
    }
}

fn check_affine(op: &'static str, x: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<usize> {
    let d = *x.shape().last().expect("rank >= 1");
    if gain.shape() != [d] {
        return Err(TensorError::dim(op, x.shape(), gain.shape()));
    }
    if bias.shape() != [d] {
        return Err(TensorError::dim(op, x.shape(), bias.shape()));
    }
    Ok(d)
}

impl Tensor {
    /// Normalises each row over the last axis, then applies `gain`, `bias`.
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f32) -> Result<Tensor> {
        let d = check_affine("layer_norm", self, gain, bias)?;
        let rows = self.numel() / d;
        let mut xhat = vec![0.0; self.numel()];
        let mut rstd = vec![0.0; rows];
        for (r, (xr, hr)) in self
            .data()
            .chunks_exact(d)
            .zip(xhat.chunks_exact_mut(d))
            .enumerate()
        {
            let mean = xr.iter().sum::<f32>() / d as f32;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
            let rs = 1.0 / (var + eps).sqrt();
            rstd[r] = rs;
            hr.iter_mut()
                .zip(xr)
                .for_each(|(h, v)| *h = (v - mean) * rs);
        }
        let (gd, bd) = (gain.data(), bias.data());
        let out = xhat
            .chunks_exact(d)
            .flat_map(|hr| hr.iter().zip(gd).zip(bd).map(|((h, g), b)| h * g + b))
            .collect();
        let (x, gain_t, bias_t) = (self.clone(), gain.clone(), bias.clone());
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone(), gain.clone(), bias.clone()],
            move |g, _| {
                let gd = gain_t.data();
                let gx = x.requires_grad().then(|| {
                    let mut gx = vec![0.0; xhat.len()];
                    let mut gh = vec![0.0; d];
                    for (r, ((gr, hr), dst)) in g
                        .chunks_exact(d)
                        .zip(xhat.chunks_exact(d))
                        .zip(gx.chunks_exact_mut(d))
                        .enumerate()
                    {
                        for i in 0..d {
                            gh[i] = gr[i] * gd[i];
                        }
                        let m1 = gh.iter().sum::<f32>() / d as f32;
                        let m2 = gh.iter().zip(hr).map(|(a, b)| a * b).sum::<f32>() / d as f32;
                        for i in 0..d {
                            dst[i] = rstd[r] * (gh[i] - m1 - hr[i] * m2);
                        }
                    }
                    gx
                });
                let ggain = gain_t.requires_grad().then(|| {
                    let mut acc = vec![0.0; d];
                    for (gr, hr) in g.chunks_exact(d).zip(xhat.chunks_exact(d)) {
                        for i in 0..d {
                            acc[i] += gr[i] * hr[i];
                        }
                    }
                    acc
                });
                let gbias = bias_t.requires_grad().then(|| {
                    let mut acc = vec![0.0; d];
                    for gr in g.chunks_exact(d) {
                        acc.iter_mut().zip(gr).for_each(|(a, b)| *a += b);
                    }
                    acc
                });
                vec![gx, ggain, gbias]
            },
        ))
    }

    /// Batch-norm over every axis but the last, using this batch's statistics.
    pub fn batch_norm_train(
        &self,
        gain: &Tensor,
        bias: &Tensor,
        eps: f32,
    ) -> Result<(Tensor, BatchStats)> {
        let d = check_affine("batch_norm", self, gain, bias)?;
        let n = self.numel() / d;
        if n < 2 {
            return Err(TensorError::contract(
                "batch_norm",
                "training needs at least two positions per channel",
            ));
        }
        let x = self.data();
        let mut mean = vec![0.0f32; d];
        for row in x.chunks_exact(d) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f32);
        let mut var = vec![0.0f32; d];
        for row in x.chunks_exact(d) {
            for c in 0..d {
                let dv = row[c] - mean[c];
                var[c] += dv * dv;
            }
        }
        let biased: Vec<f32> = var.iter().map(|v| v / n as f32).collect();
        let unbiased: Vec<f32> = var.iter().map(|v| v / (n - 1) as f32).collect();
        let rstd: Vec<f32> = biased.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let xhat: Vec<f32> = x
            .chunks_exact(d)
            .flat_map(|row| {
                (0..d)
                    .map(|c| (row[c] - mean[c]) * rstd[c])
                    .collect::<Vec<_>>()
            })
            .collect();
        let (gd, bd) = (gain.data(), bias.data());
        let out = xhat
            .chunks_exact(d)
            .flat_map(|hr| hr.iter().zip(gd).zip(bd).map(|((h, g), b)| h * g + b))
            .collect();
        let (xt, gain_t, bias_t) = (self.clone(), gain.clone(), bias.clone());
        let y = Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone(), gain.clone(), bias.clone()],
            move |g, _| {
                let gd = gain_t.data();
                let mut sum_gh = vec![0.0f32; d];
                let mut sum_ghh = vec![0.0f32; d];
                let mut ggain = vec![0.0f32; d];
                let mut gbias = vec![0.0f32; d];
                for (gr, hr) in g.chunks_exact(d).zip(xhat.chunks_exact(d)) {
                    for c in 0..d {
                        sum_gh[c] += gr[c] * gd[c];
                        sum_ghh[c] += gr[c] * gd[c] * hr[c];
                        ggain[c] += gr[c] * hr[c];
                        gbias[c] += gr[c];
                    }
                }
                let gx = xt.requires_grad().then(|| {
                    let inv_n = 1.0 / n as f32;
                    let mut gx = vec![0.0; xhat.len()];
                    for ((gr, hr), dst) in g
                        .chunks_exact(d)
                        .zip(xhat.chunks_exact(d))
                        .zip(gx.chunks_exact_mut(d))
                    {
                        for c in 0..d {
                            dst[c] = rstd[c]
                                * (gr[c] * gd[c] - sum_gh[c] * inv_n - hr[c] * sum_ghh[c] * inv_n);
                        }
                    }
                    gx
                });
                vec![
                    gx,
                    gain_t.requires_grad().then_some(ggain),
                    bias_t.requires_grad().then_some(gbias),
                ]
            },
        );
        Ok((
            y,
            BatchStats {
                mean,
                var: unbiased,
            },
        ))
    }

    /// Batch-norm with fixed (running) statistics.
    pub fn batch_norm_eval(
        &self,
        gain: &Tensor,
        bias: &Tensor,
        mean: &[f32],
        var: &[f32],
        eps: f32,
    ) -> Result<Tensor> {
        let d = check_affine("batch_norm", self, gain, bias)?;
        if mean.len() != d || var.len() != d {
            return Err(TensorError::dim(
                "batch_norm",
                self.shape(),
                &[mean.len(), var.len()],
            ));
        }
        if !gain.requires_grad() && !bias.requires_grad() {
            let scale: Vec<f32> = var
                .iter()
                .zip(gain.data())
                .map(|(v, g)| g / (v + eps).sqrt())
                .collect();
            let shift: Vec<f32> = (0..d)
                .map(|c| bias.data()[c] - mean[c] * scale[c])
                .collect();
            let a: Vec<f32> = scale.iter().copied().cycle().take(self.numel()).collect();
            let c: Vec<f32> = shift.iter().copied().cycle().take(self.numel()).collect();
            return self.mul_add_const(&a, &c);
        }
        let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let a: Vec<f32> = inv_std.iter().copied().cycle().take(self.numel()).collect();
        let c: Vec<f32> = (0..d)
            .map(|ch| -mean[ch] * inv_std[ch])
            .cycle()
            .take(self.numel())
            .collect();
        self.mul_add_const(&a, &c)?.mul(gain)?.add(bias)
    }

    /// One-call batch-norm: batch statistics plus running-stat update in
    /// training, running statistics only in evaluation.
    pub fn batchnorm1d(
        &self,
        gain: &Tensor,
        bias: &Tensor,
        state: &mut BatchNormState,
        mode: Mode,
    ) -> Result<Tensor> {
        match mode {
            Mode::Train => {
                let (y, stats) = self.batch_norm_train(gain, bias, DEFAULT_EPS)?;
                state.absorb(&stats);
                Ok(y)
            }
            Mode::Eval => self.batch_norm_eval(
                gain,
                bias,
                &state.running_mean,
                &state.running_var,
                DEFAULT_EPS,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(d: usize) -> Tensor {
        Tensor::full(&[d], 1.0)
    }

    #[test]
    fn constant_row_normalises_to_zero() {
        let x = Tensor::full(&[2, 5], 3.0);
        let y = x
            .layer_norm(&ones(5), &Tensor::zeros(&[5]), DEFAULT_EPS)
            .unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn unit_row_is_nearly_preserved() {
        let x = Tensor::new(vec![1.0, -1.0], &[1, 2]).unwrap();
        let y = x
            .layer_norm(&ones(2), &Tensor::zeros(&[2]), DEFAULT_EPS)
            .unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-4);
        assert!((y.data()[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn batchnorm_train_standardises() {
        // channel 0: mean 5 var 4, channel 1: mean -1 var 4
        let vals = [3.0, -3.0, 7.0, 1.0, 3.0, -3.0, 7.0, 1.0];
        let x = Tensor::new(vals.to_vec(), &[2, 2, 2]).unwrap();
        let mut st = BatchNormState::new(2, 0.1);
        let y = x
            .batchnorm1d(&ones(2), &Tensor::zeros(&[2]), &mut st, Mode::Train)
            .unwrap();
        for c in 0..2 {
            let col: Vec<f32> = y.data().iter().skip(c).step_by(2).copied().collect();
            let m: f32 = col.iter().sum::<f32>() / 4.0;
            let v: f32 = col.iter().map(|x| (x - m) * (x - m)).sum::<f32>() / 4.0;
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn batchnorm_eval_with_fresh_state_is_identity() {
        let x = Tensor::new(vec![0.3, -2.0, 4.5, 1.0], &[1, 2, 2]).unwrap();
        let mut st = BatchNormState::new(2, 0.1);
        let y = x
            .batchnorm1d(&ones(2), &Tensor::zeros(&[2]), &mut st, Mode::Eval)
            .unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn running_mean_blends_with_momentum() {
        let mut st = BatchNormState::new(1, 0.1);
        let gain = ones(1);
        let bias = Tensor::zeros(&[1]);
        let a = Tensor::new(vec![1.0, 3.0], &[1, 2, 1]).unwrap();
        let b = Tensor::new(vec![10.0, 14.0], &[1, 2, 1]).unwrap();
        a.batchnorm1d(&gain, &bias, &mut st, Mode::Train).unwrap();
        b.batchnorm1d(&gain, &bias, &mut st, Mode::Train).unwrap();
        // mean: 0 -> 0.2 -> 0.9*0.2 + 0.1*12 = 1.38
        assert!((st.running_mean[0] - 1.38).abs() < 1e-6);
        // unbiased var: 1 -> 0.9 + 0.2 = 1.1 -> 0.99 + 0.8 = 1.79
        assert!((st.running_var[0] - 1.79).abs() < 1e-5);
    }

    #[test]
    fn single_position_train_is_rejected() {
        let x = Tensor::zeros(&[1, 1, 3]);
        assert!(x
            .batch_norm_train(&ones(3), &Tensor::zeros(&[3]), DEFAULT_EPS)
            .is_err());
    }
}
