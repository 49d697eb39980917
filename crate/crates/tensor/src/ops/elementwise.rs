use rand::Rng;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// `rhs` may match `lhs` exactly, be a trailing-suffix of its shape, or hold
/// a single element. Returns the repetition period of `rhs` inside `lhs`.
fn broadcast_period(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> Result<usize> {
    let (ls, rs) = (lhs.shape(), rhs.shape());
    if rhs.numel() == 1 || ls == rs {
        return Ok(rhs.numel());
    }
    if rs.len() <= ls.len() && ls[ls.len() - rs.len()..] == *rs {
        return Ok(rhs.numel());
    }
    Err(TensorError::dim(op, ls, rs))
}

fn fold_period(g: &[f32], period: usize) -> Vec<f32> {
    let mut out = vec![0.0; period];
    for chunk in g.chunks_exact(period) {
        out.iter_mut().zip(chunk).for_each(|(o, v)| *o += v);
    }
    out
}

pub(crate) fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus_scalar(x: f32) -> f32 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Tensor {
    fn unary<F, G>(&self, f: F, df: G) -> Tensor
    where
        F: Fn(f32) -> f32,
        G: Fn(f32, f32) -> f32 + Send + Sync + 'static,
    {
        let data: Vec<f32> = self.data().iter().map(|&x| f(x)).collect();
        let x = self.clone();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, out| {
                let gx = g
                    .iter()
                    .zip(x.data())
                    .zip(out)
                    .map(|((&g, &x), &y)| g * df(x, y))
                    .collect();
                vec![Some(gx)]
            },
        )
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        let period = broadcast_period("add", self, rhs)?;
        let b = rhs.data();
        let data = self
            .data()
            .chunks_exact(period)
            .flat_map(|c| c.iter().zip(b).map(|(x, y)| x + y))
            .collect();
        let rg = rhs.requires_grad();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), rhs.clone()],
            move |g, _| vec![Some(g.to_vec()), rg.then(|| fold_period(g, period))],
        ))
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.add(&rhs.scale(-1.0))
    }

    /// Elementwise product with the same broadcasting rules as [`Tensor::add`].
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        let period = broadcast_period("mul", self, rhs)?;
        let data = self
            .data()
            .chunks_exact(period)
            .flat_map(|c| c.iter().zip(rhs.data()).map(|(x, y)| x * y))
            .collect();
        let (a, b) = (self.clone(), rhs.clone());
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), rhs.clone()],
            move |g, _| {
                let ga = a.requires_grad().then(|| {
                    g.chunks_exact(period)
                        .flat_map(|c| c.iter().zip(b.data()).map(|(g, y)| g * y))
                        .collect()
                });
                let gb = b.requires_grad().then(|| {
                    let mut acc = vec![0.0; period];
                    for (gc, xc) in g.chunks_exact(period).zip(a.data().chunks_exact(period)) {
                        for ((o, g), x) in acc.iter_mut().zip(gc).zip(xc) {
                            *o += g * x;
                        }
                    }
                    acc
                });
                vec![ga, gb]
            },
        ))
    }

    pub fn scale(&self, s: f32) -> Tensor {
        let data = self.data().iter().map(|x| x * s).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, _| vec![Some(g.iter().map(|g| g * s).collect())],
        )
    }

    pub fn add_scalar(&self, s: f32) -> Tensor {
        let data = self.data().iter().map(|x| x + s).collect();
        Tensor::from_op(data, self.shape().to_vec(), vec![self.clone()], |g, _| {
            vec![Some(g.to_vec())]
        })
    }

    /// `y_i = a_i * x_i + c_i` with constant (non-learned) coefficients.
    pub fn mul_add_const(&self, a: &[f32], c: &[f32]) -> Result<Tensor> {
        if a.len() != self.numel() || c.len() != self.numel() {
            return Err(TensorError::dim(
                "mul_add_const",
                self.shape(),
                &[a.len(), c.len()],
            ));
        }
        let data = self
            .data()
            .iter()
            .zip(a)
            .zip(c)
            .map(|((x, a), c)| a * x + c)
            .collect();
        let a = a.to_vec();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, _| vec![Some(g.iter().zip(&a).map(|(g, a)| g * a).collect())],
        ))
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(f32::tanh, |_, y| 1.0 - y * y)
    }

    /// Swish / SiLU: `x * sigmoid(x)`.
    pub fn swish(&self) -> Tensor {
        self.unary(
            |x| x * sigmoid(x),
            |x, _| {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            },
        )
    }

    pub fn softplus(&self) -> Tensor {
        self.unary(softplus_scalar, |x, _| sigmoid(x))
    }

    pub fn exp(&self) -> Tensor {
        self.unary(f32::exp, |_, y| y)
    }

    /// `x^e` elementwise; inputs must lie where the power is differentiable.
    pub fn powf(&self, e: f32) -> Tensor {
        self.unary(move |x| x.powf(e), move |x, _| e * x.powf(e - 1.0))
    }

    /// Gated linear unit over the last axis: first half times sigmoid of the second.
    pub fn glu(&self) -> Result<Tensor> {
        let shape = self.shape();
        let last = *shape.last().expect("rank >= 1");
        if !last.is_multiple_of(2) {
            return Err(TensorError::config(
                "glu",
                format!("odd last extent {last}"),
            ));
        }
        let half = last / 2;
        let mut out_shape = shape.to_vec();
        *out_shape.last_mut().unwrap() = half;
        let mut data = Vec::with_capacity(self.numel() / 2);
        for row in self.data().chunks_exact(last) {
            let (a, b) = row.split_at(half);
            data.extend(a.iter().zip(b).map(|(a, b)| a * sigmoid(*b)));
        }
        let x = self.clone();
        Ok(Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![0.0; x.numel()];
                for ((gr, xr), gxr) in g
                    .chunks_exact(half)
                    .zip(x.data().chunks_exact(last))
                    .zip(gx.chunks_exact_mut(last))
                {
                    let (a, b) = xr.split_at(half);
                    let (ga, gb) = gxr.split_at_mut(half);
                    for i in 0..half {
                        let s = sigmoid(b[i]);
                        ga[i] = gr[i] * s;
                        gb[i] = gr[i] * a[i] * s * (1.0 - s);
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Inverted dropout; identity when `p == 0` or when not training.
    pub fn dropout<R: Rng + ?Sized>(&self, p: f32, training: bool, rng: &mut R) -> Tensor {
        if !training || p <= 0.0 {
            return self.clone();
        }
        let keep = 1.0 - p;
        let mask: Vec<f32> = (0..self.numel())
            .map(|_| {
                if rng.random::<f32>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let data = self.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, _| vec![Some(g.iter().zip(&mask).map(|(g, m)| g * m).collect())],
        )
    }
}
