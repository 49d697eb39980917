#![allow(dead_code)]

use hmc_tensor::{no_grad, rng, Tensor};
use rand::Rng as _;

pub const FD_STEP: f32 = 1e-3;

/// Error of an analytic gradient against a central difference, relative to
/// the larger of the two magnitudes (floored at 1 so that near-zero entries
/// are compared absolutely).
pub fn rel_err(analytic: f32, numeric: f32) -> f32 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

pub fn random_vec(r: &mut rng::Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

/// Compares analytic and central-difference gradients of
/// `sum(f(inputs) ⊙ probe)` for every element of every input.
/// Returns the worst relative error.
pub fn grad_check<F>(inputs: &[(Vec<f32>, Vec<usize>)], seed: u64, f: F) -> f32
where
    F: Fn(&[Tensor]) -> Tensor,
{
    let params: Vec<Tensor> = inputs
        .iter()
        .map(|(d, s)| Tensor::param(d.clone(), s).unwrap())
        .collect();
    let out = f(&params);
    let mut r = rng::substream(seed, "probe", 0);
    let probe = Tensor::new(random_vec(&mut r, out.numel(), 1.0), out.shape()).unwrap();
    let loss = |t: &Tensor| t.mul(&probe).unwrap().sum();
    loss(&out).backward().unwrap();

    let mut worst = 0.0f32;
    for (pi, (data, shape)) in inputs.iter().enumerate() {
        let analytic = params[pi].grad().unwrap_or_else(|| vec![0.0; data.len()]);
        for j in 0..data.len() {
            let eval = |delta: f32| {
                no_grad(|| {
                    let shifted: Vec<Tensor> = inputs
                        .iter()
                        .enumerate()
                        .map(|(k, (d, s))| {
                            let mut d = d.clone();
                            if k == pi {
                                d[j] += delta;
                            }
                            Tensor::new(d, s).unwrap()
                        })
                        .collect();
                    loss(&f(&shifted)).item()
                })
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            let e = rel_err(analytic[j], numeric);
            assert!(
                e.is_finite(),
                "non-finite gradient at input {pi} elem {j} (shape {shape:?})"
            );
            worst = worst.max(e);
        }
    }
    worst
}
