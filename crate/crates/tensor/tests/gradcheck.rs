//! Analytic gradients against central finite differences (h = 1e-3, f32),
//! 100 random small shapes per op.

mod common;

use common::{grad_check, random_vec};
use hmc_tensor::{rng, Tensor, DEFAULT_EPS};
use rand::Rng as _;

const TRIALS: u64 = 100;
const TOL: f32 = 1e-3;

fn run<S, F>(name: &str, mut setup: S, f: F)
where
    S: FnMut(&mut rng::Rng) -> Vec<(Vec<f32>, Vec<usize>)>,
    F: Fn(&[Tensor]) -> Tensor,
{
    let mut worst = 0.0f32;
    for trial in 0..TRIALS {
        let mut r = rng::substream(0xC0FFEE, name, trial);
        let inputs = setup(&mut r);
        worst = worst.max(grad_check(&inputs, trial, &f));
    }
    assert!(worst < TOL, "{name}: worst relative error {worst:e}");
}

fn dim(r: &mut rng::Rng, lo: usize, hi: usize) -> usize {
    r.random_range(lo..=hi)
}

fn input(r: &mut rng::Rng, shape: &[usize]) -> (Vec<f32>, Vec<usize>) {
    (random_vec(r, shape.iter().product(), 1.0), shape.to_vec())
}

/// Values with pairwise gaps well above the finite-difference step.
fn spread(r: &mut rng::Rng, shape: &[usize]) -> (Vec<f32>, Vec<usize>) {
    let n: usize = shape.iter().product();
    let mut v: Vec<f32> = (0..n).map(|i| i as f32 * 0.05 - n as f32 * 0.025).collect();
    for i in (1..n).rev() {
        v.swap(i, r.random_range(0..=i));
    }
    (v, shape.to_vec())
}

#[test]
fn matmul() {
    run(
        "matmul",
        |r| {
            let (m, k, n) = (dim(r, 1, 5), dim(r, 1, 5), dim(r, 1, 5));
            vec![input(r, &[m, k]), input(r, &[k, n])]
        },
        |t| t[0].matmul(&t[1]).unwrap(),
    );
}

#[test]
fn linear_with_bias() {
    run(
        "linear",
        |r| {
            let (b, l, i, o) = (dim(r, 1, 3), dim(r, 1, 4), dim(r, 1, 5), dim(r, 1, 5));
            vec![input(r, &[b, l, i]), input(r, &[i, o]), input(r, &[o])]
        },
        |t| t[0].linear(&t[1], Some(&t[2])).unwrap(),
    );
}

#[test]
fn softmax() {
    run(
        "softmax",
        |r| {
            vec![{
                let s0 = dim(r, 1, 3);
                let s1 = dim(r, 1, 6);
                input(r, &[s0, s1])
            }]
        },
        |t| t[0].softmax(1).unwrap(),
    );
    run(
        "softmax_vec5",
        |r| vec![input(r, &[5])],
        |t| t[0].softmax(0).unwrap(),
    );
}

#[test]
fn layer_norm() {
    run(
        "layer_norm",
        |r| {
            let (l, d) = (dim(r, 1, 4), dim(r, 2, 8));
            vec![input(r, &[l, d]), input(r, &[d]), input(r, &[d])]
        },
        |t| t[0].layer_norm(&t[1], &t[2], DEFAULT_EPS).unwrap(),
    );
}

#[test]
fn batch_norm_train() {
    run(
        "batch_norm",
        |r| {
            // at least four positions per channel keeps the batch variance
            // away from the near-singular regime where h = 1e-3 is too coarse
            let (b, l, d) = (dim(r, 2, 3), dim(r, 2, 4), dim(r, 1, 4));
            vec![input(r, &[b, l, d]), input(r, &[d]), input(r, &[d])]
        },
        |t| t[0].batch_norm_train(&t[1], &t[2], DEFAULT_EPS).unwrap().0,
    );
}

#[test]
fn conv2d() {
    run(
        "conv2d",
        |r| {
            let (b, c, o) = (dim(r, 1, 2), dim(r, 1, 3), dim(r, 1, 3));
            let (h, w) = (dim(r, 3, 6), dim(r, 3, 6));
            let k = dim(r, 1, 3);
            vec![
                input(r, &[b, c, h, w]),
                input(r, &[o, c, k, k]),
                input(r, &[o]),
            ]
        },
        |t| t[0].conv2d(&t[1], Some(&t[2]), 2, 1).unwrap(),
    );
}

#[test]
fn depthwise_conv1d() {
    run(
        "depthwise",
        |r| {
            let (b, l, d) = (dim(r, 1, 2), dim(r, 1, 7), dim(r, 1, 4));
            let k = 2 * dim(r, 0, 2) + 1;
            vec![input(r, &[b, l, d]), input(r, &[k, d]), input(r, &[d])]
        },
        |t| t[0].depthwise_conv1d(&t[1], Some(&t[2])).unwrap(),
    );
}

#[test]
fn attention() {
    for heads in [1usize, 2] {
        run(
            &format!("attention{heads}"),
            |r| {
                let (b, l, d) = (dim(r, 1, 2), dim(r, 1, 5), heads * dim(r, 1, 3));
                vec![input(r, &[b, l, d]), input(r, &[b, l, d]), input(r, &[b, l, d])]
            },
            |t| Tensor::multi_head_attention(&t[0], &t[1], &t[2], heads).unwrap(),
        );
    }
}

#[test]
fn pointwise_activations() {
    let shape = |r: &mut rng::Rng| {
        vec![{
            let s0 = dim(r, 1, 4);
            let s1 = dim(r, 1, 4);
            input(r, &[s0, s1])
        }]
    };
    run("swish", shape, |t| t[0].swish());
    run("sigmoid", shape, |t| t[0].sigmoid());
    run("tanh", shape, |t| t[0].tanh());
    run("softplus", shape, |t| t[0].scale(4.0).softplus());
    run("exp", shape, |t| t[0].exp());
    run("powf", shape, |t| t[0].mul(&t[0]).unwrap().add_scalar(0.5).powf(-0.5));
    run(
        "glu",
        |r| {
            let (l, h) = (dim(r, 1, 3), dim(r, 1, 3));
            vec![input(r, &[l, 2 * h])]
        },
        |t| t[0].glu().unwrap(),
    );
}

#[test]
fn broadcasting_arithmetic() {
    run(
        "mul_bcast",
        |r| {
            let (a, b) = (dim(r, 1, 3), dim(r, 1, 4));
            vec![input(r, &[a, b]), input(r, &[b])]
        },
        |t| t[0].mul(&t[1]).unwrap().add(&t[1]).unwrap(),
    );
    run(
        "sub_scalar",
        |r| {
            vec![
                {
                    let s0 = dim(r, 1, 5);
                    input(r, &[s0])
                },
                input(r, &[1]),
            ]
        },
        |t| t[0].sub(&t[1]).unwrap(),
    );
}

#[test]
fn sequence_ops() {
    run(
        "max_pool",
        |r| {
            let (b, l, d) = (dim(r, 1, 2), dim(r, 2, 7), dim(r, 1, 3));
            vec![spread(r, &[b, l, d])]
        },
        |t| t[0].max_pool_seq(2).unwrap(),
    );
    run(
        "avg_pool",
        |r| {
            vec![{
                let s0 = dim(r, 1, 2);
                let s1 = dim(r, 3, 7);
                let s2 = dim(r, 1, 3);
                input(r, &[s0, s1, s2])
            }]
        },
        |t| t[0].avg_pool_seq(3).unwrap(),
    );
    run(
        "unfold",
        |r| {
            vec![{
                let s0 = dim(r, 1, 2);
                let s1 = dim(r, 3, 8);
                let s2 = dim(r, 1, 3);
                input(r, &[s0, s1, s2])
            }]
        },
        |t| t[0].unfold_seq(3, 2, 1).unwrap(),
    );
    run(
        "scale_rows",
        |r| {
            let (b, l, d) = (dim(r, 1, 2), dim(r, 1, 4), dim(r, 1, 3));
            vec![input(r, &[b, l, d]), input(r, &[b, l])]
        },
        |t| t[0].scale_rows(&t[1]).unwrap(),
    );
    run(
        "weighted_sum",
        |r| {
            let (b, l, d) = (dim(r, 1, 2), dim(r, 1, 4), dim(r, 1, 3));
            vec![input(r, &[b, l, d]), input(r, &[b, l])]
        },
        |t| t[0].weighted_sum_seq(&t[1]).unwrap(),
    );
    run(
        "gather",
        |r| {
            vec![{
                let l = dim(r, 3, 6);
                input(r, &[2, l, 2])
            }]
        },
        |t| t[0].gather_seq(&[vec![0, 2], vec![2, 1]]).unwrap(),
    );
}

#[test]
fn shape_ops() {
    run(
        "permute",
        |r| {
            vec![{
                let s0 = dim(r, 1, 3);
                let s1 = dim(r, 1, 3);
                let s2 = dim(r, 1, 3);
                let s3 = dim(r, 1, 2);
                input(r, &[s0, s1, s2, s3])
            }]
        },
        |t| t[0].permute(&[0, 2, 1, 3]).unwrap().swish(),
    );
    run(
        "concat_slice",
        |r| {
            let (b, d) = (dim(r, 1, 2), dim(r, 1, 3));
            let (l1, l2) = (dim(r, 1, 3), dim(r, 2, 4));
            vec![input(r, &[b, l1, d]), input(r, &[b, l2, d])]
        },
        |t| {
            let c = Tensor::concat(&[t[0].clone(), t[1].clone()], 1).unwrap();
            let n = c.shape()[1];
            c.slice_axis(1, 1, n).unwrap().tanh()
        },
    );
    run(
        "expand",
        |r| {
            vec![{
                let s0 = dim(r, 1, 3);
                let s1 = dim(r, 1, 3);
                input(r, &[s0, s1])
            }]
        },
        |t| t[0].expand_leading(3).sigmoid(),
    );
}
