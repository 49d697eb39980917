//! Convolutions and products against naive nested-loop references on 200
//! random shapes each, plus softmax normalisation under proptest.

mod common;

use common::random_vec;
use hmc_tensor::{rng, Tensor};
use proptest::prelude::*;
use rand::Rng as _;

const CASES: u64 = 200;

fn naive_conv2d(
    x: &[f32],
    (b, c, h, w): (usize, usize, usize, usize),
    k: &[f32],
    (o, kh, kw): (usize, usize, usize),
    bias: &[f32],
    stride: usize,
    pad: usize,
) -> Vec<f32> {
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; b * o * ho * wo];
    for bi in 0..b {
        for oc in 0..o {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = bias[oc];
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                    continue;
                                }
                                let xv = x[((bi * c + ci) * h + iy as usize) * w + ix as usize];
                                let kv = k[((oc * c + ci) * kh + ky) * kw + kx];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[((bi * o + oc) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    out
}

#[test]
fn conv2d_matches_nested_loops() {
    for case in 0..CASES {
        let mut r = rng::substream(11, "conv2d", case);
        let (b, c, o) = (
            r.random_range(1..=2),
            r.random_range(1..=4),
            r.random_range(1..=4),
        );
        let (kh, kw): (usize, usize) = (r.random_range(1..=4), r.random_range(1..=4));
        let k = kh.max(kw);
        let (kh, kw) = (k, k);
        let stride = r.random_range(1..=3);
        let pad: usize = r.random_range(0..=2);
        let h = r.random_range(k.saturating_sub(2 * pad).max(1)..=12);
        let w = r.random_range(k.saturating_sub(2 * pad).max(1)..=12);
        let xv = random_vec(&mut r, b * c * h * w, 1.0);
        let kv = random_vec(&mut r, o * c * kh * kw, 1.0);
        let bv = random_vec(&mut r, o, 1.0);
        let x = Tensor::new(xv.clone(), &[b, c, h, w]).unwrap();
        let kt = Tensor::new(kv.clone(), &[o, c, kh, kw]).unwrap();
        let bt = Tensor::new(bv.clone(), &[o]).unwrap();
        let y = x.conv2d(&kt, Some(&bt), stride, pad).unwrap();
        let expect = naive_conv2d(&xv, (b, c, h, w), &kv, (o, kh, kw), &bv, stride, pad);
        assert_eq!(y.numel(), expect.len());
        assert_eq!(y.shape()[2], (h + 2 * pad - kh) / stride + 1);
        for (a, e) in y.data().iter().zip(&expect) {
            assert!((a - e).abs() <= 1e-5, "case {case}: {a} vs {e}");
        }
    }
}

#[test]
fn depthwise_matches_nested_loops() {
    for case in 0..CASES {
        let mut r = rng::substream(12, "depthwise", case);
        let (b, l, d) = (
            r.random_range(1..=3),
            r.random_range(1..=20),
            r.random_range(1..=8),
        );
        let k = 2 * r.random_range(0..=7) + 1;
        let xv = random_vec(&mut r, b * l * d, 1.0);
        let kv = random_vec(&mut r, k * d, 1.0);
        let y = Tensor::new(xv.clone(), &[b, l, d])
            .unwrap()
            .depthwise_conv1d(&Tensor::new(kv.clone(), &[k, d]).unwrap(), None)
            .unwrap();
        let half = (k / 2) as isize;
        for bi in 0..b {
            for t in 0..l {
                for c in 0..d {
                    let mut acc = 0.0;
                    for j in 0..k {
                        let s = t as isize + j as isize - half;
                        if s >= 0 && (s as usize) < l {
                            acc += kv[j * d + c] * xv[(bi * l + s as usize) * d + c];
                        }
                    }
                    let got = y.data()[(bi * l + t) * d + c];
                    assert!((got - acc).abs() <= 1e-5, "case {case}");
                }
            }
        }
    }
}

#[test]
fn depthwise_channels_are_independent() {
    let mut r = rng::stream(13, "indep");
    let xv = random_vec(&mut r, 10 * 3, 1.0);
    let kv = random_vec(&mut r, 5 * 3, 1.0);
    let kt = Tensor::new(kv, &[5, 3]).unwrap();
    let base = Tensor::new(xv.clone(), &[1, 10, 3])
        .unwrap()
        .depthwise_conv1d(&kt, None)
        .unwrap();
    let mut bumped = xv;
    for t in 0..10 {
        bumped[t * 3 + 1] += 1.0;
    }
    let moved = Tensor::new(bumped, &[1, 10, 3])
        .unwrap()
        .depthwise_conv1d(&kt, None)
        .unwrap();
    for t in 0..10 {
        assert_eq!(base.data()[t * 3], moved.data()[t * 3]);
        assert_eq!(base.data()[t * 3 + 2], moved.data()[t * 3 + 2]);
    }
}

#[test]
fn matmul_matches_triple_loop() {
    for case in 0..CASES {
        let mut r = rng::substream(14, "matmul", case);
        let (m, k, n) = (
            r.random_range(1..=17),
            r.random_range(1..=17),
            r.random_range(1..=17),
        );
        let a = random_vec(&mut r, m * k, 1.0);
        let b = random_vec(&mut r, k * n, 1.0);
        let c = Tensor::new(a.clone(), &[m, k])
            .unwrap()
            .matmul(&Tensor::new(b.clone(), &[k, n]).unwrap())
            .unwrap();
        for i in 0..m {
            for j in 0..n {
                let e: f32 = (0..k).map(|l| a[i * k + l] * b[l * n + j]).sum();
                assert!((c.data()[i * n + j] - e).abs() <= 1e-5);
            }
        }
    }
}

proptest! {
    #[test]
    fn softmax_slices_sum_to_one(v in prop::collection::vec(-80.0f32..80.0, 1..40)) {
        let n = v.len();
        let y = Tensor::new(v, &[n]).unwrap().softmax(0).unwrap();
        let s: f32 = y.data().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-6);
        prop_assert!(y.data().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn backward_twice_is_double(v in prop::collection::vec(-3.0f32..3.0, 6)) {
        let p = Tensor::param(v, &[2, 3]).unwrap();
        let w = Tensor::new(vec![0.5, -1.0, 2.0, 0.25, 1.5, -0.75], &[3, 2]).unwrap();
        let loss = p.matmul(&w).unwrap().swish().softmax(1).unwrap().mul(&Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap()).unwrap().sum();
        loss.backward().unwrap();
        let once = p.grad().unwrap();
        loss.backward().unwrap();
        let twice = p.grad().unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert_eq!(2.0 * a, *b);
        }
    }
}
