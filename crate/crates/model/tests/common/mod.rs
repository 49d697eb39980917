#![allow(dead_code)]

use hmc_model::ConformerConfig;
use hmc_tensor::{rng, ParamStore, Tensor};
use rand::Rng as _;

pub fn small_cfg(d: usize) -> ConformerConfig {
    ConformerConfig {
        d,
        heads: 2,
        ffn_expansion: 4,
        depthwise_kernel: 3,
        dropout: 0.0,
        ..ConformerConfig::default()
    }
}

pub fn random(r: &mut rng::Rng, shape: &[usize], scale: f32) -> Tensor {
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| r.random_range(-scale..scale)).collect(), shape).unwrap()
}

pub fn set(store: &mut ParamStore, name: &str, f: impl Fn(usize) -> f32) {
    let id = store.id_of(name).unwrap_or_else(|| panic!("no parameter {name}"));
    let n = store.get(id).numel();
    store.set_data(id, (0..n).map(f).collect()).unwrap();
}

pub fn zero(store: &mut ParamStore, name: &str) {
    set(store, name, |_| 0.0);
}

/// Randomises every trainable entry under `prefix`.
pub fn randomise(store: &mut ParamStore, prefix: &str, r: &mut rng::Rng, scale: f32) {
    let names: Vec<String> = store
        .iter()
        .filter(|p| p.trainable && p.name.starts_with(prefix))
        .map(|p| p.name.clone())
        .collect();
    for n in names {
        let id = store.id_of(&n).unwrap();
        let len = store.get(id).numel();
        store
            .set_data(id, (0..len).map(|_| r.random_range(-scale..scale)).collect())
            .unwrap();
    }
}

pub fn assert_close(a: &[f32], b: &[f32], tol: f32, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "{what}[{i}]: {x} vs {y}");
    }
}

/// Row-wise layer norm with unit gain and zero bias.
pub fn layer_norm_ref(x: &[f32], d: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(d) {
        let m: f32 = row.iter().sum::<f32>() / d as f32;
        let v: f32 = row.iter().map(|a| (a - m) * (a - m)).sum::<f32>() / d as f32;
        out.extend(row.iter().map(|a| (a - m) / (v + 1e-5).sqrt()));
    }
    out
}

/// `x·W + b` for row-major `x: [rows, fan_in]`, `W: [fan_in, fan_out]`.
pub fn linear_ref(x: &[f32], w: &[f32], b: Option<&[f32]>, fan_in: usize, fan_out: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len() / fan_in * fan_out);
    for row in x.chunks_exact(fan_in) {
        for j in 0..fan_out {
            let mut acc = b.map_or(0.0, |b| b[j]);
            for i in 0..fan_in {
                acc += row[i] * w[i * fan_out + j];
            }
            out.push(acc);
        }
    }
    out
}

pub fn swish_ref(v: f32) -> f32 {
    v / (1.0 + (-v).exp())
}

pub fn sigmoid_ref(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

pub fn data(store: &ParamStore, name: &str) -> Vec<f32> {
    store.by_name(name).unwrap_or_else(|| panic!("no parameter {name}")).to_vec()
}
