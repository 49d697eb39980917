//! Optimisation steps: determinism, logging and non-finite handling.

mod common;

use common::*;
use hmc_model::{ConformerConfig, HmConformer, ModelConfig, ModelError, StepMetrics, Trainer};
use hmc_tensor::{rng, Tensor};

fn trainer(seed: u64) -> Trainer {
    let mut cfg = ModelConfig::default();
    cfg.conformer = ConformerConfig {
        n_blocks: 2,
        dropout: 0.1,
        ..small_cfg(8)
    };
    let (model, store) = HmConformer::init(cfg, seed).unwrap();
    Trainer::new(model, store, 1e-3, seed)
}

fn batch(seed: u64) -> Tensor {
    random(&mut rng::stream(seed, "batch"), &[2, 400, 120], 1.0)
}

#[test]
fn same_seed_same_trajectory() {
    let (mut a, mut b) = (trainer(21), trainer(21));
    let x = batch(21);
    for _ in 0..3 {
        let ma = a.train_step(&x, &[0, 1]).unwrap();
        let mb = b.train_step(&x, &[0, 1]).unwrap();
        assert_eq!(ma, mb);
    }
    for (p, q) in a.store.iter().zip(b.store.iter()) {
        assert_eq!(p.tensor.data(), q.tensor.data(), "{}", p.name);
    }
    assert_eq!(a.score(&x).unwrap(), b.score(&x).unwrap());
    assert_eq!(a.steps_done(), 3);
}

#[test]
fn different_seed_different_init() {
    let (a, b) = (trainer(1), trainer(2));
    assert_ne!(a.store.by_name("cls").unwrap().data(), b.store.by_name("cls").unwrap().data());
}

#[test]
fn repeated_steps_reduce_loss_on_one_batch() {
    let mut t = trainer(22);
    let x = batch(22);
    let first = t.train_step(&x, &[0, 1]).unwrap().total;
    let mut last = first;
    for _ in 0..15 {
        last = t.train_step(&x, &[0, 1]).unwrap().total;
    }
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn running_stats_move_only_in_training() {
    let mut t = trainer(23);
    let name = "blocks.0.conv.bn.running_mean";
    let before = t.store.by_name(name).unwrap().to_vec();
    let x = batch(23);
    t.score(&x).unwrap();
    assert_eq!(t.store.by_name(name).unwrap().to_vec(), before);
    t.train_step(&x, &[0, 1]).unwrap();
    assert_ne!(t.store.by_name(name).unwrap().to_vec(), before);
}

#[test]
fn log_line_layout() {
    let m = StepMetrics {
        step: 7,
        stage_losses: [Some(0.5), None, Some(1.0), Some(0.25), Some(2.0)],
        total: 1.125,
    };
    assert_eq!(m.log_line(), "7\t0.500000\t-\t1.000000\t0.250000\t2.000000\t1.125000");
}

#[test]
fn non_finite_parameter_is_named_and_update_skipped() {
    let mut t = trainer(24);
    set(&mut t.store, "fuse.weight", |i| if i == 0 { f32::NAN } else { 0.1 });
    let before: Vec<Vec<f32>> = t.store.iter().map(|p| p.tensor.to_vec()).collect();
    match t.train_step(&batch(24), &[0, 1]) {
        Err(ModelError::NonFinite { step: 0, detail }) => assert!(detail.contains("gradient in"), "{detail}"),
        other => panic!("expected non-finite error, got {other:?}"),
    }
    let after: Vec<Vec<f32>> = t.store.iter().map(|p| p.tensor.to_vec()).collect();
    for (a, b) in before.iter().zip(&after) {
        assert!(a.iter().zip(b).all(|(x, y)| x == y || (x.is_nan() && y.is_nan())));
    }
    assert_eq!(t.steps_done(), 0);
}

#[test]
fn label_count_must_match_batch() {
    let mut t = trainer(25);
    assert!(t.train_step(&batch(25), &[0]).is_err());
}
