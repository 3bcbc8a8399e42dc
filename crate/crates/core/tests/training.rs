mod common;

use common::*;
use icred_core::tensor::GradStore;
use icred_core::trainer::{evaluate_loss, Sequential, TrainConfig, TrainState, Trainer};
use icred_core::Error;

fn config(max_steps: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        max_steps,
        lr: 1e-2,
        eval_every: 5,
        patience: 1000,
        seed: 11,
        max_grad_norm: None,
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let (mut model, data) = micro(micro_config(), 50);
    let before = model.params.clone();
    let cfg = TrainConfig { lr: 0.0, ..config(10) };
    let trainer = Trainer::new(cfg.clone(), &data, &data, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    trainer.run(&mut model, &mut state, |_| {}).unwrap();
    assert_eq!(model.params, before);
    assert_eq!(state.step, 10);
}

#[test]
fn single_instance_overfits() {
    let (mut model, data) = micro(micro_config(), 51);
    let one = &data[..1];
    let cfg = TrainConfig {
        lr: 2e-2,
        ..config(500)
    };
    let trainer = Trainer::new(cfg.clone(), one, one, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    let start = evaluate_loss(&model, one, &Sequential).unwrap();
    trainer.run(&mut model, &mut state, |_| {}).unwrap();
    let end = evaluate_loss(&model, one, &Sequential).unwrap();
    assert!(end < 0.1 && end < start, "{start} -> {end}");
}

#[test]
fn runs_are_bit_identical() {
    let run = || {
        let (mut model, data) = micro(micro_config(), 52);
        let cfg = config(40);
        let trainer = Trainer::new(cfg.clone(), &data[..8], &data[8..], Sequential).unwrap();
        let mut state = TrainState::new(&cfg, &model.params);
        trainer.run(&mut model, &mut state, |_| {}).unwrap();
        (model.params, state.curve)
    };
    let (p1, c1) = run();
    let (p2, c2) = run();
    assert_eq!(p1, p2);
    assert_eq!(c1.len(), c2.len());
    for (a, b) in c1.iter().zip(&c2) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
        assert_eq!(a.dev_nll.map(f64::to_bits), b.dev_nll.map(f64::to_bits));
    }
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let (model, data) = micro(micro_config(), 53);
    let full_cfg = config(30);
    let mut straight = model.clone();
    let trainer = Trainer::new(full_cfg.clone(), &data[..8], &data[8..], Sequential).unwrap();
    let mut state = TrainState::new(&full_cfg, &straight.params);
    trainer.run(&mut straight, &mut state, |_| {}).unwrap();

    let mut resumed = model.clone();
    let half_cfg = config(15);
    let first = Trainer::new(half_cfg.clone(), &data[..8], &data[8..], Sequential).unwrap();
    let mut half = TrainState::new(&half_cfg, &resumed.params);
    first.run(&mut resumed, &mut half, |_| {}).unwrap();
    trainer.run(&mut resumed, &mut half, |_| {}).unwrap();

    assert_eq!(resumed.params, straight.params);
    // the half run evaluates at its own final step 15, which is also an
    // eval step of the full run, so the curves agree point for point
    assert_eq!(half.curve, state.curve);
    assert_eq!(half.adam, state.adam);
}

#[test]
fn gradients_do_not_leak_between_steps() {
    let (mut model, data) = micro(micro_config(), 54);
    let cfg = TrainConfig {
        lr: 0.0,
        batch_size: 100,
        ..config(5)
    };
    let trainer = Trainer::new(cfg.clone(), &data, &data, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    let mut grads = GradStore::zeros_like(&model.params);
    trainer.step(&mut model, &mut state, &mut grads).unwrap();
    let first = grads.clone();
    trainer.step(&mut model, &mut state, &mut grads).unwrap();
    assert_eq!(grads, first);
}

#[test]
fn batch_gradient_is_the_mean_of_instance_gradients() {
    let (mut model, data) = micro(micro_config(), 55);
    let cfg = TrainConfig {
        lr: 0.0,
        batch_size: 100,
        ..config(1)
    };
    let mut expected = GradStore::zeros_like(&model.params);
    for inst in &data {
        let mut g = GradStore::zeros_like(&model.params);
        model.loss_and_grads(inst, &mut g).unwrap();
        expected.add_assign(&g).unwrap();
    }
    expected.scale(1.0 / data.len() as f64);
    let trainer = Trainer::new(cfg.clone(), &data, &data, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    let mut grads = GradStore::zeros_like(&model.params);
    trainer.step(&mut model, &mut state, &mut grads).unwrap();
    assert_eq!(grads, expected);
}

#[test]
fn clipping_bounds_the_update_direction() {
    let (mut model, data) = micro(micro_config(), 56);
    let cfg = TrainConfig {
        lr: 0.0,
        batch_size: 100,
        max_grad_norm: Some(1e-3),
        ..config(1)
    };
    let trainer = Trainer::new(cfg.clone(), &data, &data, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    let mut grads = GradStore::zeros_like(&model.params);
    trainer.step(&mut model, &mut state, &mut grads).unwrap();
    assert!((grads.norm() - 1e-3).abs() < 1e-15);
}

#[test]
fn evaluate_loss_examples() {
    let (mut model, data) = micro(micro_config(), 57);
    model.params.zero_all();
    let ln_v = (model.config.vocab_size as f64).ln();
    assert!((evaluate_loss(&model, &data, &Sequential).unwrap() - ln_v).abs() < 1e-12);

    let (model, data) = micro(micro_config(), 58);
    let once = evaluate_loss(&model, &data, &Sequential).unwrap();
    let doubled: Vec<_> = data.iter().chain(&data).cloned().collect();
    let twice = evaluate_loss(&model, &doubled, &Sequential).unwrap();
    assert!((once - twice).abs() < 1e-12);
    assert!(matches!(evaluate_loss(&model, &[], &Sequential), Err(Error::Domain(_))));
}

#[test]
fn training_reduces_train_loss_below_dev_loss() {
    let (mut model, data) = micro(micro_config(), 59);
    let (train, dev) = data.split_at(8);
    let cfg = TrainConfig {
        lr: 2e-2,
        ..config(300)
    };
    let trainer = Trainer::new(cfg.clone(), train, dev, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    trainer.run(&mut model, &mut state, |_| {}).unwrap();
    let tr = evaluate_loss(&model, train, &Sequential).unwrap();
    let dv = evaluate_loss(&model, dev, &Sequential).unwrap();
    assert!(tr < dv, "train {tr} dev {dv}");
}

#[test]
fn early_stopping_keeps_the_best_parameters() {
    let (mut model, data) = micro(micro_config(), 60);
    let (train, dev) = data.split_at(8);
    let cfg = TrainConfig {
        lr: 5e-2,
        patience: 2,
        eval_every: 10,
        ..config(2000)
    };
    let trainer = Trainer::new(cfg.clone(), train, dev, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    trainer.run(&mut model, &mut state, |_| {}).unwrap();
    assert!(state.stopped_early, "tiny dev split should overfit within 2000 steps");
    let evals: Vec<f64> = state.curve.iter().filter_map(|p| p.dev_nll).collect();
    let best = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(state.best_dev, Some(best));
    assert!(evals[evals.len() - 2..].iter().all(|&d| d >= best));
    Trainer::<Sequential>::restore_best(&mut model, &state);
    let restored = evaluate_loss(&model, dev, &Sequential).unwrap();
    assert_eq!(restored.to_bits(), best.to_bits());
}

#[test]
fn non_finite_parameters_are_reported_with_the_instance() {
    let (mut model, data) = micro(micro_config(), 61);
    let id = model.params.id("embedding").unwrap();
    model.params.get_mut(id).data_mut().fill(f64::NAN);
    let cfg = config(1);
    let trainer = Trainer::new(cfg.clone(), &data, &data, Sequential).unwrap();
    let mut state = TrainState::new(&cfg, &model.params);
    let mut grads = GradStore::zeros_like(&model.params);
    match trainer.step(&mut model, &mut state, &mut grads) {
        Err(Error::NonFinite(msg)) => assert!(msg.contains("training instance #"), "{msg}"),
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn trainer_rejects_empty_splits() {
    let (_, data) = micro(micro_config(), 62);
    assert!(matches!(
        Trainer::new(config(1), &[], &data, Sequential),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        Trainer::new(config(1), &data, &[], Sequential),
        Err(Error::Domain(_))
    ));
    let bad = TrainConfig {
        batch_size: 0,
        ..config(1)
    };
    assert!(matches!(
        Trainer::new(bad, &data, &data, Sequential),
        Err(Error::Config(_))
    ));
}
