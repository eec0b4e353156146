mod common;

use ecoforecast::autodiff::Tensor;
use ecoforecast::data::WindowedSample;
use ecoforecast::evaluation::ComputeTrace;
use ecoforecast::models::{Model, ModelKind, ModelSpec};
use ecoforecast::par::Parallelism;
use ecoforecast::training::{adam_update, evaluate_loss, fit, predict, train_epoch, OptimizerState, TrainConfig};

fn cfg(spec: &ModelSpec, epochs: usize, patience: usize) -> TrainConfig {
    TrainConfig { max_epochs: epochs, patience, ..TrainConfig::for_spec(spec, 11) }
}

fn small(kind: ModelKind) -> ModelSpec {
    let mut s = ModelSpec::default_for(kind);
    s.hidden = 16;
    s
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut p = vec![Tensor::vector(vec![1.0, -2.0, 0.5])];
    let before = p.clone();
    let mut st = OptimizerState::new(&p);
    for _ in 0..5 {
        adam_update(&mut p, &[Tensor::zeros(&[3])], &mut st, 0.1).unwrap();
    }
    assert_eq!(p, before);
}

#[test]
fn adam_minimizes_a_quadratic() {
    let mut p = vec![Tensor::scalar(1.0)];
    let mut st = OptimizerState::new(&p);
    for _ in 0..500 {
        let g = Tensor::scalar(2.0 * p[0].data()[0]);
        adam_update(&mut p, &[g], &mut st, 0.1).unwrap();
    }
    assert!(p[0].data()[0].abs() < 1e-2, "{}", p[0].data()[0]);
}

#[test]
fn adam_first_step_has_learning_rate_magnitude() {
    for g in [3.7, -0.002, 150.0] {
        let mut p = vec![Tensor::scalar(0.0)];
        let mut st = OptimizerState::new(&p);
        adam_update(&mut p, &[Tensor::scalar(g)], &mut st, 0.01).unwrap();
        let step = p[0].data()[0];
        assert!((step + 0.01 * g.signum()).abs() < 1e-4 * 0.01, "{g}: {step}");
    }
}

#[test]
fn adam_rejects_mismatched_shapes() {
    let mut p = vec![Tensor::zeros(&[2])];
    let mut st = OptimizerState::new(&p);
    assert!(adam_update(&mut p, &[Tensor::zeros(&[3])], &mut st, 0.1).is_err());
}

#[test]
fn model_at_its_own_targets_stays_put() {
    let data = common::dataset(1, 1);
    let spec = small(ModelKind::Mlp);
    let mut model = Model::new(spec.clone(), 3).unwrap();
    let preds = model.predict(&data.train, Parallelism::Sequential).unwrap();
    let teacher: Vec<WindowedSample> =
        data.train.iter().zip(preds).map(|(s, y)| WindowedSample { x: s.x.clone(), y }).collect();
    let before = model.params().to_vec();
    let mut opt = OptimizerState::new(model.params());
    let loss = train_epoch(&mut model, &teacher, &mut opt, &cfg(&spec, 1, 1), 0, &mut ComputeTrace::default()).unwrap();
    assert!(loss < 1e-20, "{loss}");
    assert_eq!(model.params(), before.as_slice());
}

#[test]
fn empty_training_set_is_a_config_error() {
    let spec = small(ModelKind::Mlp);
    let mut model = Model::new(spec.clone(), 0).unwrap();
    let mut opt = OptimizerState::new(model.params());
    let err = train_epoch(&mut model, &[], &mut opt, &cfg(&spec, 1, 1), 0, &mut ComputeTrace::default());
    assert!(matches!(err, Err(ecoforecast::Error::Config(_))));
}

#[test]
fn training_is_deterministic_across_parallelism() {
    let data = common::dataset(1, 2);
    for kind in [ModelKind::Mlp, ModelKind::Leaky, ModelKind::Esn] {
        let spec = small(kind);
        let run = |mode| {
            let mut m = Model::new(spec.clone(), 5).unwrap();
            let c = TrainConfig { parallelism: mode, ..cfg(&spec, 3, 3) };
            let h = fit(&mut m, &data.train, &data.val, &c).unwrap();
            let trace = ComputeTrace { wall_seconds: 0.0, ..h.trace };
            (h.epochs, trace, m)
        };
        let a = run(Parallelism::Parallel);
        let b = run(Parallelism::Sequential);
        assert_eq!(a.0, b.0, "{kind}");
        assert_eq!(a.1, b.1, "{kind}");
        assert_eq!(a.2, b.2, "{kind}");
    }
}

#[test]
fn longer_training_lowers_validation_loss() {
    let data = common::dataset(1, 3);
    let spec = small(ModelKind::Mlp);
    let mut m = Model::new(spec.clone(), 1).unwrap();
    let h = fit(&mut m, &data.train, &data.val, &TrainConfig { restore_best: false, ..cfg(&spec, 50, 50) }).unwrap();
    assert_eq!(h.epochs.len(), 50);
    assert!(h.epochs[49].val_loss < h.epochs[0].val_loss);
}

#[test]
fn stalled_validation_stops_after_patience() {
    let data = common::dataset(1, 4);
    let spec = small(ModelKind::Mlp);
    let mut m = Model::new(spec.clone(), 1).unwrap();
    // a vanishing learning rate leaves every weight unchanged
    let c = TrainConfig { learning_rate: 1e-300, ..cfg(&spec, 100, 4) };
    let h = fit(&mut m, &data.train, &data.val, &c).unwrap();
    assert_eq!(h.stopped_epoch, 5);
    assert_eq!(h.epochs.len(), 5);
    assert_eq!(h.best_epoch, 1);
}

#[test]
fn restored_weights_reproduce_best_validation_loss() {
    let data = common::dataset(1, 5);
    let spec = small(ModelKind::Rnn);
    let mut m = Model::new(spec.clone(), 2).unwrap();
    let h = fit(&mut m, &data.train, &data.val, &cfg(&spec, 8, 8)).unwrap();
    let best = h.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(h.best_val, best);
    let again = evaluate_loss(&m, &data.val, Parallelism::Sequential, &mut ComputeTrace::default()).unwrap();
    assert!((again - h.best_val).abs() < 1e-12);
    let mut running = f64::INFINITY;
    for e in &h.epochs {
        running = running.min(e.val_loss);
        assert!(running >= h.best_val);
    }
}

#[test]
fn esn_training_never_touches_the_reservoir() {
    let data = common::dataset(1, 6);
    let spec = small(ModelKind::Esn);
    let mut m = Model::new(spec.clone(), 2).unwrap();
    let before = m.reservoir().unwrap().clone();
    fit(&mut m, &data.train, &data.val, &cfg(&spec, 3, 3)).unwrap();
    assert_eq!(&before, m.reservoir().unwrap());
}

#[test]
fn compute_trace_counts_samples() {
    let data = common::dataset(1, 7);
    let spec = small(ModelKind::Leaky);
    let mut m = Model::new(spec.clone(), 2).unwrap();
    let h = fit(&mut m, &data.train, &data.val, &cfg(&spec, 2, 5)).unwrap();
    assert_eq!(h.trace.train_samples, 2 * data.train.len() as u64);
    assert_eq!(h.trace.eval_samples, 2 * data.val.len() as u64);
    let mut t = ComputeTrace::default();
    predict(&m, &data.test, Parallelism::Sequential, &mut t).unwrap();
    assert!(t.eval_spikes <= (data.test.len() * spec.hidden * spec.timesteps) as u64);
}

#[test]
fn history_exports_one_line_per_epoch() {
    let data = common::dataset(1, 8);
    let spec = small(ModelKind::Mlp);
    let mut m = Model::new(spec.clone(), 2).unwrap();
    let h = fit(&mut m, &data.train, &data.val, &cfg(&spec, 3, 3)).unwrap();
    let mut buf = Vec::new();
    h.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("{\"epoch\":")));
}
