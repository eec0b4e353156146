use proptest::prelude::*;

use super::neuron::{self, Plain};
use super::*;
use crate::autodiff::{grad_check, grad_check_entries};
use crate::data::{FeatureRow, N_FEATURES};

fn sample(seed: u64, window: usize) -> WindowedSample {
    use rand::Rng as _;
    let mut rng = seed::rng(seed);
    let x = (0..window)
        .map(|_| {
            let mut r: FeatureRow = [0.0; N_FEATURES];
            r.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
            r
        })
        .collect();
    WindowedSample { x, y: (0..5).map(|_| rng.random_range(0.0..1.0)).collect() }
}

fn loss_fn<'a>(model: &'a Model, batch: &Batch) -> impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId> + 'a {
    let batch = batch.clone();
    move |g, ids| {
        let fwd = model.forward(g, ids, &batch)?;
        let y = g.constant(Tensor::new(vec![batch.size, batch.targets], batch.y.clone())?)?;
        g.mse_loss(fwd.pred, y)
    }
}

#[test]
fn leaky_param_count_matches_formula() {
    let m = Model::new(ModelSpec::default_for(ModelKind::Leaky), 0).unwrap();
    let (sd, h, d) = (10 * 11, 96, 5);
    assert_eq!(m.param_count(), sd * h + h + h * d + d);
}

#[test]
fn cnn_param_count_matches_hand_count() {
    let m = Model::new(ModelSpec::default_for(ModelKind::Cnn), 0).unwrap();
    // conv: 8·1·9+8, 16·8·9+16, 16·16·9+16, 8·16·9+8; pool 10×11 → 5×5
    let conv = (72 + 8) + (1152 + 16) + (2304 + 16) + (1152 + 8);
    let dense = (200 * 128 + 128) + (128 * 5 + 5);
    assert_eq!(m.param_count(), conv + dense);
    assert_eq!(m.param_count(), 31_101);
}

#[test]
fn cnn_rejects_windows_too_small_to_pool() {
    let mut spec = ModelSpec::default_for(ModelKind::Cnn);
    spec.window = 1;
    assert!(matches!(Model::new(spec, 0), Err(Error::Shape { .. })));
}

#[test]
fn silenced_snn_is_bias_only() {
    for kind in [ModelKind::Leaky, ModelKind::Synaptic, ModelKind::Lapicque] {
        let mut spec = ModelSpec::default_for(kind).with_timesteps(1);
        spec.threshold = f64::INFINITY;
        let m = Model::new(spec.clone(), 3).unwrap();
        let pred = m.predict(&[sample(1, 10)], par::Parallelism::Sequential).unwrap();
        let b2 = m.params()[3].data();
        let gain = match kind {
            ModelKind::Leaky => 1.0 - spec.neuron.beta,
            ModelKind::Lapicque => 1.0 / (spec.neuron.r * spec.neuron.c) * spec.neuron.r,
            _ => 1.0,
        };
        for (p, b) in pred[0].iter().zip(b2) {
            assert!((p - gain * b).abs() < 1e-15, "{kind}: {p} vs {b}");
        }
    }
}

#[test]
fn forward_is_pure() {
    for kind in ModelKind::ALL {
        let m = Model::new(ModelSpec::default_for(kind), 9).unwrap();
        let s = [sample(4, 10), sample(5, 10)];
        let a = m.predict(&s, par::Parallelism::Sequential).unwrap();
        let b = m.predict(&s, par::Parallelism::Parallel).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_eq!(a[0], m.predict(&s[..1], par::Parallelism::Sequential).unwrap()[0]);
    }
}

#[test]
fn zero_mlp_predicts_zero() {
    let mut m = Model::new(ModelSpec::default_for(ModelKind::Mlp), 0).unwrap();
    let zeros = m.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    m.set_params(zeros).unwrap();
    let pred = m.predict(&[sample(2, 10)], par::Parallelism::Sequential).unwrap();
    assert_eq!(pred[0], vec![0.0; 5]);
}

#[test]
fn rnn_ignores_prepended_zero_row_without_bias() {
    let mut m = Model::new(ModelSpec::default_for(ModelKind::Rnn), 1).unwrap();
    let mut p = m.params().to_vec();
    p[2] = Tensor::zeros(&[128]);
    m.set_params(p).unwrap();
    let s = sample(3, 10);
    let mut padded = s.clone();
    padded.x.insert(0, [0.0; N_FEATURES]);
    let a = m.predict(&[s], par::Parallelism::Sequential).unwrap();
    let b = m.predict(&[padded], par::Parallelism::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn spiking_models_map_zero_input_to_zero() {
    for kind in ModelKind::ALL.into_iter().filter(|k| k.is_spiking()) {
        for t in [1, 7, 20] {
            let mut m = Model::new(ModelSpec::default_for(kind).with_timesteps(t), 2).unwrap();
            let mut p = m.params().to_vec();
            p[1] = Tensor::zeros(p[1].shape());
            p[3] = Tensor::zeros(p[3].shape());
            m.set_params(p).unwrap();
            let zero = WindowedSample { x: vec![[0.0; N_FEATURES]; 10], y: vec![0.0; 5] };
            let pred = m.predict(&[zero], par::Parallelism::Sequential).unwrap();
            assert!(pred[0].iter().all(|&v| v == 0.0), "{kind} T={t}");
        }
    }
}

#[test]
fn mlp_grad_check() {
    let m = Model::new(ModelSpec::default_for(ModelKind::Mlp), 5).unwrap();
    let batch = Batch::from_samples(&(0..4).map(|i| sample(i, 10)).collect::<Vec<_>>()).unwrap();
    let err = grad_check_entries(m.params(), 1e-5, Some(64), loss_fn(&m, &batch)).unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn leaky_snn_grad_check_on_surrogate_graph() {
    let m = Model::new(ModelSpec::default_for(ModelKind::Leaky).with_timesteps(3), 5).unwrap();
    let batch = Batch::from_samples(&[sample(8, 10)]).unwrap();
    let err = grad_check_entries(m.params(), 1e-5, Some(64), loss_fn(&m, &batch)).unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn every_architecture_passes_grad_check() {
    for kind in ModelKind::ALL {
        let mut spec = ModelSpec::default_for(kind).with_timesteps(2);
        spec.hidden = 6;
        let m = Model::new(spec, 6).unwrap();
        let batch = Batch::from_samples(&[sample(1, 10), sample(2, 10)]).unwrap();
        let err = grad_check_entries(m.params(), 1e-5, Some(16), loss_fn(&m, &batch)).unwrap();
        assert!(err < 1e-3, "{kind}: {err}");
    }
}

#[test]
fn scalar_grad_check_sanity() {
    let err = grad_check(&[Tensor::scalar(2.0)], 1e-4, |g, p| g.mul(p[0], p[0])).unwrap();
    assert!(err < 1e-6);
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    for kind in [ModelKind::Esn, ModelKind::RLeaky, ModelKind::Cnn] {
        let m = Model::new(ModelSpec::default_for(kind), 42).unwrap();
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let bits = |m: &Model| -> Vec<u64> {
            m.params().iter().flat_map(|p| p.data().iter().map(|x| x.to_bits())).collect()
        };
        assert_eq!(bits(&m), bits(&back));
    }
}

#[test]
fn checkpoint_rejects_mismatched_params() {
    let m = Model::new(ModelSpec::default_for(ModelKind::Mlp), 0).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
    v["model"]["spec"]["hidden"] = 64.into();
    assert!(Model::from_json(&v.to_string()).is_err());
}

#[test]
fn ridge_readout_leaves_reservoir_untouched() {
    let mut spec = ModelSpec::default_for(ModelKind::Esn);
    spec.hidden = 16;
    let mut m = Model::new(spec, 1).unwrap();
    let before = m.reservoir().unwrap().clone();
    let train: Vec<_> = (0..40).map(|i| sample(i, 10)).collect();
    m.fit_ridge(&train, 1e-6, par::Parallelism::Sequential).unwrap();
    assert_eq!(&before, m.reservoir().unwrap());
    assert_eq!(m.params()[1].data(), &[0.0; 5]);
}

#[test]
fn snn_layer_costs_are_spike_aware() {
    let m = Model::new(ModelSpec::default_for(ModelKind::Leaky).with_timesteps(10), 0).unwrap();
    let costs = m.layer_costs();
    assert_eq!(costs[0].macs, 110 * 96);
    assert_eq!(costs[1].neuron_updates, 96 * 10);
    assert!(costs[2].spike_input);
    assert_eq!(costs[2].macs, 96 * 5 * 10);
}

fn trajectory(p: &NeuronParams, inputs: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut st = NeuronState::zeros(1);
    inputs
        .iter()
        .map(|&i| {
            let (n, s) = neuron::step(&mut Plain, p, &st, &vec![i], None).unwrap();
            let pre = match p.reset {
                Reset::Subtract => n.u.iter().zip(&s).map(|(u, s)| u + s * p.threshold).collect(),
                Reset::None => n.u.clone(),
            };
            st = n;
            (pre, st.u.clone())
        })
        .collect()
}

proptest! {
    #[test]
    fn rleaky_without_gain_is_leaky(inputs in prop::collection::vec(-3.0f64..3.0, 1..60), beta in 0.05f64..0.95) {
        let mut leaky = NeuronParams::new(NeuronKind::Leaky, 0.7);
        leaky.beta = beta;
        let mut rl = leaky;
        rl.kind = NeuronKind::RLeaky;
        rl.v = 0.0;
        prop_assert_eq!(trajectory(&leaky, &inputs), trajectory(&rl, &inputs));
    }

    #[test]
    fn synaptic_without_trace_is_leaky_with_unscaled_drive(
        inputs in prop::collection::vec(-3.0f64..3.0, 1..60),
        beta in 0.05f64..0.95,
    ) {
        let mut leaky = NeuronParams::new(NeuronKind::Leaky, f64::INFINITY);
        leaky.beta = beta;
        let mut syn = leaky;
        syn.kind = NeuronKind::Synaptic;
        syn.alpha = 0.0;
        let scaled: Vec<f64> = inputs.iter().map(|i| i / (1.0 - beta)).collect();
        let a = trajectory(&syn, &inputs);
        let b = trajectory(&leaky, &scaled);
        for ((_, ua), (_, ub)) in a.iter().zip(&b) {
            prop_assert!((ua[0] - ub[0]).abs() < 1e-12 * ua[0].abs().max(1.0));
        }
    }

    #[test]
    fn subtract_reset_removes_exactly_theta(
        inputs in prop::collection::vec(0.0f64..5.0, 1..80),
        kind_idx in 0usize..5,
        theta in 0.3f64..2.0,
    ) {
        let kind = [NeuronKind::Lapicque, NeuronKind::Leaky, NeuronKind::RLeaky, NeuronKind::Synaptic, NeuronKind::Alpha][kind_idx];
        let p = NeuronParams::new(kind, theta);
        let mut st = NeuronState::zeros(1);
        for &i in &inputs {
            let before = st.clone();
            let (n, s) = neuron::step(&mut Plain, &p, &before, &vec![i], None).unwrap();
            let mut no_reset = p;
            no_reset.reset = Reset::None;
            let (pre, _) = neuron::step(&mut Plain, &no_reset, &before, &vec![i], None).unwrap();
            if s[0] == 1.0 {
                prop_assert_eq!(n.u[0], pre.u[0] - theta);
            } else {
                prop_assert_eq!(n.u[0], pre.u[0]);
            }
            prop_assert!(n.is_finite());
            st = n;
        }
    }

    #[test]
    fn output_layer_integrates_past_threshold(drive in 1.0f64..5.0) {
        let p = NeuronParams::new(NeuronKind::Leaky, 0.5).with_reset(Reset::None);
        let traj = trajectory(&p, &vec![drive; 200]);
        let last = traj.last().unwrap().1[0];
        prop_assert!(last > 0.5);
        let effective = NeuronParams::new(NeuronKind::Leaky, f64::INFINITY).with_reset(Reset::None);
        prop_assert_eq!(trajectory(&effective, &vec![drive; 200]).last().unwrap().1[0], last);
    }
}
