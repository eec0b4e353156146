//! Forecaster architectures: five spiking networks, the echo state network
//! and the MLP/CNN/RNN baselines.

pub mod esn;
pub mod neuron;
mod spec;

use std::path::Path;

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

pub use esn::{esn_fit_readout_ridge, esn_init, esn_step, Reservoir};
pub use neuron::{
    alpha_step, encode_direct, lapicque_step, leaky_step, rleaky_step, synaptic_step, NeuronKind,
    NeuronParams, NeuronState, Reset,
};
pub use spec::{EsnConfig, ModelKind, ModelSpec, NeuronConfig, Readout, DEFAULT_TIMESTEPS, DEFAULT_WINDOW};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use neuron::Traced;

/// CNN channel plan after the single input channel.
pub const CNN_CHANNELS: [usize; 4] = [8, 16, 16, 8];
const CNN_KERNEL: usize = 3;
const CNN_POOL: usize = 2;
const CHECKPOINT_VERSION: u32 = 1;

/// A mini-batch laid out for the graph: `x` is `size × window × features`
/// row-major, `y` is `size × targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub size: usize,
    pub window: usize,
    pub features: usize,
    pub targets: usize,
}

impl Batch {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a WindowedSample>) -> Result<Self> {
        let mut it = samples.into_iter().peekable();
        let first = it.peek().ok_or_else(|| Error::Config("empty batch".into()))?;
        let (window, targets) = (first.window(), first.y.len());
        let features = first.x.first().map_or(0, |r| r.len());
        let mut b = Batch { x: Vec::new(), y: Vec::new(), size: 0, window, features, targets };
        for s in it {
            if s.window() != window || s.y.len() != targets {
                return Err(Error::shape("batch", &[s.window(), s.y.len()], &[window, targets]));
            }
            b.x.extend(s.flat_x());
            b.y.extend_from_slice(&s.y);
            b.size += 1;
        }
        Ok(b)
    }

    fn sample_rows(&self, i: usize) -> impl Iterator<Item = &[f64]> {
        let n = self.window * self.features;
        self.x[i * n..(i + 1) * n].chunks(self.features)
    }

    /// `size × features` slice of window row `t`.
    fn step(&self, t: usize) -> Vec<f64> {
        let n = self.window * self.features;
        (0..self.size)
            .flat_map(|i| {
                let start = i * n + t * self.features;
                self.x[start..start + self.features].iter().copied()
            })
            .collect()
    }
}

/// Operation counts for one layer and one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    /// Dense multiply-accumulates.
    pub macs: u64,
    /// Neuron state updates.
    pub neuron_updates: u64,
    /// Inputs are binary spikes, so an event-driven substrate only pays
    /// `fan_out` accumulates per emitted spike.
    pub spike_input: bool,
    pub fan_out: u64,
    /// Whether the backward pass runs through this layer.
    pub on_grad_path: bool,
}

impl LayerCost {
    fn dense(name: &str, macs: usize) -> Self {
        Self {
            name: name.into(),
            macs: macs as u64,
            neuron_updates: 0,
            spike_input: false,
            fan_out: 0,
            on_grad_path: true,
        }
    }
}

/// Graph outputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// `batch × targets` prediction.
    pub pred: NodeId,
    /// Total hidden spikes emitted (spiking models).
    pub spikes: f64,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Uniform(f64),
    Const(f64),
}

struct Slot {
    name: &'static str,
    shape: Vec<usize>,
    init: Init,
}

fn slot(name: &'static str, shape: &[usize], fan_in: usize) -> Slot {
    Slot { name, shape: shape.to_vec(), init: Init::Uniform(1.0 / (fan_in as f64).sqrt()) }
}

fn dense_pair(w: &'static str, b: &'static str, out: usize, inp: usize) -> [Slot; 2] {
    [slot(w, &[out, inp], inp), slot(b, &[out], inp)]
}

fn cnn_flat(spec: &ModelSpec) -> usize {
    CNN_CHANNELS[3] * (spec.window / CNN_POOL) * (spec.n_features / CNN_POOL)
}

fn layout(spec: &ModelSpec) -> Vec<Slot> {
    let (h, d_out) = (spec.hidden, spec.n_targets);
    let mut out = Vec::new();
    match spec.kind {
        ModelKind::Mlp => {
            out.extend(dense_pair("fc1.w", "fc1.b", h, spec.input_len()));
            out.extend(dense_pair("fc2.w", "fc2.b", d_out, h));
        }
        ModelKind::Cnn => {
            let names = [("conv1.k", "conv1.b"), ("conv2.k", "conv2.b"), ("conv3.k", "conv3.b"), ("conv4.k", "conv4.b")];
            let mut c_in = 1;
            for (&(k, b), &c_out) in names.iter().zip(&CNN_CHANNELS) {
                let fan_in = c_in * CNN_KERNEL * CNN_KERNEL;
                out.push(slot(k, &[c_out, c_in, CNN_KERNEL, CNN_KERNEL], fan_in));
                out.push(slot(b, &[c_out], fan_in));
                c_in = c_out;
            }
            out.extend(dense_pair("fc1.w", "fc1.b", h, cnn_flat(spec)));
            out.extend(dense_pair("fc2.w", "fc2.b", d_out, h));
        }
        ModelKind::Rnn => {
            out.push(slot("rnn.w_ih", &[h, spec.n_features], h));
            out.push(slot("rnn.w_hh", &[h, h], h));
            out.push(slot("rnn.b", &[h], h));
            out.extend(dense_pair("out.w", "out.b", d_out, h));
        }
        ModelKind::Esn => out.extend(dense_pair("readout.w", "readout.b", d_out, h)),
        _ => {
            out.extend(dense_pair("fc1.w", "fc1.b", h, spec.input_len()));
            out.extend(dense_pair("fc2.w", "fc2.b", d_out, h));
            if spec.kind == ModelKind::RLeaky {
                out.push(Slot { name: "lif1.v", shape: vec![1], init: Init::Const(spec.neuron.recurrent_init) });
            }
        }
    }
    out
}

/// A forecaster: its spec, trainable parameters, and (ESN) fixed reservoir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    spec: ModelSpec,
    names: Vec<String>,
    params: Vec<Tensor>,
    reservoir: Option<Reservoir>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: Model,
}

impl Model {
    /// Initialize weights uniformly in `±1/√fan_in`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seed::rng(seed::derive(seed, seed::tag("init")));
        let slots = layout(&spec);
        let names = slots.iter().map(|s| s.name.to_string()).collect();
        let params = slots
            .iter()
            .map(|s| {
                let n: usize = s.shape.iter().product();
                let data = match s.init {
                    Init::Uniform(bound) => {
                        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                        (0..n).map(|_| dist.sample(&mut rng)).collect()
                    }
                    Init::Const(v) => vec![v; n],
                };
                Tensor::new(s.shape.clone(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        let reservoir = if spec.kind == ModelKind::Esn {
            Some(esn::esn_init_with_inputs(
                seed::derive(seed, seed::tag("reservoir")),
                spec.hidden,
                spec.n_features,
                spec.esn.rho,
                spec.esn.input_scale,
                spec.esn.leak,
            )?)
        } else {
            None
        };
        Ok(Self { spec, names, params, reservoir })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn reservoir(&self) -> Option<&Reservoir> {
        self.reservoir.as_ref()
    }

    /// Replace the trainable parameters; shapes must match.
    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "expected {} parameter tensors, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for (new, old) in params.iter().zip(&self.params) {
            if !new.same_shape(old) {
                return Err(Error::shape("set_params", new.shape(), old.shape()));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Number of trainable scalars (the reservoir is fixed and not counted).
    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Register the parameters on `g`, trainable or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<Vec<NodeId>> {
        self.params
            .iter()
            .map(|p| if trainable { g.param(p.clone()) } else { g.constant(p.clone()) })
            .collect()
    }

    /// Record the forward pass for `batch` on `g`.
    pub fn forward(&self, g: &mut Graph, ids: &[NodeId], batch: &Batch) -> Result<Forward> {
        if ids.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "forward expects {} parameter nodes, got {}",
                self.params.len(),
                ids.len()
            )));
        }
        let spec = &self.spec;
        if batch.features != spec.n_features || batch.targets != spec.n_targets {
            return Err(Error::shape(
                "forward",
                &[batch.window, batch.features, batch.targets],
                &[spec.window, spec.n_features, spec.n_targets],
            ));
        }
        // the RNN and ESN consume rows sequentially and accept any window length
        if batch.window != spec.window && !matches!(spec.kind, ModelKind::Rnn | ModelKind::Esn) {
            return Err(Error::shape("forward", &[batch.window, batch.features], &[spec.window, spec.n_features]));
        }
        match spec.kind {
            ModelKind::Mlp => self.mlp(g, ids, batch),
            ModelKind::Cnn => self.cnn(g, ids, batch),
            ModelKind::Rnn => self.rnn(g, ids, batch),
            ModelKind::Esn => self.esn(g, ids, batch),
            _ => self.snn(g, ids, batch),
        }
    }

    fn flat_input(&self, g: &mut Graph, batch: &Batch) -> Result<NodeId> {
        g.constant(Tensor::new(vec![batch.size, batch.window * batch.features], batch.x.clone())?)
    }

    fn mlp(&self, g: &mut Graph, p: &[NodeId], batch: &Batch) -> Result<Forward> {
        let x = self.flat_input(g, batch)?;
        let h = g.linear(x, p[0], Some(p[1]))?;
        let h = g.relu(h)?;
        let pred = g.linear(h, p[2], Some(p[3]))?;
        Ok(Forward { pred, spikes: 0.0 })
    }

    fn cnn(&self, g: &mut Graph, p: &[NodeId], batch: &Batch) -> Result<Forward> {
        let mut x = g.constant(Tensor::new(
            vec![batch.size, 1, batch.window, batch.features],
            batch.x.clone(),
        )?)?;
        for layer in 0..CNN_CHANNELS.len() {
            x = g.conv2d(x, p[2 * layer], Some(p[2 * layer + 1]), 1, CNN_KERNEL / 2)?;
            x = g.relu(x)?;
        }
        let pooled = g.avg_pool2d(x, CNN_POOL)?;
        let flat = g.reshape(pooled, &[batch.size, cnn_flat(&self.spec)])?;
        let h = g.linear(flat, p[8], Some(p[9]))?;
        let h = g.relu(h)?;
        let pred = g.linear(h, p[10], Some(p[11]))?;
        Ok(Forward { pred, spikes: 0.0 })
    }

    fn rnn(&self, g: &mut Graph, p: &[NodeId], batch: &Batch) -> Result<Forward> {
        let mut h = g.constant(Tensor::zeros(&[batch.size, self.spec.hidden]))?;
        for t in 0..batch.window {
            let xt = g.constant(Tensor::new(vec![batch.size, batch.features], batch.step(t))?)?;
            let drive = g.linear(xt, p[0], Some(p[2]))?;
            let rec = g.linear(h, p[1], None)?;
            let pre = g.add(drive, rec)?;
            h = g.tanh(pre)?;
        }
        let pred = g.linear(h, p[3], Some(p[4]))?;
        Ok(Forward { pred, spikes: 0.0 })
    }

    /// Final reservoir state for every sample of `batch`, rows of length `n_r`.
    pub fn reservoir_states(&self, batch: &Batch, mode: par::Parallelism) -> Result<Vec<Vec<f64>>> {
        let res = self
            .reservoir
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("{} has no reservoir", self.spec.kind)))?;
        let idx: Vec<usize> = (0..batch.size).collect();
        par::try_map(mode, &idx, |&i| {
            let rows: Vec<&[f64]> = batch.sample_rows(i).collect();
            esn::esn_final_state(res, &rows)
        })
    }

    fn esn(&self, g: &mut Graph, p: &[NodeId], batch: &Batch) -> Result<Forward> {
        let states = self.reservoir_states(batch, g.parallelism())?;
        let s = g.constant(Tensor::from_rows(&states)?)?;
        let pred = g.linear(s, p[0], Some(p[1]))?;
        Ok(Forward { pred, spikes: 0.0 })
    }

    fn snn(&self, g: &mut Graph, p: &[NodeId], batch: &Batch) -> Result<Forward> {
        let spec = &self.spec;
        let hidden_p = spec.hidden_neuron()?;
        let out_p = spec.output_neuron()?;
        let gain = (spec.kind == ModelKind::RLeaky).then(|| p[4]);
        let x = self.flat_input(g, batch)?;
        // direct encoding repeats the same current every step, so the input
        // projection is computed once
        let current = g.linear(x, p[0], Some(p[1]))?;
        let zero_h = g.constant(Tensor::zeros(&[batch.size, spec.hidden]))?;
        let zero_o = g.constant(Tensor::zeros(&[batch.size, spec.n_targets]))?;
        let mut hidden = NeuronState::uniform(zero_h);
        let mut output = NeuronState::uniform(zero_o);
        let mut alg = Traced { graph: g, surrogate: spec.neuron.surrogate };
        let mut spikes = 0.0;
        for _ in 0..spec.timesteps {
            let (h_next, s) = neuron::step(&mut alg, &hidden_p, &hidden, &current, gain.as_ref())?;
            hidden = h_next;
            spikes += alg.graph.value(s).data().iter().sum::<f64>();
            let drive = alg.graph.linear(s, p[2], Some(p[3]))?;
            output = neuron::step(&mut alg, &out_p, &output, &drive, None)?.0;
        }
        Ok(Forward { pred: output.u, spikes })
    }

    /// Predictions for each sample, without recording gradients.
    pub fn predict(&self, samples: &[WindowedSample], mode: par::Parallelism) -> Result<Vec<Vec<f64>>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let batch = Batch::from_samples(samples)?;
        let mut g = Graph::with_mode(mode);
        let ids = self.bind(&mut g, false)?;
        let fwd = self.forward(&mut g, &ids, &batch)?;
        Ok(g.value(fwd.pred).data().chunks(batch.targets).map(<[f64]>::to_vec).collect())
    }

    /// Per-sample operation counts, layer by layer.
    pub fn layer_costs(&self) -> Vec<LayerCost> {
        layer_costs(&self.spec)
    }

    /// Fit the ESN readout in closed form on `train`; the bias is zeroed.
    pub fn fit_ridge(&mut self, train: &[WindowedSample], lambda: f64, mode: par::Parallelism) -> Result<()> {
        let batch = Batch::from_samples(train)?;
        let states = self.reservoir_states(&batch, mode)?;
        let targets: Vec<Vec<f64>> = batch.y.chunks(batch.targets).map(<[f64]>::to_vec).collect();
        let w = esn_fit_readout_ridge(&states, &targets, lambda)?;
        let (d_out, n_r) = (self.spec.n_targets, self.spec.hidden);
        self.params[0] = Tensor::new(vec![d_out, n_r], w)?;
        self.params[1] = Tensor::zeros(&[d_out]);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint { version: CHECKPOINT_VERSION, model: self.clone() })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", ck.version)));
        }
        let m = ck.model;
        m.spec.validate()?;
        let expected = layout(&m.spec);
        if expected.len() != m.params.len()
            || expected.iter().zip(&m.params).any(|(s, p)| s.shape != p.shape())
        {
            return Err(Error::Config("checkpoint parameters do not match the model spec".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-sample operation counts of the forward pass, layer by layer.
pub fn layer_costs(s: &ModelSpec) -> Vec<LayerCost> {
    let (h, d_out, window) = (s.hidden, s.n_targets, s.window);
    match s.kind {
        ModelKind::Mlp => vec![
            LayerCost::dense("fc1", s.input_len() * h),
            LayerCost::dense("fc2", h * d_out),
        ],
        ModelKind::Cnn => {
            let pixels = window * s.n_features;
            let mut c_in = 1;
            let mut layers: Vec<LayerCost> = CNN_CHANNELS
                .iter()
                .enumerate()
                .map(|(i, &c_out)| {
                    let l = LayerCost::dense(
                        ["conv1", "conv2", "conv3", "conv4"][i],
                        c_out * c_in * CNN_KERNEL * CNN_KERNEL * pixels,
                    );
                    c_in = c_out;
                    l
                })
                .collect();
            layers.push(LayerCost::dense("fc1", cnn_flat(s) * h));
            layers.push(LayerCost::dense("fc2", h * d_out));
            layers
        }
        ModelKind::Rnn => vec![
            LayerCost::dense("rnn", window * (s.n_features * h + h * h)),
            LayerCost::dense("out", h * d_out),
        ],
        ModelKind::Esn => {
            let step = h * (s.n_features + h);
            let mut res = LayerCost::dense("reservoir", window * step);
            res.on_grad_path = false;
            if matches!(s.esn.readout, Readout::Ridge { .. }) {
                vec![res, LayerCost { on_grad_path: false, ..LayerCost::dense("readout", h * d_out) }]
            } else {
                vec![res, LayerCost::dense("readout", h * d_out)]
            }
        }
        _ => {
            let t = s.timesteps;
            let neurons = |name: &str, n: usize| LayerCost {
                neuron_updates: (n * t) as u64,
                ..LayerCost::dense(name, 0)
            };
            vec![
                LayerCost::dense("fc1", s.input_len() * h),
                neurons("lif1", h),
                LayerCost {
                    spike_input: true,
                    fan_out: d_out as u64,
                    ..LayerCost::dense("fc2", h * d_out * t)
                },
                neurons("lif2", d_out),
            ]
        }
    }
}

#[cfg(test)]
mod tests;
