//! Leaky integrate-and-fire dynamics for the five neuron kinds.
//!
//! Each update is written once against [`Algebra`], which is implemented for
//! plain vectors (simulation, oracles) and for graph nodes (training), so the
//! dynamics that are tested are the dynamics that are trained.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, SurrogateSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    Lapicque,
    Leaky,
    #[serde(rename = "rleaky")]
    RLeaky,
    Synaptic,
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reset {
    /// Lower the potential by exactly the threshold after a spike.
    Subtract,
    /// Never reset; spikes have no effect on the layer state.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub kind: NeuronKind,
    /// Membrane resistance (Lapicque).
    pub r: f64,
    /// Membrane capacitance (Lapicque).
    pub c: f64,
    /// Membrane decay; for Alpha, the inhibitory decay.
    pub beta: f64,
    /// Synaptic decay (Synaptic) or excitatory decay (Alpha).
    pub alpha: f64,
    /// Recurrent spike scale (RLeaky).
    pub v: f64,
    pub threshold: f64,
    pub reset: Reset,
}

impl NeuronParams {
    pub fn new(kind: NeuronKind, threshold: f64) -> Self {
        let (beta, alpha) = match kind {
            NeuronKind::Alpha => (0.8, 0.9),
            _ => (0.9, 0.9),
        };
        Self {
            kind,
            r: 1.0,
            c: 5.0,
            beta,
            alpha,
            v: 1.0,
            threshold,
            reset: Reset::Subtract,
        }
    }

    pub fn with_reset(mut self, reset: Reset) -> Self {
        self.reset = reset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.threshold.is_nan() {
            return bad("threshold is NaN".into());
        }
        match self.kind {
            NeuronKind::Lapicque => {
                if !(self.r > 0.0 && self.c > 0.0 && self.r * self.c > 1.0) {
                    return bad(format!("Lapicque needs R·C > 1, got R={} C={}", self.r, self.c));
                }
            }
            NeuronKind::Leaky | NeuronKind::RLeaky => {
                if !open_unit(self.beta) {
                    return bad(format!("beta must lie in (0,1), got {}", self.beta));
                }
                if !self.v.is_finite() {
                    return bad(format!("recurrent scale V must be finite, got {}", self.v));
                }
            }
            NeuronKind::Synaptic => {
                if !open_unit(self.beta) {
                    return bad(format!("beta must lie in (0,1), got {}", self.beta));
                }
                // alpha = 0 is the degenerate no-trace case
                if !(0.0..1.0).contains(&self.alpha) {
                    return bad(format!("alpha must lie in [0,1), got {}", self.alpha));
                }
            }
            NeuronKind::Alpha => {
                if !open_unit(self.alpha) || !open_unit(self.beta) {
                    return bad(format!("alpha/beta must lie in (0,1), got {}/{}", self.alpha, self.beta));
                }
                if self.alpha <= self.beta {
                    return bad(format!("Alpha neuron needs alpha > beta, got {} <= {}", self.alpha, self.beta));
                }
            }
        }
        Ok(())
    }

    /// Lapicque decay `1 − 1/(RC)`.
    pub fn lapicque_decay(&self) -> f64 {
        1.0 - 1.0 / (self.r * self.c)
    }

    /// Gain that normalizes the Alpha kernel so a unit impulse peaks at 1.
    pub fn alpha_gain(&self) -> f64 {
        alpha_kernel_gain(self.alpha, self.beta)
    }
}

/// `1 / max_t (αᵗ − βᵗ)` over integer `t ≥ 1`, for `α > β`.
pub fn alpha_kernel_gain(alpha: f64, beta: f64) -> f64 {
    let mut best = 0.0f64;
    let (mut a, mut b) = (alpha, beta);
    loop {
        let v = a - b;
        if v < best {
            break;
        }
        best = v;
        a *= alpha;
        b *= beta;
    }
    1.0 / best
}

/// Vector arithmetic the neuron updates are written against.
pub trait Algebra {
    type V: Clone;

    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scale(&mut self, a: &Self::V, c: f64) -> Result<Self::V>;
    /// Multiply by a single-element value.
    fn scale_by(&mut self, a: &Self::V, s: &Self::V) -> Result<Self::V>;
    /// Heaviside at `u ≥ threshold`.
    fn fire(&mut self, u: &Self::V, threshold: f64) -> Result<Self::V>;
}

/// Dense `f64` vectors.
#[derive(Debug, Default, Clone, Copy)]
pub struct Plain;

fn zip(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::shape("neuron", &[a.len()], &[b.len()]));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
}

impl Algebra for Plain {
    type V = Vec<f64>;

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        zip(a, b, |x, y| x + y)
    }

    fn sub(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        zip(a, b, |x, y| x - y)
    }

    fn scale(&mut self, a: &Vec<f64>, c: f64) -> Result<Vec<f64>> {
        Ok(a.iter().map(|x| x * c).collect())
    }

    fn scale_by(&mut self, a: &Vec<f64>, s: &Vec<f64>) -> Result<Vec<f64>> {
        let [c] = s.as_slice() else {
            return Err(Error::shape("scale_by", &[s.len()], &[1]));
        };
        self.scale(a, *c)
    }

    fn fire(&mut self, u: &Vec<f64>, threshold: f64) -> Result<Vec<f64>> {
        Ok(u.iter().map(|&x| if x >= threshold { 1.0 } else { 0.0 }).collect())
    }
}

/// Graph nodes; spikes carry the surrogate derivative.
pub struct Traced<'g> {
    pub graph: &'g mut Graph,
    pub surrogate: SurrogateSpec,
}

impl Algebra for Traced<'_> {
    type V = NodeId;

    fn add(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.graph.add(*a, *b)
    }

    fn sub(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.graph.sub(*a, *b)
    }

    fn scale(&mut self, a: &NodeId, c: f64) -> Result<NodeId> {
        self.graph.scale(*a, c)
    }

    fn scale_by(&mut self, a: &NodeId, s: &NodeId) -> Result<NodeId> {
        self.graph.mul_scalar(*a, *s)
    }

    fn fire(&mut self, u: &NodeId, threshold: f64) -> Result<NodeId> {
        self.graph.spike(*u, threshold, self.surrogate)
    }
}

/// Per-layer state. Fields a kind does not use stay at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState<V> {
    /// Membrane potential (post-reset).
    pub u: V,
    /// Synaptic current trace (Synaptic).
    pub syn: V,
    /// Excitatory trace (Alpha).
    pub exc: V,
    /// Inhibitory trace (Alpha).
    pub inh: V,
    /// Spikes emitted on the previous step (RLeaky).
    pub last_spike: V,
}

impl<V: Clone> NeuronState<V> {
    pub fn uniform(zero: V) -> Self {
        Self {
            u: zero.clone(),
            syn: zero.clone(),
            exc: zero.clone(),
            inh: zero.clone(),
            last_spike: zero,
        }
    }
}

impl NeuronState<Vec<f64>> {
    pub fn zeros(n: usize) -> Self {
        Self::uniform(vec![0.0; n])
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.syn, &self.exc, &self.inh, &self.last_spike]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// One timestep: integrate `input`, fire where the potential reaches the
/// threshold, then apply the reset rule. `recurrent_gain` overrides
/// `params.v` for RLeaky (used for a learnable gain).
pub fn step<A: Algebra>(
    alg: &mut A,
    params: &NeuronParams,
    state: &NeuronState<A::V>,
    input: &A::V,
    recurrent_gain: Option<&A::V>,
) -> Result<(NeuronState<A::V>, A::V)> {
    let mut next = state.clone();
    let theta = params.threshold;
    let u = match params.kind {
        NeuronKind::Lapicque => {
            let k = 1.0 / (params.r * params.c);
            let leak = alg.scale(&state.u, 1.0 - k)?;
            let drive = alg.scale(input, k * params.r)?;
            alg.add(&leak, &drive)?
        }
        NeuronKind::Leaky => {
            let leak = alg.scale(&state.u, params.beta)?;
            let drive = alg.scale(input, 1.0 - params.beta)?;
            alg.add(&leak, &drive)?
        }
        NeuronKind::RLeaky => {
            let feedback = match recurrent_gain {
                Some(v) => alg.scale_by(&state.last_spike, v)?,
                None => alg.scale(&state.last_spike, params.v)?,
            };
            let total = alg.add(input, &feedback)?;
            let leak = alg.scale(&state.u, params.beta)?;
            let drive = alg.scale(&total, 1.0 - params.beta)?;
            alg.add(&leak, &drive)?
        }
        NeuronKind::Synaptic => {
            let decayed = alg.scale(&state.syn, params.alpha)?;
            next.syn = alg.add(&decayed, input)?;
            let leak = alg.scale(&state.u, params.beta)?;
            alg.add(&leak, &next.syn)?
        }
        NeuronKind::Alpha => {
            let e = alg.scale(&state.exc, params.alpha)?;
            next.exc = alg.add(&e, input)?;
            let h = alg.scale(&state.inh, params.beta)?;
            next.inh = alg.sub(&h, input)?;
            let sum = alg.add(&next.exc, &next.inh)?;
            alg.scale(&sum, params.alpha_gain())?
        }
    };
    let spikes = alg.fire(&u, theta)?;
    match params.reset {
        // an infinite threshold never fires, and θ·0 would be NaN
        Reset::Subtract if theta.is_finite() => {
            let drop = alg.scale(&spikes, theta)?;
            next.u = alg.sub(&u, &drop)?;
            if params.kind == NeuronKind::Alpha {
                // the filter recomputes U from its traces, so the reset is
                // carried by the excitatory trace
                let carry = alg.scale(&spikes, theta / params.alpha_gain())?;
                next.exc = alg.sub(&next.exc, &carry)?;
            }
            if params.kind == NeuronKind::RLeaky {
                next.last_spike = spikes.clone();
            }
        }
        _ => next.u = u,
    }
    Ok((next, spikes))
}

fn checked(kind: NeuronKind, params: &NeuronParams) -> Result<()> {
    if params.kind != kind {
        return Err(Error::Parameter(format!("expected {kind:?} params, got {:?}", params.kind)));
    }
    params.validate()
}

type PlainStep = Result<(NeuronState<Vec<f64>>, Vec<f64>)>;

/// `U′ = (1 − 1/RC)·U + (1/RC)·I·R`.
pub fn lapicque_step(state: &NeuronState<Vec<f64>>, input: &[f64], params: &NeuronParams) -> PlainStep {
    checked(NeuronKind::Lapicque, params)?;
    step(&mut Plain, params, state, &input.to_vec(), None)
}

/// `U′ = β·U + (1 − β)·I`.
pub fn leaky_step(state: &NeuronState<Vec<f64>>, input: &[f64], params: &NeuronParams) -> PlainStep {
    checked(NeuronKind::Leaky, params)?;
    step(&mut Plain, params, state, &input.to_vec(), None)
}

/// `U′ = β·U + (1 − β)·(I + V·s_prev)`.
pub fn rleaky_step(state: &NeuronState<Vec<f64>>, input: &[f64], params: &NeuronParams) -> PlainStep {
    checked(NeuronKind::RLeaky, params)?;
    step(&mut Plain, params, state, &input.to_vec(), None)
}

/// `I_syn′ = α·I_syn + I`, `U′ = β·U + I_syn′`.
pub fn synaptic_step(state: &NeuronState<Vec<f64>>, input: &[f64], params: &NeuronParams) -> PlainStep {
    checked(NeuronKind::Synaptic, params)?;
    step(&mut Plain, params, state, &input.to_vec(), None)
}

/// Normalized difference-of-exponentials filter:
/// `E′ = α·E + I`, `H′ = β·H − I`, `U′ = γ·(E′ + H′)`.
pub fn alpha_step(state: &NeuronState<Vec<f64>>, input: &[f64], params: &NeuronParams) -> PlainStep {
    checked(NeuronKind::Alpha, params)?;
    step(&mut Plain, params, state, &input.to_vec(), None)
}

/// Repeat-current encoding: the same input on each of `timesteps` steps.
pub fn encode_direct(x: &[f64], timesteps: usize) -> Result<Vec<Vec<f64>>> {
    if timesteps < 1 {
        return Err(Error::Config("timesteps must be >= 1".into()));
    }
    Ok(vec![x.to_vec(); timesteps])
}
