//! Tape-recording computation graph and reverse-mode backward pass.

use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeometry};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::par::Parallelism;

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurrogateSpec {
    /// Derivative `1 / (1 + slope·|u − θ|)²`.
    FastSigmoid { slope: f64 },
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec::FastSigmoid { slope: 25.0 }
    }
}

impl SurrogateSpec {
    pub fn fast_sigmoid(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::Parameter(format!("surrogate slope must be > 0, got {slope}")));
        }
        Ok(SurrogateSpec::FastSigmoid { slope })
    }

    pub fn slope(&self) -> f64 {
        match *self {
            SurrogateSpec::FastSigmoid { slope } => slope,
        }
    }

    /// Surrogate derivative at `x = u − θ`.
    pub fn grad(&self, x: f64) -> f64 {
        let d = 1.0 + self.slope() * x.abs();
        1.0 / (d * d)
    }

    /// Smooth stand-in whose exact derivative is [`SurrogateSpec::grad`].
    pub fn smooth(&self, x: f64) -> f64 {
        0.5 + x / (1.0 + self.slope() * x.abs())
    }
}

/// How `spike` evaluates its forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// Heaviside forward, surrogate backward. Used for training.
    #[default]
    Heaviside,
    /// Forward replaced by the antiderivative of the surrogate, so that
    /// finite differences see the same function the backward pass uses.
    Smoothed,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    MulScalar { x: NodeId, s: NodeId },
    AddBias(NodeId, NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Mean(NodeId),
    Sum(NodeId),
    Reshape(NodeId),
    MseLoss(NodeId, NodeId),
    Conv2d { input: NodeId, kernel: NodeId, bias: Option<NodeId>, geo: ConvGeometry },
    AvgPool2d { input: NodeId, size: usize },
    Spike { u: NodeId, threshold: f64, surrogate: SurrogateSpec },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order; the recording order is a valid
/// topological order, so the backward pass is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
    mode: Parallelism,
    spike_mode: SpikeMode,
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(op, a.shape(), b.shape()))
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::shape(op, t.shape(), &[0, 0])),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes checked by caller")
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = a.data().iter().map(|&x| f(x)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_mode(mode: Parallelism) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn set_spike_mode(&mut self, mode: SpikeMode) {
        self.spike_mode = mode;
    }

    pub fn spike_mode(&self) -> SpikeMode {
        self.spike_mode
    }

    pub fn parallelism(&self) -> Parallelism {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Registered parameter nodes in registration order.
    pub fn params(&self) -> &[NodeId] {
        &self.params
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, requires_grad: bool) -> Result<NodeId> {
        check_finite(op_name, &value)?;
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// Trainable leaf; its gradient is reported by [`Gradients::param`].
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        let id = self.push("param", value, Op::Leaf, true)?;
        self.params.push(id);
        Ok(id)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = dims2("matmul", av)?;
        let (k2, n) = dims2("matmul", bv)?;
        if k != k2 {
            return Err(Error::shape("matmul", av.shape(), bv.shape()));
        }
        let out = kernels::matmul(self.mode, av.data(), bv.data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul", Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg)
    }

    /// `x (B×in) · wᵀ + b` with `w` shaped `out×in` and `b` shaped `out`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (xv, wv) = (self.value(x), self.value(w));
        let (batch, inp) = dims2("linear", xv)?;
        let (out_dim, inp2) = dims2("linear", wv)?;
        if inp != inp2 {
            return Err(Error::shape("linear", xv.shape(), wv.shape()));
        }
        let mut out = kernels::matmul_nt(self.mode, xv.data(), wv.data(), batch, inp, out_dim);
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.shape() != [out_dim] {
                return Err(Error::shape("linear bias", bv.shape(), &[out_dim]));
            }
            for row in out.chunks_mut(out_dim) {
                for (o, &bb) in row.iter_mut().zip(bv.data()) {
                    *o += bb;
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        self.push("linear", Tensor::new(vec![batch, out_dim], out)?, Op::Linear { x, w, b }, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        self.push("add", out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        self.push("sub", out, Op::Sub(a, b), rg)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        self.push("mul", out, Op::Mul(a, b), rg)
    }

    /// Multiplication by a fixed real.
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let out = map(self.value(a), |x| x * c);
        let rg = self.rg(a);
        self.push("scale", out, Op::Scale(a, c), rg)
    }

    /// Multiplication by a single-element node (e.g. a learnable gain).
    pub fn mul_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.value(s);
        if sv.len() != 1 {
            return Err(Error::shape("mul_scalar", sv.shape(), &[1]));
        }
        let c = sv.data()[0];
        let out = map(self.value(x), |v| v * c);
        let rg = self.rg(x) || self.rg(s);
        self.push("mul_scalar", out, Op::MulScalar { x, s }, rg)
    }

    /// Adds a length-`n` bias to every row of a `m×n` tensor.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, bv) = (self.value(x), self.value(b));
        let (_, n) = dims2("add_bias", xv)?;
        if bv.shape() != [n] {
            return Err(Error::shape("add_bias", xv.shape(), bv.shape()));
        }
        let mut out = xv.clone();
        for row in out.data_mut().chunks_mut(n) {
            for (o, &bb) in row.iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        self.push("add_bias", out, Op::AddBias(x, b), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let out = map(self.value(a), |x| x.max(0.0));
        let rg = self.rg(a);
        self.push("relu", out, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let out = map(self.value(a), f64::tanh);
        let rg = self.rg(a);
        self.push("tanh", out, Op::Tanh(a), rg)
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::Contract("mean of empty tensor".into()));
        }
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(a);
        self.push("mean", Tensor::scalar(m), Op::Mean(a), rg)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).data().iter().sum::<f64>();
        let rg = self.rg(a);
        self.push("sum", Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let out = self.value(a).reshape(shape)?;
        let rg = self.rg(a);
        self.push("reshape", out, Op::Reshape(a), rg)
    }

    /// Collapses every axis after the first: `(B, …) → (B, ∏…)`.
    pub fn flatten(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.value(a).shape();
        let batch = shape.first().copied().unwrap_or(1);
        let rest: usize = shape.iter().skip(1).product();
        self.reshape(a, &[batch, rest])
    }

    /// Mean of squared differences over all entries.
    pub fn mse_loss(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let (p, t) = (self.value(pred), self.value(target));
        same_shape("mse_loss", p, t)?;
        if p.is_empty() {
            return Err(Error::Contract("mse_loss of empty tensors".into()));
        }
        let sse: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let rg = self.rg(pred) || self.rg(target);
        self.push("mse_loss", Tensor::scalar(sse / p.len() as f64), Op::MseLoss(pred, target), rg)
    }

    /// 2-D convolution. `input` is `(C, H, W)` or `(N, C, H, W)`; `kernel`
    /// is `(O, C, KH, KW)`; zero padding on every border.
    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let (iv, kv) = (self.value(input), self.value(kernel));
        let (batch, c, h, w, batched) = match *iv.shape() {
            [c, h, w] => (1, c, h, w, false),
            [n, c, h, w] => (n, c, h, w, true),
            _ => return Err(Error::shape("conv2d", iv.shape(), kv.shape())),
        };
        let (o, kc, kh, kw) = match *kv.shape() {
            [o, kc, kh, kw] => (o, kc, kh, kw),
            _ => return Err(Error::shape("conv2d", iv.shape(), kv.shape())),
        };
        if kc != c || stride == 0 || h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(Error::shape("conv2d", iv.shape(), kv.shape()));
        }
        if let Some(b) = bias {
            if self.value(b).shape() != [o] {
                return Err(Error::shape("conv2d bias", self.value(b).shape(), &[o]));
            }
        }
        let geo = ConvGeometry {
            batch,
            in_channels: c,
            height: h,
            width: w,
            out_channels: o,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            padding,
        };
        let out = kernels::conv2d_forward(
            self.mode,
            &geo,
            iv.data(),
            kv.data(),
            bias.map(|b| self.value(b).data()),
        );
        let shape = if batched {
            vec![batch, o, geo.out_h(), geo.out_w()]
        } else {
            vec![o, geo.out_h(), geo.out_w()]
        };
        let rg = self.rg(input) || self.rg(kernel) || bias.is_some_and(|b| self.rg(b));
        self.push("conv2d", Tensor::new(shape, out)?, Op::Conv2d { input, kernel, bias, geo }, rg)
    }

    /// Non-overlapping `size×size` average pooling over the last two axes of
    /// an `(N, C, H, W)` tensor; trailing rows/columns that do not fill a
    /// window are dropped.
    pub fn avg_pool2d(&mut self, input: NodeId, size: usize) -> Result<NodeId> {
        let iv = self.value(input);
        let [n, c, h, w] = *iv.shape() else {
            return Err(Error::shape("avg_pool2d", iv.shape(), &[0, 0, size, size]));
        };
        if size == 0 || h < size || w < size {
            return Err(Error::shape("avg_pool2d", iv.shape(), &[size, size]));
        }
        let (oh, ow) = (h / size, w / size);
        let inv = 1.0 / (size * size) as f64;
        let mut out = vec![0.0; n * c * oh * ow];
        for plane in 0..n * c {
            let src = &iv.data()[plane * h * w..(plane + 1) * h * w];
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = 0.0;
                    for dy in 0..size {
                        for dx in 0..size {
                            acc += src[(y * size + dy) * w + x * size + dx];
                        }
                    }
                    out[plane * oh * ow + y * ow + x] = acc * inv;
                }
            }
        }
        let rg = self.rg(input);
        self.push(
            "avg_pool2d",
            Tensor::new(vec![n, c, oh, ow], out)?,
            Op::AvgPool2d { input, size },
            rg,
        )
    }

    /// Fires where `u ≥ threshold`. The backward pass always uses the
    /// surrogate derivative; the forward depends on [`SpikeMode`].
    pub fn spike(&mut self, u: NodeId, threshold: f64, surrogate: SurrogateSpec) -> Result<NodeId> {
        if !threshold.is_finite() && threshold != f64::INFINITY {
            return Err(Error::Parameter(format!("spike threshold {threshold}")));
        }
        let out = match self.spike_mode {
            SpikeMode::Heaviside => map(self.value(u), |x| if x >= threshold { 1.0 } else { 0.0 }),
            SpikeMode::Smoothed => map(self.value(u), |x| surrogate.smooth(x - threshold)),
        };
        let rg = self.rg(u);
        self.push("spike", out, Op::Spike { u, threshold, surrogate }, rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(&node.op, &node.value, &g, &mut grads)?;
            }
            grads[idx] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        if !self.rg(id) {
            return;
        }
        match &mut grads[id.0] {
            Some(existing) => {
                for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                    *e += v;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mode = self.mode;
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                let (m, k) = dims2("matmul", av)?;
                let (_, n) = dims2("matmul", bv)?;
                if self.rg(a) {
                    let ga = kernels::matmul_nt(mode, g.data(), bv.data(), m, n, k);
                    self.accumulate(grads, a, Tensor::new(vec![m, k], ga)?);
                }
                if self.rg(b) {
                    let gb = kernels::matmul_tn(mode, av.data(), g.data(), m, k, n);
                    self.accumulate(grads, b, Tensor::new(vec![k, n], gb)?);
                }
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(x), self.value(w));
                let (batch, inp) = dims2("linear", xv)?;
                let (out_dim, _) = dims2("linear", wv)?;
                if self.rg(x) {
                    let gx = kernels::matmul(mode, g.data(), wv.data(), batch, out_dim, inp);
                    self.accumulate(grads, x, Tensor::new(vec![batch, inp], gx)?);
                }
                if self.rg(w) {
                    let gw = kernels::matmul_tn(mode, g.data(), xv.data(), batch, out_dim, inp);
                    self.accumulate(grads, w, Tensor::new(vec![out_dim, inp], gw)?);
                }
                if let Some(b) = b {
                    if self.rg(b) {
                        self.accumulate(grads, b, column_sums(g, out_dim));
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, map(g, |v| -v));
            }
            Op::Mul(a, b) => {
                if self.rg(a) {
                    self.accumulate(grads, a, zip_map(g, self.value(b), |x, y| x * y));
                }
                if self.rg(b) {
                    self.accumulate(grads, b, zip_map(g, self.value(a), |x, y| x * y));
                }
            }
            Op::Scale(a, c) => self.accumulate(grads, a, map(g, |v| v * c)),
            Op::MulScalar { x, s } => {
                let c = self.value(s).data()[0];
                if self.rg(x) {
                    self.accumulate(grads, x, map(g, |v| v * c));
                }
                if self.rg(s) {
                    let d: f64 = g.data().iter().zip(self.value(x).data()).map(|(a, b)| a * b).sum();
                    self.accumulate(grads, s, Tensor::new(self.value(s).shape().to_vec(), vec![d])?);
                }
            }
            Op::AddBias(x, b) => {
                self.accumulate(grads, x, g.clone());
                if self.rg(b) {
                    let n = self.value(b).len();
                    self.accumulate(grads, b, column_sums(g, n));
                }
            }
            Op::Relu(a) => {
                let gi = zip_map(g, self.value(a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, a, gi);
            }
            Op::Tanh(a) => {
                let gi = zip_map(g, out, |gv, y| gv * (1.0 - y * y));
                self.accumulate(grads, a, gi);
            }
            Op::Mean(a) => {
                let av = self.value(a);
                let v = g.data()[0] / av.len() as f64;
                self.accumulate(grads, a, Tensor::filled(av.shape(), v));
            }
            Op::Sum(a) => {
                let av = self.value(a);
                self.accumulate(grads, a, Tensor::filled(av.shape(), g.data()[0]));
            }
            Op::Reshape(a) => {
                let gi = g.reshape(self.value(a).shape())?;
                self.accumulate(grads, a, gi);
            }
            Op::MseLoss(p, t) => {
                let (pv, tv) = (self.value(p), self.value(t));
                let c = 2.0 * g.data()[0] / pv.len() as f64;
                let diff = zip_map(pv, tv, |a, b| c * (a - b));
                if self.rg(t) {
                    self.accumulate(grads, t, map(&diff, |v| -v));
                }
                self.accumulate(grads, p, diff);
            }
            Op::Conv2d { input, kernel, bias, geo } => {
                if self.rg(input) {
                    let gi = kernels::conv2d_grad_input(mode, &geo, g.data(), self.value(kernel).data());
                    let shape = self.value(input).shape().to_vec();
                    self.accumulate(grads, input, Tensor::new(shape, gi)?);
                }
                if self.rg(kernel) {
                    let gk = kernels::conv2d_grad_kernel(mode, &geo, g.data(), self.value(input).data());
                    let shape = self.value(kernel).shape().to_vec();
                    self.accumulate(grads, kernel, Tensor::new(shape, gk)?);
                }
                if let Some(b) = bias {
                    if self.rg(b) {
                        let plane = geo.out_h() * geo.out_w();
                        let mut gb = vec![0.0; geo.out_channels];
                        for (i, chunk) in g.data().chunks(plane).enumerate() {
                            gb[i % geo.out_channels] += chunk.iter().sum::<f64>();
                        }
                        self.accumulate(grads, b, Tensor::vector(gb));
                    }
                }
            }
            Op::AvgPool2d { input, size } => {
                let iv = self.value(input);
                let [n, c, h, w] = *iv.shape() else { unreachable!() };
                let (oh, ow) = (h / size, w / size);
                let inv = 1.0 / (size * size) as f64;
                let mut gi = vec![0.0; iv.len()];
                for plane in 0..n * c {
                    for y in 0..oh {
                        for x in 0..ow {
                            let gv = g.data()[plane * oh * ow + y * ow + x] * inv;
                            for dy in 0..size {
                                for dx in 0..size {
                                    gi[plane * h * w + (y * size + dy) * w + x * size + dx] += gv;
                                }
                            }
                        }
                    }
                }
                self.accumulate(grads, input, Tensor::new(iv.shape().to_vec(), gi)?);
            }
            Op::Spike { u, threshold, surrogate } => {
                let gi = zip_map(g, self.value(u), |gv, x| gv * surrogate.grad(x - threshold));
                self.accumulate(grads, u, gi);
            }
        }
        Ok(())
    }
}

fn column_sums(g: &Tensor, n: usize) -> Tensor {
    let mut out = vec![0.0; n];
    for row in g.data().chunks(n) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Tensor::vector(out)
}

/// Result of [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of any recorded node, if the loss depends on it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of a parameter: zeros when the loss does not reach it.
    pub fn param(&self, graph: &Graph, id: NodeId) -> Tensor {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(graph.value(id).shape()))
    }
}
