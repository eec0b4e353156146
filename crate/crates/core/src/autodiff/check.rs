//! Central finite-difference gradient checking.

use super::graph::{Graph, NodeId, SpikeMode};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central
/// differences with step `eps`, returning
/// `max |analytic − numeric| / max(1, |analytic|)` over every parameter entry.
///
/// `f` receives a fresh graph (in [`SpikeMode::Smoothed`]) and the parameter
/// node ids, and must return a scalar node.
pub fn grad_check<F>(params: &[Tensor], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    grad_check_entries(params, eps, None, f)
}

/// Like [`grad_check`], but checks at most `limit` entries per parameter
/// tensor (evenly strided) to bound the cost on large models.
pub fn grad_check_entries<F>(params: &[Tensor], eps: f64, limit: Option<usize>, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step {eps}")));
    }
    let eval = |ps: &[Tensor]| -> Result<(Graph, Vec<NodeId>, NodeId)> {
        let mut g = Graph::new();
        g.set_spike_mode(SpikeMode::Smoothed);
        let ids = ps.iter().map(|p| g.param(p.clone())).collect::<Result<Vec<_>>>()?;
        let out = f(&mut g, &ids)?;
        Ok((g, ids, out))
    };

    let (g, ids, out) = eval(params)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.param(&g, id)).collect();

    let mut worst = 0.0f64;
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let stride = match limit {
            Some(l) if l > 0 && p.len() > l => p.len().div_ceil(l),
            _ => 1,
        };
        for ei in (0..p.len()).step_by(stride) {
            let orig = p.data()[ei];
            work[pi].data_mut()[ei] = orig + eps;
            let (gp, _, op) = eval(&work)?;
            let fp = gp.value(op).item()?;
            work[pi].data_mut()[ei] = orig - eps;
            let (gm, _, om) = eval(&work)?;
            let fm = gm.value(om).item()?;
            work[pi].data_mut()[ei] = orig;

            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic[pi].data()[ei];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
