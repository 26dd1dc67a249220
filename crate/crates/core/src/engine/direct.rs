use std::collections::BTreeMap;

use super::{degenerate, finish, EngineConfig, EngineError, ExplanationRequest, PathSummary};
use crate::tensor::{AttributionTensor, Method};

fn check_derivatives(req: &ExplanationRequest, cfg: &EngineConfig) -> Result<bool, EngineError> {
    let fd = req.uses_finite_differences();
    if fd && !cfg.allow_finite_differences {
        return Err(EngineError::HessianUnavailable);
    }
    Ok(fd)
}

/// First-order attributions `a_i = dx_i * integral of d_i f along the path`.
pub fn first_order(req: &ExplanationRequest, cfg: &EngineConfig) -> Result<AttributionTensor, EngineError> {
    let req = req.with_order(1);
    req.validate(cfg)?;
    let fd = check_derivatives(&req, cfg)?;
    let summary = PathSummary::new(&req);
    if summary.path.is_degenerate() {
        return degenerate(&req, &summary, Method::DirectIntegral);
    }
    let d = req.model.dim();
    let nodes = req.quadrature.nodes();
    let mut integral = vec![0.0; d];
    let mut point = vec![0.0; d];
    for node in &nodes {
        summary.path.write_at(node.t, &mut point);
        let g = req.model.gradient(&point);
        for (acc, gi) in integral.iter_mut().zip(g.iter()) {
            *acc += node.weight * gi;
        }
    }
    let values: Vec<f64> = integral
        .iter()
        .zip(summary.path.delta())
        .map(|(v, dx)| v * dx)
        .collect();
    let mut meta = summary.meta(&req, Method::DirectIntegral, 1);
    meta.diagnostics.model_evaluations = nodes.len() as u64;
    meta.diagnostics.grid_nodes = nodes.len() as u64;
    meta.diagnostics.finite_difference = fd;
    Ok(finish(AttributionTensor::from_canonical(1, d, values, meta)?))
}

/// Second-order attributions from gradient and Hessian double integrals over
/// the tensor-product grid `(s, t)`.
///
/// Grid points sharing the product `s t` are merged, so the model is
/// evaluated once per distinct path point.
pub fn second_order_hessian(
    req: &ExplanationRequest,
    cfg: &EngineConfig,
) -> Result<AttributionTensor, EngineError> {
    let req = req.with_order(2);
    req.validate(cfg)?;
    let fd = check_derivatives(&req, cfg)?;
    let summary = PathSummary::new(&req);
    if summary.path.is_degenerate() {
        return degenerate(&req, &summary, Method::HessianFormula);
    }
    let d = req.model.dim();
    let nodes = req.quadrature.nodes();
    let scale = (req.quadrature.points_per_level as f64).powi(2);
    let mut weights: BTreeMap<u64, f64> = BTreeMap::new();
    for s in &nodes {
        for t in &nodes {
            *weights.entry(s.numerator * t.numerator).or_insert(0.0) += s.weight * t.weight;
        }
    }
    let delta = summary.path.delta();
    let mut raw = vec![0.0; d * d];
    let mut point = vec![0.0; d];
    for (&p, &w) in &weights {
        let tau = p as f64 / scale;
        summary.path.write_at(tau, &mut point);
        let g = req.model.gradient(&point);
        let h = req.model.hessian(&point);
        for i in 0..d {
            raw[i * d + i] += w * delta[i] * g[i];
            for j in 0..d {
                raw[i * d + j] += w * tau * delta[i] * delta[j] * h[(i, j)];
            }
        }
    }
    let mut meta = summary.meta(&req, Method::HessianFormula, 2);
    meta.diagnostics.model_evaluations = weights.len() as u64;
    meta.diagnostics.grid_nodes = (nodes.len() * nodes.len()) as u64;
    meta.diagnostics.finite_difference = fd;
    Ok(finish(AttributionTensor::from_raw(2, d, &raw, meta)?))
}
