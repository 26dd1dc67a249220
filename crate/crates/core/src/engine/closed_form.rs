//! Attributions of polynomial models by exact integration of path polynomials.
//!
//! Along the path every derivative of a polynomial is a polynomial in `tau`,
//! and one attribution level maps `tau^p` to `tau^p * mu(p + n)` where `n` is
//! the number of pending derivatives and `mu(q)` is the integral of `t^q`.
//! With `mu(q) = 1/(q+1)` this gives the exact attributions; with the moments
//! of a quadrature rule it reproduces the nested tensor-grid sum of that rule.

use super::{completeness_tolerance, finish, EngineError, StraightLinePath};
use crate::models::{PolynomialModel, PredictiveModel};
use crate::multiset::{self, GradedIndex};
use crate::quadrature::QuadratureConfig;
use crate::tensor::{AttributionTensor, Diagnostics, ExplanationMeta, Method};

/// How `integral of t^q over [0, 1]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moments {
    Exact,
    Quadrature(QuadratureConfig),
}

impl Moments {
    fn table(&self, up_to: usize) -> Vec<f64> {
        match self {
            Moments::Exact => (0..=up_to).map(|q| 1.0 / (q as f64 + 1.0)).collect(),
            Moments::Quadrature(cfg) => {
                let nodes = cfg.nodes();
                (0..=up_to)
                    .map(|q| nodes.iter().map(|n| n.weight * n.t.powi(q as i32)).sum())
                    .collect()
            }
        }
    }
}

/// Order-`order` attributions of a polynomial.
pub fn closed_form(
    model: &PolynomialModel,
    input: &[f64],
    baseline: &[f64],
    order: usize,
    moments: Moments,
) -> Result<AttributionTensor, EngineError> {
    let d = model.dim();
    if input.len() != d || baseline.len() != d {
        return Err(EngineError::InvalidRequest(format!(
            "input and baseline need {d} values"
        )));
    }
    if order == 0 {
        return Err(EngineError::InvalidRequest("order must be at least 1".into()));
    }
    let path = StraightLinePath::new(input, baseline);
    let value_input = model.value(input);
    let delta_f = value_input - model.value(baseline);
    let (quadrature, tolerance) = match moments {
        Moments::Exact => (
            QuadratureConfig::default(),
            1e-10 * (1.0 + value_input.abs() + delta_f.abs()),
        ),
        Moments::Quadrature(q) => {
            let slope = |x: &[f64]| -> f64 { model.gradient(x).iter().zip(path.delta()).map(|(g, dx)| g * dx).sum() };
            (
                q,
                completeness_tolerance(order, &q, delta_f, slope(baseline), slope(input), value_input),
            )
        }
    };
    let meta = ExplanationMeta {
        input: input.to_vec(),
        baseline: baseline.to_vec(),
        baseline_kind: "explicit".into(),
        delta_f,
        quadrature,
        method: Method::ClosedForm,
        tolerance,
        diagnostics: Diagnostics::default(),
    };
    let delta = path.delta();
    let mu = moments.table(model.degree() as usize + order + 1);

    let leaf_layout = GradedIndex::new(d, order);
    let leaf: Vec<Vec<f64>> = leaf_layout
        .multisets()
        .iter()
        .map(|alpha| model.path_polynomial(alpha, baseline, delta))
        .collect();
    let mut tables = vec![leaf];
    for k in (1..=order).rev() {
        let child_layout = GradedIndex::new(d, k);
        let layout = GradedIndex::new(d, k - 1);
        let sets = layout.multisets();
        let mut next = Vec::with_capacity(tables.len() * d);
        for child in &tables {
            for j in 0..d {
                let h: Vec<Vec<f64>> = sets
                    .iter()
                    .map(|c| {
                        let src = &child[child_layout.position(&multiset::insert_sorted(c, j))];
                        src.iter().enumerate().map(|(p, v)| v * mu[p + c.len()]).collect()
                    })
                    .collect();
                let polys = sets
                    .iter()
                    .enumerate()
                    .map(|(b, set)| {
                        let mut poly = vec![0.0; h[b].len() + 1];
                        for (p, v) in h[b].iter().enumerate() {
                            poly[p + 1] = delta[j] * v;
                        }
                        if let Some(rest) = multiset::remove_one(set, j) {
                            let count = multiset::count_of(set, j) as f64;
                            let src = &h[layout.position(&rest)];
                            if poly.len() < src.len() {
                                poly.resize(src.len(), 0.0);
                            }
                            for (p, v) in src.iter().enumerate() {
                                poly[p] += count * v;
                            }
                        }
                        poly
                    })
                    .collect();
                next.push(polys);
            }
        }
        tables = next;
    }

    let mut raw = vec![0.0; tables.len()];
    for (suffix, table) in tables.iter().enumerate() {
        let mut rest = suffix;
        let mut flat = 0;
        for _ in 0..order {
            flat = flat * d + rest % d;
            rest /= d;
        }
        raw[flat] = table[0].iter().sum();
    }
    let tensor = AttributionTensor::from_raw(order, d, &raw, meta)?.with_feature_names(model.feature_names.clone())?;
    Ok(finish(tensor))
}

/// Closed-form tensors of orders `1..=max_order`.
pub fn closed_form_stack(
    model: &PolynomialModel,
    input: &[f64],
    baseline: &[f64],
    max_order: usize,
    moments: Moments,
) -> Result<Vec<AttributionTensor>, EngineError> {
    (1..=max_order)
        .map(|order| closed_form(model, input, baseline, order, moments))
        .collect()
}
