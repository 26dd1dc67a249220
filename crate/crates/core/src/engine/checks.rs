use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{explain, EngineConfig, EngineError, ExplanationRequest};
use crate::models::{DerivativeKind, PredictiveModel};
use crate::multiset::GradedIndex;
use crate::tensor::AttributionTensor;

/// `alpha f + beta g` for borrowed models.
struct Combination<'a> {
    f: &'a dyn PredictiveModel,
    g: &'a dyn PredictiveModel,
    alpha: f64,
    beta: f64,
}

impl PredictiveModel for Combination<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.alpha * self.f.value(x) + self.beta * self.g.value(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.f.gradient(x) * self.alpha + self.g.gradient(x) * self.beta
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.f.hessian(x) * self.alpha + self.g.hessian(x) * self.beta
    }
    fn derivative_kind(&self) -> DerivativeKind {
        if self.f.derivative_kind() == DerivativeKind::Exact && self.g.derivative_kind() == DerivativeKind::Exact {
            DerivativeKind::Exact
        } else {
            DerivativeKind::FiniteDifference
        }
    }
    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        let a = self.f.partials(x, layout)?;
        let b = self.g.partials(x, layout)?;
        Some(a.iter().zip(&b).map(|(u, v)| self.alpha * u + self.beta * v).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub order: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Largest `|attr(alpha f + beta g) - alpha attr(f) - beta attr(g)|`.
    pub max_defect: f64,
    pub location: Vec<usize>,
    pub scale: f64,
}

/// Compares attributions of `alpha f + beta g` against the same combination
/// of the separate attributions, using the method and order of `req`.
pub fn linearity_check(
    f: &dyn PredictiveModel,
    g: &dyn PredictiveModel,
    alpha: f64,
    beta: f64,
    req: &ExplanationRequest,
    cfg: &EngineConfig,
) -> Result<LinearityReport, EngineError> {
    if f.dim() != g.dim() {
        return Err(EngineError::InvalidRequest(format!(
            "models have {} and {} features",
            f.dim(),
            g.dim()
        )));
    }
    let combined = Combination { f, g, alpha, beta };
    let joint = explain(&ExplanationRequest { model: &combined, ..*req }, cfg)?;
    let af = explain(&ExplanationRequest { model: f, ..*req }, cfg)?;
    let ag = explain(&ExplanationRequest { model: g, ..*req }, cfg)?;
    let expected = af.linear_combination(alpha, &ag, beta)?;
    let (max_defect, location) = joint.max_difference(&expected)?;
    Ok(LinearityReport {
        order: req.order,
        alpha,
        beta,
        max_defect,
        location,
        scale: joint.max_abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    pub order: usize,
    pub completeness_defect: f64,
    pub tolerance: f64,
    pub symmetry_residual: Option<f64>,
    pub symmetry_tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalizationCheck {
    pub from_order: usize,
    pub to_order: usize,
    pub max_defect: f64,
    /// Entry of the lower-order tensor where the defect is largest.
    pub location: Vec<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub passed: bool,
    pub orders: Vec<OrderCheck>,
    pub marginalization: Vec<MarginalizationCheck>,
    pub failures: Vec<String>,
}

/// Checks completeness of each tensor, marginalization between every pair
/// of orders, and the stored raw symmetry residuals.
///
/// Completeness is judged against each tensor's own tolerance and
/// marginalization against ten times the tolerance of the higher order.
pub fn verify_properties(stack: &[AttributionTensor]) -> Result<PropertyReport, EngineError> {
    let Some(first) = stack.first() else {
        return Err(EngineError::InvalidRequest("empty tensor stack".into()));
    };
    for t in stack {
        if t.dim() != first.dim() || t.meta().input != first.meta().input || t.meta().baseline != first.meta().baseline {
            return Err(EngineError::InvalidRequest(
                "tensors explain different inputs or baselines".into(),
            ));
        }
    }
    let mut sorted: Vec<&AttributionTensor> = stack.iter().collect();
    sorted.sort_by_key(|t| t.order());

    let mut failures = Vec::new();
    let orders: Vec<OrderCheck> = sorted
        .iter()
        .map(|t| {
            let meta = t.meta();
            let defect = t.total_sum() - meta.delta_f;
            let scale = 1.0_f64.max(t.max_abs()).max(meta.delta_f.abs());
            let symmetry_tolerance = if meta.diagnostics.finite_difference {
                meta.tolerance.max(1e-8 * scale)
            } else {
                1e-8 * scale
            };
            let residual = meta.diagnostics.asymmetry_residual;
            let complete = defect.abs() <= meta.tolerance;
            let symmetric = residual.map_or(true, |r| r <= symmetry_tolerance);
            if !complete {
                failures.push(format!(
                    "order {}: completeness defect {defect:.3e} exceeds {:.3e}",
                    t.order(),
                    meta.tolerance
                ));
            }
            if !symmetric {
                failures.push(format!(
                    "order {}: asymmetry residual {:.3e} exceeds {symmetry_tolerance:.3e}",
                    t.order(),
                    residual.unwrap_or_default()
                ));
            }
            OrderCheck {
                order: t.order(),
                completeness_defect: defect,
                tolerance: meta.tolerance,
                symmetry_residual: residual,
                symmetry_tolerance,
                passed: complete && symmetric,
            }
        })
        .collect();

    let mut marginalization = Vec::new();
    for (hi_pos, hi) in sorted.iter().enumerate() {
        for lo in &sorted[..hi_pos] {
            if lo.order() >= hi.order() {
                continue;
            }
            let mut contracted = (*hi).clone();
            while contracted.order() > lo.order() {
                contracted = contracted.contract_last_index()?;
            }
            let (max_defect, location) = lo.max_difference(&contracted)?;
            let tolerance = 10.0 * hi.meta().tolerance;
            let passed = max_defect <= tolerance;
            if !passed {
                failures.push(format!(
                    "order {} contracted to order {}: defect {max_defect:.3e} at {location:?} exceeds {tolerance:.3e}",
                    hi.order(),
                    lo.order()
                ));
            }
            marginalization.push(MarginalizationCheck {
                from_order: hi.order(),
                to_order: lo.order(),
                max_defect,
                location,
                tolerance,
                passed,
            });
        }
    }
    Ok(PropertyReport {
        passed: failures.is_empty(),
        orders,
        marginalization,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{closed_form_stack, explain_stack, Moments};
    use crate::models::PolynomialModel;

    #[test]
    fn homogeneity_and_identity() {
        let f = PolynomialModel::monomial(3, 3.0, &[0, 1]).unwrap();
        let g = PolynomialModel::monomial(3, 1.0, &[2, 2]).unwrap();
        let (x, b) = ([0.4, 1.3, -0.8], [0.1, 0.0, 0.2]);
        let cfg = EngineConfig::default();
        for order in 1..=3 {
            let req = ExplanationRequest::new(&f, &x, &b, order).with_quadrature(crate::quadrature::QuadratureConfig::right_hand(20));
            let r = linearity_check(&f, &g, 2.5, 0.0, &req, &cfg).unwrap();
            assert!(r.max_defect <= 1e-12 * (1.0 + r.scale), "{r:?}");
            let r = linearity_check(&f, &f, 0.5, 0.5, &req, &cfg).unwrap();
            assert!(r.max_defect <= 1e-12 * (1.0 + r.scale), "{r:?}");
        }
    }

    #[test]
    fn exact_stack_has_no_defects() {
        let f = PolynomialModel::monomial(3, 3.0, &[0, 1, 2]).unwrap();
        let stack = closed_form_stack(&f, &[1.0, 2.0, 0.5], &[0.0; 3], 3, Moments::Exact).unwrap();
        let report = verify_properties(&stack).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.marginalization.len(), 3);
        for m in &report.marginalization {
            assert!(m.max_defect < 1e-14);
        }
    }

    #[test]
    fn corrupted_entry_is_located() {
        let f = PolynomialModel::monomial(3, 3.0, &[0, 1, 2]).unwrap();
        let x = [1.0; 3];
        let b = [0.0; 3];
        let req = ExplanationRequest::new(&f, &x, &b, 2);
        let mut stack = explain_stack(&req, &EngineConfig::default()).unwrap();
        assert!(verify_properties(&stack).unwrap().passed);
        stack[0] = stack[0].with_entry(&[1], stack[0].get(&[1]) + 5.0);
        let report = verify_properties(&stack).unwrap();
        assert!(!report.passed);
        assert_eq!(report.marginalization[0].location, vec![1]);
    }
}
