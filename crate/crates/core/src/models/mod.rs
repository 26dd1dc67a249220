//! Predictive models `f: R^D -> R` with value, gradient and Hessian oracles.
//!
//! Models may also expose all partial derivatives up to a given order through
//! [`PredictiveModel::partials`]; the composition engine needs third and
//! fourth derivatives for higher-order attributions. Models that cannot
//! provide them fall back to finite differences of their Hessian.

mod fd;
mod file;
mod glm;
mod gpr;
mod polynomial;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multiset::GradedIndex;

pub use fd::{fd_gradient, fd_hessian, fd_partials, gradient_step, hessian_step};
pub use file::ModelSpec;
pub use glm::{fit_glm, logistic_derivative, GlmFitReport, GlmModel, GlmOptions};
pub use gpr::{fit_gpr, GprFitReport, GprModel, GprOptions, RbfKernel};
pub use polynomial::{PolynomialModel, Term};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "kernel system is not positive definite (smallest pivot {min_pivot:.3e}, \
         largest diagonal {max_diagonal:.3e}, condition estimate {condition:.3e})"
    )]
    NotPositiveDefinite {
        min_pivot: f64,
        max_diagonal: f64,
        condition: f64,
    },
    #[error("GLM fit stopped after {iterations} iterations with gradient norm {gradient_norm:.3e}")]
    IterationLimit {
        iterations: usize,
        gradient_norm: f64,
        best: Box<GlmModel>,
    },
    #[error("finite-difference step {step:e} is unusable at x = {at:e}")]
    StepError { step: f64, at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    Exact,
    FiniteDifference,
}

/// A differentiable scalar model.
pub trait PredictiveModel: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        fd_gradient(self, x, None)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        fd_hessian(self, x, None)
    }

    fn derivative_kind(&self) -> DerivativeKind {
        DerivativeKind::FiniteDifference
    }

    /// All partial derivatives up to `layout.max_order()`, laid out by
    /// [`GradedIndex`]. `None` when the model has no closed form at that order.
    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        if layout.max_order() > 2 {
            return None;
        }
        Some(low_order_partials(self, x, layout))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Fills orders 0..=2 of a derivative table from value, gradient and Hessian.
pub(crate) fn low_order_partials<M: PredictiveModel + ?Sized>(
    model: &M,
    x: &[f64],
    layout: &GradedIndex,
) -> Vec<f64> {
    let mut out = vec![0.0; layout.len()];
    out[0] = model.value(x);
    let d = model.dim();
    if layout.max_order() >= 1 {
        let g = model.gradient(x);
        for i in 0..d {
            out[layout.position(&[i])] = g[i];
        }
    }
    if layout.max_order() >= 2 {
        let h = model.hessian(x);
        for i in 0..d {
            for j in i..d {
                out[layout.position(&[i, j])] = 0.5 * (h[(i, j)] + h[(j, i)]);
            }
        }
    }
    out
}

impl<M: PredictiveModel + ?Sized> PredictiveModel for Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).hessian(x)
    }
    fn derivative_kind(&self) -> DerivativeKind {
        (**self).derivative_kind()
    }
    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        (**self).partials(x, layout)
    }
}

/// `sum_k c_k f_k`, with derivatives combined term by term.
#[derive(Clone)]
pub struct LinearCombination {
    dim: usize,
    terms: Vec<(f64, Arc<dyn PredictiveModel>)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn PredictiveModel>)>) -> Result<Self, ModelError> {
        let dim = terms
            .first()
            .map(|(_, m)| m.dim())
            .ok_or_else(|| ModelError::InvalidParameter("empty combination".into()))?;
        if let Some((_, m)) = terms.iter().find(|(_, m)| m.dim() != dim) {
            return Err(ModelError::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        Ok(Self { dim, terms })
    }

    pub fn scaled(factor: f64, model: Arc<dyn PredictiveModel>) -> Self {
        Self {
            dim: model.dim(),
            terms: vec![(factor, model)],
        }
    }
}

impl PredictiveModel for LinearCombination {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, m)| c * m.value(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.terms
            .iter()
            .fold(DVector::zeros(self.dim), |acc, (c, m)| acc + m.gradient(x) * *c)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.terms.iter().fold(DMatrix::zeros(self.dim, self.dim), |acc, (c, m)| {
            acc + m.hessian(x) * *c
        })
    }

    fn derivative_kind(&self) -> DerivativeKind {
        if self
            .terms
            .iter()
            .all(|(_, m)| m.derivative_kind() == DerivativeKind::Exact)
        {
            DerivativeKind::Exact
        } else {
            DerivativeKind::FiniteDifference
        }
    }

    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        let mut out = vec![0.0; layout.len()];
        for (c, m) in &self.terms {
            let p = m.partials(x, layout)?;
            for (o, v) in out.iter_mut().zip(p) {
                *o += c * v;
            }
        }
        Some(out)
    }
}

/// A black-box model given only by its value; every derivative is a finite
/// difference.
#[derive(Clone)]
pub struct FnModel {
    dim: usize,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl FnModel {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }
}

impl PredictiveModel for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_matches_parts() {
        let a: Arc<dyn PredictiveModel> =
            Arc::new(PolynomialModel::monomial(3, 3.0, &[0, 1]).unwrap());
        let b: Arc<dyn PredictiveModel> = Arc::new(PolynomialModel::monomial(3, 1.0, &[2]).unwrap());
        let c = LinearCombination::new(vec![(2.0, a.clone()), (-1.0, b.clone())]).unwrap();
        let x = [0.3, -1.2, 2.0];
        assert!((c.value(&x) - (2.0 * a.value(&x) - b.value(&x))).abs() < 1e-14);
        assert_eq!(c.derivative_kind(), DerivativeKind::Exact);
        let layout = GradedIndex::new(3, 3);
        assert!(c.partials(&x, &layout).is_some());
    }

    #[test]
    fn combination_rejects_mismatched_dims() {
        let a: Arc<dyn PredictiveModel> = Arc::new(PolynomialModel::monomial(2, 1.0, &[0]).unwrap());
        let b: Arc<dyn PredictiveModel> = Arc::new(PolynomialModel::monomial(3, 1.0, &[0]).unwrap());
        assert!(LinearCombination::new(vec![(1.0, a), (1.0, b)]).is_err());
    }

    #[test]
    fn fn_model_has_no_high_order_partials() {
        let m = FnModel::new(2, |x| x[0] * x[1]);
        assert_eq!(m.derivative_kind(), DerivativeKind::FiniteDifference);
        assert!(m.partials(&[1.0, 1.0], &GradedIndex::new(2, 3)).is_none());
        let p = m.partials(&[1.0, 1.0], &GradedIndex::new(2, 2)).unwrap();
        assert!((p[GradedIndex::new(2, 2).position(&[0, 1])] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn check_input_reports_dims() {
        let m = FnModel::new(2, |x| x[0]);
        assert!(matches!(
            m.check_input(&[1.0]),
            Err(ModelError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
