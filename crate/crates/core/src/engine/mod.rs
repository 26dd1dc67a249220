//! Integrated Gradients attributions of order 1 to 4.
//!
//! Three routes are available and cross-check each other:
//! [`first_order`] integrates the gradient along the path,
//! [`second_order_hessian`] evaluates the double integrals of gradient and
//! Hessian, and [`compose_order`] applies attribution operators recursively.
//! For polynomial models [`closed_form`] integrates the path polynomials
//! exactly, or with the moments of a quadrature rule.

mod checks;
mod closed_form;
mod compose;
mod direct;
mod path;

use thiserror::Error;

use crate::models::{DerivativeKind, ModelError, PredictiveModel};
use crate::quadrature::QuadratureConfig;
use crate::tensor::{AttributionTensor, Diagnostics, ExplanationMeta, Method, TensorError};

pub use checks::{
    linearity_check, verify_properties, LinearityReport, MarginalizationCheck, OrderCheck,
    PropertyReport,
};
pub use closed_form::{closed_form, closed_form_stack, Moments};
pub use compose::compose_order;
pub use direct::{first_order, second_order_hessian};
pub use path::StraightLinePath;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("order {order} exceeds the configured cap of {cap}")]
    OrderCapExceeded { order: usize, cap: usize },
    #[error("model has no exact derivatives and finite differences are disabled")]
    HessianUnavailable,
    #[error("finite-difference step {step:e} is unusable at x = {at:e}")]
    StepError { step: f64, at: f64 },
    #[error("composition tables would exceed {entries_limit} entries")]
    GridTooLarge { entries_limit: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<ModelError> for EngineError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::StepError { step, at } => EngineError::StepError { step, at },
            other => EngineError::Model(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub order_cap: usize,
    pub allow_finite_differences: bool,
    /// Log a warning when the tensor-product grid exceeds this many nodes.
    pub warn_grid_nodes: u64,
    /// Refuse compositions whose derivative tables exceed this many values.
    pub max_table_entries: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            order_cap: 4,
            allow_finite_differences: true,
            warn_grid_nodes: 10_000_000,
            max_table_entries: 100_000_000,
        }
    }
}

/// What to explain, against which baseline, and how.
#[derive(Clone, Copy)]
pub struct ExplanationRequest<'a> {
    pub model: &'a dyn PredictiveModel,
    pub input: &'a [f64],
    pub baseline: &'a [f64],
    /// Recorded in the output meta: `zero`, `mean` or `explicit`.
    pub baseline_kind: &'a str,
    pub order: usize,
    pub quadrature: QuadratureConfig,
    pub method: Method,
}

impl<'a> ExplanationRequest<'a> {
    pub fn new(model: &'a dyn PredictiveModel, input: &'a [f64], baseline: &'a [f64], order: usize) -> Self {
        Self {
            model,
            input,
            baseline,
            baseline_kind: "explicit",
            order,
            quadrature: QuadratureConfig::default(),
            method: Method::OperatorComposition,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureConfig) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn with_baseline_kind(mut self, kind: &'a str) -> Self {
        self.baseline_kind = kind;
        self
    }

    fn validate(&self, cfg: &EngineConfig) -> Result<(), EngineError> {
        let d = self.model.dim();
        if self.input.len() != d || self.baseline.len() != d {
            return Err(EngineError::Model(ModelError::DimensionMismatch {
                expected: d,
                found: if self.input.len() != d { self.input.len() } else { self.baseline.len() },
            }));
        }
        if self.order == 0 {
            return Err(EngineError::InvalidRequest("order must be at least 1".into()));
        }
        if self.order > cfg.order_cap {
            return Err(EngineError::OrderCapExceeded {
                order: self.order,
                cap: cfg.order_cap,
            });
        }
        if !self.quadrature.is_valid() {
            return Err(EngineError::InvalidRequest("quadrature needs at least one point".into()));
        }
        if self.input.iter().chain(self.baseline).any(|v| !v.is_finite()) {
            return Err(EngineError::InvalidRequest("input and baseline must be finite".into()));
        }
        Ok(())
    }

    fn uses_finite_differences(&self) -> bool {
        self.model.derivative_kind() == DerivativeKind::FiniteDifference
    }
}

/// Computes the order requested, routing order 1 to [`first_order`] and
/// order 2 with [`Method::HessianFormula`] to [`second_order_hessian`].
pub fn explain(req: &ExplanationRequest, cfg: &EngineConfig) -> Result<AttributionTensor, EngineError> {
    match (req.order, req.method) {
        (1, _) => first_order(req, cfg),
        (2, Method::HessianFormula) => second_order_hessian(req, cfg),
        (_, Method::HessianFormula) => Err(EngineError::InvalidRequest(
            "the Hessian formula only covers order 2".into(),
        )),
        (_, Method::ClosedForm) => Err(EngineError::InvalidRequest(
            "closed-form attributions need a polynomial model, use closed_form".into(),
        )),
        _ => compose_order(req, cfg),
    }
}

/// Tensors of every order from 1 to `req.order`. Orders above 2 always use composition.
pub fn explain_stack(req: &ExplanationRequest, cfg: &EngineConfig) -> Result<Vec<AttributionTensor>, EngineError> {
    req.validate(cfg)?;
    (1..=req.order)
        .map(|order| {
            let method = if order > 2 && req.method == Method::HessianFormula {
                Method::OperatorComposition
            } else {
                req.method
            };
            explain(&req.with_order(order).with_method(method), cfg)
        })
        .collect()
}

/// Scale used for pass/fail checks on tensors of a given order.
///
/// With `g(t) = f(gamma(t))`, the right-hand rule error of one level is about
/// `|g'(1) - g'(0)| / 2M`; each further level adds a similar term.
pub fn completeness_tolerance(
    order: usize,
    quadrature: &QuadratureConfig,
    delta_f: f64,
    slope_start: f64,
    slope_end: f64,
    value_at_input: f64,
) -> f64 {
    let m = quadrature.points_per_level as f64;
    let bound = order as f64 * (delta_f.abs() + slope_start.abs() + slope_end.abs()) / m;
    bound.max(1e-12 * (1.0 + value_at_input.abs()))
}

/// Values shared by every tensor of one explanation.
pub(crate) struct PathSummary {
    pub path: StraightLinePath,
    pub value_input: f64,
    pub delta_f: f64,
    pub slope_start: f64,
    pub slope_end: f64,
}

impl PathSummary {
    pub fn new(req: &ExplanationRequest) -> Self {
        let path = StraightLinePath::new(req.input, req.baseline);
        if path.is_degenerate() {
            return Self {
                path,
                value_input: 0.0,
                delta_f: 0.0,
                slope_start: 0.0,
                slope_end: 0.0,
            };
        }
        let value_input = req.model.value(req.input);
        let delta_f = value_input - req.model.value(req.baseline);
        let slope = |x: &[f64]| req.model.gradient(x).iter().zip(path.delta()).map(|(g, d)| g * d).sum::<f64>();
        Self {
            slope_start: slope(req.baseline),
            slope_end: slope(req.input),
            path,
            value_input,
            delta_f,
        }
    }

    pub fn meta(&self, req: &ExplanationRequest, method: Method, order: usize) -> ExplanationMeta {
        ExplanationMeta {
            input: req.input.to_vec(),
            baseline: req.baseline.to_vec(),
            baseline_kind: req.baseline_kind.to_string(),
            delta_f: self.delta_f,
            quadrature: req.quadrature,
            method,
            tolerance: completeness_tolerance(
                order,
                &req.quadrature,
                self.delta_f,
                self.slope_start,
                self.slope_end,
                self.value_input,
            ),
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Attaches the completeness defect and returns the finished tensor.
pub(crate) fn finish(tensor: AttributionTensor) -> AttributionTensor {
    let mut meta = tensor.meta().clone();
    meta.diagnostics.completeness_defect = tensor.total_sum() - meta.delta_f;
    tensor.with_meta(meta).expect("meta dimension unchanged")
}

/// Zero tensor for `input == baseline`; the model is never evaluated.
pub(crate) fn degenerate(
    req: &ExplanationRequest,
    summary: &PathSummary,
    method: Method,
) -> Result<AttributionTensor, EngineError> {
    let d = req.model.dim();
    let mut meta = summary.meta(req, method, req.order);
    meta.diagnostics.asymmetry_residual = Some(0.0);
    Ok(AttributionTensor::zeros(req.order, d, meta)?)
}
