//! Quadratic-feature GLM with logistic inverse link.
//!
//! Covariates are standardized, mapped through `phi(z) = (1, z_i, z_i z_j for
//! i <= j)` and passed through the logistic function. Targets are min-max
//! scaled into `(0, 1)` with a 5% margin on each side, so
//! `f(x) = low + (high - low) * sigma(beta^T phi(z(x)))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DerivativeKind, ModelError, PredictiveModel};
use crate::data::Dataset;
use crate::multiset::GradedIndex;

pub const TARGET_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub feature_names: Vec<String>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Intercept, then linear terms, then `z_i z_j` for `i <= j` in row order.
    pub coefficients: Vec<f64>,
    pub target_low: f64,
    pub target_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmOptions {
    pub max_iters: usize,
    /// Stop when the infinity norm of the mean-squared-error gradient is below this.
    pub tol: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFitReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub train_rmse: f64,
    pub train_r2: f64,
    pub target_scaling: String,
    pub standardized: bool,
}

pub fn feature_count(dim: usize) -> usize {
    1 + dim + dim * (dim + 1) / 2
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `n`-th derivative of the logistic function, evaluated from `s = sigma(eta)`.
///
/// Uses `sigma^(n+1) = p_n'(s) * s (1 - s)` where `sigma^(n) = p_n(s)`.
pub fn logistic_derivative(n: usize, s: f64) -> f64 {
    let mut poly = vec![0.0, 1.0];
    for _ in 0..n {
        let deriv: Vec<f64> = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        // multiply by s - s^2
        let mut next = vec![0.0; deriv.len() + 2];
        for (k, c) in deriv.iter().enumerate() {
            next[k + 1] += c;
            next[k + 2] -= c;
        }
        poly = next;
    }
    poly.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

impl GlmModel {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    /// Quadratic form pieces in standardized units: `eta = b0 + b^T z + z^T Q z / 2`.
    fn quadratic_parts(&self) -> (f64, Vec<f64>, DMatrix<f64>) {
        let d = self.dim();
        let c = &self.coefficients;
        let b: Vec<f64> = c[1..=d].to_vec();
        let mut q = DMatrix::zeros(d, d);
        let mut k = d + 1;
        for i in 0..d {
            for j in i..d {
                if i == j {
                    q[(i, i)] = 2.0 * c[k];
                } else {
                    q[(i, j)] = c[k];
                    q[(j, i)] = c[k];
                }
                k += 1;
            }
        }
        (c[0], b, q)
    }

    fn linear_predictor(&self, x: &[f64]) -> f64 {
        dot(&self.coefficients, &features(&self.standardize(x)))
    }

    fn span(&self) -> f64 {
        self.target_high - self.target_low
    }

    /// Gradient and Hessian of the linear predictor in raw covariate units.
    fn predictor_derivatives(&self, x: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let z = self.standardize(x);
        let (b0, b, q) = self.quadratic_parts();
        let d = self.dim();
        let zv = DVector::from_column_slice(&z);
        let qz = &q * &zv;
        let eta = b0 + dot(&b, &z) + 0.5 * zv.dot(&qz);
        let grad: Vec<f64> = (0..d).map(|i| (b[i] + qz[i]) / self.scale[i]).collect();
        let hess = DMatrix::from_fn(d, d, |i, j| q[(i, j)] / (self.scale[i] * self.scale[j]));
        (eta, grad, hess)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn features(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let mut out = Vec::with_capacity(feature_count(d));
    out.push(1.0);
    out.extend_from_slice(z);
    for i in 0..d {
        for j in i..d {
            out.push(z[i] * z[j]);
        }
    }
    out
}

/// Set partitions of `positions` into blocks of size one or two.
fn pairings(positions: &[usize], acc: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
    let Some((&first, rest)) = positions.split_first() else {
        out.push(acc.clone());
        return;
    };
    acc.push(vec![first]);
    pairings(rest, acc, out);
    acc.pop();
    for k in 0..rest.len() {
        let mut remaining = rest.to_vec();
        let partner = remaining.remove(k);
        acc.push(vec![first, partner]);
        pairings(&remaining, acc, out);
        acc.pop();
    }
}

impl PredictiveModel for GlmModel {
    fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.target_low + self.span() * sigmoid(self.linear_predictor(x))
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let (eta, g, _) = self.predictor_derivatives(x);
        let s = sigmoid(eta);
        let d1 = logistic_derivative(1, s) * self.span();
        DVector::from_iterator(g.len(), g.iter().map(|gi| d1 * gi))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let (eta, g, h) = self.predictor_derivatives(x);
        let s = sigmoid(eta);
        let d1 = logistic_derivative(1, s) * self.span();
        let d2 = logistic_derivative(2, s) * self.span();
        let d = g.len();
        DMatrix::from_fn(d, d, |i, j| d2 * g[i] * g[j] + d1 * h[(i, j)])
    }

    fn derivative_kind(&self) -> DerivativeKind {
        DerivativeKind::Exact
    }

    /// Faa di Bruno over a predictor whose derivatives vanish beyond order two.
    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        let (eta, g, h) = self.predictor_derivatives(x);
        let s = sigmoid(eta);
        let sigma_derivs: Vec<f64> = (0..=layout.max_order())
            .map(|n| logistic_derivative(n, s) * self.span())
            .collect();
        let mut out = Vec::with_capacity(layout.len());
        for alpha in layout.multisets() {
            if alpha.is_empty() {
                out.push(self.target_low + self.span() * s);
                continue;
            }
            let positions: Vec<usize> = (0..alpha.len()).collect();
            let mut parts = Vec::new();
            pairings(&positions, &mut Vec::new(), &mut parts);
            let v: f64 = parts
                .iter()
                .map(|blocks| {
                    let prod: f64 = blocks
                        .iter()
                        .map(|b| match b.as_slice() {
                            [p] => g[alpha[*p]],
                            [p, q] => h[(alpha[*p], alpha[*q])],
                            _ => unreachable!(),
                        })
                        .product();
                    sigma_derivs[blocks.len()] * prod
                })
                .sum();
            out.push(v);
        }
        Some(out)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Least-squares fit of the scaled targets by damped Newton iterations.
///
/// Returns [`ModelError::IterationLimit`] carrying the best coefficients
/// found when the gradient tolerance is not reached.
pub fn fit_glm(data: &Dataset, options: &GlmOptions) -> Result<(GlmModel, GlmFitReport), ModelError> {
    let rows = data.rows();
    let y = data.targets();
    let n = rows.len();
    let d = data.dim();
    let p = feature_count(d);
    if n <= p {
        return Err(ModelError::InvalidParameter(format!(
            "GLM with {p} quadratic features needs more than {p} rows, got {n}"
        )));
    }
    let center: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let v = rows.iter().map(|r| (r[j] - center[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = y_max - y_min;
    let pad = if range > 0.0 {
        TARGET_MARGIN * range
    } else {
        y_min.abs().max(1.0)
    };
    let (low, high) = (y_min - pad, y_max + pad);
    let scaled: Vec<f64> = y.iter().map(|v| (v - low) / (high - low)).collect();

    let mut model = GlmModel {
        feature_names: data.feature_names().to_vec(),
        center,
        scale,
        coefficients: vec![0.0; p],
        target_low: low,
        target_high: high,
    };
    let phi: Vec<Vec<f64>> = rows.iter().map(|r| features(&model.standardize(r))).collect();
    let design = DMatrix::from_fn(n, p, |i, j| phi[i][j]);

    // start from a ridge fit of the logit-transformed targets
    let logits = DVector::from_iterator(n, scaled.iter().map(|&t| logit(t)));
    let gram = design.transpose() * &design + DMatrix::identity(p, p) * 1e-8;
    if let Some(chol) = gram.cholesky() {
        let beta = chol.solve(&(design.transpose() * logits));
        model.coefficients = beta.iter().copied().collect();
    }

    let objective = |beta: &[f64]| -> f64 {
        phi.iter()
            .zip(&scaled)
            .map(|(f, t)| (sigmoid(dot(beta, f)) - t).powi(2))
            .sum::<f64>()
            / (2.0 * n as f64)
    };
    let derivatives = |beta: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for (f, t) in phi.iter().zip(&scaled) {
            let s = sigmoid(dot(beta, f));
            let r = s - t;
            let d1 = logistic_derivative(1, s);
            let d2 = logistic_derivative(2, s);
            let fv = DVector::from_column_slice(f);
            g += &fv * (r * d1);
            h += (&fv * fv.transpose()) * (d1 * d1 + r * d2);
        }
        (g / n as f64, h / n as f64)
    };

    let mut beta = model.coefficients.clone();
    let mut current = objective(&beta);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iters {
        let (g, h) = derivatives(&beta);
        grad_norm = g.amax();
        if grad_norm <= options.tol {
            break;
        }
        iterations += 1;
        // Levenberg shift until the system is positive definite
        let mut shift = 0.0;
        let step = loop {
            let shifted = &h + DMatrix::identity(p, p) * shift;
            if let Some(chol) = shifted.cholesky() {
                break chol.solve(&(-&g));
            }
            shift = if shift == 0.0 { 1e-10 * (1.0 + h.amax()) } else { shift * 10.0 };
        };
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + alpha * s).collect();
            let value = objective(&trial);
            if value <= current {
                beta = trial;
                current = value;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            // no descent possible at machine precision
            let (g, _) = derivatives(&beta);
            grad_norm = g.amax();
            break;
        }
    }
    model.coefficients = beta;
    if grad_norm > options.tol {
        let (g, _) = derivatives(&model.coefficients);
        grad_norm = g.amax();
    }
    if grad_norm > options.tol {
        return Err(ModelError::IterationLimit {
            iterations,
            gradient_norm: grad_norm,
            best: Box::new(model),
        });
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sse: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, t)| (model.value(r) - t).powi(2))
        .sum();
    let sst: f64 = y.iter().map(|t| (t - mean_y).powi(2)).sum();
    let report = GlmFitReport {
        iterations,
        gradient_norm: grad_norm,
        train_rmse: (sse / n as f64).sqrt(),
        train_r2: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
        target_scaling: format!(
            "min-max into (0,1) with {:.0}% margin: low {low}, high {high}",
            TARGET_MARGIN * 100.0
        ),
        standardized: true,
    };
    Ok((model, report))
}
