use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DerivativeKind, ModelError, PredictiveModel};
use crate::multiset::GradedIndex;
use crate::tensor::default_feature_names;

/// `coefficient * prod_d x_d^exponents[d]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Term {
    /// Number of variables with a positive exponent.
    pub fn support(&self) -> usize {
        self.exponents.iter().filter(|&&e| e > 0).count()
    }

    /// Partial derivative with per-variable derivative counts `counts`.
    fn partial(&self, counts: &[u32], x: &[f64]) -> f64 {
        let mut acc = self.coefficient;
        for ((&e, &c), &xi) in self.exponents.iter().zip(counts).zip(x) {
            if c > e {
                return 0.0;
            }
            for k in 0..c {
                acc *= (e - k) as f64;
            }
            acc *= xi.powi((e - c) as i32);
        }
        acc
    }

    /// `d^alpha term` along `baseline + tau * delta`, as coefficients in `tau`.
    fn path_polynomial(&self, counts: &[u32], baseline: &[f64], delta: &[f64]) -> Vec<f64> {
        let mut poly = vec![self.coefficient];
        for (d, (&e, &c)) in self.exponents.iter().zip(counts).enumerate() {
            if c > e {
                return vec![0.0];
            }
            for k in 0..c {
                for p in poly.iter_mut() {
                    *p *= (e - k) as f64;
                }
            }
            let n = (e - c) as usize;
            if n == 0 {
                continue;
            }
            // (baseline_d + tau * delta_d)^n
            let factor: Vec<f64> = (0..=n)
                .map(|r| {
                    binom(n, r) * baseline[d].powi((n - r) as i32) * delta[d].powi(r as i32)
                })
                .collect();
            poly = poly_mul(&poly, &factor);
        }
        poly
    }
}

fn binom(n: usize, r: usize) -> f64 {
    crate::multiset::binomial(n, r) as f64
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn counts_of(alpha: &[usize], dim: usize) -> Vec<u32> {
    let mut counts = vec![0u32; dim];
    for &a in alpha {
        counts[a] += 1;
    }
    counts
}

/// Sum of monomial terms with exact derivatives of every order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub feature_names: Vec<String>,
    pub terms: Vec<Term>,
}

impl PolynomialModel {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self, ModelError> {
        Self::with_names(default_feature_names(dim), terms)
    }

    pub fn with_names(feature_names: Vec<String>, terms: Vec<Term>) -> Result<Self, ModelError> {
        let dim = feature_names.len();
        if dim == 0 {
            return Err(ModelError::InvalidParameter("polynomial needs at least one feature".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.exponents.len() != dim) {
            return Err(ModelError::DimensionMismatch {
                expected: dim,
                found: t.exponents.len(),
            });
        }
        Ok(Self {
            feature_names,
            terms,
        })
    }

    /// `coefficient * prod_{i in vars} x_i` (0-based variable indices, repeats allowed).
    pub fn monomial(dim: usize, coefficient: f64, vars: &[usize]) -> Result<Self, ModelError> {
        Self::new(dim, vec![Self::monomial_term(dim, coefficient, vars)?])
    }

    pub fn monomial_term(dim: usize, coefficient: f64, vars: &[usize]) -> Result<Term, ModelError> {
        let mut exponents = vec![0u32; dim];
        for &v in vars {
            if v >= dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    found: v + 1,
                });
            }
            exponents[v] += 1;
        }
        Ok(Term {
            coefficient,
            exponents,
        })
    }

    /// Linear model `beta^T x`.
    pub fn linear(beta: &[f64]) -> Result<Self, ModelError> {
        let d = beta.len();
        let terms = beta
            .iter()
            .enumerate()
            .map(|(i, &b)| Self::monomial_term(d, b, &[i]))
            .collect::<Result<_, _>>()?;
        Self::new(d, terms)
    }

    /// True when every term involves at most one variable.
    pub fn is_additive(&self) -> bool {
        self.terms.iter().all(|t| t.support() <= 1)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Partial derivative for a multiset of variable indices.
    pub fn partial(&self, alpha: &[usize], x: &[f64]) -> f64 {
        let counts = counts_of(alpha, self.dim());
        self.terms.iter().map(|t| t.partial(&counts, x)).sum()
    }

    /// `d^alpha f(baseline + tau * delta)` as polynomial coefficients in `tau`.
    pub fn path_polynomial(&self, alpha: &[usize], baseline: &[f64], delta: &[f64]) -> Vec<f64> {
        let counts = counts_of(alpha, self.dim());
        let mut acc = vec![0.0];
        for t in &self.terms {
            let p = t.path_polynomial(&counts, baseline, delta);
            if acc.len() < p.len() {
                acc.resize(p.len(), 0.0);
            }
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        acc
    }
}

impl PredictiveModel for PolynomialModel {
    fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.partial(&[], x)
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.partial(&[i], x)))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = self.partial(&[i, j], x);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    fn derivative_kind(&self) -> DerivativeKind {
        DerivativeKind::Exact
    }

    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        Some(
            layout
                .multisets()
                .iter()
                .map(|alpha| self.partial(alpha, x))
                .collect(),
        )
    }
}
