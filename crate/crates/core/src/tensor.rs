//! Symmetric attribution tensors and the algebra relating different orders.
//!
//! An [`AttributionTensor`] of order `L` holds `a_{i1..iL}` for one
//! prediction. Values are kept in canonical form, one entry per sorted index
//! tuple, so permutation symmetry holds exactly. Expanded sums weight each
//! canonical entry by the number of distinct permutations of its indices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multiset::{self, canonical_len};
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("cannot contract an order-1 tensor")]
    OrderUnderflow,
    #[error("expected an order-{expected} tensor, found order {found}")]
    OrderMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid tensor shape: {0}")]
    Shape(String),
}

/// How a tensor was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Single-level path integral of the gradient.
    DirectIntegral,
    /// Double integrals of the gradient and Hessian (order 2 only).
    HessianFormula,
    /// Recursive application of attribution operators.
    OperatorComposition,
    /// Exact integration of polynomial path functions.
    ClosedForm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `sum(a) - (f(x) - f(baseline))` for this tensor.
    pub completeness_defect: f64,
    /// Largest permutation disagreement of the raw values before symmetrization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymmetry_residual: Option<f64>,
    /// Distinct points at which the model was evaluated.
    pub model_evaluations: u64,
    /// Size of the tensor-product quadrature grid.
    pub grid_nodes: u64,
    /// Whether some derivatives were obtained by finite differences.
    pub finite_difference: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMeta {
    pub input: Vec<f64>,
    pub baseline: Vec<f64>,
    /// `zero`, `mean` or `explicit`.
    pub baseline_kind: String,
    pub delta_f: f64,
    pub quadrature: QuadratureConfig,
    pub method: Method,
    pub tolerance: f64,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl ExplanationMeta {
    pub fn dim(&self) -> usize {
        self.input.len()
    }

    pub fn delta_x(&self) -> Vec<f64> {
        self.input
            .iter()
            .zip(&self.baseline)
            .map(|(x, b)| x - b)
            .collect()
    }
}

pub const AGGREGATION_RULE: &str = "edge {i,j}: all permutations of {i,i,j} and {i,j,j}; \
fully mixed {i,j,k} split equally over its three edges; diagonal a_iii";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRepr {
    order: usize,
    dim: usize,
    feature_names: Vec<String>,
    canonical_values: Vec<f64>,
    meta: ExplanationMeta,
}

/// Order-`L` symmetric attribution tensor for a single prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct AttributionTensor {
    order: usize,
    dim: usize,
    feature_names: Vec<String>,
    values: Vec<f64>,
    meta: ExplanationMeta,
}

impl TryFrom<TensorRepr> for AttributionTensor {
    type Error = TensorError;

    fn try_from(r: TensorRepr) -> Result<Self, Self::Error> {
        Self::from_canonical(r.order, r.dim, r.canonical_values, r.meta)
            .and_then(|t| t.with_feature_names(r.feature_names))
    }
}

impl From<AttributionTensor> for TensorRepr {
    fn from(t: AttributionTensor) -> Self {
        TensorRepr {
            order: t.order,
            dim: t.dim,
            feature_names: t.feature_names,
            canonical_values: t.values,
            meta: t.meta,
        }
    }
}

pub fn default_feature_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

impl AttributionTensor {
    pub fn from_canonical(
        order: usize,
        dim: usize,
        values: Vec<f64>,
        meta: ExplanationMeta,
    ) -> Result<Self, TensorError> {
        if order == 0 || dim == 0 {
            return Err(TensorError::Shape(format!(
                "order and dim must be positive (order {order}, dim {dim})"
            )));
        }
        let expected = canonical_len(dim, order);
        if values.len() != expected {
            return Err(TensorError::Shape(format!(
                "expected {expected} canonical values, got {}",
                values.len()
            )));
        }
        if meta.input.len() != dim || meta.baseline.len() != dim {
            return Err(TensorError::DimMismatch(meta.input.len(), dim));
        }
        if !(meta.tolerance > 0.0) {
            return Err(TensorError::Shape("tolerance must be positive".into()));
        }
        Ok(Self {
            order,
            dim,
            feature_names: default_feature_names(dim),
            values,
            meta,
        })
    }

    pub fn zeros(order: usize, dim: usize, meta: ExplanationMeta) -> Result<Self, TensorError> {
        Self::from_canonical(order, dim, vec![0.0; canonical_len(dim, order)], meta)
    }

    /// Builds a tensor from a dense row-major `D^L` array by averaging each
    /// permutation class. The pre-average residual is stored in the meta.
    pub fn from_raw(
        order: usize,
        dim: usize,
        raw: &[f64],
        mut meta: ExplanationMeta,
    ) -> Result<Self, TensorError> {
        let residual = asymmetry_residual(raw, dim, order)?;
        let mut sums = vec![0.0; canonical_len(dim, order)];
        let mut counts = vec![0usize; sums.len()];
        for (flat, tuple) in multiset::ordered_tuples(dim, order).iter().enumerate() {
            let r = multiset::rank(tuple, dim);
            sums[r] += raw[flat];
            counts[r] += 1;
        }
        for (s, c) in sums.iter_mut().zip(&counts) {
            *s /= *c as f64;
        }
        meta.diagnostics.asymmetry_residual = Some(residual);
        Self::from_canonical(order, dim, sums, meta)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, TensorError> {
        if names.len() != self.dim {
            return Err(TensorError::DimMismatch(names.len(), self.dim));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: ExplanationMeta) -> Result<Self, TensorError> {
        if meta.input.len() != self.dim {
            return Err(TensorError::DimMismatch(meta.input.len(), self.dim));
        }
        self.meta = meta;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn canonical_values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &ExplanationMeta {
        &self.meta
    }

    /// Value at an arbitrary (unsorted) index tuple.
    pub fn get(&self, indices: &[usize]) -> f64 {
        debug_assert_eq!(indices.len(), self.order);
        self.values[multiset::rank(indices, self.dim)]
    }

    /// Dense row-major `D^L` expansion.
    pub fn to_dense(&self) -> Vec<f64> {
        multiset::ordered_tuples(self.dim, self.order)
            .iter()
            .map(|t| self.get(t))
            .collect()
    }

    /// Order-2 tensor as a `D x D` matrix.
    pub fn matrix(&self) -> Option<nalgebra::DMatrix<f64>> {
        (self.order == 2)
            .then(|| nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(&[i, j])))
    }

    /// Entries of an order-1 tensor.
    pub fn vector(&self) -> Option<Vec<f64>> {
        (self.order == 1).then(|| self.values.clone())
    }

    /// Sum of every entry of the expanded tensor.
    pub fn total_sum(&self) -> f64 {
        multiset::enumerate(self.dim, self.order)
            .iter()
            .zip(&self.values)
            .map(|(t, v)| multiset::multiplicity(t) as f64 * v)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sums out the last index: `b_{i1..i(L-1)} = sum_j a_{i1..i(L-1) j}`.
    pub fn contract_last_index(&self) -> Result<Self, TensorError> {
        if self.order < 2 {
            return Err(TensorError::OrderUnderflow);
        }
        let lower = self.order - 1;
        let values = multiset::enumerate(self.dim, lower)
            .iter()
            .map(|s| {
                (0..self.dim)
                    .map(|j| {
                        let full = multiset::insert_sorted(s, j);
                        self.values[multiset::rank_sorted(&full, self.dim)]
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            order: lower,
            dim: self.dim,
            feature_names: self.feature_names.clone(),
            values,
            meta: self.meta.clone(),
        })
    }

    /// Contracts repeatedly down to order 1.
    pub fn contract_to_first(&self) -> Result<Self, TensorError> {
        let mut t = self.clone();
        while t.order > 1 {
            t = t.contract_last_index()?;
        }
        Ok(t)
    }

    /// Maps an order-3 tensor onto a symmetric order-2 edge tensor.
    ///
    /// Edge `{i,j}` collects every permutation of `{i,i,j}` and `{i,j,j}`;
    /// a fully mixed `{i,j,k}` is split equally across its three edges.
    /// Undirected edge mass is stored half in `E_ij` and half in `E_ji`, so
    /// `total_sum` is unchanged.
    pub fn aggregate_third_to_edges(&self) -> Result<Self, TensorError> {
        if self.order != 3 {
            return Err(TensorError::OrderMismatch {
                expected: 3,
                found: self.order,
            });
        }
        let d = self.dim;
        let mut edge = vec![0.0; canonical_len(d, 2)];
        let mut add = |i: usize, j: usize, v: f64| {
            edge[multiset::rank(&[i, j], d)] += v;
        };
        for (t, &v) in multiset::enumerate(d, 3).iter().zip(&self.values) {
            let (a, b, c) = (t[0], t[1], t[2]);
            if a == b && b == c {
                add(a, a, v);
            } else if a == b || b == c {
                let (p, q) = if a == b { (a, c) } else { (a, b) };
                // three permutations, half of the undirected mass per orientation
                add(p, q, 1.5 * v);
            } else {
                // six permutations over three edges, 2v per edge, v per orientation
                add(a, b, v);
                add(a, c, v);
                add(b, c, v);
            }
        }
        let mut meta = self.meta.clone();
        meta.diagnostics.aggregation = Some(AGGREGATION_RULE.to_string());
        Ok(Self {
            order: 2,
            dim: d,
            feature_names: self.feature_names.clone(),
            values: edge,
            meta,
        })
    }

    /// Entrywise `alpha * self + beta * other`; meta is taken from `self`.
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &Self,
        beta: f64,
    ) -> Result<Self, TensorError> {
        if self.order != other.order {
            return Err(TensorError::OrderMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        if self.dim != other.dim {
            return Err(TensorError::DimMismatch(self.dim, other.dim));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Largest entrywise difference and where it occurs (sorted index tuple).
    pub fn max_difference(&self, other: &Self) -> Result<(f64, Vec<usize>), TensorError> {
        if self.order != other.order {
            return Err(TensorError::OrderMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        if self.dim != other.dim {
            return Err(TensorError::DimMismatch(self.dim, other.dim));
        }
        let mut best = (0.0, multiset::enumerate(self.dim, self.order)[0].clone());
        for (t, (a, b)) in multiset::enumerate(self.dim, self.order)
            .into_iter()
            .zip(self.values.iter().zip(&other.values))
        {
            let d = (a - b).abs();
            if d > best.0 || d.is_nan() {
                best = (d, t);
            }
        }
        Ok(best)
    }

    /// Returns a copy with one canonical entry replaced.
    pub fn with_entry(&self, indices: &[usize], value: f64) -> Self {
        let mut out = self.clone();
        out.values[multiset::rank(indices, self.dim)] = value;
        out
    }
}

/// Largest disagreement between entries of a dense `D^L` array that should
/// be equal under index permutation.
pub fn asymmetry_residual(raw: &[f64], dim: usize, order: usize) -> Result<f64, TensorError> {
    let expected = dim.pow(order as u32);
    if raw.len() != expected {
        return Err(TensorError::Shape(format!(
            "raw array has {} entries, expected {expected}",
            raw.len()
        )));
    }
    let n = canonical_len(dim, order);
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (flat, tuple) in multiset::ordered_tuples(dim, order).iter().enumerate() {
        let r = multiset::rank(tuple, dim);
        lo[r] = lo[r].min(raw[flat]);
        hi[r] = hi[r].max(raw[flat]);
    }
    Ok(lo.iter().zip(&hi).fold(0.0, |m, (l, h)| m.max(h - l)))
}
