//! Gaussian process regression with an RBF kernel (predictive mean only).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DerivativeKind, ModelError, PredictiveModel};
use crate::data::Dataset;
use crate::multiset::GradedIndex;

/// `k(x, x') = signal_variance * exp(-|x - x'|^2 / (2 lengthscale^2))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub lengthscale: f64,
    pub signal_variance: f64,
}

impl RbfKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-0.5 * sq / (self.lengthscale * self.lengthscale)).exp()
    }
}

/// Fitted GP: `f(x) = mean + sum_k weights_k k(x, x_k)`, where the weights
/// solve `(K + noise I) w = y - mean`. `mean` is zero unless targets were centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprModel {
    pub feature_names: Vec<String>,
    pub kernel: RbfKernel,
    pub noise_variance: f64,
    pub mean: f64,
    pub training_inputs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GprOptions {
    /// Overrides the median pairwise distance heuristic.
    pub lengthscale: Option<f64>,
    /// Overrides `var(y)`.
    pub signal_variance: Option<f64>,
    /// Overrides `1e-2 * var(y)`.
    pub noise_variance: Option<f64>,
    /// Search `{0.5, 1, 2} x` each default by log marginal likelihood.
    pub grid_search: bool,
    /// Use the target mean as a constant prior mean instead of zero.
    pub center_targets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprFitReport {
    pub train_rmse: f64,
    pub log_marginal_likelihood: f64,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let sq: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d.push(sq.sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

struct Solved {
    weights: DVector<f64>,
    log_det_half: f64,
}

fn solve_system(
    x: &[Vec<f64>],
    centered: &DVector<f64>,
    kernel: RbfKernel,
    noise: f64,
) -> Result<Solved, ModelError> {
    let n = x.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&x[i], &x[j]));
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let max_diagonal = (0..n).map(|i| k[(i, i)]).fold(0.0, f64::max);
    let fail = |k: &DMatrix<f64>, min_pivot: f64| {
        let eig = k.clone().symmetric_eigenvalues();
        let lo = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let hi = eig.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        ModelError::NotPositiveDefinite {
            min_pivot,
            max_diagonal,
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        }
    };
    let chol = match k.clone().cholesky() {
        Some(c) => c,
        None => return Err(fail(&k, 0.0)),
    };
    let l = chol.l();
    let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    // pivots at roundoff level mean the system is numerically singular
    if min_pivot <= n as f64 * f64::EPSILON * max_diagonal {
        return Err(fail(&k, min_pivot));
    }
    let log_det_half = (0..n).map(|i| l[(i, i)].ln()).sum();
    Ok(Solved {
        weights: chol.solve(centered),
        log_det_half,
    })
}

impl GprModel {
    /// Fits the predictive mean for fixed hyperparameters.
    pub fn fit(
        feature_names: Vec<String>,
        x: &[Vec<f64>],
        y: &[f64],
        kernel: RbfKernel,
        noise_variance: f64,
        center_targets: bool,
    ) -> Result<(Self, GprFitReport), ModelError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(ModelError::InvalidParameter(format!(
                "need matching non-empty inputs and targets ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if noise_variance < 0.0 || kernel.lengthscale <= 0.0 || kernel.signal_variance <= 0.0 {
            return Err(ModelError::InvalidParameter(
                "kernel parameters must be positive and noise non-negative".into(),
            ));
        }
        let dim = feature_names.len();
        if let Some(row) = x.iter().find(|r| r.len() != dim) {
            return Err(ModelError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        let mean = if center_targets {
            y.iter().sum::<f64>() / y.len() as f64
        } else {
            0.0
        };
        let centered = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean));
        let solved = solve_system(x, &centered, kernel, noise_variance)?;
        let model = Self {
            feature_names,
            kernel,
            noise_variance,
            mean,
            training_inputs: x.to_vec(),
            weights: solved.weights.iter().copied().collect(),
        };
        let n = y.len() as f64;
        let rmse = (x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (model.value(xi) - yi).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let lml = -0.5 * centered.dot(&solved.weights)
            - solved.log_det_half
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        let report = GprFitReport {
            train_rmse: rmse,
            log_marginal_likelihood: lml,
            lengthscale: kernel.lengthscale,
            signal_variance: kernel.signal_variance,
            noise_variance,
        };
        Ok((model, report))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Fits a GP to a dataset with heuristic (optionally grid-searched) hyperparameters.
pub fn fit_gpr(data: &Dataset, options: &GprOptions) -> Result<(GprModel, GprFitReport), ModelError> {
    let x = data.rows();
    let y = data.targets();
    if x.is_empty() {
        return Err(ModelError::InvalidParameter("empty dataset".into()));
    }
    let var_y = variance(y);
    let var_y = if var_y > 0.0 { var_y } else { 1.0 };
    let base_l = options.lengthscale.unwrap_or_else(|| median_pairwise_distance(x));
    let base_s = options.signal_variance.unwrap_or(var_y);
    let base_n = options.noise_variance.unwrap_or(1e-2 * var_y);
    let names = data.feature_names().to_vec();
    if !options.grid_search {
        return GprModel::fit(
            names,
            x,
            y,
            RbfKernel {
                lengthscale: base_l,
                signal_variance: base_s,
            },
            base_n,
            options.center_targets,
        );
    }
    let factors = [0.5, 1.0, 2.0];
    let mut best: Option<(GprModel, GprFitReport)> = None;
    for fl in factors {
        for fs in factors {
            for fn_ in factors {
                let kernel = RbfKernel {
                    lengthscale: base_l * fl,
                    signal_variance: base_s * fs,
                };
                let Ok(fit) = GprModel::fit(names.clone(), x, y, kernel, base_n * fn_, options.center_targets) else {
                    continue;
                };
                let better = best
                    .as_ref()
                    .map_or(true, |b| fit.1.log_marginal_likelihood > b.1.log_marginal_likelihood);
                if better {
                    best = Some(fit);
                }
            }
        }
    }
    match best {
        Some(b) => Ok(b),
        None => GprModel::fit(
            names,
            x,
            y,
            RbfKernel {
                lengthscale: base_l,
                signal_variance: base_s,
            },
            base_n,
            options.center_targets,
        ),
    }
}

/// `d^n/du^n exp(-u^2 / (2 l^2))` divided by the exponential, for `n = 0..=max`:
/// `(-1/l)^n He_n(u / l)` with probabilists' Hermite polynomials.
fn hermite_factors(u: f64, lengthscale: f64, max: usize, out: &mut Vec<f64>) {
    out.clear();
    let z = u / lengthscale;
    let mut he_prev = 1.0;
    let mut he = z;
    let inv = -1.0 / lengthscale;
    out.push(1.0);
    if max >= 1 {
        out.push(inv * z);
    }
    let mut scale = inv;
    for n in 1..max {
        let next = z * he - n as f64 * he_prev;
        he_prev = he;
        he = next;
        scale *= inv;
        out.push(scale * he);
    }
}

impl PredictiveModel for GprModel {
    fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.mean
            + self
                .training_inputs
                .iter()
                .zip(&self.weights)
                .map(|(xk, w)| w * self.kernel.eval(x, xk))
                .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let l2 = self.kernel.lengthscale * self.kernel.lengthscale;
        let mut g = DVector::zeros(self.dim());
        for (xk, w) in self.training_inputs.iter().zip(&self.weights) {
            let k = w * self.kernel.eval(x, xk);
            for i in 0..self.dim() {
                g[i] -= k * (x[i] - xk[i]) / l2;
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let l2 = self.kernel.lengthscale * self.kernel.lengthscale;
        let mut h = DMatrix::zeros(d, d);
        let mut u = vec![0.0; d];
        for (xk, w) in self.training_inputs.iter().zip(&self.weights) {
            let k = w * self.kernel.eval(x, xk);
            for i in 0..d {
                u[i] = x[i] - xk[i];
            }
            for i in 0..d {
                for j in i..d {
                    let mut v = u[i] * u[j] / (l2 * l2);
                    if i == j {
                        v -= 1.0 / l2;
                    }
                    h[(i, j)] += k * v;
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        h
    }

    fn derivative_kind(&self) -> DerivativeKind {
        DerivativeKind::Exact
    }

    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        let d = self.dim();
        let max = layout.max_order();
        // each multiset as (variable, count) pairs
        let plans: Vec<Vec<(usize, usize)>> = layout
            .multisets()
            .iter()
            .map(|m| {
                let mut p: Vec<(usize, usize)> = Vec::new();
                for &v in m {
                    match p.last_mut() {
                        Some((last, c)) if *last == v => *c += 1,
                        _ => p.push((v, 1)),
                    }
                }
                p
            })
            .collect();
        let mut out = vec![0.0; layout.len()];
        let mut factors: Vec<Vec<f64>> = vec![Vec::with_capacity(max + 1); d];
        for (xk, w) in self.training_inputs.iter().zip(&self.weights) {
            let k = w * self.kernel.eval(x, xk);
            for i in 0..d {
                hermite_factors(x[i] - xk[i], self.kernel.lengthscale, max, &mut factors[i]);
            }
            for (o, plan) in out.iter_mut().zip(&plans) {
                let mut v = k;
                for &(var, c) in plan {
                    v *= factors[var][c];
                }
                *o += v;
            }
        }
        out[0] += self.mean;
        Some(out)
    }
}
