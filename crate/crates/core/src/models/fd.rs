//! Central finite differences.

use nalgebra::{DMatrix, DVector};

use super::{ModelError, PredictiveModel};
use crate::multiset::GradedIndex;

/// Default gradient step `cbrt(eps) * (1 + |x|)`.
pub fn gradient_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

/// Default Hessian step `eps^(1/4) * (1 + |x|)`.
pub fn hessian_step(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + x.abs())
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, h) in moves {
        y[i] += h;
    }
    y
}

/// Central-difference gradient. `step` overrides the per-coordinate default.
pub fn fd_gradient<M: PredictiveModel + ?Sized>(model: &M, x: &[f64], step: Option<f64>) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let h = step.unwrap_or_else(|| gradient_step(x[i]));
            (model.value(&shifted(x, &[(i, h)])) - model.value(&shifted(x, &[(i, -h)]))) / (2.0 * h)
        }),
    )
}

/// Central-difference Hessian from values only, symmetrized.
pub fn fd_hessian<M: PredictiveModel + ?Sized>(model: &M, x: &[f64], step: Option<f64>) -> DMatrix<f64> {
    let d = x.len();
    let hs: Vec<f64> = x
        .iter()
        .map(|&xi| step.unwrap_or_else(|| hessian_step(xi)))
        .collect();
    let f0 = model.value(x);
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let hi = hs[i];
        let fp = model.value(&shifted(x, &[(i, hi)]));
        let fm = model.value(&shifted(x, &[(i, -hi)]));
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..d {
            let hj = hs[j];
            let fpp = model.value(&shifted(x, &[(i, hi), (j, hj)]));
            let fpm = model.value(&shifted(x, &[(i, hi), (j, -hj)]));
            let fmp = model.value(&shifted(x, &[(i, -hi), (j, hj)]));
            let fmm = model.value(&shifted(x, &[(i, -hi), (j, -hj)]));
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

fn checked_step(x: f64, h: f64) -> Result<f64, ModelError> {
    if !(h.is_finite() && h > 0.0) || x + h == x || x - h == x {
        return Err(ModelError::StepError { step: h, at: x });
    }
    Ok(h)
}

/// Derivative table up to any order. Orders 0..=2 come from the model's
/// value/gradient/Hessian oracles; higher orders differentiate Hessian
/// entries by nested central differences over the leading indices.
pub fn fd_partials<M: PredictiveModel + ?Sized>(
    model: &M,
    x: &[f64],
    layout: &GradedIndex,
) -> Result<Vec<f64>, ModelError> {
    let low = GradedIndex::new(layout.dim(), layout.max_order().min(2));
    let base = model
        .partials(x, &low)
        .unwrap_or_else(|| super::low_order_partials(model, x, &low));
    let mut out = vec![0.0; layout.len()];
    for m in low.multisets() {
        out[layout.position(&m)] = base[low.position(&m)];
    }
    for alpha in layout.multisets().into_iter().filter(|m| m.len() > 2) {
        let k = alpha.len();
        let (outer, inner) = alpha.split_at(k - 2);
        let exponent = 1.0 / (outer.len() as f64 + 2.0);
        let mut steps = Vec::with_capacity(outer.len());
        for &i in outer {
            let h = f64::EPSILON.powf(exponent) * (1.0 + x[i].abs());
            steps.push((i, checked_step(x[i], h)?));
        }
        out[layout.position(&alpha)] = nested_difference(model, x, &steps, inner[0], inner[1]);
    }
    Ok(out)
}

fn nested_difference<M: PredictiveModel + ?Sized>(
    model: &M,
    x: &[f64],
    steps: &[(usize, f64)],
    a: usize,
    b: usize,
) -> f64 {
    match steps.split_first() {
        None => {
            let h = model.hessian(x);
            0.5 * (h[(a, b)] + h[(b, a)])
        }
        Some((&(i, h), rest)) => {
            let up = nested_difference(model, &shifted(x, &[(i, h)]), rest, a, b);
            let down = nested_difference(model, &shifted(x, &[(i, -h)]), rest, a, b);
            (up - down) / (2.0 * h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FnModel, PolynomialModel};

    #[test]
    fn quadratic_gradient_is_exact_for_dyadic_steps() {
        let m = FnModel::new(1, |x| x[0] * x[0]);
        for h in [0.5, 0.25, 1.0 / 1024.0] {
            assert_eq!(fd_gradient(&m, &[1.0], Some(h))[0], 2.0);
        }
        for h in [0.1, 1e-3, 1e-6] {
            assert!((fd_gradient(&m, &[1.0], Some(h))[0] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sine_gradient_taylor_bound() {
        let m = FnModel::new(1, |x| x[0].sin());
        let g = fd_gradient(&m, &[0.0], Some(1e-5))[0];
        assert!((g - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bilinear_hessian_off_diagonal() {
        let m = FnModel::new(2, |x| 3.0 * x[0] * x[1]);
        let h = fd_hessian(&m, &[0.4, -0.7], None);
        assert!((h[(0, 1)] - 3.0).abs() < 1e-6);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
        assert!(h[(0, 0)].abs() < 1e-6);
    }

    #[test]
    fn third_partials_from_hessian_differences() {
        let p = PolynomialModel::monomial(3, 3.0, &[0, 1, 2]).unwrap();
        let layout = GradedIndex::new(3, 3);
        let fd = fd_partials(&p, &[0.5, 1.5, -1.0], &layout).unwrap();
        let exact = p.partials(&[0.5, 1.5, -1.0], &layout).unwrap();
        for (a, b) in fd.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn step_underflow_is_reported() {
        assert!(matches!(checked_step(1e300, 1e-10), Err(ModelError::StepError { .. })));
        assert!(checked_step(1.0, 1e-5).is_ok());
    }
}
