//! Recursive composition of attribution operators.
//!
//! For a tuple `(i1, .., iL)` let `F_{L+1} = f` and `F_k = A_{ik} F_{k+1}`,
//! so `a_{i1..iL} = F_1(x)`. Writing `j = ik` and evaluating everything on
//! the path point `gamma(tau)`, the derivatives of `F_k` follow from those
//! of `F_{k+1}`:
//!
//! ```text
//! D^b F_k(tau) = tau dx_j H_b(tau) + count_j(b) H_{b - j}(tau)
//! H_c(tau)     = sum_m w_m t_m^|c| D^{c + j} F_{k+1}(tau t_m)
//! ```
//!
//! `F_k` is needed at products of `k - 1` quadrature nodes with derivatives
//! up to order `k - 1`. Products of lattice nodes `m / M` are identified by
//! their integer numerators, so each distinct path point is visited once and
//! the model is only asked for its partial derivatives at the deepest level.

use std::collections::HashSet;

use super::{degenerate, finish, EngineConfig, EngineError, ExplanationRequest, PathSummary};
use crate::models::fd_partials;
use crate::multiset::{self, GradedIndex};
use crate::tensor::{AttributionTensor, Method};

/// Attributions of order `req.order` by operator composition, using exact
/// model derivatives at the quadrature nodes when the model provides them
/// and central differences of its Hessian otherwise.
pub fn compose_order(req: &ExplanationRequest, cfg: &EngineConfig) -> Result<AttributionTensor, EngineError> {
    req.validate(cfg)?;
    let mut fd = req.uses_finite_differences();
    if fd && !cfg.allow_finite_differences {
        return Err(EngineError::HessianUnavailable);
    }
    let summary = PathSummary::new(req);
    if summary.path.is_degenerate() {
        return degenerate(req, &summary, Method::OperatorComposition);
    }
    let order = req.order;
    let d = req.model.dim();
    let nodes = req.quadrature.nodes();
    let m_total = req.quadrature.points_per_level as f64;

    let grid_nodes = (nodes.len() as u64).saturating_pow(order as u32);
    if grid_nodes > cfg.warn_grid_nodes {
        log::warn!("order-{order} composition spans {grid_nodes} quadrature nodes");
    }

    let leaf_layout = GradedIndex::new(d, order);
    let point_limit = (cfg.max_table_entries / leaf_layout.len()).max(1);
    let lattice = Lattice::build(&nodes, order, point_limit).ok_or(EngineError::GridTooLarge {
        entries_limit: cfg.max_table_entries,
    })?;

    // derivatives of f at every distinct point of the deepest level
    let leaf_points = &lattice.points[order];
    let leaf_scale = m_total.powi(order as i32);
    let n_leaf = leaf_points.len();
    let mut leaf = vec![0.0; leaf_layout.len() * n_leaf];
    let mut point = vec![0.0; d];
    for (p, &num) in leaf_points.iter().enumerate() {
        summary.path.write_at(num as f64 / leaf_scale, &mut point);
        let partials = match req.model.partials(&point, &leaf_layout) {
            Some(v) => v,
            None => {
                if !cfg.allow_finite_differences {
                    return Err(EngineError::HessianUnavailable);
                }
                fd = true;
                fd_partials(req.model, &point, &leaf_layout)?
            }
        };
        for (b, v) in partials.into_iter().enumerate() {
            leaf[b * n_leaf + p] = v;
        }
    }

    let delta = summary.path.delta();
    // tables[s] for suffix index s = i_k + d * i_{k+1} + ..., laid out [multiset][point]
    let mut tables = vec![leaf];
    for k in (1..=order).rev() {
        tables = apply_level(&tables, k, d, delta, &nodes, &lattice, m_total);
    }

    let mut raw = vec![0.0; tables.len()];
    for (suffix, table) in tables.iter().enumerate() {
        let mut rest = suffix;
        let mut flat = 0;
        for _ in 0..order {
            flat = flat * d + rest % d;
            rest /= d;
        }
        raw[flat] = table[0];
    }

    let mut meta = summary.meta(req, Method::OperatorComposition, order);
    meta.diagnostics.model_evaluations = n_leaf as u64;
    meta.diagnostics.grid_nodes = grid_nodes;
    meta.diagnostics.finite_difference = fd;
    Ok(finish(AttributionTensor::from_raw(order, d, &raw, meta)?))
}

/// Distinct node products per level and the map from (point, node) to the
/// product point one level deeper.
struct Lattice {
    points: Vec<Vec<u64>>,
    children: Vec<Vec<u32>>,
}

impl Lattice {
    fn build(nodes: &[crate::quadrature::Node], depth: usize, limit: usize) -> Option<Self> {
        let mut points = vec![vec![1u64]];
        for k in 1..=depth {
            let mut set = HashSet::new();
            for &p in &points[k - 1] {
                for n in nodes {
                    set.insert(p * n.numerator);
                    if set.len() > limit {
                        return None;
                    }
                }
            }
            let mut level: Vec<u64> = set.into_iter().collect();
            level.sort_unstable();
            points.push(level);
        }
        let children = (0..depth)
            .map(|k| {
                let next = &points[k + 1];
                points[k]
                    .iter()
                    .flat_map(|&p| {
                        nodes.iter().map(move |n| {
                            next.binary_search(&(p * n.numerator)).expect("product is on the next level") as u32
                        })
                    })
                    .collect()
            })
            .collect();
        Some(Self { points, children })
    }
}

/// Tables for `F_k` from those of `F_{k+1}`.
fn apply_level(
    child_tables: &[Vec<f64>],
    k: usize,
    d: usize,
    delta: &[f64],
    nodes: &[crate::quadrature::Node],
    lattice: &Lattice,
    m_total: f64,
) -> Vec<Vec<f64>> {
    let child_layout = GradedIndex::new(d, k);
    let layout = GradedIndex::new(d, k - 1);
    let multisets = layout.multisets();
    let points = &lattice.points[k - 1];
    let children = &lattice.children[k - 1];
    let n_points = points.len();
    let n_child = lattice.points[k].len();
    let n_nodes = nodes.len();
    let scale = m_total.powi(k as i32 - 1);

    // weighted node powers w_m t_m^n
    let weighted: Vec<Vec<f64>> = (0..k)
        .map(|n| nodes.iter().map(|nd| nd.weight * nd.t.powi(n as i32)).collect())
        .collect();

    let mut out = Vec::with_capacity(child_tables.len() * d);
    let mut h = vec![0.0; multisets.len()];
    for child in child_tables {
        for j in 0..d {
            let extended: Vec<usize> = multisets
                .iter()
                .map(|c| child_layout.position(&multiset::insert_sorted(c, j)))
                .collect();
            let reduced: Vec<Option<(f64, usize)>> = multisets
                .iter()
                .map(|b| {
                    multiset::remove_one(b, j)
                        .map(|rest| (multiset::count_of(b, j) as f64, layout.position(&rest)))
                })
                .collect();
            let mut table = vec![0.0; multisets.len() * n_points];
            for p in 0..n_points {
                let tau = points[p] as f64 / scale;
                let kids = &children[p * n_nodes..(p + 1) * n_nodes];
                for (c, hc) in h.iter_mut().enumerate() {
                    let w = &weighted[multisets[c].len()];
                    let row = &child[extended[c] * n_child..(extended[c] + 1) * n_child];
                    *hc = kids.iter().zip(w).map(|(&q, wm)| wm * row[q as usize]).sum();
                }
                for (b, red) in reduced.iter().enumerate() {
                    let mut v = tau * delta[j] * h[b];
                    if let Some((count, pos)) = red {
                        v += count * h[*pos];
                    }
                    table[b * n_points + p] = v;
                }
            }
            out.push(table);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{first_order, second_order_hessian};
    use crate::models::{FnModel, PolynomialModel};
    use crate::quadrature::QuadratureConfig;

    #[test]
    fn order_one_matches_direct_integral() {
        let f = PolynomialModel::monomial(3, 2.0, &[0, 1, 2]).unwrap();
        let (x, b) = ([0.7, -1.2, 0.4], [0.1, 0.2, -0.3]);
        let req = ExplanationRequest::new(&f, &x, &b, 1);
        let a = compose_order(&req, &EngineConfig::default()).unwrap();
        let direct = first_order(&req, &EngineConfig::default()).unwrap();
        assert!(a.max_difference(&direct).unwrap().0 < 1e-14);
    }

    #[test]
    fn order_two_matches_hessian_route() {
        let f = PolynomialModel::monomial(3, 3.0, &[0, 1, 2]).unwrap();
        let (x, b) = ([0.9, 1.1, -0.6], [0.0, 0.3, 0.2]);
        for q in [QuadratureConfig::right_hand(30), QuadratureConfig::trapezoid(30)] {
            let req = ExplanationRequest::new(&f, &x, &b, 2).with_quadrature(q);
            let c = compose_order(&req, &EngineConfig::default()).unwrap();
            let h = second_order_hessian(&req, &EngineConfig::default()).unwrap();
            assert!(c.max_difference(&h).unwrap().0 < 1e-13);
            assert_eq!(c.meta().method, Method::OperatorComposition);
        }
    }

    #[test]
    fn third_order_monomial_approaches_oracle() {
        let f = PolynomialModel::monomial(3, 3.0, &[0, 1, 2]).unwrap();
        let (x, b) = ([1.0; 3], [0.0; 3]);
        let req = ExplanationRequest::new(&f, &x, &b, 3).with_quadrature(QuadratureConfig::trapezoid(60));
        let a = compose_order(&req, &EngineConfig::default()).unwrap();
        for v in a.to_dense() {
            assert!((v - 1.0 / 9.0).abs() < 1e-3, "{v}");
        }
        assert!(a.meta().diagnostics.asymmetry_residual.unwrap() < 1e-12);
    }

    #[test]
    fn finite_difference_leaf_for_black_box_models() {
        let f = FnModel::new(2, |x| x[0] * x[0] * x[1]);
        let (x, b) = ([1.0, 2.0], [0.0, 0.0]);
        let q = QuadratureConfig::right_hand(10);
        let req = ExplanationRequest::new(&f, &x, &b, 3).with_quadrature(q);
        let a = compose_order(&req, &EngineConfig::default()).unwrap();
        let exact = PolynomialModel::monomial(2, 1.0, &[0, 0, 1]).unwrap();
        let reference = compose_order(&ExplanationRequest::new(&exact, &x, &b, 3).with_quadrature(q), &EngineConfig::default())
            .unwrap();
        assert!(a.meta().diagnostics.finite_difference);
        assert!(a.max_difference(&reference).unwrap().0 < 1e-4);
    }

    #[test]
    fn refuses_oversized_grids() {
        let f = PolynomialModel::monomial(2, 1.0, &[0, 1]).unwrap();
        let (x, b) = ([1.0, 1.0], [0.0, 0.0]);
        let cfg = EngineConfig {
            max_table_entries: 1000,
            ..EngineConfig::default()
        };
        let req = ExplanationRequest::new(&f, &x, &b, 3);
        assert!(matches!(compose_order(&req, &cfg), Err(EngineError::GridTooLarge { .. })));
    }
}
