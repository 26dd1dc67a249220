//! Quadrature rules on `[0, 1]` used for path integrals.
//!
//! Both rules place nodes on the uniform lattice `t = m / M`, so products of
//! nodes from nested levels stay on the lattice `P / M^k` with integer `P`.
//! The composition engine relies on that to share model evaluations.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Riemann sum sampling `t = m/M` for `m = 1..=M`, weights `1/M`.
    RightHand,
    /// Composite trapezoid on `m = 0..=M`.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub points_per_level: usize,
    pub rule: Rule,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            points_per_level: 100,
            rule: Rule::RightHand,
        }
    }
}

/// One quadrature node: lattice numerator `m`, position `t = m/M` and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub numerator: u64,
    pub t: f64,
    pub weight: f64,
}

impl QuadratureConfig {
    pub fn new(points_per_level: usize, rule: Rule) -> Self {
        Self {
            points_per_level,
            rule,
        }
    }

    pub fn right_hand(points_per_level: usize) -> Self {
        Self::new(points_per_level, Rule::RightHand)
    }

    pub fn trapezoid(points_per_level: usize) -> Self {
        Self::new(points_per_level, Rule::Trapezoid)
    }

    pub fn is_valid(&self) -> bool {
        self.points_per_level >= 1
    }

    pub fn nodes(&self) -> Vec<Node> {
        let m_total = self.points_per_level as u64;
        let inv = 1.0 / self.points_per_level as f64;
        let t_of = |m: u64| m as f64 / m_total as f64;
        match self.rule {
            Rule::RightHand => (1..=m_total)
                .map(|m| Node {
                    numerator: m,
                    t: t_of(m),
                    weight: inv,
                })
                .collect(),
            Rule::Trapezoid => (0..=m_total)
                .map(|m| Node {
                    numerator: m,
                    t: t_of(m),
                    weight: if m == 0 || m == m_total { 0.5 * inv } else { inv },
                })
                .collect(),
        }
    }

    /// Applies the rule to the monomial `t^n`, i.e. `sum_m w_m t_m^n`.
    pub fn moment(&self, n: usize) -> f64 {
        self.nodes()
            .iter()
            .map(|node| node.weight * node.t.powi(n as i32))
            .sum()
    }

    /// Integrates a function over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes().iter().map(|n| n.weight * f(n.t)).sum()
    }
}
