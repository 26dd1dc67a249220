//! Interaction graphs and simplicial aggregates built from attribution tensors.
//!
//! Nodes carry first-order attributions, self-loops carry `a_ii`, and the
//! undirected edge `{i, j}` carries `a_ij + a_ji = 2 a_ij`, of which node `i`
//! is credited `a_ij`. Triangles carry the sum of the six permutations of
//! `a_ijk`.

mod dot;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{AttributionTensor, ExplanationMeta, TensorError, AGGREGATION_RULE};

pub use dot::to_dot;

pub const DEFAULT_THRESHOLD: f64 = 1e-3;

pub const EDGE_CONVENTION: &str =
    "undirected edge {i,j} carries a_ij + a_ji; node i is credited a_ij; self-loop (i,i) carries a_ii";

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("inconsistent tensors: {0}")]
    Mismatch(String),
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("malformed graph JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub index: usize,
    pub name: String,
    /// First-order attribution.
    pub signal: f64,
    /// `a_ii + sum_{j != i} a_ij` over all edges before thresholding.
    pub edge_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: usize,
    pub target: usize,
    pub signal: f64,
    /// Aggregated third-order signal, present in simplicial exports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_order: Option<f64>,
    /// Kept only because it bounds a retained triangle.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

impl GraphEdge {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub signal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub threshold: f64,
    /// Summed signal of the off-diagonal edges removed by the threshold.
    pub truncation_residual: f64,
    pub edge_convention: String,
    pub provenance: ExplanationMeta,
}

impl InteractionGraph {
    /// Off-diagonal edges as `(i, j)` pairs with `i < j`.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| !e.is_self_loop())
            .map(|e| (e.source, e.target))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicialExplanation {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub triangles: Vec<Triangle>,
    pub threshold: f64,
    pub truncation_residual: f64,
    pub triangle_truncation_residual: f64,
    pub edge_convention: String,
    pub aggregation: String,
    pub provenance: ExplanationMeta,
}

impl SimplicialExplanation {
    pub fn triangle_set(&self) -> BTreeSet<[usize; 3]> {
        self.triangles.iter().map(|t| t.vertices).collect()
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| !e.is_self_loop())
            .map(|e| (e.source, e.target))
            .collect()
    }

    /// The node and edge layers as a plain graph.
    pub fn graph(&self) -> InteractionGraph {
        InteractionGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            threshold: self.threshold,
            truncation_residual: self.truncation_residual,
            edge_convention: self.edge_convention.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("complex serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_threshold(tau: f64) -> Result<(), TopologyError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(TopologyError::InvalidThreshold(tau));
    }
    Ok(())
}

fn check_pair(lo: &AttributionTensor, hi: &AttributionTensor) -> Result<(), TopologyError> {
    if lo.dim() != hi.dim() {
        return Err(TensorError::DimMismatch(lo.dim(), hi.dim()).into());
    }
    if lo.meta().input != hi.meta().input || lo.meta().baseline != hi.meta().baseline {
        return Err(TopologyError::Mismatch(
            "tensors explain different inputs or baselines".into(),
        ));
    }
    Ok(())
}

fn expect_order(t: &AttributionTensor, order: usize) -> Result<(), TopologyError> {
    if t.order() != order {
        return Err(TensorError::OrderMismatch {
            expected: order,
            found: t.order(),
        }
        .into());
    }
    Ok(())
}

/// Nodes, self-loops and the off-diagonal edges whose `|a_ij + a_ji|` is at
/// least `tau` times the largest one. Zero edges are never kept.
pub fn build_graph(
    first: &AttributionTensor,
    second: &AttributionTensor,
    tau: f64,
) -> Result<InteractionGraph, TopologyError> {
    check_threshold(tau)?;
    expect_order(first, 1)?;
    expect_order(second, 2)?;
    check_pair(first, second)?;
    let d = first.dim();
    let nodes = (0..d)
        .map(|i| GraphNode {
            index: i,
            name: first.feature_names()[i].clone(),
            signal: first.get(&[i]),
            edge_sum: (0..d).map(|j| second.get(&[i, j])).sum(),
        })
        .collect();

    let mut edges = Vec::new();
    let mut off_diagonal = Vec::new();
    for i in 0..d {
        for j in i..d {
            let a = second.get(&[i, j]);
            if i == j {
                if a != 0.0 {
                    edges.push(GraphEdge {
                        source: i,
                        target: i,
                        signal: a,
                        third_order: None,
                        forced: false,
                    });
                }
            } else {
                off_diagonal.push((i, j, 2.0 * a));
            }
        }
    }
    let max = off_diagonal.iter().fold(0.0_f64, |m, e| m.max(e.2.abs()));
    let mut truncation_residual = 0.0;
    for (i, j, s) in off_diagonal {
        if s != 0.0 && s.abs() >= tau * max {
            edges.push(GraphEdge {
                source: i,
                target: j,
                signal: s,
                third_order: None,
                forced: false,
            });
        } else {
            truncation_residual += s;
        }
    }
    edges.sort_by_key(|e| (e.source, e.target));
    Ok(InteractionGraph {
        nodes,
        edges,
        threshold: tau,
        truncation_residual,
        edge_convention: EDGE_CONVENTION.into(),
        provenance: second.meta().clone(),
    })
}

/// Graph layers plus triangles `{i, j, k}` carrying `6 a_ijk`, thresholded
/// relative to the largest triangle. Every edge of a retained triangle is
/// kept, marked `forced` when it fell below the edge threshold.
pub fn build_simplicial(
    first: &AttributionTensor,
    second: &AttributionTensor,
    third: &AttributionTensor,
    tau: f64,
) -> Result<SimplicialExplanation, TopologyError> {
    expect_order(third, 3)?;
    check_pair(second, third)?;
    let graph = build_graph(first, second, tau)?;
    let d = first.dim();
    let aggregated = third.aggregate_third_to_edges()?;

    let mut candidates = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                candidates.push(([i, j, k], 6.0 * third.get(&[i, j, k])));
            }
        }
    }
    let max = candidates.iter().fold(0.0_f64, |m, c| m.max(c.1.abs()));
    let mut triangles = Vec::new();
    let mut triangle_truncation_residual = 0.0;
    for (vertices, signal) in candidates {
        if signal != 0.0 && signal.abs() >= tau * max {
            triangles.push(Triangle { vertices, signal });
        } else {
            triangle_truncation_residual += signal;
        }
    }

    let mut edges = graph.edges;
    let mut truncation_residual = graph.truncation_residual;
    let present: BTreeSet<(usize, usize)> = edges.iter().map(|e| (e.source, e.target)).collect();
    let mut forced = BTreeSet::new();
    for t in &triangles {
        let [i, j, k] = t.vertices;
        for pair in [(i, j), (i, k), (j, k)] {
            if !present.contains(&pair) {
                forced.insert(pair);
            }
        }
    }
    for &(i, j) in &forced {
        let signal = 2.0 * second.get(&[i, j]);
        truncation_residual -= signal;
        edges.push(GraphEdge {
            source: i,
            target: j,
            signal,
            third_order: None,
            forced: true,
        });
    }
    for e in &mut edges {
        let v = aggregated.get(&[e.source, e.target]);
        e.third_order = Some(if e.is_self_loop() { v } else { 2.0 * v });
    }
    edges.sort_by_key(|e| (e.source, e.target));
    Ok(SimplicialExplanation {
        nodes: graph.nodes,
        edges,
        triangles,
        threshold: tau,
        truncation_residual,
        triangle_truncation_residual,
        edge_convention: EDGE_CONVENTION.into(),
        aggregation: AGGREGATION_RULE.into(),
        provenance: third.meta().clone(),
    })
}
