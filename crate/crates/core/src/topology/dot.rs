use std::fmt::Write;

use super::{GraphEdge, GraphNode, InteractionGraph, SimplicialExplanation};

const PREAMBLE: &str = "  graph [layout=circo, overlap=false];\n  node [shape=circle, fontname=\"Helvetica\"];\n  edge [color=\"#333333\"];\n";

/// Signed value with three significant digits.
pub(crate) fn sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-3..4).contains(&exp) {
        let decimals = (2 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn render(nodes: &[GraphNode], edges: &[GraphEdge], comments: &[String]) -> String {
    let mut out = String::from("graph G {\n");
    out.push_str(PREAMBLE);
    for c in comments {
        let _ = writeln!(out, "  // {c}");
    }
    for n in nodes {
        let _ = writeln!(out, "  n{} [label=\"{}\\n{}\"];", n.index, escape(&n.name), sig3(n.signal));
    }
    let max = edges.iter().fold(0.0_f64, |m, e| m.max(e.signal.abs()));
    for e in edges {
        let width = if max > 0.0 { 0.5 + 4.5 * e.signal.abs() / max } else { 0.5 };
        let mut attrs = format!("penwidth={width:.3}, label=\"{}\"", sig3(e.signal));
        if e.signal < 0.0 {
            attrs.push_str(", style=dashed");
        }
        let _ = writeln!(out, "  n{} -- n{} [{attrs}];", e.source, e.target);
    }
    out.push_str("}\n");
    out
}

/// Graphviz text. Edge width maps `|signal|` linearly onto `[0.5, 5.0]`;
/// negative edges are dashed.
pub fn to_dot(graph: &InteractionGraph) -> String {
    render(&graph.nodes, &graph.edges, &[])
}

impl SimplicialExplanation {
    /// Node and edge layers as Graphviz text; triangles are listed as comments.
    pub fn to_dot(&self) -> String {
        let comments: Vec<String> = self
            .triangles
            .iter()
            .map(|t| {
                let [i, j, k] = t.vertices;
                let name = |v: usize| self.nodes.get(v).map_or(format!("{v}"), |n| n.name.clone());
                format!("triangle {} {} {}: {}", name(i), name(j), name(k), sig3(t.signal))
            })
            .collect();
        render(&self.nodes, &self.edges, &comments)
    }
}
