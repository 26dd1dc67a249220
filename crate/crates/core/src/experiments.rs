//! End-to-end runs: structure recovery on the synthetic benchmark and
//! per-house explanations of a tabular price model.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{
    closed_form_stack, compose_order, explain_stack, first_order, second_order_hessian, verify_properties,
    EngineConfig, ExplanationRequest, Moments, PropertyReport,
};
use crate::models::{fit_glm, fit_gpr, GlmFitReport, GlmOptions, GprFitReport, GprOptions, ModelSpec, PredictiveModel};
use crate::quadrature::QuadratureConfig;
use crate::synthetic::{
    generate_synthetic, synthetic_polynomial, SyntheticConfig, INTERACTING_PAIRS, INTERACTING_TRIPLES,
};
use crate::tensor::{AttributionTensor, Method};
use crate::topology::{build_graph, build_simplicial, to_dot, InteractionGraph, SimplicialExplanation};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticModel {
    /// Fit a Gaussian process to the generated sample.
    Gpr(GprOptions),
    /// Explain the generating polynomial itself.
    TruePolynomial,
}

/// Edges of a fitted model below this fraction of the largest edge are
/// treated as estimation noise when scoring structure recovery.
pub const STRUCTURE_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExperimentConfig {
    pub data: SyntheticConfig,
    pub model: SyntheticModel,
    pub quadrature: QuadratureConfig,
    /// Relative threshold of the exported graphs.
    pub threshold: f64,
    /// Relative threshold for scoring the recovered structure.
    pub structure_threshold: f64,
    /// Per-feature quantile of the sample used as the explained input.
    pub probe_quantile: f64,
    /// Size of the independent sample used for held-out RMSE.
    pub holdout_samples: usize,
}

impl Default for SyntheticExperimentConfig {
    fn default() -> Self {
        Self {
            data: SyntheticConfig::default(),
            model: SyntheticModel::Gpr(GprOptions::default()),
            quadrature: QuadratureConfig::default(),
            threshold: crate::topology::DEFAULT_THRESHOLD,
            structure_threshold: STRUCTURE_THRESHOLD,
            probe_quantile: 0.75,
            holdout_samples: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub points_per_level: usize,
    pub rule: crate::quadrature::Rule,
    pub methods: Vec<Method>,
    pub threshold: f64,
    pub model_kind: String,
    pub model_hash: String,
    pub probe_rule: String,
    pub baseline_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderComparison {
    pub direct: Vec<f64>,
    pub from_second: Vec<f64>,
    pub from_third: Vec<f64>,
    /// Largest pairwise difference of the three vectors over
    /// `max(|f(x) - f(baseline)|, max |direct|)`.
    pub max_relative_disagreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureScore {
    pub threshold: f64,
    pub predicted_edges: Vec<(usize, usize)>,
    pub true_edges: Vec<(usize, usize)>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted_triangles: Vec<[usize; 3]>,
    pub true_triangles: Vec<[usize; 3]>,
    pub triangles_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub provenance: Provenance,
    pub probe: Vec<f64>,
    pub baseline: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<GprFitReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_rmse: Option<f64>,
    pub first_order: FirstOrderComparison,
    /// `max |a_hessian - a_composed|` for the second order.
    pub method_agreement: f64,
    /// Direct first order, Hessian-formula second order, composed second and third order.
    pub tensors: Vec<AttributionTensor>,
    /// Exact attributions of the generating polynomial at the same input, orders 1 to 3.
    pub ground_truth: Vec<AttributionTensor>,
    pub graph: InteractionGraph,
    pub simplicial: SimplicialExplanation,
    /// Scored at `structure_threshold`.
    pub structure: StructureScore,
    /// Scored at the export threshold.
    pub display_structure: StructureScore,
    pub verification: PropertyReport,
}

/// Precision, recall and F1 of a predicted edge set against a reference.
pub fn edge_f1(predicted: &BTreeSet<(usize, usize)>, truth: &BTreeSet<(usize, usize)>) -> (f64, f64, f64) {
    let hits = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Intersection over union; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn relative_disagreement(vectors: &[&[f64]], delta_f: f64) -> f64 {
    let scale = vectors[0].iter().fold(delta_f.abs(), |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    for (k, a) in vectors.iter().enumerate() {
        for b in &vectors[k + 1..] {
            for (u, v) in a.iter().zip(b.iter()) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Trains a model on generated data (or takes the generating polynomial),
/// explains the probe input to third order and scores the recovered
/// interaction structure.
pub fn run_synthetic_experiment(cfg: &SyntheticExperimentConfig) -> Result<SyntheticReport, Error> {
    let data = generate_synthetic(&cfg.data);
    let truth = synthetic_polynomial();
    let (spec, fit, holdout_rmse) = match &cfg.model {
        SyntheticModel::TruePolynomial => (ModelSpec::Polynomial(truth.clone()), None, None),
        SyntheticModel::Gpr(options) => {
            let (model, report) = fit_gpr(&data, options)?;
            let holdout = generate_synthetic(&SyntheticConfig {
                n_samples: cfg.holdout_samples.max(1),
                seed: cfg.data.seed.wrapping_add(1),
                ..cfg.data
            });
            let sse: f64 = holdout
                .rows()
                .iter()
                .zip(holdout.targets())
                .map(|(x, y)| (model.value(x) - y).powi(2))
                .sum();
            let rmse = (sse / holdout.len() as f64).sqrt();
            (ModelSpec::Gpr(model), Some(report), Some(rmse))
        }
    };
    let probe = data.column_quantiles(cfg.probe_quantile);
    let baseline = vec![0.0; probe.len()];
    let engine = EngineConfig::default();
    let req = ExplanationRequest::new(&spec, &probe, &baseline, 1)
        .with_quadrature(cfg.quadrature)
        .with_baseline_kind("zero");

    let a1 = first_order(&req, &engine)?;
    let a2_hessian = second_order_hessian(&req.with_order(2), &engine)?;
    let a2 = compose_order(&req.with_order(2), &engine)?;
    let a3 = compose_order(&req.with_order(3), &engine)?;
    let from_second = a2.contract_last_index()?;
    let from_third = a3.contract_last_index()?.contract_last_index()?;
    let direct = a1.vector().expect("order 1");
    let from_second = from_second.vector().expect("order 1");
    let from_third = from_third.vector().expect("order 1");
    let first = FirstOrderComparison {
        max_relative_disagreement: relative_disagreement(&[&direct, &from_second, &from_third], a1.meta().delta_f),
        direct,
        from_second,
        from_third,
    };
    let method_agreement = a2_hessian.max_difference(&a2)?.0;
    let ground_truth = closed_form_stack(&truth, &probe, &baseline, 3, Moments::Exact)?;

    let graph = build_graph(&a1, &a2, cfg.threshold)?;
    let simplicial = build_simplicial(&a1, &a2, &a3, cfg.threshold)?;
    let structure = score_structure(&a1, &a2, &a3, cfg.structure_threshold)?;
    let display_structure = score_structure(&a1, &a2, &a3, cfg.threshold)?;
    let verification = verify_properties(&[a1.clone(), a2.clone(), a3.clone()])?;

    Ok(SyntheticReport {
        provenance: Provenance {
            seed: cfg.data.seed,
            points_per_level: cfg.quadrature.points_per_level,
            rule: cfg.quadrature.rule,
            methods: vec![Method::DirectIntegral, Method::HessianFormula, Method::OperatorComposition],
            threshold: cfg.threshold,
            model_kind: spec.kind().into(),
            model_hash: spec.hash(),
            probe_rule: format!("per-feature {} quantile of the sample", cfg.probe_quantile),
            baseline_rule: "zero".into(),
        },
        probe,
        baseline,
        fit,
        holdout_rmse,
        first_order: first,
        method_agreement,
        tensors: vec![a1, a2_hessian, a2, a3],
        ground_truth,
        graph,
        simplicial,
        structure,
        display_structure,
        verification,
    })
}

/// Edge F1 and triangle agreement against the generating polynomial's groups.
pub fn score_structure(
    a1: &AttributionTensor,
    a2: &AttributionTensor,
    a3: &AttributionTensor,
    tau: f64,
) -> Result<StructureScore, Error> {
    let complex = build_simplicial(a1, a2, a3, tau)?;
    let predicted = build_graph(a1, a2, tau)?.edge_set();
    let true_edges: BTreeSet<(usize, usize)> = INTERACTING_PAIRS.iter().copied().collect();
    let (precision, recall, f1) = edge_f1(&predicted, &true_edges);
    let true_triangles: BTreeSet<[usize; 3]> = INTERACTING_TRIPLES.iter().map(|&(i, j, k)| [i, j, k]).collect();
    let predicted_triangles = complex.triangle_set();
    Ok(StructureScore {
        threshold: tau,
        predicted_edges: predicted.into_iter().collect(),
        true_edges: true_edges.into_iter().collect(),
        precision,
        recall,
        f1,
        triangles_match: predicted_triangles == true_triangles,
        predicted_triangles: predicted_triangles.into_iter().collect(),
        true_triangles: true_triangles.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealEstateConfig {
    pub houses: usize,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
    pub order: usize,
    pub method: Method,
    pub threshold: f64,
    pub glm: GlmOptions,
}

impl Default for RealEstateConfig {
    fn default() -> Self {
        Self {
            houses: 3,
            seed: 0,
            quadrature: QuadratureConfig::default(),
            order: 2,
            method: Method::OperatorComposition,
            threshold: crate::topology::DEFAULT_THRESHOLD,
            glm: GlmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseExplanation {
    pub row: usize,
    pub input: Vec<f64>,
    pub prediction: f64,
    pub tensors: Vec<AttributionTensor>,
    pub graph: InteractionGraph,
    pub dot: String,
    pub verification: PropertyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSimilarity {
    pub rows: (usize, usize),
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealEstateReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<GlmFitReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub baseline: Vec<f64>,
    pub houses: Vec<HouseExplanation>,
    pub similarities: Vec<PairSimilarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_jaccard: Option<f64>,
}

/// Fits the GLM, explains `cfg.houses` seeded random rows against the
/// training mean and compares the resulting edge sets.
pub fn run_realestate_experiment(data: &Dataset, cfg: &RealEstateConfig) -> Result<RealEstateReport, Error> {
    if cfg.houses == 0 {
        return Ok(RealEstateReport {
            provenance: None,
            fit: None,
            model: None,
            baseline: Vec::new(),
            houses: Vec::new(),
            similarities: Vec::new(),
            mean_jaccard: None,
        });
    }
    if cfg.houses > data.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {} houses from {} rows",
            cfg.houses,
            data.len()
        )));
    }
    let (glm, fit) = fit_glm(data, &cfg.glm)?;
    let spec = ModelSpec::Glm(glm);
    let baseline = data.column_means();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut rows = rand::seq::index::sample(&mut rng, data.len(), cfg.houses).into_vec();
    rows.sort_unstable();

    let engine = EngineConfig::default();
    let mut houses = Vec::with_capacity(rows.len());
    for row in rows {
        let input = data.rows()[row].clone();
        let req = ExplanationRequest::new(&spec, &input, &baseline, cfg.order.max(2))
            .with_quadrature(cfg.quadrature)
            .with_method(cfg.method)
            .with_baseline_kind("mean");
        let tensors: Vec<AttributionTensor> = explain_stack(&req, &engine)?
            .into_iter()
            .map(|t| t.with_feature_names(data.feature_names().to_vec()))
            .collect::<Result<_, _>>()?;
        let graph = build_graph(&tensors[0], &tensors[1], cfg.threshold)?;
        let verification = verify_properties(&tensors)?;
        houses.push(HouseExplanation {
            row,
            prediction: spec.value(&input),
            input,
            dot: to_dot(&graph),
            tensors,
            graph,
            verification,
        });
    }
    let mut similarities = Vec::new();
    for (a, ha) in houses.iter().enumerate() {
        for hb in &houses[a + 1..] {
            similarities.push(PairSimilarity {
                rows: (ha.row, hb.row),
                jaccard: jaccard(&ha.graph.edge_set(), &hb.graph.edge_set()),
            });
        }
    }
    let mean_jaccard = (!similarities.is_empty())
        .then(|| similarities.iter().map(|s| s.jaccard).sum::<f64>() / similarities.len() as f64);
    Ok(RealEstateReport {
        provenance: Some(Provenance {
            seed: cfg.seed,
            points_per_level: cfg.quadrature.points_per_level,
            rule: cfg.quadrature.rule,
            methods: vec![cfg.method],
            threshold: cfg.threshold,
            model_kind: spec.kind().into(),
            model_hash: spec.hash(),
            probe_rule: format!("{} rows drawn without replacement", cfg.houses),
            baseline_rule: "training mean".into(),
        }),
        fit: Some(fit),
        model: Some(spec),
        baseline,
        houses,
        similarities,
        mean_jaccard,
    })
}
