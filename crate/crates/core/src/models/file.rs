use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DerivativeKind, GlmModel, GprModel, PolynomialModel, PredictiveModel};
use crate::multiset::GradedIndex;

/// On-disk model, discriminated by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Polynomial(PolynomialModel),
    Gpr(GprModel),
    Glm(GlmModel),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Polynomial(_) => "polynomial",
            ModelSpec::Gpr(_) => "gpr",
            ModelSpec::Glm(_) => "glm",
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            ModelSpec::Polynomial(m) => &m.feature_names,
            ModelSpec::Gpr(m) => &m.feature_names,
            ModelSpec::Glm(m) => &m.feature_names,
        }
    }

    fn inner(&self) -> &dyn PredictiveModel {
        match self {
            ModelSpec::Polynomial(m) => m,
            ModelSpec::Gpr(m) => m,
            ModelSpec::Glm(m) => m,
        }
    }

    /// Column means of the data the model was trained on, when it keeps them.
    pub fn training_mean(&self) -> Option<Vec<f64>> {
        match self {
            ModelSpec::Polynomial(_) => None,
            ModelSpec::Gpr(m) => {
                let n = m.training_inputs.len() as f64;
                (n > 0.0).then(|| {
                    (0..m.feature_names.len())
                        .map(|j| m.training_inputs.iter().map(|r| r[j]).sum::<f64>() / n)
                        .collect()
                })
            }
            ModelSpec::Glm(m) => Some(m.center.clone()),
        }
    }

    /// Whether the model standardizes its covariates internally.
    pub fn is_standardized(&self) -> bool {
        matches!(self, ModelSpec::Glm(_))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_vec(self).expect("model serialization cannot fail");
        hex::encode(Sha256::digest(&compact))
    }
}

impl PredictiveModel for ModelSpec {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner().value(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.inner().gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner().hessian(x)
    }
    fn derivative_kind(&self) -> DerivativeKind {
        self.inner().derivative_kind()
    }
    fn partials(&self, x: &[f64], layout: &GradedIndex) -> Option<Vec<f64>> {
        self.inner().partials(x, layout)
    }
}
