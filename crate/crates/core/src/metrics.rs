//! Precision tables shared by the attacks.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPrecision {
    pub label: String,
    /// Predictions naming this label.
    pub predicted: usize,
    /// Of those, how many were right.
    pub correct: usize,
    /// `None` when the label was never predicted.
    pub precision: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsrReport {
    pub per_label: Vec<LabelPrecision>,
    /// Macro average of per-label precision; never-predicted labels count as 0.
    pub average: f64,
}

impl AsrReport {
    pub fn precision_of(&self, label: &str) -> Option<f64> {
        self.per_label
            .iter()
            .find(|p| p.label == label)
            .and_then(|p| p.precision)
    }

    /// Builds the table from `(truth, prediction)` pairs over the given labels.
    pub fn from_predictions(labels: &[String], outcomes: &[(String, String)]) -> Self {
        let per_label: Vec<LabelPrecision> = labels
            .iter()
            .map(|label| {
                let predicted = outcomes.iter().filter(|(_, p)| p == label).count();
                let correct = outcomes.iter().filter(|(t, p)| p == label && t == label).count();
                LabelPrecision {
                    label: label.clone(),
                    predicted,
                    correct,
                    precision: (predicted > 0).then(|| correct as f64 / predicted as f64),
                }
            })
            .collect();
        let average = if per_label.is_empty() {
            0.0
        } else {
            per_label.iter().map(|p| p.precision.unwrap_or(0.0)).sum::<f64>() / per_label.len() as f64
        };
        AsrReport { per_label, average }
    }
}
