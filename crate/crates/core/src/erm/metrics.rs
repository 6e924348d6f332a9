use super::{Loss, TrainedModel};
use crate::error::{check_dim, Error, Result};
use crate::matcore::DataMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    ErrorRate,
    AuPRC,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::ErrorRate => "error_rate",
            Metric::AuPRC => "auprc",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "error_rate" | "error" | "errorrate" => Ok(Metric::ErrorRate),
            "auprc" | "au_prc" => Ok(Metric::AuPRC),
            other => Err(Error::InvalidConfig(format!("unknown metric '{other}'"))),
        }
    }
}

/// Scores raw test data with `model`.
pub fn evaluate(model: &TrainedModel, x_test: &DataMatrix, labels: &[f64], metric: Metric) -> Result<f64> {
    check_dim("evaluation labels", x_test.cols(), labels.len())?;
    match metric {
        Metric::ErrorRate => error_rate(&model.predict(x_test)?, labels),
        Metric::AuPRC => {
            if model.loss != Loss::Hinge {
                return Err(Error::UndefinedMetric("auPRC needs a binary model".into()));
            }
            au_prc(&model.decision_values(x_test)?, labels)
        }
    }
}

/// Fraction of mismatched predictions.
pub fn error_rate(predicted: &[f64], labels: &[f64]) -> Result<f64> {
    check_dim("error rate labels", predicted.len(), labels.len())?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset("error rate of an empty test set".into()));
    }
    let wrong = predicted.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// Area under the precision-recall curve with label `+1` as positive.
///
/// Thresholds run over the distinct scores in decreasing order; tied scores
/// enter together. The area is the step sum `Σ (R_t − R_{t−1})·P_t`.
pub fn au_prc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_dim("auPRC labels", scores.len(), labels.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("auPRC scores must be finite".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::UndefinedMetric("auPRC needs both classes in the test set".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp, mut area, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        area += (recall - prev_recall) * tp as f64 / (tp + fp) as f64;
        prev_recall = recall;
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(au_prc(&[0.9, 0.8, -0.1, -0.5], &[1.0, 1.0, -1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn all_tied_scores_give_prevalence() {
        let v = au_prc(&[0.0; 4], &[1.0, -1.0, -1.0, -1.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(au_prc(&[1.0, 2.0], &[1.0, 1.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn flipped_predictions() {
        assert_eq!(error_rate(&[1.0, -1.0], &[-1.0, 1.0]).unwrap(), 1.0);
    }
}
