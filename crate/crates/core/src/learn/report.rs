//! Per-class precision, recall, F1 and support with support-weighted
//! averages and a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the class appears in neither truth nor predictions.
    pub absent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedAverage {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub weighted_average: WeightedAverage,
    pub accuracy: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassificationReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], class_names: &[String]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels, {} predictions", truth.len(), predicted.len())));
        }
        let c = class_names.len();
        let mut confusion = vec![vec![0u64; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c || p >= c {
                return Err(Error::InvalidClass(format!("class index {} with {c} classes", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(confusion, class_names))
    }

    pub fn from_confusion(confusion: Vec<Vec<u64>>, class_names: &[String]) -> Self {
        let c = class_names.len();
        let total: u64 = confusion.iter().flatten().sum();
        let mut classes = Vec::with_capacity(c);
        let mut weighted = WeightedAverage { precision: 0.0, recall: 0.0, f1: 0.0, support: total };
        for k in 0..c {
            let tp = confusion[k][k];
            let support: u64 = confusion[k].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[k]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            let w = ratio(support, total);
            weighted.precision += w * precision;
            weighted.recall += w * recall;
            weighted.f1 += w * f1;
            classes.push(ClassMetrics {
                name: class_names[k].clone(),
                precision,
                recall,
                f1,
                support,
                absent: support == 0 && predicted == 0,
            });
        }
        let correct: u64 = (0..c).map(|k| confusion[k][k]).sum();
        ClassificationReport { classes, weighted_average: weighted, accuracy: ratio(correct, total), confusion }
    }

    /// Tab-separated table with one row per class and a weighted average row.
    pub fn to_table(&self) -> String {
        let mut out = String::from("Behavior\tPrecision\tRecall\tF1-Score\tSupport\n");
        for m in &self.classes {
            out += &format!("{}\t{:.3}\t{:.3}\t{:.3}\t{}\n", m.name, m.precision, m.recall, m.f1, m.support);
        }
        let w = &self.weighted_average;
        out += &format!("Weighted Average\t{:.3}\t{:.3}\t{:.3}\t{}\n", w.precision, w.recall, w.f1, w.support);
        out += &format!("Accuracy\t{:.3}\n", self.accuracy);
        out
    }
}
