//! Confusion-matrix based evaluation with attack (label 1) as the positive
//! class. Precision, recall and F1 are macro-averaged over the two classes;
//! FPR, FNR and specificity are reported for the attack class.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("confusion matrix of an empty label set".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            context: "predicted vs true labels",
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fn_ += 1,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "labels must be binary, got ({t}, {p})"
                )))
            }
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub specificity: f64,
    pub normal: ClassScores,
    pub attack: ClassScores,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
}

fn ratio(num: u64, den: u64, what: &str, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        let msg = format!("{what} is 0/0 (degenerate class); reported as 0");
        warn!("{msg}");
        warnings.push(msg);
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Derives every score from `cm`. Any 0/0 ratio is reported as 0 and noted
/// in `warnings`. Macro F1 is the mean of the per-class F1 values.
pub fn report(cm: &ConfusionMatrix) -> MetricsReport {
    let mut warnings = Vec::new();
    let n = cm.total();
    let accuracy = ratio(cm.tp + cm.tn, n, "accuracy", &mut warnings);

    let attack_precision = ratio(cm.tp, cm.tp + cm.fp, "attack precision", &mut warnings);
    let attack_recall = ratio(cm.tp, cm.tp + cm.fn_, "attack recall", &mut warnings);
    let normal_precision = ratio(cm.tn, cm.tn + cm.fn_, "normal precision", &mut warnings);
    let normal_recall = ratio(cm.tn, cm.tn + cm.fp, "normal recall", &mut warnings);
    let attack = ClassScores {
        precision: attack_precision,
        recall: attack_recall,
        f1: f1(attack_precision, attack_recall),
    };
    let normal = ClassScores {
        precision: normal_precision,
        recall: normal_recall,
        f1: f1(normal_precision, normal_recall),
    };

    MetricsReport {
        accuracy,
        precision: (attack.precision + normal.precision) / 2.0,
        recall: (attack.recall + normal.recall) / 2.0,
        f1: (attack.f1 + normal.f1) / 2.0,
        fpr: ratio(cm.fp, cm.fp + cm.tn, "FPR", &mut warnings),
        fnr: ratio(cm.fn_, cm.fn_ + cm.tp, "FNR", &mut warnings),
        specificity: normal_recall,
        normal,
        attack,
        confusion: *cm,
        warnings,
    }
}

/// Column order of the plain-text table.
pub const TABLE_COLUMNS: [&str; 7] = ["Acc", "Prec", "Rec", "F1", "FPR", "FNR", "Spec"];

impl MetricsReport {
    pub fn row(&self) -> [f64; 7] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.fpr,
            self.fnr,
            self.specificity,
        ]
    }
}

/// Aligned plain-text table of labelled reports.
pub fn format_table(rows: &[(String, &MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}", "Model");
    for col in TABLE_COLUMNS {
        out.push_str(&format!(" {col:>7}"));
    }
    out.push('\n');
    for (name, r) in rows {
        out.push_str(&format!("{name:<width$}"));
        for v in r.row() {
            out.push_str(&format!(" {v:>7.4}"));
        }
        out.push('\n');
    }
    out
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_table(&[("Model".to_string(), self)]))
    }
}
