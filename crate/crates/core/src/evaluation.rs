//! Binary classification metrics: confusion counts, per-class and averaged
//! precision / recall / F1, and row-normalized confusion matrices.
//!
//! Undefined ratios (zero denominators) are reported as 0 and flagged as
//! degenerate, never as NaN.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::Label;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
}

/// Confusion counts with `sexist` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Counts seen from the other class as positive.
    pub fn swapped(&self) -> ConfusionCounts {
        ConfusionCounts { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

fn check_lengths(preds: &[Label], golds: &[Label]) -> Result<(), EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    Ok(())
}

pub fn count_confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionCounts, EvalError> {
    check_lengths(preds, golds)?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in preds.iter().zip(golds) {
        match (p.is_sexist(), g.is_sexist()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a ratio had a zero denominator or F1 is undefined (TP = 0).
    pub degenerate: bool,
}

impl ClassMetrics {
    /// Metrics of the positive class of `c`.
    pub fn of_positive(c: &ConfusionCounts) -> Self {
        let (precision, dp) = ratio(c.tp, c.tp + c.fp);
        let (recall, dr) = ratio(c.tp, c.tp + c.fn_);
        // 2TP / (2TP + FP + FN) equals 2PR / (P + R) whenever P + R > 0 and is
        // computed exactly from integers. P + R = 0 exactly when TP = 0, where
        // the harmonic mean is undefined.
        let (f1, _) = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        ClassMetrics { precision, recall, f1, support: c.tp + c.fn_, degenerate: dp || dr || c.tp == 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub sexist: ClassMetrics,
    pub not_sexist: ClassMetrics,
    /// Unweighted mean of the two classes; the "Global" row of the reports.
    pub macro_avg: AveragedMetrics,
    /// Support-weighted mean of the two classes.
    pub weighted_avg: AveragedMetrics,
    /// Set when there is nothing to evaluate.
    pub degenerate: bool,
}

impl Metrics {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Sexist => &self.sexist,
            Label::NotSexist => &self.not_sexist,
        }
    }

    /// Plain-text table with rows No sexist / Yes sexist / Global.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>10}{:>10}{:>10}{:>10}", "Classification", "Precision", "Recall", "F1 score", "Support");
        let row = |out: &mut String, name: &str, p: f64, r: f64, f: f64, s: Option<usize>| {
            let support = s.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{name:<16}{p:>10.2}{r:>10.2}{f:>10.2}{support:>10}");
        };
        let (n, s, m, w) = (&self.not_sexist, &self.sexist, &self.macro_avg, &self.weighted_avg);
        row(&mut out, "No sexist", n.precision, n.recall, n.f1, Some(n.support));
        row(&mut out, "Yes sexist", s.precision, s.recall, s.f1, Some(s.support));
        row(&mut out, "Global", m.precision, m.recall, m.f1, Some(n.support + s.support));
        row(&mut out, "Weighted", w.precision, w.recall, w.f1, None);
        let _ = writeln!(out, "accuracy: {:.4}", self.accuracy);
        out
    }
}

fn weighted(a: f64, wa: usize, b: f64, wb: usize) -> f64 {
    if wa + wb == 0 {
        0.0
    } else {
        (a * wa as f64 + b * wb as f64) / (wa + wb) as f64
    }
}

pub fn compute_metrics(counts: &ConfusionCounts) -> Metrics {
    let sexist = ClassMetrics::of_positive(counts);
    let not_sexist = ClassMetrics::of_positive(&counts.swapped());
    let (accuracy, degenerate) = ratio(counts.tp + counts.tn, counts.total());
    let macro_avg = AveragedMetrics {
        precision: (sexist.precision + not_sexist.precision) / 2.0,
        recall: (sexist.recall + not_sexist.recall) / 2.0,
        f1: (sexist.f1 + not_sexist.f1) / 2.0,
    };
    let (ws, wn) = (sexist.support, not_sexist.support);
    let weighted_avg = AveragedMetrics {
        precision: weighted(sexist.precision, ws, not_sexist.precision, wn),
        recall: weighted(sexist.recall, ws, not_sexist.recall, wn),
        f1: weighted(sexist.f1, ws, not_sexist.f1, wn),
    };
    Metrics { counts: *counts, accuracy, sexist, not_sexist, macro_avg, weighted_avg, degenerate }
}

pub fn evaluate(preds: &[Label], golds: &[Label]) -> Result<Metrics, EvalError> {
    Ok(compute_metrics(&count_confusion(preds, golds)?))
}

/// Row-normalized 2x2 confusion matrix. Rows are the true class and columns
/// the predicted class, both ordered `[sexist, not_sexist]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedConfusion {
    pub rows: [[f64; 2]; 2],
    pub support: [usize; 2],
    pub zero_support: [bool; 2],
}

impl NormalizedConfusion {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14}{:>12}{:>12}", "true \\ pred", "sexist", "not_sexist");
        for (name, row) in ["sexist", "not_sexist"].iter().zip(&self.rows) {
            let _ = writeln!(out, "{name:<14}{:>12.4}{:>12.4}", row[0], row[1]);
        }
        out
    }
}

pub fn normalized_confusion_matrix(preds: &[Label], golds: &[Label]) -> Result<NormalizedConfusion, EvalError> {
    let c = count_confusion(preds, golds)?;
    let raw = [[c.tp, c.fn_], [c.fp, c.tn]];
    let mut rows = [[0.0; 2]; 2];
    let mut support = [0; 2];
    let mut zero_support = [false; 2];
    for i in 0..2 {
        support[i] = raw[i][0] + raw[i][1];
        zero_support[i] = support[i] == 0;
        if support[i] > 0 {
            rows[i] = [raw[i][0] as f64 / support[i] as f64, raw[i][1] as f64 / support[i] as f64];
        }
    }
    Ok(NormalizedConfusion { rows, support, zero_support })
}
