//! Confusion-matrix metrics and ROC analysis.
//!
//! The confusion matrix is indexed `[actual][predicted]`; label 1
//! (malignant) is the positive class.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No sample was predicted as this class; precision is reported as 0.
    pub precision_undefined: bool,
    /// The class is absent from the labels; recall is reported as 0.
    pub recall_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl ClassMetrics {
    fn from_confusion(c: &[[usize; 2]; 2], k: usize) -> Self {
        let tp = c[k][k];
        let (precision, precision_undefined) = ratio(tp, c[0][k] + c[1][k]);
        let (recall, recall_undefined) = ratio(tp, c[k][0] + c[k][1]);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1, precision_undefined, recall_undefined }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `≥ threshold` are called positive; the first point uses +∞.
    pub threshold: f64,
}

/// ROC curve by sweeping each distinct score as a threshold, highest
/// first, and the trapezoidal area under it. Tied scores move the curve
/// diagonally in a single step, which counts ties as one half.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("ROC scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::data("ROC needs both classes among the labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp, mut auc) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // trapezoid in count units, normalised at the end
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    Ok((points, auc / (pos * neg) as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: [[usize; 2]; 2],
    /// Indexed by label: 0 normal, 1 malignant.
    pub per_class: [ClassMetrics; 2],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub roc: Vec<RocPoint>,
    /// `None` when the split holds a single class.
    pub auc: Option<f64>,
}

impl MetricsReport {
    pub fn from_confusion(confusion: [[usize; 2]; 2], loss: f64) -> Self {
        let n = confusion.iter().flatten().sum::<usize>();
        let accuracy = ratio(confusion[0][0] + confusion[1][1], n).0;
        let per_class = [0, 1].map(|k| ClassMetrics::from_confusion(&confusion, k));
        let mean = |f: fn(&ClassMetrics) -> f64| (f(&per_class[0]) + f(&per_class[1])) / 2.0;
        Self {
            n,
            loss,
            accuracy,
            confusion,
            per_class,
            macro_precision: mean(|c| c.precision),
            macro_recall: mean(|c| c.recall),
            macro_f1: mean(|c| c.f1),
            roc: Vec::new(),
            auc: None,
        }
    }

    /// `scores` are malignant probabilities; predictions are argmax labels.
    pub fn from_predictions(labels: &[usize], preds: &[usize], scores: &[f64], loss: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::data("cannot evaluate an empty split"));
        }
        if labels.len() != preds.len() || labels.len() != scores.len() {
            return Err(Error::contract("labels, predictions and scores differ in length"));
        }
        let mut c = [[0usize; 2]; 2];
        for (&l, &p) in labels.iter().zip(preds) {
            if l > 1 || p > 1 {
                return Err(Error::data(format!("binary metrics got label {l}, prediction {p}")));
            }
            c[l][p] += 1;
        }
        let mut r = Self::from_confusion(c, loss);
        if let Ok((roc, auc)) = roc_auc(scores, labels) {
            r.roc = roc;
            r.auc = Some(auc);
        }
        Ok(r)
    }

    pub fn positive(&self) -> &ClassMetrics {
        &self.per_class[1]
    }

    /// `key = value` lines; stable order, no timings.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.confusion;
        let _ = writeln!(s, "samples = {}", self.n);
        let _ = writeln!(s, "loss = {}", self.loss);
        let _ = writeln!(s, "accuracy = {}", self.accuracy);
        let _ = writeln!(s, "confusion = [[{}, {}], [{}, {}]]", c[0][0], c[0][1], c[1][0], c[1][1]);
        for (k, name) in ["normal", "malignant"].iter().enumerate() {
            let m = &self.per_class[k];
            let _ = writeln!(s, "{name}.precision = {}", m.precision);
            let _ = writeln!(s, "{name}.recall = {}", m.recall);
            let _ = writeln!(s, "{name}.f1 = {}", m.f1);
            let _ = writeln!(s, "{name}.precision_undefined = {}", m.precision_undefined);
            let _ = writeln!(s, "{name}.recall_undefined = {}", m.recall_undefined);
        }
        let _ = writeln!(s, "macro.precision = {}", self.macro_precision);
        let _ = writeln!(s, "macro.recall = {}", self.macro_recall);
        let _ = writeln!(s, "macro.f1 = {}", self.macro_f1);
        match self.auc {
            Some(a) => {
                let _ = writeln!(s, "auc = {a}");
            }
            None => {
                let _ = writeln!(s, "auc = undefined");
            }
        }
        s
    }

    /// Human-readable table in the usual accuracy/precision/recall/F1 shape.
    pub fn table(&self) -> String {
        let p = self.positive();
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9} {:>9} {:>7}", "", "accuracy", "precision", "recall", "f1", "auc");
        let auc = self.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            s,
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            "malignant", self.accuracy, p.precision, p.recall, p.f1, auc
        );
        let _ = writeln!(
            s,
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            "macro", self.accuracy, self.macro_precision, self.macro_recall, self.macro_f1, auc
        );
        let c = &self.confusion;
        let _ = write!(s, "confusion (rows actual, cols predicted): [[{}, {}], [{}, {}]]", c[0][0], c[0][1], c[1][0], c[1][1]);
        s
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr,threshold\n");
        for p in &self.roc {
            let _ = writeln!(s, "{},{},{}", p.fpr, p.tpr, p.threshold);
        }
        s
    }
}
