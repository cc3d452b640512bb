//! Counting evaluation: confusion matrix, per-class and weighted
//! precision/recall/F1, MAE and MSE.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A predicted label: one of the known classes, or out-of-distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Class(usize),
    Ood,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Class(c) => write!(f, "{c}"),
            Label::Ood => f.write_str("OOD"),
        }
    }
}

/// Maps a count onto the class set.
pub fn to_label(count: usize, classes: &[usize]) -> Label {
    if classes.contains(&count) {
        Label::Class(count)
    } else {
        Label::Ood
    }
}

/// Rounds a regression output to the nearest integer (halves away from
/// zero) and maps it onto the class set. Non-finite values are OOD.
pub fn regression_to_class(value: f64, classes: &[usize]) -> Label {
    if !value.is_finite() {
        return Label::Ood;
    }
    let r = value.round();
    if r < 0.0 {
        return Label::Ood;
    }
    to_label(r as usize, classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Reciprocal-label weights `1/c`.
pub fn reciprocal_weights(classes: &[usize]) -> BTreeMap<usize, f64> {
    classes.iter().map(|&c| (c, 1.0 / c as f64)).collect()
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p <= 0.0 || r <= 0.0 {
        0.0
    } else {
        2.0 / (1.0 / p + 1.0 / r)
    }
}

/// Weighted precision and recall, and F1 as their harmonic mean (not the
/// weighted mean of per-class F1 scores).
pub fn weighted_metrics(
    per_class: &BTreeMap<usize, (f64, f64)>,
    weights: &BTreeMap<usize, f64>,
) -> Result<WeightedMetrics> {
    if per_class.is_empty() {
        return Err(Error::Config("weighted metrics need at least one class".into()));
    }
    let (mut sw, mut sp, mut sr) = (0.0, 0.0, 0.0);
    for (label, &(p, r)) in per_class {
        let w = *weights
            .get(label)
            .ok_or_else(|| Error::Config(format!("no weight for class {label}")))?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Config(format!("weight for class {label} must be positive, got {w}")));
        }
        sw += w;
        sp += w * p;
        sr += w * r;
    }
    let (precision, recall) = (sp / sw, sr / sw);
    Ok(WeightedMetrics {
        precision,
        recall,
        f1: harmonic(precision, recall),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingErrors {
    pub mae: f64,
    pub mse: f64,
}

pub fn counting_errors(pred: &[usize], truth: &[usize]) -> Result<CountingErrors> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions but {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Dimension("no predictions to evaluate".into()));
    }
    let n = pred.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (&p, &t) in pred.iter().zip(truth) {
        let d = p as f64 - t as f64;
        abs += d.abs();
        sq += d * d;
    }
    Ok(CountingErrors {
        mae: abs / n,
        mse: sq / n,
    })
}

/// Rows are true classes, columns the classes followed by OOD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(pred: &[Label], truth: &[usize], classes: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "{} predictions but {} ground-truth labels",
                pred.len(),
                truth.len()
            )));
        }
        let k = classes.len();
        let mut counts = vec![vec![0usize; k + 1]; k];
        for (p, t) in pred.iter().zip(truth) {
            let row = classes
                .iter()
                .position(|c| c == t)
                .ok_or_else(|| Error::Config(format!("ground-truth count {t} is not in the class set {classes:?}")))?;
            let col = match p {
                Label::Class(c) => classes.iter().position(|x| x == c).unwrap_or(k),
                Label::Ood => k,
            };
            counts[row][col] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    /// Precision and recall of class index `i`; 0 where undefined.
    pub fn precision_recall(&self, i: usize) -> (f64, f64) {
        let tp = self.counts[i][i] as f64;
        let predicted: usize = self.counts.iter().map(|row| row[i]).sum();
        let actual = self.support(i);
        let p = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let r = if actual == 0 { 0.0 } else { tp / actual as f64 };
        (p, r)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth\\pred");
        for c in &self.classes {
            s.push_str(&format!(",{c}"));
        }
        s.push_str(",OOD\n");
        for (c, row) in self.classes.iter().zip(&self.counts) {
            s.push_str(&c.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: WeightedMetrics,
    pub weights: BTreeMap<usize, f64>,
    pub weighted: WeightedMetrics,
    pub mae: f64,
    pub mse: f64,
    pub confusion: ConfusionMatrix,
}

/// Full report for integer count predictions against ground truth.
pub fn evaluate(pred: &[usize], truth: &[usize], classes: &[usize]) -> Result<EvalReport> {
    let errors = counting_errors(pred, truth)?;
    let labels: Vec<Label> = pred.iter().map(|&p| to_label(p, classes)).collect();
    let confusion = ConfusionMatrix::new(&labels, truth, classes)?;
    let mut per_class = Vec::with_capacity(classes.len());
    let mut pr = BTreeMap::new();
    for (i, &c) in classes.iter().enumerate() {
        let (p, r) = confusion.precision_recall(i);
        pr.insert(c, (p, r));
        per_class.push(ClassMetrics {
            class: c,
            precision: p,
            recall: r,
            f1: harmonic(p, r),
            support: confusion.support(i),
        });
    }
    let k = classes.len() as f64;
    let macro_avg = WeightedMetrics {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
    };
    let weights = reciprocal_weights(classes);
    let weighted = weighted_metrics(&pr, &weights)?;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(EvalReport {
        samples: pred.len(),
        accuracy: correct as f64 / pred.len() as f64,
        per_class,
        macro_avg,
        weights,
        weighted,
        mae: errors.mae,
        mse: errors.mse,
        confusion,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:>8} {:>9} {:>9} {:>9} {:>8}\n", "class", "precision", "recall", "f1", "support");
        for m in &self.per_class {
            s.push_str(&format!(
                "{:>8} {:>9.3} {:>9.3} {:>9.3} {:>8}\n",
                m.class, m.precision, m.recall, m.f1, m.support
            ));
        }
        for (name, m) in [("macro", &self.macro_avg), ("weighted", &self.weighted)] {
            s.push_str(&format!(
                "{:>8} {:>9.3} {:>9.3} {:>9.3} {:>8}\n",
                name, m.precision, m.recall, m.f1, self.samples
            ));
        }
        s.push_str(&format!(
            "accuracy {:.3}  MAE {:.3}  MSE {:.3}\n",
            self.accuracy, self.mae, self.mse
        ));
        s
    }
}
