//! Confusion-matrix metrics. The positive class is label 1 and a raw score is
//! classified positive iff it is strictly above zero.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::booster::determine;
use crate::error::{Error, Result};
use crate::loss::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
        }
    }

    pub fn get(&self, cell: Cell) -> u64 {
        match cell {
            Cell::TP => self.tp,
            Cell::FP => self.fp,
            Cell::TN => self.tn,
            Cell::FN => self.fn_,
        }
    }

    pub fn score(&self, mode: MetricMode) -> Result<f64> {
        score(mode, self)
    }

    pub fn scores(&self) -> Result<MetricScores> {
        Ok(MetricScores {
            accuracy: self.score(MetricMode::Accuracy)?,
            precision: self.score(MetricMode::Precision)?,
            recall: self.score(MetricMode::Recall)?,
            f1: self.score(MetricMode::F1)?,
            mcc: self.score(MetricMode::Mcc)?,
        })
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            tn: self.tn + rhs.tn,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), Add::add)
    }
}

/// One cell of the confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    TP,
    FP,
    TN,
    FN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    #[default]
    Accuracy,
    Precision,
    Recall,
    F1,
    Mcc,
}

impl MetricMode {
    pub const ALL: [MetricMode; 5] = [
        MetricMode::Accuracy,
        MetricMode::Precision,
        MetricMode::Recall,
        MetricMode::F1,
        MetricMode::Mcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricMode::Accuracy => "accuracy",
            MetricMode::Precision => "precision",
            MetricMode::Recall => "recall",
            MetricMode::F1 => "f1",
            MetricMode::Mcc => "mcc",
        }
    }
}

impl fmt::Display for MetricMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric `{s}`")))
    }
}

/// All five metrics computed from one set of counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl MetricScores {
    pub fn get(&self, mode: MetricMode) -> f64 {
        match mode {
            MetricMode::Accuracy => self.accuracy,
            MetricMode::Precision => self.precision,
            MetricMode::Recall => self.recall,
            MetricMode::F1 => self.f1,
            MetricMode::Mcc => self.mcc,
        }
    }
}

/// Tallies hard predictions (raw > 0 means positive) against the true labels.
pub fn confusion_from_predictions(
    true_labels: &[Label],
    raw_scores: &[f64],
) -> Result<ConfusionCounts> {
    if true_labels.len() != raw_scores.len() {
        return Err(Error::Dimension {
            expected: true_labels.len(),
            got: raw_scores.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (&y, &z) in true_labels.iter().zip(raw_scores) {
        counts.record(y, determine(z));
    }
    Ok(counts)
}

/// A single confusion-matrix cell for the given predictions.
pub fn correct_eval(cell: Cell, true_labels: &[Label], raw_scores: &[f64]) -> Result<u64> {
    Ok(confusion_from_predictions(true_labels, raw_scores)?.get(cell))
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Zero denominators give 0 for precision, recall, F1 and MCC.
pub fn score(mode: MetricMode, counts: &ConfusionCounts) -> Result<f64> {
    let ConfusionCounts { tp, fp, tn, fn_ } = *counts;
    if counts.total() == 0 {
        return Err(Error::UndefinedMetric(mode.name()));
    }
    let value = match mode {
        MetricMode::Accuracy => ratio(tp + tn, counts.total()),
        MetricMode::Precision => ratio(tp, tp + fp),
        MetricMode::Recall => ratio(tp, tp + fn_),
        MetricMode::F1 => {
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        }
        MetricMode::Mcc => {
            let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
            if factors.contains(&0) {
                0.0
            } else {
                let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
                let den = factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
                (num / den).clamp(-1.0, 1.0)
            }
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative, Positive};

    #[test]
    fn tallies() {
        let c = confusion_from_predictions(&[Positive, Negative], &[1.0, -1.0]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 0, 1, 0));
        let c = confusion_from_predictions(&[Positive, Negative], &[-1.0, 1.0]).unwrap();
        assert_eq!(c, ConfusionCounts::new(0, 1, 0, 1));
        assert_eq!(
            confusion_from_predictions(&[], &[]).unwrap(),
            ConfusionCounts::default()
        );
        assert!(confusion_from_predictions(&[Positive], &[]).is_err());
    }

    #[test]
    fn single_cells() {
        assert_eq!(correct_eval(Cell::TP, &[Positive], &[2.0]).unwrap(), 1);
        assert_eq!(correct_eval(Cell::FN, &[Positive], &[-2.0]).unwrap(), 1);
        let labels = [Positive, Negative, Negative, Positive, Negative];
        let raw = [0.3, 0.0, 1.2, -4.0, -0.1];
        let sum: u64 = [Cell::TP, Cell::FP, Cell::TN, Cell::FN]
            .into_iter()
            .map(|c| correct_eval(c, &labels, &raw).unwrap())
            .sum();
        assert_eq!(sum, 5);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(
            score(MetricMode::Mcc, &ConfusionCounts::new(2, 0, 3, 0)).unwrap(),
            1.0
        );
        assert_eq!(
            score(MetricMode::Mcc, &ConfusionCounts::new(1, 1, 1, 1)).unwrap(),
            0.0
        );
        let f1 = score(MetricMode::F1, &ConfusionCounts::new(2, 1, 0, 1)).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            score(MetricMode::Accuracy, &ConfusionCounts::default()),
            Err(Error::UndefinedMetric("accuracy"))
        ));
    }

    #[test]
    fn degenerate_denominators() {
        // nothing predicted positive, no positives present
        let c = ConfusionCounts::new(0, 0, 4, 0);
        assert_eq!(c.score(MetricMode::Precision).unwrap(), 0.0);
        assert_eq!(c.score(MetricMode::Recall).unwrap(), 0.0);
        assert_eq!(c.score(MetricMode::F1).unwrap(), 0.0);
        assert_eq!(c.score(MetricMode::Mcc).unwrap(), 0.0);
        assert_eq!(c.score(MetricMode::Accuracy).unwrap(), 1.0);
    }

    #[test]
    fn majority_predictor_is_accurate_but_useless() {
        let c = ConfusionCounts::new(0, 0, 3, 1);
        assert_eq!(c.score(MetricMode::Accuracy).unwrap(), 0.75);
        assert_eq!(c.score(MetricMode::F1).unwrap(), 0.0);
    }

    #[test]
    fn metric_names_parse() {
        for m in MetricMode::ALL {
            assert_eq!(m.name().parse::<MetricMode>().unwrap(), m);
        }
        assert_eq!("MCC".parse::<MetricMode>().unwrap(), MetricMode::Mcc);
        assert!("auc".parse::<MetricMode>().is_err());
    }
}
