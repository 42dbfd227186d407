use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::ingest::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl ClassMetrics {
    /// 0/0 is taken as 0 for precision, recall and F1.
    pub fn from_counts(class: impl Into<String>, tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { class: class.into(), precision, recall, f1, support: tp + fn_ }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `confusion[true][predicted]`, indexed in `Label` order.
    pub confusion: [[u64; Label::COUNT]; Label::COUNT],
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    /// AttackSrc and AttackTgt merged into one positive class against Normal.
    pub attack: ClassMetrics,
}

impl Metrics {
    pub fn from_confusion(confusion: [[u64; Label::COUNT]; Label::COUNT]) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let mut per_class = Vec::with_capacity(Label::COUNT);
        let (mut tp_sum, mut fp_sum, mut fn_sum) = (0, 0, 0);
        for label in Label::ALL {
            let c = label.index();
            let tp = confusion[c][c];
            let fp = (0..Label::COUNT).map(|t| confusion[t][c]).sum::<u64>() - tp;
            let fn_ = confusion[c].iter().sum::<u64>() - tp;
            tp_sum += tp;
            fp_sum += fp;
            fn_sum += fn_;
            per_class.push(ClassMetrics::from_counts(label.as_str(), tp, fp, fn_));
        }
        let n = Label::COUNT as f64;
        let macro_precision = per_class.iter().map(|m| m.precision).sum::<f64>() / n;
        let macro_recall = per_class.iter().map(|m| m.recall).sum::<f64>() / n;
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / n;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };

        let attack_idx = [Label::AttackSrc.index(), Label::AttackTgt.index()];
        let normal = Label::Normal.index();
        let sum = |rows: &[usize], cols: &[usize]| rows.iter().flat_map(|r| cols.iter().map(move |c| confusion[*r][*c])).sum::<u64>();
        let attack = ClassMetrics::from_counts(
            "Attack",
            sum(&attack_idx, &attack_idx),
            sum(&[normal], &attack_idx),
            sum(&attack_idx, &[normal]),
        );

        Self {
            confusion,
            per_class,
            macro_precision,
            macro_recall,
            macro_f1,
            accuracy: ratio(tp_sum, total),
            micro_precision: ratio(tp_sum, tp_sum + fp_sum),
            micro_recall: ratio(tp_sum, tp_sum + fn_sum),
            attack,
        }
    }

    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

pub fn evaluate(predictions: &[Label], labels: &[Label]) -> Result<Metrics, ClassifyError> {
    if predictions.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    if labels.is_empty() {
        return Err(ClassifyError::EmptyEvaluation);
    }
    let mut confusion = [[0u64; Label::COUNT]; Label::COUNT];
    for (p, t) in predictions.iter().zip(labels) {
        confusion[t.index()][p.index()] += 1;
    }
    Ok(Metrics::from_confusion(confusion))
}
