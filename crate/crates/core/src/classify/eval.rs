use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, split_dataset, ClassMetrics, Classifier, ClassifierConfig, ClassifyError, LabeledSample, Metrics};
use crate::ingest::Label;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub class: String,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub support: MeanStd,
}

impl SummaryRow {
    fn of<'a>(class: &str, rows: impl Iterator<Item = &'a ClassMetrics> + Clone) -> Self {
        Self {
            class: class.to_string(),
            precision: MeanStd::of(rows.clone().map(|m| m.precision)),
            recall: MeanStd::of(rows.clone().map(|m| m.recall)),
            f1: MeanStd::of(rows.clone().map(|m| m.f1)),
            support: MeanStd::of(rows.map(|m| m.support as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub runs: usize,
    pub base_seed: u64,
    pub per_class: Vec<SummaryRow>,
    pub attack: SummaryRow,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub accuracy: MeanStd,
    pub run_metrics: Vec<Metrics>,
}

impl MetricsSummary {
    pub fn from_runs(base_seed: u64, run_metrics: Vec<Metrics>) -> Self {
        let per_class = Label::ALL
            .iter()
            .map(|l| SummaryRow::of(l.as_str(), run_metrics.iter().map(|m| m.class(*l))))
            .collect();
        Self {
            runs: run_metrics.len(),
            base_seed,
            per_class,
            attack: SummaryRow::of("Attack", run_metrics.iter().map(|m| &m.attack)),
            macro_precision: MeanStd::of(run_metrics.iter().map(|m| m.macro_precision)),
            macro_recall: MeanStd::of(run_metrics.iter().map(|m| m.macro_recall)),
            macro_f1: MeanStd::of(run_metrics.iter().map(|m| m.macro_f1)),
            accuracy: MeanStd::of(run_metrics.iter().map(|m| m.accuracy)),
            run_metrics,
        }
    }

    pub fn class(&self, label: Label) -> &SummaryRow {
        &self.per_class[label.index()]
    }

    /// Aligned text table, one row per class plus the merged attack row, in percent.
    pub fn to_table(&self) -> String {
        let pct = |m: MeanStd| format!("{:6.2} ± {:5.2}", 100.0 * m.mean, 100.0 * m.std);
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>15} {:>15} {:>15} {:>10}", "Class", "Precision (%)", "Recall (%)", "F1 (%)", "Support");
        for row in self.per_class.iter().chain(std::iter::once(&self.attack)) {
            let _ = writeln!(
                out,
                "{:<10} {:>15} {:>15} {:>15} {:>10.1}",
                row.class,
                pct(row.precision),
                pct(row.recall),
                pct(row.f1),
                row.support.mean
            );
        }
        let _ = writeln!(out, "accuracy {} over {} run(s)", pct(self.accuracy).trim(), self.runs);
        out
    }
}

/// Runs `run(base_seed + i)` for `i < runs` in parallel and summarizes in run order.
pub fn repeat_runs<E, F>(runs: usize, base_seed: u64, run: F) -> Result<MetricsSummary, E>
where
    E: Send,
    F: Fn(u64) -> Result<Metrics, E> + Sync,
{
    let metrics = (0..runs as u64)
        .into_par_iter()
        .map(|i| run(base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>, E>>()?;
    Ok(MetricsSummary::from_runs(base_seed, metrics))
}

/// Stratified 7:3 split, train, predict, evaluate; once per seed.
pub fn repeated_eval<S: Scalar>(
    samples: &[LabeledSample<S>],
    runs: usize,
    config: &ClassifierConfig,
    base_seed: u64,
) -> Result<MetricsSummary, ClassifyError> {
    if runs == 0 {
        return Err(ClassifyError::EmptyEvaluation);
    }
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    repeat_runs(runs, base_seed, |seed| {
        let (train_idx, test_idx) = split_dataset(&labels, 0.7, true, seed)?;
        let train: Vec<LabeledSample<S>> = train_idx.iter().map(|&i| samples[i].clone()).collect();
        let model = Classifier::train(config, &train, seed)?;
        let predicted: Vec<Label> = test_idx.iter().map(|&i| model.predict(&samples[i].features).label).collect();
        let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
        evaluate(&predicted, &truth)
    })
}
