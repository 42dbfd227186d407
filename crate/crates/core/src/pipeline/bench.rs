use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Detector, PipelineError};
use crate::classify::concat_features;
use crate::global::{assemble_global, direction_flag, graph_stats, wl_document};
use crate::ingest::TxRecord;
use crate::motif::local_feature;
use crate::scalar::Scalar;
use crate::xteg::build_xteg;

pub const MIN_BENCH_CORPUS: usize = 100;

/// Per-stage milliseconds of the original implementation, in stage order, for comparison only.
pub const REFERENCE_STAGE_MS: [(&str, f64); 4] = [
    ("xteg_construction", 0.253),
    ("global_mining", 0.332),
    ("local_mining", 14.6),
    ("classification", 0.027),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub n_transactions: usize,
    /// xTEG construction, global mining, local mining, classification.
    pub stages: Vec<StageTiming>,
    /// Mean end-to-end time per transaction.
    pub total_ms: f64,
    pub tps: f64,
    pub median_latency_ms: f64,
    pub max_latency_ms: f64,
    pub slowest_stage: String,
    pub reference_stages: Vec<StageTiming>,
    pub reference_total_ms: f64,
    pub reference_tps: f64,
}

impl BenchReport {
    pub fn stage_sum_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.mean_ms).sum()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<20} {:>12} {:>14}\n", "Stage", "Mean (ms)", "Reference (ms)");
        for (s, r) in self.stages.iter().zip(&self.reference_stages) {
            out += &format!("{:<20} {:>12.4} {:>14.3}\n", s.stage, s.mean_ms, r.mean_ms);
        }
        out += &format!("{:<20} {:>12.4} {:>14.3}\n", "total", self.total_ms, self.reference_total_ms);
        out += &format!("{:<20} {:>12.1} {:>14.1}\n", "TPS", self.tps, self.reference_tps);
        out += &format!("median latency {:.4} ms, max {:.4} ms over {} transactions\n", self.median_latency_ms, self.max_latency_ms, self.n_transactions);
        out
    }
}

/// Times each stage per transaction on the calling thread.
pub fn bench<S: Scalar>(detector: &Detector<S>, records: &[TxRecord]) -> Result<BenchReport, PipelineError> {
    if records.len() < MIN_BENCH_CORPUS {
        return Err(PipelineError::CorpusTooSmall { got: records.len(), min: MIN_BENCH_CORPUS });
    }
    let wl_iterations = detector.embedding.params.wl_iterations;
    let signatures = &detector.config.signatures;
    let mut sums = [0.0f64; 4];
    let mut latencies = Vec::with_capacity(records.len());
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    for record in records {
        let start = Instant::now();

        let t = Instant::now();
        let xteg = build_xteg(record)?;
        sums[0] += ms(t);

        let t = Instant::now();
        let doc = wl_document(&xteg, wl_iterations);
        let embedding = detector.embedding.infer(&doc);
        let global = assemble_global(&embedding, &graph_stats(&xteg), direction_flag(&record.logs, signatures))?;
        sums[1] += ms(t);

        let t = Instant::now();
        let local = local_feature(&xteg)?;
        sums[2] += ms(t);

        let t = Instant::now();
        let prediction = detector.classifier.predict(&concat_features(&global, &local));
        std::hint::black_box(prediction);
        sums[3] += ms(t);

        latencies.push(ms(start));
    }
    let n = records.len() as f64;
    let stages: Vec<StageTiming> = REFERENCE_STAGE_MS
        .iter()
        .zip(sums)
        .map(|((name, _), sum)| StageTiming { stage: name.to_string(), mean_ms: sum / n })
        .collect();
    let total_ms = latencies.iter().sum::<f64>() / n;
    latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = latencies.len() / 2;
    let median = if latencies.len() % 2 == 0 { (latencies[mid - 1] + latencies[mid]) / 2.0 } else { latencies[mid] };
    let slowest = stages.iter().max_by(|a, b| a.mean_ms.partial_cmp(&b.mean_ms).unwrap()).expect("four stages");
    let reference_total: f64 = REFERENCE_STAGE_MS.iter().map(|(_, v)| v).sum();
    Ok(BenchReport {
        config_hash: detector.config_hash.clone(),
        n_transactions: records.len(),
        slowest_stage: slowest.stage.clone(),
        stages,
        total_ms,
        tps: 1000.0 / total_ms,
        median_latency_ms: median,
        max_latency_ms: *latencies.last().expect("non-empty"),
        reference_stages: REFERENCE_STAGE_MS.iter().map(|(s, v)| StageTiming { stage: s.to_string(), mean_ms: *v }).collect(),
        reference_total_ms: reference_total,
        reference_tps: 1000.0 / reference_total,
    })
}
