//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::time::{Duration, Instant};

use bridgeguard::classify::{ClassifierConfig, Metrics, TreeParams};
use bridgeguard::global::{graph_stats, wl_document};
use bridgeguard::ingest::{FrameId, FrameKind, RecordBuilder};
use bridgeguard::motif::{choose3, motif_census_matrix, triad_census_bruteforce, Digraph};
use bridgeguard::pipeline::{bench, evaluate_repeated, features_of, prepare_all, train_and_score, PreparedTx, RunConfig};
use bridgeguard::primitives::{Address, Wei, B256};
use bridgeguard::synth::{gen_dataset, GenConfig};
use bridgeguard::xteg::Xteg;
use bridgeguard::{build_xteg, Label, TxRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_digraph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Digraph {
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                arcs.push((u, v));
            }
        }
    }
    Digraph::new(n, arcs)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..250 {
        let n = rng.gen_range(3..=12);
        let density = rng.gen_range(0.1..=0.5);
        let g = random_digraph(&mut rng, n, density);
        if motif_census_matrix(&g).unwrap() != triad_census_bruteforce(&g).unwrap() {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("250 graphs, {mismatches} mismatches, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for i in 0..100 {
        let n = 3 + i * 37 / 99;
        let density = rng.gen_range(0.0..=1.0);
        let g = random_digraph(&mut rng, n, density);
        if motif_census_matrix(&g).unwrap().total() != choose3(n) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("100 graphs with n in 3..=40, {bad} partition violations"))
}

/// Random call tree with random logs; every frame and log lands in the graph.
fn random_record(rng: &mut ChaCha8Rng) -> TxRecord {
    let addr = |rng: &mut ChaCha8Rng| Address([rng.gen_range(1..12u8); 20]);
    let selectors = [[0xa9, 0x05, 0x9c, 0xbb], [0x23, 0xb8, 0x72, 0xdd], [0x01, 0x02, 0x03, 0x04]];
    let input = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.2) { Vec::new() } else { selectors[rng.gen_range(0..3)].to_vec() };
    let kinds = [FrameKind::Call, FrameKind::StaticCall, FrameKind::DelegateCall, FrameKind::Create, FrameKind::SelfDestruct];
    let sender = Address([0xee; 20]);
    let first = addr(rng);
    let first_input = input(rng);
    let mut b = RecordBuilder::new(sender, FrameKind::Call, first, first_input, Wei::ZERO);
    let mut frames = vec![FrameId::ROOT];
    for _ in 0..rng.gen_range(0..15) {
        let parent = *frames.choose(rng).unwrap();
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let to = addr(rng);
        let data = input(rng);
        frames.push(b.call(parent, kind, to, data, Wei::ZERO));
    }
    for _ in 0..rng.gen_range(0..6) {
        let frame = *frames.choose(rng).unwrap();
        let topic = B256([rng.gen_range(0..4u8); 32]);
        b.emit(frame, vec![topic], Vec::new());
    }
    b.build(B256([rng.gen(); 32]), 1, 1)
}

fn permute(g: &Xteg, perm: &[usize]) -> Xteg {
    let mut vertices = g.vertices.clone();
    for v in &mut vertices {
        v.id = perm[v.id];
    }
    vertices.sort_by_key(|v| v.id);
    let mut edges = g.edges.clone();
    for e in &mut edges {
        e.src = perm[e.src];
        e.dst = perm[e.dst];
    }
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(perm.len() as u64));
    Xteg { tx_hash: g.tx_hash, vertices, edges }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..100 {
        let g = build_xteg(&random_record(&mut rng)).unwrap();
        let mut perm: Vec<usize> = (0..g.vertex_count()).collect();
        perm.shuffle(&mut rng);
        let h = permute(&g, &perm);
        if (1..=3).any(|k| wl_document(&g, k) != wl_document(&h, k)) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("100 random graphs x 3 depths, {bad} differing documents"))
}

fn pipeline_config(runs: usize) -> RunConfig {
    RunConfig { runs, ..Default::default() }
}

fn prepare(records: &[TxRecord], config: &RunConfig) -> Vec<PreparedTx> {
    prepare_all(records, config).into_iter().collect::<Result<_, _>>().expect("synthetic corpus prepares")
}

fn criterion_4() -> Outcome {
    let corpus = gen_dataset(&GenConfig { n_normal: 400, attack_rate: 0.05, seed: 4, ..Default::default() }).unwrap();
    let config = pipeline_config(1);
    let prepared = prepare(&corpus.records(), &config);
    let (detector, _) = train_and_score::<f64>(&prepared, &corpus.labels(), &config).unwrap();
    let mut bad = 0;
    for tx in &prepared {
        let f = features_of(&detector.embedding, tx).unwrap();
        if (f.global_part().len(), f.local_part().len(), f.as_slice().len()) != (21, 16, 37) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{} vectors, global 21 + local 16 = 37, {bad} wrong", prepared.len()))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let g = build_xteg(&random_record(&mut rng)).unwrap();
        let s = graph_stats(&g);
        let (v, e) = (g.vertex_count() as f64, g.edge_count() as f64);
        let expected = if v < 2.0 { 0.0 } else { 2.0 * e / (v * (v - 1.0)) };
        worst = worst.max((s.density - expected).abs());
    }
    outcome(worst <= 1e-12, format!("500 random graphs, max |error| {worst:e}"))
}

fn full_pipeline_json(seed: u64) -> String {
    let corpus = gen_dataset(&GenConfig { n_normal: 500, attack_rate: 0.02, seed, ..Default::default() }).unwrap();
    let config = pipeline_config(3);
    let prepared = prepare(&corpus.records(), &config);
    let report = evaluate_repeated::<f64>(&prepared, &corpus.labels(), &config).unwrap();
    serde_json::to_string_pretty(&report).unwrap()
}

fn criterion_6() -> Outcome {
    let (a, b) = (full_pipeline_json(6), full_pipeline_json(6));
    outcome(a == b, format!("two runs, {} bytes each, identical = {}", a.len(), a == b))
}

struct Experiment {
    knn: bridgeguard::pipeline::EvaluationReport,
    tree: bridgeguard::pipeline::EvaluationReport,
    elapsed: Duration,
}

fn scaled_experiment() -> Experiment {
    let start = Instant::now();
    let corpus = gen_dataset(&GenConfig::default()).unwrap();
    let labels = corpus.labels();
    let knn_config = pipeline_config(10);
    let prepared = prepare(&corpus.records(), &knn_config);
    let knn = evaluate_repeated::<f64>(&prepared, &labels, &knn_config).unwrap();
    let tree_config = RunConfig { classifier: ClassifierConfig::DecisionTree(TreeParams::default()), ..pipeline_config(10) };
    let tree = evaluate_repeated::<f64>(&prepared, &labels, &tree_config).unwrap();
    Experiment { knn, tree, elapsed: start.elapsed() }
}

fn criterion_7(x: &Experiment) -> Outcome {
    let knn = &x.knn.summary.attack;
    let tree = &x.tree.summary.attack;
    let pass = knn.f1.mean >= 0.90 && knn.recall.mean >= 0.85 && tree.f1.mean >= 0.80 && x.elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "4000+20, 10 runs: knn attack F1 {:.4} recall {:.4}; tree attack F1 {:.4}; {:.1} s",
            knn.f1.mean,
            knn.recall.mean,
            tree.f1.mean,
            x.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8(x: &Experiment) -> Outcome {
    let rows: Vec<&str> = x.knn.summary.per_class.iter().map(|r| r.class.as_str()).collect();
    let pass = rows == ["Normal", "AttackSrc", "AttackTgt"];
    let src = x.knn.summary.class(Label::AttackSrc).recall.mean;
    let tgt = x.knn.summary.class(Label::AttackTgt).recall.mean;
    outcome(
        pass,
        format!("rows {rows:?}; knn recall AttackTgt {tgt:.4} vs AttackSrc {src:.4} (ordering recorded, not gated)"),
    )
}

fn criterion_9() -> Outcome {
    let corpus = gen_dataset(&GenConfig { n_normal: 1200, attack_rate: 0.01, seed: 9, ..Default::default() }).unwrap();
    let config = pipeline_config(1);
    let records = corpus.records();
    let prepared = prepare(&records, &config);
    let (detector, _) = train_and_score::<f64>(&prepared, &corpus.labels(), &config).unwrap();
    let report = bench(&detector, &records).unwrap();
    let stages: Vec<String> = report.stages.iter().map(|s| format!("{} {:.4}", s.stage, s.mean_ms)).collect();
    outcome(
        report.n_transactions >= 1000 && report.median_latency_ms < 100.0,
        format!(
            "{} tx, median {:.4} ms, total {:.4} ms, {:.0} TPS, slowest {} [{}]",
            report.n_transactions,
            report.median_latency_ms,
            report.total_ms,
            report.tps,
            report.slowest_stage,
            stages.join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = 0;
    for _ in 0..1000 {
        let mut conf = [[0u64; 3]; 3];
        conf.iter_mut().flatten().for_each(|c| *c = rng.gen_range(0..40));
        if rng.gen_bool(0.1) {
            conf[rng.gen_range(0..3)] = [0; 3];
        }
        let m = Metrics::from_confusion(conf);
        let total: u64 = conf.iter().flatten().sum();
        let diag: u64 = (0..3).map(|i| conf[i][i]).sum();
        let accuracy = if total == 0 { 0.0 } else { diag as f64 / total as f64 };
        let mut ok = m.micro_precision == m.micro_recall && (m.micro_precision - accuracy).abs() <= 1e-12;
        for (c, row) in m.per_class.iter().enumerate() {
            let tp = conf[c][c] as f64;
            let predicted: u64 = (0..3).map(|t| conf[t][c]).sum();
            let actual: u64 = conf[c].iter().sum();
            let p = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let r = if actual == 0 { 0.0 } else { tp / actual as f64 };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            ok &= (row.f1 - f1).abs() <= 1e-12;
        }
        if !ok {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("1000 confusion matrices, {bad} identity violations"))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let experiment = std::cell::OnceCell::new();
    let experiment = || experiment.get_or_init(scaled_experiment);

    let criteria: [(usize, &str, &dyn Fn() -> Outcome); 10] = [
        (1, "census matches brute force", &criterion_1),
        (2, "census partitions C(n,3)", &criterion_2),
        (3, "WL relabel invariance", &criterion_3),
        (4, "feature dimensions", &criterion_4),
        (5, "density formula", &criterion_5),
        (6, "pipeline determinism", &criterion_6),
        (7, "scaled classification experiment", &|| criterion_7(experiment())),
        (8, "per-class report rows", &|| criterion_8(experiment())),
        (9, "bench latency", &criterion_9),
        (10, "metric identities", &criterion_10),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !selected(n) {
            continue;
        }
        let o = check();
        println!("criterion {n:>2} {name:<34} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
