use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bridgeguard::classify::{ClassifierConfig, MetricsSummary, TreeParams};
use bridgeguard::ingest::{write_trace_file, DatasetManifest, Label, ManifestEntry, RpcClient, RpcConfig};
use bridgeguard::pipeline::{
    bench, evaluate_repeated, load_manifest_records, load_sources, prepare_all, read_manifest, train_and_score,
    PreparedTx, RunConfig,
};
use bridgeguard::synth::{gen_dataset, GenConfig};
use bridgeguard::{build_xteg, Detector, TxRecord};
use serde_json::{json, Value};

use crate::{ClassifierKind, ClassifierOpts, Cli, Command, Format, GlobalOpts};

pub enum Status {
    Success,
    /// Some inputs failed; the rest were processed.
    Partial,
}

struct Failure {
    source: String,
    error: String,
}

impl Failure {
    fn report(failures: &[Failure]) -> Value {
        for f in failures {
            eprintln!("failed: {}: {}", f.source, f.error);
        }
        failures.iter().map(|f| json!({"source": f.source, "error": f.error})).collect()
    }
}

fn status(failures: &[Failure]) -> Status {
    if failures.is_empty() {
        Status::Success
    } else {
        Status::Partial
    }
}

fn resolve_config(global: &GlobalOpts, classifier: Option<&ClassifierOpts>) -> Result<RunConfig> {
    let mut config = RunConfig::load(global.config.as_deref())?;
    if let Some(url) = &global.rpc_url {
        config.rpc_url = Some(url.clone());
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(n) = global.max_concurrency {
        config.max_concurrency = n;
    }
    if let Some(dir) = &global.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    if let Some(opts) = classifier {
        apply_classifier(&mut config, opts);
    }
    config.validate()?;
    Ok(config)
}

fn apply_classifier(config: &mut RunConfig, opts: &ClassifierOpts) {
    let kind = opts.classifier.or(match config.classifier {
        ClassifierConfig::Knn { .. } => None,
        ClassifierConfig::DecisionTree(_) => Some(ClassifierKind::Tree),
    });
    config.classifier = match (kind, &config.classifier) {
        (Some(ClassifierKind::Tree), current) => {
            let mut params = match current {
                ClassifierConfig::DecisionTree(p) => p.clone(),
                ClassifierConfig::Knn { .. } => TreeParams::default(),
            };
            params.max_depth = opts.max_depth.unwrap_or(params.max_depth);
            params.min_samples_leaf = opts.min_samples_leaf.unwrap_or(params.min_samples_leaf);
            params.balanced |= opts.balanced;
            ClassifierConfig::DecisionTree(params)
        }
        (_, ClassifierConfig::Knn { k }) => ClassifierConfig::Knn { k: opts.k.unwrap_or(*k) },
        (_, ClassifierConfig::DecisionTree(_)) => ClassifierConfig::Knn { k: opts.k.unwrap_or(5) },
    };
}

fn rpc_client(config: &RunConfig) -> Option<RpcClient> {
    config.rpc_url.as_ref().map(|url| {
        RpcClient::new(RpcConfig {
            chain_id: config.chain_id,
            cache_dir: config.cache_dir.clone(),
            max_concurrency: config.max_concurrency,
            ..RpcConfig::new(url)
        })
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// A closed stdout is not an error.
fn emit(format: Format, value: &Value, table: impl FnOnce() -> String) {
    let text = match format {
        Format::Json => serde_json::to_string_pretty(value).expect("json value serializes") + "\n",
        Format::Table => table(),
    };
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

struct Corpus {
    records: Vec<TxRecord>,
    prepared: Vec<PreparedTx>,
    labels: Vec<Label>,
    failures: Vec<Failure>,
}

/// Labelled, prepared corpus from a manifest; unreadable entries become failures.
fn load_labelled(manifest_path: &Path, config: &RunConfig) -> Result<Corpus> {
    let (manifest, base) =
        read_manifest(manifest_path).with_context(|| format!("reading manifest {}", manifest_path.display()))?;
    let rpc = rpc_client(config);
    let loaded = load_manifest_records(&manifest, &base, rpc.as_ref(), config.max_concurrency);
    let mut failures = Vec::new();
    let mut records = Vec::new();
    let mut labels = Vec::new();
    let mut sources = Vec::new();
    for (entry, result) in manifest.entries.iter().zip(loaded) {
        match result {
            Ok(r) => {
                records.push(r);
                labels.push(entry.label);
                sources.push(entry.source.clone());
            }
            Err(e) => failures.push(Failure { source: entry.source.clone(), error: e.to_string() }),
        }
    }
    let mut corpus = Corpus { records: Vec::new(), prepared: Vec::new(), labels: Vec::new(), failures };
    for (((record, label), source), result) in records.iter().zip(labels).zip(sources).zip(prepare_all(&records, config)) {
        match result {
            Ok(p) => {
                corpus.records.push(record.clone());
                corpus.prepared.push(p);
                corpus.labels.push(label);
            }
            Err(e) => corpus.failures.push(Failure { source, error: e.to_string() }),
        }
    }
    if corpus.prepared.is_empty() {
        Failure::report(&corpus.failures);
        bail!("no usable transactions in {}", manifest_path.display());
    }
    Ok(corpus)
}

pub fn run(cli: Cli) -> Result<Status> {
    let global = &cli.global;
    match &cli.command {
        Command::Ingest { inputs, manifest, out, dump_graphs } => ingest(global, inputs, manifest.as_deref(), out, *dump_graphs),
        Command::Synth { out, n_normal, attack_rate, src_tgt_ratio, extra_call_prob, depth_jitter } => {
            let mut cfg = GenConfig::default();
            cfg.n_normal = n_normal.unwrap_or(cfg.n_normal);
            cfg.attack_rate = attack_rate.unwrap_or(cfg.attack_rate);
            cfg.src_tgt_ratio = src_tgt_ratio.unwrap_or(cfg.src_tgt_ratio);
            cfg.noise.extra_call_prob = extra_call_prob.unwrap_or(cfg.noise.extra_call_prob);
            cfg.noise.depth_jitter = depth_jitter.unwrap_or(cfg.noise.depth_jitter);
            cfg.seed = global.seed.unwrap_or(cfg.seed);
            synth(global.format, &cfg, out)
        }
        Command::Train { manifest, model, metrics, classifier } => {
            train(&resolve_config(global, Some(classifier))?, global.format, manifest, model, metrics.as_deref())
        }
        Command::Evaluate { manifest, runs, out, classifier } => {
            let mut config = resolve_config(global, Some(classifier))?;
            config.runs = runs.unwrap_or(config.runs);
            config.validate()?;
            evaluate(&config, global.format, manifest, out.as_deref())
        }
        Command::Detect { inputs, model, out } => detect(&resolve_config(global, None)?, global.format, inputs, model, out.as_deref()),
        Command::Bench { manifest, model, out } => {
            run_bench(&resolve_config(global, None)?, global.format, manifest, model.as_deref(), out.as_deref())
        }
    }
}

fn ingest(global: &GlobalOpts, inputs: &[String], manifest: Option<&Path>, out: &Path, dump_graphs: bool) -> Result<Status> {
    let config = resolve_config(global, None)?;
    let mut sources: Vec<(String, Option<ManifestEntry>)> = inputs.iter().map(|s| (s.clone(), None)).collect();
    let mut base = PathBuf::new();
    if let Some(path) = manifest {
        let (m, b) = read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))?;
        base = b;
        sources.extend(m.entries.into_iter().map(|e| (e.source.clone(), Some(e))));
    }
    let rpc = rpc_client(&config);
    let names: Vec<String> = sources.iter().map(|(s, _)| s.clone()).collect();
    let loaded = load_sources(&names, &base, rpc.as_ref(), config.max_concurrency);

    fs::create_dir_all(out.join("traces")).with_context(|| format!("creating {}", out.display()))?;
    let mut failures = Vec::new();
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for ((source, entry), result) in sources.into_iter().zip(loaded) {
        let record = match result.map_err(|e| e.to_string()).and_then(|r| {
            build_xteg(&r).map(|g| (r, g)).map_err(|e| e.to_string())
        }) {
            Ok(x) => x,
            Err(error) => {
                failures.push(Failure { source, error });
                continue;
            }
        };
        let (record, graph) = record;
        let rel = format!("traces/{}.json", record.tx_hash);
        write_trace_file(&record, out.join(&rel))?;
        if dump_graphs {
            let mut f = fs::File::create(out.join(format!("traces/{}.xteg.txt", record.tx_hash)))?;
            graph.write_dump(&mut f)?;
        }
        if let Some(e) = entry {
            entries.push(ManifestEntry { source: rel.clone(), label: e.label, chain_id: record.chain_id });
        }
        written.push(json!({"source": source, "tx_hash": record.tx_hash, "path": rel,
            "frames": record.frame_count(), "logs": record.logs.len(),
            "vertices": graph.vertex_count(), "edges": graph.edge_count()}));
    }
    if !entries.is_empty() {
        let mut buf = Vec::new();
        DatasetManifest::new(entries)?.write(&mut buf)?;
        fs::write(out.join("manifest.jsonl"), buf)?;
    }
    let report = json!({"config_hash": config.config_hash(), "ingested": written, "failures": Failure::report(&failures)});
    write_json(&out.join("ingest.json"), &report)?;
    emit(global.format, &report, || {
        let mut t = format!("{:<68} {:>7} {:>5} {:>9} {:>6}\n", "tx_hash", "frames", "logs", "vertices", "edges");
        for w in &written {
            t += &format!(
                "{:<68} {:>7} {:>5} {:>9} {:>6}\n",
                w["tx_hash"].as_str().unwrap_or_default(),
                w["frames"],
                w["logs"],
                w["vertices"],
                w["edges"]
            );
        }
        t + &format!("{} ingested, {} failed\n", written.len(), failures.len())
    });
    Ok(status(&failures))
}

fn synth(format: Format, cfg: &GenConfig, out: &Path) -> Result<Status> {
    let corpus = gen_dataset(cfg)?;
    corpus.write(out).with_context(|| format!("writing corpus to {}", out.display()))?;
    let labels = corpus.labels();
    let count = |l: Label| labels.iter().filter(|x| **x == l).count();
    let value = json!({
        "out": out,
        "total": labels.len(),
        "normal": count(Label::Normal),
        "attack_src": count(Label::AttackSrc),
        "attack_tgt": count(Label::AttackTgt),
        "config": cfg,
    });
    emit(format, &value, || {
        format!(
            "wrote {} transactions to {} ({} Normal, {} AttackSrc, {} AttackTgt)\n",
            labels.len(),
            out.display(),
            count(Label::Normal),
            count(Label::AttackSrc),
            count(Label::AttackTgt)
        )
    });
    Ok(Status::Success)
}

fn train(config: &RunConfig, format: Format, manifest: &Path, model: &Path, metrics_out: Option<&Path>) -> Result<Status> {
    let corpus = load_labelled(manifest, config)?;
    let (detector, metrics) = train_and_score::<f64>(&corpus.prepared, &corpus.labels, config)?;
    if let Some(dir) = model.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    detector.save(model).with_context(|| format!("writing model {}", model.display()))?;
    let summary = MetricsSummary::from_runs(config.seed, vec![metrics.clone()]);
    let report = json!({
        "config_hash": config.config_hash(),
        "classifier": config.classifier.name(),
        "model": model,
        "n_samples": corpus.prepared.len(),
        "metrics": metrics,
        "failures": Failure::report(&corpus.failures),
    });
    if let Some(path) = metrics_out {
        write_json(path, &report)?;
    }
    emit(format, &report, || summary.to_table());
    Ok(status(&corpus.failures))
}

fn evaluate(config: &RunConfig, format: Format, manifest: &Path, out: Option<&Path>) -> Result<Status> {
    let corpus = load_labelled(manifest, config)?;
    let report = evaluate_repeated::<f64>(&corpus.prepared, &corpus.labels, config)?;
    let mut value = serde_json::to_value(&report)?;
    value["config"] = serde_json::to_value(config)?;
    value["failures"] = Failure::report(&corpus.failures);
    if let Some(path) = out {
        write_json(path, &value)?;
    }
    emit(format, &value, || {
        format!("{} over {} samples, config {}\n{}", report.classifier, report.n_samples, &report.config_hash[..12], report.summary.to_table())
    });
    Ok(status(&corpus.failures))
}

fn detect(config: &RunConfig, format: Format, inputs: &[String], model: &Path, out: Option<&Path>) -> Result<Status> {
    let detector = Detector::load(model)?;
    let rpc = rpc_client(config);
    let loaded = load_sources(inputs, Path::new(""), rpc.as_ref(), config.max_concurrency);
    let mut failures = Vec::new();
    let mut sources = Vec::new();
    let mut records = Vec::new();
    for (source, result) in inputs.iter().zip(loaded) {
        match result {
            Ok(r) => {
                sources.push(source.clone());
                records.push(r);
            }
            Err(e) => failures.push(Failure { source: source.clone(), error: e.to_string() }),
        }
    }
    let mut rows = Vec::new();
    for (source, result) in sources.into_iter().zip(detector.detect_many(&records)) {
        match result {
            Ok(d) => rows.push((source, d)),
            Err(e) => failures.push(Failure { source, error: e.to_string() }),
        }
    }
    let value = json!({
        "config_hash": config.config_hash(),
        "model_config_hash": detector.config_hash,
        "detections": rows.iter().map(|(s, d)| json!({
            "source": s, "tx_hash": d.tx_hash, "label": d.label, "distribution": d.distribution,
        })).collect::<Vec<_>>(),
        "failures": Failure::report(&failures),
    });
    if let Some(path) = out {
        write_json(path, &value)?;
    }
    emit(format, &value, || {
        let mut t = format!("{:<68} {:<10} {:>7} {:>9} {:>9}\n", "tx_hash", "label", "Normal", "AttackSrc", "AttackTgt");
        for (_, d) in &rows {
            t += &format!(
                "{:<68} {:<10} {:>7.3} {:>9.3} {:>9.3}\n",
                d.tx_hash.to_string(),
                d.label.as_str(),
                d.distribution[0],
                d.distribution[1],
                d.distribution[2]
            );
        }
        t
    });
    Ok(status(&failures))
}

fn run_bench(config: &RunConfig, format: Format, manifest: &Path, model: Option<&Path>, out: Option<&Path>) -> Result<Status> {
    let corpus = load_labelled(manifest, config)?;
    let detector = match model {
        Some(path) => Detector::load(path)?,
        None => train_and_score::<f64>(&corpus.prepared, &corpus.labels, config)?.0,
    };
    let report = bench(&detector, &corpus.records)?;
    let mut value = serde_json::to_value(&report)?;
    value["failures"] = Failure::report(&corpus.failures);
    if let Some(path) = out {
        write_json(path, &value)?;
    }
    emit(format, &value, || report.to_table());
    Ok(status(&corpus.failures))
}
