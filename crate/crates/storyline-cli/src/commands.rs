//! Subcommand implementations. Every run writes its resolved
//! configuration (seed included) next to its outputs and echoes it to
//! stdout, so any output directory reproduces its run exactly.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use storyline::corpus::{
    ingest, tokenize, Document, DocumentStore, InputFormat, RawRecord, Vocabulary, WordId,
};
use storyline::evaluation::{
    adjusted_rand_index, score, select_representatives, GoldClusters, Timeline,
};
use storyline::hyper::estimate_eta;
use storyline::model::{joint_log_prob, CandidateMode, FollowerGraph, Partition};
use storyline::sampler::Assignment;
use storyline::synth::{planted_storylines, StorylineSpec};
use storyline::{
    Checkpoint, ClusteringResult, Hyperparams, HyperUpdateConfig, SamplerConfig, StreamConfig,
    StreamState,
};

use crate::{BaselineArgs, EvalArgs, FitArgs, Format, StreamArgs, SynthArgs};

/// Failures split by exit code: usage errors (1) are bad invocations,
/// data errors (2) are problems with the supplied files.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

impl Format {
    fn as_input(self) -> InputFormat {
        match self {
            Format::Jsonl => InputFormat::JsonLines,
            Format::Tsv => InputFormat::Tsv,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Format::Jsonl => "jsonl",
            Format::Tsv => "tsv",
        }
    }
}

/// Strict record reading: any malformed line is a data error naming the
/// file and line.
fn read_records(path: &Path, format: InputFormat) -> Result<Vec<RawRecord>, CliError> {
    let file =
        File::open(path).map_err(|e| data(format!("cannot open {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = RawRecord::parse(&line, format)
            .map_err(|msg| data(format!("{}:{}: {msg}", path.display(), lineno + 1)))?;
        records.push(record);
    }
    Ok(records)
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| data(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file =
        File::create(path).map_err(|e| data(format!("cannot write {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    body(&mut out).map_err(|e| data(format!("cannot write {}: {e}", path.display())))?;
    out.flush()
        .map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

/// Writes the resolved config JSON into the output directory and echoes
/// it to stdout.
fn emit_config<C: Serialize>(out_dir: &Path, config: &C) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(config).expect("config serializes");
    println!("{text}");
    write_file(&out_dir.join("config.json"), |out| {
        writeln!(out, "{text}")
    })
}

fn write_result_files(out_dir: &Path, result: &ClusteringResult) -> Result<(), CliError> {
    write_file(&out_dir.join("assignments.jsonl"), |out| {
        result.write_assignments_jsonl(out)
    })?;
    write_file(&out_dir.join("trace.csv"), |out| result.write_trace_csv(out))
}

fn validate_schedule(temperature: f64, anneal_start_fraction: f64) -> Result<(), CliError> {
    if temperature < 1.0 {
        return Err(usage(format!(
            "--temperature must be >= 1, got {temperature}"
        )));
    }
    if !(0.0..=1.0).contains(&anneal_start_fraction) {
        return Err(usage(format!(
            "--anneal-start-fraction must lie in [0, 1], got {anneal_start_fraction}"
        )));
    }
    Ok(())
}

fn validate_positive(name: &str, value: f64) -> Result<(), CliError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(usage(format!("--{name} must be positive, got {value}")));
    }
    Ok(())
}

/// Resolves η: an explicit flag wins, otherwise the corpus estimate.
fn resolve_eta(flag: Option<f64>, vocabulary: &Vocabulary) -> Result<(f64, &'static str), CliError> {
    match flag {
        Some(eta) => {
            validate_positive("eta", eta)?;
            Ok((eta, "flag"))
        }
        None => Ok((estimate_eta(vocabulary), "estimated")),
    }
}

/// Joint log probability of a finished run's state, reconstructed from
/// its assignments, with unrestricted candidates.
fn final_joint(
    store: &DocumentStore,
    vocab_size: usize,
    hyper: &Hyperparams,
    result: &ClusteringResult,
) -> f64 {
    let links: Vec<usize> = result
        .assignments
        .iter()
        .map(|a| {
            let target = a.link.as_deref().expect("offline assignments carry links");
            store.index_of(target).expect("link targets a stored document")
        })
        .collect();
    let graph = FollowerGraph::from_links(links);
    joint_log_prob(store, &graph, vocab_size, hyper, CandidateMode::All)
}

#[derive(Serialize)]
struct FitConfigEcho {
    command: &'static str,
    input: String,
    format: &'static str,
    out_dir: String,
    alpha: f64,
    decay_scale: f64,
    eta: f64,
    eta_source: &'static str,
    iterations: usize,
    temperature: f64,
    anneal_start_fraction: f64,
    adapt_hyper: bool,
    hyper_every: usize,
    hyper_step: f64,
    chains: usize,
    seed: u64,
    selected_seed: u64,
}

pub fn run_fit(args: FitArgs) -> Result<(), CliError> {
    validate_positive("alpha", args.alpha)?;
    validate_positive("decay-scale", args.decay_scale)?;
    validate_schedule(args.temperature, args.anneal_start_fraction)?;
    if args.chains == 0 {
        return Err(usage("--chains must be at least 1"));
    }
    if args.adapt_hyper {
        if args.hyper_every == 0 {
            return Err(usage("--hyper-every must be at least 1"));
        }
        validate_positive("hyper-step", args.hyper_step)?;
    }

    let records = read_records(&args.input, args.format.as_input())?;
    let ingested = ingest(records).map_err(|e| data(e.to_string()))?;
    let (eta, eta_source) = resolve_eta(args.eta, &ingested.vocabulary)?;
    let hyper = Hyperparams::new(args.alpha, args.decay_scale, eta);
    let vocab_size = ingested.vocabulary.len();
    let store = &ingested.store;

    let base_config = SamplerConfig {
        iterations: args.iterations,
        temperature: args.temperature,
        anneal_start_fraction: args.anneal_start_fraction,
        hyper_update: args.adapt_hyper.then(|| HyperUpdateConfig {
            step_log_alpha: args.hyper_step,
            step_log_decay: args.hyper_step,
            every: args.hyper_every,
            ..HyperUpdateConfig::default()
        }),
        seed: args.seed,
        record_trace: true,
    };

    let results: Vec<ClusteringResult> = if args.chains == 1 {
        vec![storyline::sampler::run_offline(store, vocab_size, hyper, &base_config)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..args.chains)
                .map(|c| {
                    let config = SamplerConfig {
                        seed: args.seed + c as u64,
                        ..base_config.clone()
                    };
                    scope.spawn(move || {
                        storyline::sampler::run_offline(store, vocab_size, hyper, &config)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain thread panicked"))
                .collect()
        })
    };

    // Best final joint wins; ties go to the earliest seed.
    let joints: Vec<f64> = results
        .iter()
        .map(|r| final_joint(store, vocab_size, &r.hyper, r))
        .collect();
    let best = joints
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("at least one chain");
    let result = &results[best];

    ensure_out_dir(&args.out_dir)?;
    emit_config(
        &args.out_dir,
        &FitConfigEcho {
            command: "fit",
            input: args.input.display().to_string(),
            format: args.format.name(),
            out_dir: args.out_dir.display().to_string(),
            alpha: args.alpha,
            decay_scale: args.decay_scale,
            eta,
            eta_source,
            iterations: args.iterations,
            temperature: args.temperature,
            anneal_start_fraction: args.anneal_start_fraction,
            adapt_hyper: args.adapt_hyper,
            hyper_every: args.hyper_every,
            hyper_step: args.hyper_step,
            chains: args.chains,
            seed: args.seed,
            selected_seed: result.seed,
        },
    )?;
    write_result_files(&args.out_dir, result)?;
    println!(
        "fit: {} documents -> {} clusters, joint {:.4}, {:.2}s",
        result.assignments.len(),
        result.num_clusters,
        joints[best],
        results.iter().map(|r| r.elapsed_seconds).sum::<f64>()
    );
    Ok(())
}

#[derive(Serialize)]
struct StreamConfigEcho {
    command: &'static str,
    input: String,
    format: &'static str,
    out_dir: String,
    alpha: f64,
    decay_scale: f64,
    eta: f64,
    eta_source: &'static str,
    window_lag: i64,
    budget: usize,
    temperature: f64,
    anneal_start_fraction: f64,
    seed: u64,
    limit: Option<usize>,
    resumed_from: Option<String>,
    checkpoint_out: Option<String>,
}

pub fn run_stream(args: StreamArgs) -> Result<(), CliError> {
    validate_positive("alpha", args.alpha)?;
    validate_positive("decay-scale", args.decay_scale)?;
    validate_schedule(args.temperature, args.anneal_start_fraction)?;
    if args.window_lag < 0 {
        return Err(usage(format!(
            "--window-lag must be non-negative, got {}",
            args.window_lag
        )));
    }

    let records = read_records(&args.input, args.format.as_input())?;
    // The vocabulary comes from a deterministic prepass over the whole
    // file (first-seen order), so a resumed run rebuilds the identical
    // word mapping from the same input.
    let mut vocabulary = Vocabulary::new();
    let docs: Vec<Document> = records
        .iter()
        .map(|r| {
            let ids: Vec<WordId> = tokenize(&r.text)
                .iter()
                .map(|w| vocabulary.observe(w))
                .collect();
            Document::from_word_ids(r.id.as_str(), r.timestamp, &ids)
        })
        .collect();

    let limit = args.limit.unwrap_or(docs.len()).min(docs.len());

    let (mut state, eta, eta_source, resumed_from) = match &args.resume {
        Some(cp_path) => {
            let text = fs::read_to_string(cp_path)
                .map_err(|e| data(format!("cannot read checkpoint {}: {e}", cp_path.display())))?;
            let cp: Checkpoint = serde_json::from_str(&text)
                .map_err(|e| data(format!("malformed checkpoint {}: {e}", cp_path.display())))?;
            let state = StreamState::from_checkpoint(cp).map_err(|e| data(e.to_string()))?;
            if state.store().len() > docs.len() {
                return Err(data(format!(
                    "checkpoint holds {} documents but the input has only {}",
                    state.store().len(),
                    docs.len()
                )));
            }
            for (i, doc) in state.store().docs().iter().enumerate() {
                if doc.id() != docs[i].id() || doc.timestamp() != docs[i].timestamp() {
                    return Err(data(format!(
                        "checkpoint document {} ({:?}) does not match input record {} ({:?})",
                        i,
                        doc.id(),
                        i,
                        docs[i].id()
                    )));
                }
            }
            let eta = state.hyper().eta;
            (state, eta, "checkpoint", Some(cp_path.display().to_string()))
        }
        None => {
            let (eta, eta_source) = resolve_eta(args.eta, &vocabulary)?;
            let config = StreamConfig {
                window_lag: Some(args.window_lag),
                budget: args.budget,
                temperature: args.temperature,
                anneal_start_fraction: args.anneal_start_fraction,
                seed: args.seed,
            };
            let hyper = Hyperparams::new(args.alpha, args.decay_scale, eta);
            (
                StreamState::new(vocabulary.len(), hyper, config),
                eta,
                eta_source,
                None,
            )
        }
    };
    if resumed_from.is_some() && state.store().len() < docs.len() {
        // Vocabulary consistency beyond the replayed prefix: the
        // checkpoint's size must match the prepass exactly.
        let expected = vocabulary.len();
        let found = state.checkpoint().vocab_size;
        if expected != found {
            return Err(data(format!(
                "checkpoint vocabulary has {found} words but the input produces {expected}"
            )));
        }
    }

    let start = state.store().len();
    for doc in docs.iter().take(limit).skip(start) {
        state
            .push_document(doc.clone())
            .map_err(|e| data(e.to_string()))?;
    }

    let config = state.config().clone();
    ensure_out_dir(&args.out_dir)?;
    emit_config(
        &args.out_dir,
        &StreamConfigEcho {
            command: "stream",
            input: args.input.display().to_string(),
            format: args.format.name(),
            out_dir: args.out_dir.display().to_string(),
            alpha: state.hyper().alpha,
            decay_scale: state.hyper().decay_scale,
            eta,
            eta_source,
            window_lag: config.window_lag.unwrap_or(i64::MAX),
            budget: config.budget,
            temperature: config.temperature,
            anneal_start_fraction: config.anneal_start_fraction,
            seed: config.seed,
            limit: args.limit,
            resumed_from,
            checkpoint_out: args.checkpoint_out.as_ref().map(|p| p.display().to_string()),
        },
    )?;

    if let Some(path) = &args.timing_log {
        let timings = state.timings().to_vec();
        write_file(path, |out| {
            writeln!(out, "index,seconds,window_len,num_clusters")?;
            for t in &timings {
                writeln!(out, "{},{},{},{}", t.index, t.seconds, t.window_len, t.num_clusters)?;
            }
            Ok(())
        })?;
    }
    if let Some(path) = &args.checkpoint_out {
        let cp = state.checkpoint();
        let text = serde_json::to_string(&cp).expect("checkpoint serializes");
        write_file(path, |out| writeln!(out, "{text}"))?;
    }

    let pushed = state.push_count();
    let result = state.finalize();
    write_result_files(&args.out_dir, &result)?;
    println!(
        "stream: {} documents ({} pushed now) -> {} clusters, {:.2}s",
        result.assignments.len(),
        pushed.min(limit as u64),
        result.num_clusters,
        result.elapsed_seconds
    );
    Ok(())
}

#[derive(Serialize)]
struct BaselineConfigEcho {
    command: &'static str,
    input: String,
    format: &'static str,
    out_dir: String,
    k: usize,
    dirichlet: f64,
    eta: f64,
    eta_source: &'static str,
    iterations: usize,
    temperature: f64,
    anneal_start_fraction: f64,
    seed: u64,
}

pub fn run_baseline_cmd(args: BaselineArgs) -> Result<(), CliError> {
    if args.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    validate_positive("dirichlet", args.dirichlet)?;
    validate_schedule(args.temperature, args.anneal_start_fraction)?;

    let records = read_records(&args.input, args.format.as_input())?;
    let ingested = ingest(records).map_err(|e| data(e.to_string()))?;
    let (eta, eta_source) = resolve_eta(args.eta, &ingested.vocabulary)?;
    let config = SamplerConfig {
        iterations: args.iterations,
        temperature: args.temperature,
        anneal_start_fraction: args.anneal_start_fraction,
        hyper_update: None,
        seed: args.seed,
        record_trace: true,
    };
    let result = storyline::sampler::run_baseline(
        &ingested.store,
        ingested.vocabulary.len(),
        eta,
        args.k,
        args.dirichlet,
        &config,
    );

    ensure_out_dir(&args.out_dir)?;
    emit_config(
        &args.out_dir,
        &BaselineConfigEcho {
            command: "baseline",
            input: args.input.display().to_string(),
            format: args.format.name(),
            out_dir: args.out_dir.display().to_string(),
            k: args.k,
            dirichlet: args.dirichlet,
            eta,
            eta_source,
            iterations: args.iterations,
            temperature: args.temperature,
            anneal_start_fraction: args.anneal_start_fraction,
            seed: args.seed,
        },
    )?;
    write_result_files(&args.out_dir, &result)?;
    println!(
        "baseline: {} documents -> {} clusters (k = {}), {:.2}s",
        result.assignments.len(),
        result.num_clusters,
        args.k,
        result.elapsed_seconds
    );
    Ok(())
}

fn read_assignments(path: &Path) -> Result<Vec<Assignment>, CliError> {
    let file =
        File::open(path).map_err(|e| data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let a: Assignment = serde_json::from_str(&line)
            .map_err(|e| data(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if !seen.insert(a.id.clone()) {
            return Err(data(format!(
                "{}:{}: document {:?} assigned twice",
                path.display(),
                lineno + 1,
                a.id
            )));
        }
        out.push(a);
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalConfigEcho {
    command: &'static str,
    input: PathBuf,
    format: &'static str,
    predictions: PathBuf,
    gold: PathBuf,
    metrics_out: Option<PathBuf>,
}

pub fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    // No output directory here, so the resolved config is only echoed.
    let echo = EvalConfigEcho {
        command: "eval",
        input: args.input.clone(),
        format: args.format.name(),
        predictions: args.predictions.clone(),
        gold: args.gold.clone(),
        metrics_out: args.metrics_out.clone(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&echo).expect("config serializes")
    );
    let records = read_records(&args.input, args.format.as_input())?;
    let ingested = ingest(records).map_err(|e| data(e.to_string()))?;
    let store = &ingested.store;
    let assignments = read_assignments(&args.predictions)?;
    for a in &assignments {
        if store.index_of(&a.id).is_none() {
            return Err(data(format!(
                "prediction for {:?} has no document in {}",
                a.id,
                args.input.display()
            )));
        }
    }
    let gold_file = File::open(&args.gold)
        .map_err(|e| data(format!("cannot open {}: {e}", args.gold.display())))?;
    let gold = GoldClusters::from_reader(BufReader::new(gold_file))
        .map_err(|e| data(format!("{}: {e}", args.gold.display())))?;

    let timeline: Timeline = select_representatives(&assignments, store);
    let metrics: storyline::Metrics =
        score(&timeline, &gold).map_err(|e| data(e.to_string()))?;

    // ARI needs a full truth partition: gold member ids and predicted
    // ids must coincide exactly.
    let predicted_ids: HashSet<&str> = assignments.iter().map(|a| a.id.as_str()).collect();
    let gold_ids: HashSet<&str> = gold.member_ids().collect();
    let ari: Option<f64> = if predicted_ids == gold_ids {
        let mut order: Vec<&str> = predicted_ids.iter().copied().collect();
        order.sort_unstable();
        let predicted_of: HashMap<&str, usize> = assignments
            .iter()
            .map(|a| (a.id.as_str(), a.cluster))
            .collect();
        let predicted = Partition::from_cluster_ids(
            order.iter().map(|id| predicted_of[id]).collect(),
        );
        let truth = Partition::from_cluster_ids(
            order
                .iter()
                .map(|id| gold.cluster_of(id).expect("id set checked"))
                .collect(),
        );
        Some(adjusted_rand_index(&predicted, &truth))
    } else {
        None
    };

    println!("metric            value");
    println!("recall            {:.4}", metrics.recall);
    println!("weighted_recall   {:.4}", metrics.weighted_recall);
    println!("precision         {:.4}", metrics.precision);
    println!("f1                {:.4}", metrics.f1);
    println!("weighted_f1       {:.4}", metrics.weighted_f1);
    match ari {
        Some(v) => println!("ari               {v:.4}"),
        None => println!("ari               n/a (gold does not cover the predictions exactly)"),
    }
    let json = serde_json::json!({
        "recall": metrics.recall,
        "weighted_recall": metrics.weighted_recall,
        "precision": metrics.precision,
        "f1": metrics.f1,
        "weighted_f1": metrics.weighted_f1,
        "ari": ari,
        "timeline_len": timeline.len(),
        "gold_clusters": gold.len(),
    });
    println!("{json}");
    if let Some(path) = &args.metrics_out {
        let text = serde_json::to_string_pretty(&json).expect("metrics serialize");
        write_file(path, |out| writeln!(out, "{text}"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthConfigEcho {
    command: &'static str,
    out_dir: String,
    clusters: usize,
    docs_per_cluster: usize,
    words_per_cluster: usize,
    shared_words: usize,
    shared_fraction: f64,
    tokens_per_doc: usize,
    first_center: i64,
    center_gap: i64,
    spread: i64,
    seed: u64,
}

pub fn run_synth(args: SynthArgs) -> Result<(), CliError> {
    if args.clusters == 0 || args.docs_per_cluster == 0 {
        return Err(usage("--clusters and --docs-per-cluster must be at least 1"));
    }
    if args.words_per_cluster == 0 || args.tokens_per_doc == 0 {
        return Err(usage("--words-per-cluster and --tokens-per-doc must be at least 1"));
    }
    if !(0.0..=1.0).contains(&args.shared_fraction) {
        return Err(usage(format!(
            "--shared-fraction must lie in [0, 1], got {}",
            args.shared_fraction
        )));
    }
    if args.spread < 0 {
        return Err(usage("--spread must be non-negative"));
    }
    let spec = StorylineSpec {
        clusters: args.clusters,
        docs_per_cluster: args.docs_per_cluster,
        words_per_cluster: args.words_per_cluster,
        shared_words: args.shared_words,
        shared_fraction: args.shared_fraction,
        tokens_per_doc: args.tokens_per_doc,
        first_center: args.first_center,
        center_gap: args.center_gap,
        spread: args.spread,
        seed: args.seed,
    };
    let mut corpus = planted_storylines(&spec);
    // Written in (timestamp, id) order so the file streams directly.
    corpus
        .records
        .sort_by(|x, y| (x.timestamp, &x.id).cmp(&(y.timestamp, &y.id)));

    ensure_out_dir(&args.out_dir)?;
    emit_config(
        &args.out_dir,
        &SynthConfigEcho {
            command: "synth",
            out_dir: args.out_dir.display().to_string(),
            clusters: args.clusters,
            docs_per_cluster: args.docs_per_cluster,
            words_per_cluster: args.words_per_cluster,
            shared_words: args.shared_words,
            shared_fraction: args.shared_fraction,
            tokens_per_doc: args.tokens_per_doc,
            first_center: args.first_center,
            center_gap: args.center_gap,
            spread: args.spread,
            seed: args.seed,
        },
    )?;
    write_file(&args.out_dir.join("corpus.jsonl"), |out| {
        for r in &corpus.records {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })?;
    write_file(&args.out_dir.join("gold.jsonl"), |out| {
        for g in &corpus.gold {
            serde_json::to_writer(&mut *out, g)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })?;
    println!(
        "synth: {} documents across {} storylines",
        corpus.records.len(),
        args.clusters
    );
    Ok(())
}
