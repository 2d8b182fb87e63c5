//! Subcommand implementations.

use anyhow::{bail, Context};
use clap::Args;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use subtab_core::corpus;
use subtab_core::eval::{self, MetricSet};
use subtab_core::llm::{
    read_cache, Benchmark, CountingProvider, LLMConfig, LiveProvider, MockProvider, Provider,
    RecordingProvider, ReplayProvider, ENV_MODEL,
};
use subtab_core::normalize::preprocess_table;
use subtab_core::pipeline::{run_dataset, PipelineConfig, PipelineOutput, Strategy};
use subtab_core::prompt::{ByteHeuristicCounter, ExemplarSet, PromptBudget, Stage};
use subtab_core::table::TaskKind;

use crate::config::{effective, required, FileConfig};

fn parse_task(s: &str) -> anyhow::Result<TaskKind> {
    match s.to_ascii_lowercase().as_str() {
        "qa" => Ok(TaskKind::Qa),
        "fact" | "fact_verification" => Ok(TaskKind::FactVerification),
        other => bail!("unknown task {other:?} (use qa|fact)"),
    }
}

fn parse_benchmark(s: &str) -> anyhow::Result<Benchmark> {
    match s.to_ascii_lowercase().as_str() {
        "wikitq" => Ok(Benchmark::WikiTq),
        "fetaqa" => Ok(Benchmark::FeTaQa),
        "tabfact" => Ok(Benchmark::TabFact),
        "wikisql" => Ok(Benchmark::WikiSql),
        other => bail!("unknown benchmark {other:?} (use wikitq|fetaqa|tabfact|wikisql)"),
    }
}

fn read_outputs(path: &Path) -> anyhow::Result<Vec<PipelineOutput>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut outputs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let out: PipelineOutput = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        outputs.push(out);
    }
    Ok(outputs)
}

fn write_outputs(path: &Path, outputs: &[PipelineOutput]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for out in outputs {
        writeln!(w, "{}", serde_json::to_string(out)?)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input dataset in the canonical line-delimited format.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output path for the normalized dataset.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional path for the reject report.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

pub fn preprocess(args: PreprocessArgs, cfg: FileConfig) -> anyhow::Result<()> {
    let input = required(args.input, cfg.preprocess.input, "in")?;
    let out = required(args.out, cfg.preprocess.out, "out")?;
    let rejects_path = args.rejects.or(cfg.preprocess.rejects);

    let loaded = corpus::load_dataset(&input, None)?;
    let mut normalized = Vec::with_capacity(loaded.instances.len());
    for inst in loaded.instances {
        let table = preprocess_table(&inst.table)?;
        normalized.push(subtab_core::QAInstance { table, ..inst });
    }
    corpus::write_dataset(&out, &normalized)?;
    if let Some(path) = &rejects_path {
        corpus::write_rejects(path, &loaded.rejects)?;
    }
    eprintln!(
        "preprocessed {} instances ({} rejected) -> {}",
        normalized.len(),
        loaded.rejects.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset in the canonical line-delimited format.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sub-table selection strategy: col | row | colrow.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Task kind: qa | fact. Omit to accept mixed datasets.
    #[arg(long)]
    pub task: Option<String>,
    /// Backend: live | mock | replay.
    #[arg(long)]
    pub provider: Option<String>,
    /// Cache file: appended in live/mock runs, read in replay runs.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Output path for pipeline records.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Answer directly from 1x1 selection results, skipping the second call.
    #[arg(long)]
    pub direct_answer: bool,
    /// Worker pool size.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Prompt token budget (default token counter: bytes/4).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Token budget for the truncated-full-table fallback.
    #[arg(long)]
    pub table_budget: Option<usize>,
    /// Model name sent to the provider.
    #[arg(long)]
    pub model: Option<String>,
    /// Benchmark preset for decoding defaults: wikitq | fetaqa | tabfact | wikisql.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Rule script for the mock provider (line-delimited JSON).
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Exemplar asset for the selection stage.
    #[arg(long)]
    pub selection_shots: Option<PathBuf>,
    /// Exemplar asset for the answer stage.
    #[arg(long)]
    pub answer_shots: Option<PathBuf>,
    /// Rate limit for the live provider.
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    /// Retry budget for the live provider.
    #[arg(long)]
    pub max_attempts: Option<u32>,
}

pub fn run(args: RunArgs, cfg: FileConfig) -> anyhow::Result<()> {
    let file = cfg.run;
    let data = required(args.data, file.data, "data")?;
    let out = required(args.out, file.out, "out")?;
    let strategy: Strategy = effective(args.strategy, file.strategy, "colrow".into())
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    // no --task means a mixed dataset: accept every instance and take the
    // prompt style from each instance's own task
    let task_filter = match args.task.or(file.task) {
        Some(s) => Some(parse_task(&s)?),
        None => None,
    };
    let task = task_filter.unwrap_or(TaskKind::Qa);
    let provider_kind = effective(args.provider, file.provider, "mock".into());
    let cache_path = args.cache.or(file.cache);
    let workers = effective(args.workers, file.workers, 1);
    let direct_answer = args.direct_answer || file.direct_answer.unwrap_or(false);
    let model = effective(
        args.model,
        file.model.or_else(|| std::env::var(ENV_MODEL).ok()),
        "gpt-3.5-turbo".into(),
    );
    let benchmark = match effective(args.benchmark, file.benchmark, String::new()).as_str() {
        "" => match task {
            TaskKind::Qa => Benchmark::WikiTq,
            TaskKind::FactVerification => Benchmark::TabFact,
        },
        name => parse_benchmark(name)?,
    };

    let loaded = corpus::load_dataset(&data, task_filter)?;
    if !loaded.rejects.is_empty() {
        eprintln!("warning: {} dataset lines rejected", loaded.rejects.len());
    }

    let base: Box<dyn Provider> = match provider_kind.as_str() {
        "mock" => {
            let script = args.mock_script.or(file.mock_script);
            match script {
                Some(path) => Box::new(MockProvider::from_script_file(&path)?),
                None => {
                    eprintln!("warning: mock provider without --mock-script; every call will fail");
                    Box::new(MockProvider::new(Vec::new()))
                }
            }
        }
        "replay" => {
            let path = cache_path
                .clone()
                .ok_or_else(|| anyhow::anyhow!("replay provider requires --cache"))?;
            Box::new(ReplayProvider::load(&path)?)
        }
        "live" => {
            let mut live = LiveProvider::from_env()?;
            if let Some(rpm) = args.requests_per_minute.or(file.requests_per_minute) {
                live = live.with_requests_per_minute(rpm);
            }
            if let Some(attempts) = args.max_attempts.or(file.max_attempts) {
                live = live.with_max_attempts(attempts);
            }
            Box::new(live)
        }
        other => bail!("unknown provider {other:?} (use live|mock|replay)"),
    };
    let recording: Box<dyn Provider> = match (&cache_path, provider_kind.as_str()) {
        (Some(path), "live" | "mock") => Box::new(RecordingProvider::new(base, path)?),
        _ => base,
    };
    let llm = CountingProvider::new(recording);

    let mut pipeline_cfg = PipelineConfig::new(strategy, &model, task);
    pipeline_cfg.answer_cfg = LLMConfig::answer_defaults(&model, benchmark);
    pipeline_cfg.direct_answer = direct_answer;
    if let Some(budget) = args.budget.or(file.budget) {
        pipeline_cfg.prompt_budget = Some(PromptBudget::new(budget));
    }
    pipeline_cfg.table_token_budget = effective(args.table_budget, file.table_budget, 2000);
    if let Some(path) = args.selection_shots.or(file.selection_shots) {
        let shots = ExemplarSet::load(&path)?;
        if shots.stage != Stage::Selection {
            bail!("{} is not a selection-stage exemplar set", path.display());
        }
        pipeline_cfg.selection_shots = shots;
    } else {
        pipeline_cfg.selection_shots = ExemplarSet::empty(Stage::Selection, task);
    }
    if let Some(path) = args.answer_shots.or(file.answer_shots) {
        let shots = ExemplarSet::load(&path)?;
        if shots.stage != Stage::Answer {
            bail!("{} is not an answer-stage exemplar set", path.display());
        }
        pipeline_cfg.answer_shots = shots;
    } else {
        pipeline_cfg.answer_shots = ExemplarSet::empty(Stage::Answer, task);
    }

    let last_reported = AtomicUsize::new(0);
    let progress = |done: usize, total: usize| {
        if done == total || done - last_reported.load(Ordering::Relaxed) >= 25 {
            last_reported.store(done, Ordering::Relaxed);
            eprintln!("progress: {done}/{total}");
        }
    };
    let outputs = run_dataset(&loaded.instances, &pipeline_cfg, &llm, workers, Some(&progress));
    write_outputs(&out, &outputs)?;

    let failures = outputs.iter().filter(|o| o.error.is_some()).count();
    let direct = outputs.iter().filter(|o| o.direct_answer).count();
    eprintln!(
        "done: {} instances, {} failures, {} llm calls, {} direct answers -> {}",
        outputs.len(),
        failures,
        llm.calls(),
        direct,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pipeline output records to score.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Dataset the predictions were produced from.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated metric list: em, acc, rouge.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Path for the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_metrics(spec: &str) -> anyhow::Result<MetricSet> {
    let mut set = MetricSet::default();
    for item in spec.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()) {
        match item.to_ascii_lowercase().as_str() {
            "em" => set.exact_match = true,
            "acc" => set.binary_accuracy = true,
            "rouge" => set.rouge = true,
            other => bail!("unknown metric {other:?} (use em|acc|rouge)"),
        }
    }
    Ok(set)
}

pub fn eval(args: EvalArgs, cfg: FileConfig) -> anyhow::Result<()> {
    let file = cfg.eval;
    let pred = required(args.pred, file.pred, "pred")?;
    let data = required(args.data, file.data, "data")?;
    let metrics = parse_metrics(&effective(args.metrics, file.metrics, "em,acc,rouge".into()))?;
    let report_path = args.report.or(file.report);

    let outputs = read_outputs(&pred)?;
    let loaded = corpus::load_dataset(&data, None)?;
    let report = eval::evaluate(&outputs, &loaded.instances, metrics)?;

    if let Some(path) = &report_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let agg = &report.aggregate;
    println!("instances             {}", agg.count);
    println!("failures              {}", agg.failures);
    if let Some(acc) = agg.accuracy {
        println!("accuracy              {acc:.4}");
    }
    if let Some(r) = agg.mean_rouge_1 {
        println!("mean rouge-1 f1       {r:.4}");
    }
    if let Some(r) = agg.mean_rouge_2 {
        println!("mean rouge-2 f1       {r:.4}");
    }
    if let Some(r) = agg.mean_rouge_l {
        println!("mean rouge-L f1       {r:.4}");
    }
    println!("mean cells before     {:.2}", agg.reduction.mean_before);
    println!("mean cells after      {:.2}", agg.reduction.mean_after);
    println!("mean reduction ratio  {:.4}", agg.reduction.mean_ratio);
    println!("direct answer rate    {:.4}", agg.direct_answer_rate);
    Ok(())
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Pipeline output records.
    #[arg(long)]
    pub pred: Option<PathBuf>,
}

pub fn stats(args: StatsArgs, cfg: FileConfig) -> anyhow::Result<()> {
    let pred = required(args.pred, cfg.stats.pred, "pred")?;
    let outputs = read_outputs(&pred)?;
    let reduction = eval::reduction_stats(&outputs);
    let direct = eval::direct_answer_rate(&outputs);
    let failures = outputs.iter().filter(|o| o.error.is_some()).count();
    println!("outputs               {}", outputs.len());
    println!("failures              {failures}");
    println!("mean cells before     {:.2}", reduction.mean_before);
    println!("mean cells after      {:.2}", reduction.mean_after);
    println!("mean reduction ratio  {:.4}", reduction.mean_ratio);
    println!("direct answer rate    {:.4}", direct);
    Ok(())
}

#[derive(Debug, Args)]
pub struct CutoffArgs {
    /// Dataset in the canonical line-delimited format.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Token threshold applied to each full table.
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Path for the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Optional pipeline outputs to join per-class accuracy.
    #[arg(long)]
    pub pred: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct CutoffReport {
    threshold: u64,
    token_counter: &'static str,
    total: usize,
    buckets: Vec<eval::CutoffBucket>,
}

pub fn cutoff(args: CutoffArgs, cfg: FileConfig) -> anyhow::Result<()> {
    use subtab_core::prompt::TokenCount;
    let file = cfg.cutoff;
    let data = required(args.data, file.data, "data")?;
    let threshold = required(args.threshold, file.threshold, "threshold")?;
    if threshold == 0 {
        bail!("threshold must be positive");
    }
    let report_path = args.report.or(file.report);
    let pred_path = args.pred.or(file.pred);

    let loaded = corpus::load_dataset(&data, None)?;
    let predictions: Option<HashMap<String, String>> = match &pred_path {
        Some(path) => Some(
            read_outputs(path)?
                .into_iter()
                .filter(|o| o.error.is_none())
                .map(|o| (o.instance_id, o.answer))
                .collect(),
        ),
        None => None,
    };
    let counter = ByteHeuristicCounter;
    let buckets = eval::cutoff_buckets(
        &loaded.instances,
        threshold,
        &counter,
        predictions.as_ref(),
    );

    println!("cutoff threshold {threshold} ({} instances)", loaded.instances.len());
    for b in &buckets {
        match b.accuracy {
            Some(acc) => println!("{:<10} {:>6}  accuracy {acc:.4}", b.label, b.count),
            None => println!("{:<10} {:>6}", b.label, b.count),
        }
    }
    if let Some(path) = &report_path {
        let report = CutoffReport {
            threshold,
            token_counter: counter.name(),
            total: loaded.instances.len(),
            buckets,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    /// Cache file to list.
    #[arg(long)]
    pub inspect: PathBuf,
}

pub fn cache(args: CacheArgs) -> anyhow::Result<()> {
    let entries = read_cache(&args.inspect)?;
    for e in &entries {
        let prompt_head: String = e.prompt.chars().take(60).collect();
        let response_head: String = e
            .responses
            .first()
            .map(|r| r.chars().take(40).collect())
            .unwrap_or_default();
        println!(
            "{}  {}  t={} p={} n={} max={}  prompt={:?}  response={:?}",
            &e.key[..12.min(e.key.len())],
            e.model,
            e.temperature,
            e.top_p,
            e.n_samples,
            e.max_tokens,
            prompt_head,
            response_head
        );
    }
    println!("{} cache entries", entries.len());
    Ok(())
}
