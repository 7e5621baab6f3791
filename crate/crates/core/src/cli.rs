//! The `ihm` command-line front end.
//!
//! Every command writes into one output directory that holds a
//! `manifest.json`; an existing manifest is only replaced with `--force`.
//! Errors are reported as a single `error[kind]: message` line on stderr
//! and mapped to exit codes 2 (config), 3 (data) and 4 (training).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cohort::{
    generate_synthetic, load_cohort, preprocess_cohort, prevalence, read_jsonl, save_cohort,
    Episode, LoadOptions, OutOfRangePolicy, Race, RawEpisode, VitalsSpec,
};
use crate::metrics::{project_embeddings, write_projection_csv, EvalReport, Projection};
use crate::model::ModelVariant;
use crate::pipeline::{
    evaluate_checkpoint, resolve_lambda, run_ablation, train_variant, Checkpoint, ErrorKind,
    Evaluation, ExperimentConfig, PipelineError, PreparedCohort, SplitName,
};
use crate::trainer::TrainManifest;

/// Default root for output directories when `--out` is not given.
pub const OUT_ROOT_ENV: &str = "IHM_OUT_ROOT";
const DEFAULT_OUT_ROOT: &str = "runs";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "ihm",
    version,
    about = "In-hospital mortality prediction from vitals, notes and expert summaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort and its summary statistics.
    Generate(GenerateArgs),
    /// Turn raw timed measurements into an hourly cohort file.
    Preprocess(PreprocessArgs),
    /// Train one model variant and save its checkpoint.
    Train(TrainArgs),
    /// Train every configured variant and write the ablation report.
    Ablate(AblateArgs),
    /// Score a checkpoint on one split with a subgroup breakdown.
    Evaluate(EvaluateArgs),
    /// Export 2-D projections of a checkpoint's representations.
    Project(ProjectArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML experiment config; missing keys take their defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory [default: $IHM_OUT_ROOT/<command>-<run id>].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Experiment seed; overrides `seed` in the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Config override as a dotted key, e.g. `train.hidden=32`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Replace the artifacts of an earlier run in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of episodes; overrides `generator.n_patients`.
    #[arg(long, value_name = "N")]
    pub n_patients: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSONL file of raw episodes with timed measurements.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Drop out-of-range measurements instead of clamping them.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CohortArgs {
    /// Cohort JSONL file.
    #[arg(long, value_name = "PATH")]
    pub cohort: PathBuf,
    /// Fail on the first invalid cohort line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Variant to train, e.g. `ts_notes_expert`.
    #[arg(long, value_name = "NAME", default_value = "ts_notes_expert")]
    pub variant: ModelVariant,
    /// Fixed decay rate; skips tuning on validation data.
    #[arg(long, value_name = "F")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Fixed decay rate; skips tuning on validation data.
    #[arg(long, value_name = "F")]
    pub lambda: Option<f64>,
    /// Number of variants trained concurrently.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Checkpoint JSON written by `train` or `ablate`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Split to score.
    #[arg(long, value_name = "NAME", default_value = "test")]
    pub split: SplitName,
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Checkpoint JSON written by `train` or `ablate`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Split to project.
    #[arg(long, value_name = "NAME", default_value = "test")]
    pub split: SplitName,
}

/// A failure with the exit class it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Training => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let one_line = self.message.replace('\n', " ");
        write!(f, "error[{}]: {}", self.kind.as_str(), one_line)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<crate::cohort::CohortError> for CliError {
    fn from(e: crate::cohort::CohortError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<crate::metrics::MetricsError> for CliError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        PipelineError::from(e).into()
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            if let Some(table) = &summary.table {
                print!("{table}");
            }
            println!("wrote {}", summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Metrics table for commands that score a model.
    pub table: Option<String>,
}

impl RunSummary {
    fn files(out_dir: PathBuf) -> Self {
        Self {
            out_dir,
            table: None,
        }
    }
}

/// Runs a parsed command.
pub fn run(command: &Command) -> Result<RunSummary, CliError> {
    match command {
        Command::Generate(a) => cmd_generate(a).map(RunSummary::files),
        Command::Preprocess(a) => cmd_preprocess(a).map(RunSummary::files),
        Command::Train(a) => cmd_train(a).map(RunSummary::files),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Project(a) => cmd_project(a).map(RunSummary::files),
    }
}

/// Applies `key.path=value` to a TOML table. The value is read as a TOML
/// literal and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{assignment}` is not KEY=VALUE")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads the config file, applies `--set` overrides and then `--seed`.
pub fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut table = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for o in &common.overrides {
        apply_override(&mut table, o)?;
    }
    let mut config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn sha256_hex(bytes: &[u8]) -> String {
    crate::trainer::hex(&Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    std::fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// `--out`, or `<root>/<command>-<run id>` where the run id hashes the
/// resolved inputs so that identical invocations share a directory.
fn output_dir(
    common: &CommonArgs,
    command: &str,
    key: &impl Serialize,
) -> Result<PathBuf, CliError> {
    let dir = match &common.out {
        Some(p) => p.clone(),
        None => {
            let root = std::env::var_os(OUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
            let bytes = serde_json::to_vec(key).expect("run key serializes");
            root.join(format!("{command}-{}", &sha256_hex(&bytes)[..12]))
        }
    };
    if dir.join(MANIFEST).exists() && !common.force {
        return Err(CliError::config(format!(
            "{} already holds a run manifest; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn load_episodes(args: &CohortArgs) -> Result<Vec<Episode>, CliError> {
    let opts = LoadOptions {
        strict: args.strict,
        ..LoadOptions::default()
    };
    let loaded = load_cohort(&args.cohort, &opts)?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", args.cohort.display());
    }
    if loaded.episodes.is_empty() {
        return Err(CliError::data(format!(
            "{}: no valid episodes",
            args.cohort.display()
        )));
    }
    Ok(loaded.episodes)
}

/// Summary statistics of a generated cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStats {
    pub n: usize,
    pub positives: usize,
    pub prevalence: f64,
    pub race_counts: BTreeMap<String, usize>,
    pub sex_counts: BTreeMap<String, usize>,
    /// Number of episodes with each note count.
    pub note_count_histogram: BTreeMap<usize, usize>,
    pub with_expert_summary: usize,
}

pub fn cohort_stats(episodes: &[Episode]) -> CohortStats {
    let mut race_counts: BTreeMap<String, usize> = Race::ALL
        .iter()
        .map(|r| (r.as_str().to_string(), 0))
        .collect();
    let mut sex_counts = BTreeMap::new();
    let mut note_count_histogram = BTreeMap::new();
    for e in episodes {
        *race_counts
            .entry(e.demographics.race.as_str().to_string())
            .or_default() += 1;
        let sex = serde_json::to_value(e.demographics.sex).expect("sex serializes");
        *sex_counts
            .entry(sex.as_str().unwrap_or_default().to_string())
            .or_default() += 1;
        *note_count_histogram.entry(e.notes.len()).or_default() += 1;
    }
    CohortStats {
        n: episodes.len(),
        positives: episodes.iter().filter(|e| e.label == 1).count(),
        prevalence: prevalence(episodes),
        race_counts,
        sex_counts,
        note_count_histogram,
        with_expert_summary: episodes
            .iter()
            .filter(|e| e.expert_summary.is_some())
            .count(),
    }
}

#[derive(Serialize)]
struct RunManifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    details: T,
}

fn write_manifest<T: Serialize>(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    details: T,
) -> Result<(), CliError> {
    write_json(
        &dir.join(MANIFEST),
        &RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            details,
        },
    )
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<PathBuf, CliError> {
    let mut config = load_config(&args.common)?;
    if let Some(seed) = args.common.seed {
        config.generator.seed = seed;
    }
    if let Some(n) = args.n_patients {
        config.generator.n_patients = n;
    }
    config.generator.validate()?;
    let dir = output_dir(&args.common, "generate", &config.generator)?;
    let episodes = generate_synthetic(&config.generator)?;
    let cohort_path = dir.join("cohort.jsonl");
    save_cohort(&cohort_path, &episodes)?;
    let stats = cohort_stats(&episodes);
    write_json(&dir.join("stats.json"), &stats)?;
    #[derive(Serialize)]
    struct Details {
        cohort_sha256: String,
    }
    write_manifest(
        &dir,
        "generate",
        &config,
        Details {
            cohort_sha256: file_sha256(&cohort_path)?,
        },
    )?;
    Ok(dir)
}

pub fn cmd_preprocess(args: &PreprocessArgs) -> Result<PathBuf, CliError> {
    let config = load_config(&args.common)?;
    let raw: Vec<RawEpisode> = read_jsonl(&args.input)?;
    if raw.is_empty() {
        return Err(CliError::data(format!(
            "{}: no episodes",
            args.input.display()
        )));
    }
    let policy = if args.strict {
        OutOfRangePolicy::Drop
    } else {
        OutOfRangePolicy::Clamp
    };
    let input_sha256 = file_sha256(&args.input)?;
    let dir = output_dir(
        &args.common,
        "preprocess",
        &(&input_sha256, config.seed, config.split, args.strict),
    )?;
    let episodes = preprocess_cohort(
        &raw,
        &VitalsSpec::standard(),
        policy,
        config.split,
        config.seed,
    )?;
    let cohort_path = dir.join("cohort.jsonl");
    save_cohort(&cohort_path, &episodes)?;
    #[derive(Serialize)]
    struct Details {
        input_sha256: String,
        out_of_range: OutOfRangePolicy,
        cohort_sha256: String,
    }
    write_manifest(
        &dir,
        "preprocess",
        &config,
        Details {
            input_sha256,
            out_of_range: policy,
            cohort_sha256: file_sha256(&cohort_path)?,
        },
    )?;
    Ok(dir)
}

fn check_lambda(lambda: Option<f64>) -> Result<Option<f64>, CliError> {
    match lambda {
        Some(l) if !(l.is_finite() && l >= 0.0) => Err(CliError::config(format!(
            "--lambda must be finite and non-negative, got {l}"
        ))),
        other => Ok(other),
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<PathBuf, CliError> {
    let config = load_config(&args.common)?;
    config.validate()?;
    let lambda = check_lambda(args.lambda)?;
    let cohort_sha256 = file_sha256(&args.cohort.cohort)?;
    let dir = output_dir(
        &args.common,
        "train",
        &(&config, &cohort_sha256, args.variant, lambda),
    )?;
    let episodes = load_episodes(&args.cohort)?;
    let prep = PreparedCohort::new(&episodes, &config.featurize, config.split, config.seed)?;
    let (lambda, lambda_scores) = resolve_lambda(&prep, &config, args.variant, lambda)?;
    let trained = train_variant(&prep, &config, args.variant, lambda)?;
    let checkpoint_path = dir.join("checkpoint.json");
    write_bytes(&checkpoint_path, &trained.checkpoint.to_json())?;
    #[derive(Serialize)]
    struct Details {
        cohort_sha256: String,
        variant: ModelVariant,
        lambda: f64,
        lambda_scores: Vec<(f64, f64)>,
        checkpoint_sha256: String,
        training: TrainManifest,
    }
    write_manifest(
        &dir,
        "train",
        &config,
        Details {
            cohort_sha256,
            variant: args.variant,
            lambda,
            lambda_scores,
            checkpoint_sha256: file_sha256(&checkpoint_path)?,
            training: trained.manifest,
        },
    )?;
    Ok(dir)
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<(), CliError> {
    write_json(&dir.join("report.json"), report)?;
    write_bytes(&dir.join("report.txt"), report.table().as_bytes())?;
    write_bytes(
        &dir.join("subgroups.txt"),
        report.subgroup_table().as_bytes(),
    )
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<RunSummary, CliError> {
    let config = load_config(&args.common)?;
    config.validate()?;
    let lambda = check_lambda(args.lambda)?;
    if args.parallel == 0 {
        return Err(CliError::config("--parallel must be at least 1"));
    }
    let cohort_sha256 = file_sha256(&args.cohort.cohort)?;
    let dir = output_dir(&args.common, "ablate", &(&config, &cohort_sha256, lambda))?;
    let episodes = load_episodes(&args.cohort)?;
    let outcome = run_ablation(&episodes, &config, lambda, args.parallel)?;
    write_report(&dir, &outcome.report)?;
    let ckpt_dir = dir.join("checkpoints");
    let man_dir = dir.join("manifests");
    for d in [&ckpt_dir, &man_dir] {
        std::fs::create_dir_all(d).map_err(|e| CliError::data(format!("{}: {e}", d.display())))?;
    }
    let mut checkpoints = BTreeMap::new();
    for (variant, tv) in &outcome.trained {
        let path = ckpt_dir.join(format!("{}.json", variant.as_str()));
        let bytes = tv.checkpoint.to_json();
        write_bytes(&path, &bytes)?;
        write_json(
            &man_dir.join(format!("{}.json", variant.as_str())),
            &tv.manifest,
        )?;
        checkpoints.insert(*variant, sha256_hex(&bytes));
    }
    #[derive(Serialize)]
    struct Details {
        cohort_sha256: String,
        lambda: f64,
        lambda_scores: Vec<(f64, f64)>,
        checkpoint_sha256: BTreeMap<ModelVariant, String>,
    }
    write_manifest(
        &dir,
        "ablate",
        &config,
        Details {
            cohort_sha256,
            lambda: outcome.lambda,
            lambda_scores: outcome.lambda_scores,
            checkpoint_sha256: checkpoints,
        },
    )?;
    Ok(RunSummary {
        out_dir: dir,
        table: Some(outcome.report.table()),
    })
}

fn evaluate_inputs(
    common: &CommonArgs,
    cohort: &CohortArgs,
    checkpoint: &Path,
    split: SplitName,
    command: &str,
) -> Result<(ExperimentConfig, PathBuf, Evaluation), CliError> {
    let config = load_config(common)?;
    let cohort_sha256 = file_sha256(&cohort.cohort)?;
    let checkpoint_sha256 = file_sha256(checkpoint)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let dir = output_dir(
        common,
        command,
        &(&cohort_sha256, &checkpoint_sha256, split, config.seed),
    )?;
    let episodes = load_episodes(cohort)?;
    let eval = evaluate_checkpoint(&ckpt, &episodes, split)?;
    if eval.scored.is_empty() {
        return Err(CliError::data(format!("split `{split}` is empty")));
    }
    Ok((config, dir, eval))
}

/// Writes `projection_<name>.csv` for each available representation and
/// returns the explained-variance ratios.
fn write_projections(
    dir: &Path,
    eval: &Evaluation,
    seed: u64,
) -> Result<BTreeMap<&'static str, f64>, CliError> {
    let reps = [
        ("h", &eval.representations.h),
        ("u", &eval.representations.u),
        ("v", &eval.representations.v),
    ];
    let mut ratios = BTreeMap::new();
    for (name, rep) in reps {
        let Some(rows) = rep else { continue };
        if rows.len() < 2 {
            continue;
        }
        let p: Projection = project_embeddings(rows, seed)?;
        if let Some(w) = &p.warning {
            eprintln!("warning: projection {name}: {w}");
        }
        write_projection_csv(
            &dir.join(format!("projection_{name}.csv")),
            &eval.scored.episode_ids,
            &eval.scored.labels,
            &p,
        )?;
        ratios.insert(name, p.explained_ratio());
    }
    Ok(ratios)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<RunSummary, CliError> {
    let (config, dir, eval) = evaluate_inputs(
        &args.common,
        &args.cohort,
        &args.checkpoint,
        args.split,
        "evaluate",
    )?;
    write_report(&dir, &eval.report)?;
    let ratios = write_projections(&dir, &eval, config.seed)?;
    #[derive(Serialize)]
    struct Details<'a> {
        checkpoint: &'a Path,
        cohort: &'a Path,
        split: SplitName,
        explained_variance_ratio: BTreeMap<&'static str, f64>,
    }
    write_manifest(
        &dir,
        "evaluate",
        &config,
        Details {
            checkpoint: &args.checkpoint,
            cohort: &args.cohort.cohort,
            split: args.split,
            explained_variance_ratio: ratios,
        },
    )?;
    Ok(RunSummary {
        out_dir: dir,
        table: Some(eval.report.table()),
    })
}

pub fn cmd_project(args: &ProjectArgs) -> Result<PathBuf, CliError> {
    let (config, dir, eval) = evaluate_inputs(
        &args.common,
        &args.cohort,
        &args.checkpoint,
        args.split,
        "project",
    )?;
    let ratios = write_projections(&dir, &eval, config.seed)?;
    #[derive(Serialize)]
    struct Details<'a> {
        checkpoint: &'a Path,
        cohort: &'a Path,
        split: SplitName,
        explained_variance_ratio: BTreeMap<&'static str, f64>,
    }
    write_manifest(
        &dir,
        "project",
        &config,
        Details {
            checkpoint: &args.checkpoint,
            cohort: &args.cohort.cohort,
            split: args.split,
            explained_variance_ratio: ratios,
        },
    )?;
    Ok(dir)
}
