//! Command-line front end. `run` takes the argument list, the environment and
//! an output sink so it can be driven from tests as well as from the binary.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_dataset, LoadMode};
use crate::error::{Error, Result};
use crate::evaluation::{
    compare_runs, emit_comparison, emit_run, evaluate_run, render_comparison, BackendSpec,
    ReportFormat, RunConfig, RunReport,
};
use crate::generation::{generate_dataset, GenerationJob};
use crate::parsing::{parse_output, predict, to_vectors};
use crate::prompting::{build_prompt, PromptMode};
use crate::provider::{GenerationConfig, MockMode, RetryPolicy, SystemClock};
use crate::sampling::{plan_triplets, read_plan, seeds_for_plan, write_plan, TripletSpace};

pub const ENV_SEED: &str = "CYBERLENS_SEED";
pub const ENV_WORKERS: &str = "CYBERLENS_WORKERS";
pub const ENV_STRICT: &str = "CYBERLENS_STRICT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Settings shared by every command. Resolved from defaults, then the
/// `--config` file, then flags, then environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    pub workers: usize,
    pub strict: bool,
    pub credentials_file: Option<PathBuf>,
    pub backend: BackendSpec,
    pub retry: RetryPolicy,
    pub generation: GenerationConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            seed: 0,
            workers: 4,
            strict: false,
            credentials_file: None,
            backend: BackendSpec::default(),
            retry: RetryPolicy::default(),
            generation: GenerationConfig::evaluation(),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// TOML file with shared settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Abort on the first malformed line or failed sample.
    #[arg(long, global = true)]
    pub strict: bool,
}

fn parse_env_bool(name: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" | "" => Ok(false),
        other => Err(Error::Config(format!("{name}={other:?} is not a boolean"))),
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: AppConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        if let Some(p) = config.credentials_file.as_mut() {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(config)
    }

    pub fn resolve(flags: &CommonFlags, env: &BTreeMap<String, String>) -> Result<Self> {
        let mut config = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        if let Some(seed) = flags.seed {
            config.seed = seed;
        }
        if let Some(workers) = flags.workers {
            config.workers = workers;
        }
        config.strict |= flags.strict;
        if let Some(v) = env.get(ENV_SEED) {
            config.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_SEED}={v:?} is not an integer")))?;
        }
        if let Some(v) = env.get(ENV_WORKERS) {
            config.workers = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_WORKERS}={v:?} is not an integer")))?;
        }
        if let Some(v) = env.get(ENV_STRICT) {
            config.strict = parse_env_bool(ENV_STRICT, v)?;
        }
        if config.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(config)
    }
}

#[derive(Debug, Parser)]
#[command(name = "cyberlens", version, about = "Plan, generate, validate and evaluate labeled victim narratives")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a balanced triplet plan.
    Plan {
        /// Total samples to plan.
        #[arg(long = "n")]
        n_total: u64,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to the first F fraud types, T tactics and B theories.
        #[arg(long, value_name = "F,T,B", value_parser = parse_space)]
        space: Option<TripletSpace>,
    },
    /// Generate a synthetic dataset from a plan.
    Generate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>.trace.jsonl`.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Keep existing output and skip completed samples.
        #[arg(long)]
        resume: bool,
    },
    /// Audit a dataset and list violations by line.
    Validate { dataset: PathBuf },
    /// Score one model against a dataset.
    Evaluate {
        run_config: PathBuf,
        #[arg(long, default_value = "markdown", value_parser = parse_format)]
        format: ReportFormat,
    },
    /// Compare a base and a fine-tuned run report.
    Compare {
        base: PathBuf,
        finetuned: PathBuf,
        #[arg(long, default_value = "markdown", value_parser = parse_format)]
        format: ReportFormat,
        /// Written to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the analysis prompt for a narrative file.
    Prompt {
        narrative: PathBuf,
        #[arg(long, default_value = "detailed", value_parser = parse_mode)]
        mode: PromptMode,
    },
    /// Parse raw model outputs into one prediction line per file.
    Parse {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Narrative used to pick the major labels.
        #[arg(long)]
        narrative: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse()
}

fn parse_mode(s: &str) -> std::result::Result<PromptMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "detailed" => Ok(PromptMode::Detailed),
        "concise" => Ok(PromptMode::Concise),
        other => Err(format!("unknown prompt mode {other:?}")),
    }
}

fn parse_space(s: &str) -> std::result::Result<TripletSpace, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("bad space {s:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [f, t, b] if f > 0 && t > 0 && b > 0 => Ok(TripletSpace::reduced(f, t, b)),
        _ => Err(format!("space must be three positive counts, got {s:?}")),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn io_out(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn cmd_plan(app: &AppConfig, n_total: u64, out: &Path, space: Option<TripletSpace>, w: &mut dyn Write) -> Result<i32> {
    let space = space.unwrap_or_else(TripletSpace::full);
    let plan = plan_triplets(n_total, &space, app.seed);
    write_plan(&plan, out)?;
    writeln!(w, "planned {} samples over {} triplets -> {}", plan.total, plan.entries.len(), out.display())
        .map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_generate(
    app: &AppConfig,
    plan: &Path,
    out: &Path,
    trace: Option<PathBuf>,
    resume: bool,
    env: &BTreeMap<String, String>,
    w: &mut dyn Write,
) -> Result<i32> {
    let trace = trace.unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".trace.jsonl");
        PathBuf::from(name)
    });
    let seeds = seeds_for_plan(&read_plan(plan)?, app.seed);
    let backend = app.backend.build(MockMode::Dataset, &[])?;
    let pool = app.backend.pool(
        app.credentials_file.as_deref(),
        &app.retry,
        env.iter().map(|(k, v)| (k.clone(), v.clone())),
    )?;
    let job = GenerationJob {
        backend: backend.as_ref(),
        pool: &pool,
        policy: &app.retry,
        config: &app.generation,
        clock: &SystemClock,
        workers: app.workers,
        resume,
        strict: app.strict,
    };
    let summary = generate_dataset(&seeds, &job, out, &trace)?;
    writeln!(
        w,
        "planned {}, skipped {}, generated {}, failed {} (failure rate {:.2}%)",
        summary.planned,
        summary.skipped,
        summary.succeeded,
        summary.failed,
        summary.failure_rate() * 100.0
    )
    .map_err(io_out)?;
    Ok(if summary.failed > 0 { EXIT_DATA } else { EXIT_OK })
}

fn cmd_validate(path: &Path, w: &mut dyn Write) -> Result<i32> {
    let loaded = load_dataset(path, LoadMode::Lenient)?;
    for d in &loaded.diagnostics {
        writeln!(w, "{}:{}: {}", path.display(), d.line, d.message).map_err(io_out)?;
    }
    writeln!(w, "{} valid records, {} violations", loaded.records.len(), loaded.diagnostics.len())
        .map_err(io_out)?;
    Ok(if loaded.diagnostics.is_empty() { EXIT_OK } else { EXIT_DATA })
}

fn cmd_evaluate(app_flags: &CommonFlags, env: &BTreeMap<String, String>, path: &Path, format: ReportFormat, w: &mut dyn Write) -> Result<i32> {
    let mut config = RunConfig::load(path)?;
    if let Some(workers) = app_flags.workers {
        config.workers = workers;
    }
    config.strict |= app_flags.strict;
    if let Some(v) = env.get(ENV_WORKERS) {
        config.workers = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{ENV_WORKERS}={v:?} is not an integer")))?;
    }
    if let Some(v) = env.get(ENV_STRICT) {
        config.strict = parse_env_bool(ENV_STRICT, v)?;
    }
    let report = evaluate_run(&config)?;
    let tag = serde_json::to_value(config.model_tag).expect("tag serializes");
    let dir = config.output_dir.join(tag.as_str().expect("tag is a string"));
    let json = report.save(&dir)?;
    let rendered = dir.join(format!("report.{}", format.extension()));
    emit_run(&report, format, &rendered)?;
    writeln!(
        w,
        "{} narratives, {} decisions, {} failed; macro-F1 {} -> {}",
        report.metadata.narratives,
        report.global.decisions,
        report.metadata.failed_narratives,
        report.global.macro_f1.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        json.display()
    )
    .map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_compare(base: &Path, ft: &Path, format: ReportFormat, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let report = compare_runs(&RunReport::load(base)?, &RunReport::load(ft)?)?;
    match out {
        Some(path) => emit_comparison(&report, format, path)?,
        None => w
            .write_all(render_comparison(&report, format)?.as_bytes())
            .map_err(io_out)?,
    }
    Ok(EXIT_OK)
}

fn cmd_prompt(path: &Path, mode: PromptMode, w: &mut dyn Write) -> Result<i32> {
    let bundle = build_prompt(mode, read_text(path)?.trim());
    writeln!(w, "{}", bundle.rendered).map_err(io_out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ParseLine<'a> {
    file: String,
    defaulted_labels: usize,
    #[serde(flatten)]
    prediction: &'a crate::parsing::PredictionVectors,
}

fn cmd_parse(files: &[PathBuf], narrative: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let narrative = narrative.map(read_text).transpose()?;
    for file in files {
        let parsed = parse_output(&read_text(file)?);
        let prediction = match &narrative {
            Some(n) => predict(&parsed, n),
            None => to_vectors(&parsed),
        };
        let line = ParseLine {
            file: file.display().to_string(),
            defaulted_labels: parsed.defaulted_count(),
            prediction: &prediction,
        };
        writeln!(w, "{}", serde_json::to_string(&line).expect("prediction serializes")).map_err(io_out)?;
    }
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli, env: &BTreeMap<String, String>, w: &mut dyn Write) -> Result<i32> {
    // run configs carry their own settings; everything else uses AppConfig
    if let Command::Evaluate { run_config, format } = &cli.command {
        return cmd_evaluate(&cli.common, env, run_config, *format, w);
    }
    let app = AppConfig::resolve(&cli.common, env)?;
    match cli.command {
        Command::Plan { n_total, out, space } => cmd_plan(&app, n_total, &out, space, w),
        Command::Generate { plan, out, trace, resume } => cmd_generate(&app, &plan, &out, trace, resume, env, w),
        Command::Validate { dataset } => cmd_validate(&dataset, w),
        Command::Evaluate { .. } => unreachable!("handled above"),
        Command::Compare { base, finetuned, format, out } => cmd_compare(&base, &finetuned, format, out.as_deref(), w),
        Command::Prompt { narrative, mode } => cmd_prompt(&narrative, mode, w),
        Command::Parse { files, narrative } => cmd_parse(&files, narrative.as_deref(), w),
    }
}

/// Runs one command and returns its exit code: 0 on success, 1 for data
/// errors, 2 for usage and configuration errors.
pub fn run<I, T>(args: I, env: &BTreeMap<String, String>, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, env, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}
