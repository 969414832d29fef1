//! Scoring a model over a labeled dataset and comparing two runs.
//!
//! Generation is batched and may run on several workers; scoring is a
//! sequential pass in dataset order, so reports are reproducible for a
//! deterministic backend. A narrative whose generation fails is scored as if
//! every label had been left unparsed.

mod backends;
mod compare;
mod report;

pub use backends::{flip_mask, BitFlipBackend, EchoBackend, UnparseableBackend, FLIPPED_REASON};
pub use compare::{compare_runs, ComparisonReport, ComparisonRow, GLOBAL_ROW};
pub use report::{
    emit_comparison, emit_run, load_comparison_csv, render_comparison, render_run, ReportFormat,
};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_dataset, AnnotationRecord, LoadMode};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::metrics::{
    classify_pair, f1_interval, label_metrics, macro_f1, micro_aggregate, similarity_scores,
    ConfusionCounts, Embedder, HashingEmbedder, IntervalEstimate, LabelMetrics, MetricsError,
    Prf, SimilarityScores, UndefinedPolicy,
};
use crate::parsing::{parse_output, select_major, ParsedOutput};
use crate::prompting::{build_prompt, PromptMode};
use crate::provider::{
    generate_with_retry, load_credentials, Backend, Clock, FaultInjection, GenerationConfig,
    HttpBackend, MockBackend, MockMode, ProviderError, ProviderPool, RetryPolicy, SystemClock,
};
use crate::taxonomy::{LabelId, NUM_LABELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Base,
    Finetuned,
    Custom,
}

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    /// Offline template backend.
    Mock {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        transport_failures: u32,
        #[serde(default)]
        malformed_outputs: u32,
        #[serde(default)]
        permanent_failures: Vec<u64>,
    },
    /// Gold answers; evaluation only.
    Echo,
    /// Gold answers with labels flipped at `rate`; evaluation only.
    Bitflip {
        rate: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Never produces a parseable answer.
    Unparseable,
    /// JSON completion endpoint; keys come from the credential sources.
    Http {
        url: String,
        provider: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    120
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Mock {
            seed: 0,
            transport_failures: 0,
            malformed_outputs: 0,
            permanent_failures: Vec::new(),
        }
    }
}

impl BackendSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendSpec::Mock { .. } => "mock",
            BackendSpec::Echo => "echo",
            BackendSpec::Bitflip { .. } => "bitflip",
            BackendSpec::Unparseable => "unparseable",
            BackendSpec::Http { .. } => "http",
        }
    }

    /// `gold` feeds the oracle backends; pass an empty slice for dataset
    /// generation.
    pub fn build(&self, mode: MockMode, gold: &[AnnotationRecord]) -> Result<Box<dyn Backend>> {
        let needs_gold = || {
            if mode == MockMode::Dataset {
                Err(Error::Config(format!(
                    "the {} backend can only be used for evaluation",
                    self.kind()
                )))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            BackendSpec::Mock {
                seed,
                transport_failures,
                malformed_outputs,
                permanent_failures,
            } => Box::new(MockBackend::new(mode, *seed).with_faults(FaultInjection {
                transport_first: *transport_failures,
                malformed_first: *malformed_outputs,
                permanent_malformed: permanent_failures.iter().copied().collect(),
            })),
            BackendSpec::Echo => {
                needs_gold()?;
                Box::new(EchoBackend::new(gold))
            }
            BackendSpec::Bitflip { rate, seed } => {
                needs_gold()?;
                if !(0.0..=1.0).contains(rate) {
                    return Err(Error::Config(format!("bitflip rate {rate} is not in [0, 1]")));
                }
                Box::new(BitFlipBackend::new(gold, *rate, *seed))
            }
            BackendSpec::Unparseable => Box::new(UnparseableBackend),
            BackendSpec::Http {
                url,
                provider,
                timeout_secs,
            } => Box::new(HttpBackend::new(
                provider.clone(),
                url.clone(),
                Duration::from_secs(*timeout_secs),
            )),
        })
    }

    /// Keys for this backend. Offline backends get a single placeholder key;
    /// HTTP backends use every credential whose provider matches.
    pub fn pool(
        &self,
        credentials_file: Option<&Path>,
        policy: &RetryPolicy,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<ProviderPool> {
        match self {
            BackendSpec::Http { provider, .. } => {
                let keys: Vec<_> = load_credentials(credentials_file, env)?
                    .into_iter()
                    .filter(|k| &k.provider_name == provider)
                    .collect();
                if keys.is_empty() {
                    return Err(Error::Config(format!("no credentials for provider {provider:?}")));
                }
                Ok(ProviderPool::new(keys, policy.key_disable_threshold)?)
            }
            _ => Ok(ProviderPool::offline(self.kind())),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_workers() -> usize {
    4
}

fn default_true() -> bool {
    true
}

/// One evaluation run, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model_tag: ModelTag,
    /// Defaults to detailed for `base` and concise for `finetuned`.
    #[serde(default)]
    pub prompt_mode: Option<PromptMode>,
    /// Allows a prompt mode that contradicts the model tag.
    #[serde(default)]
    pub override_prompt_mode: bool,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub retry: RetryPolicy,
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub credentials_file: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Abort on the first malformed dataset line or failed generation.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub undefined_policy: UndefinedPolicy,
    /// Adds the hashing-embedder similarity to the explanation scores.
    #[serde(default = "default_true")]
    pub embedding_similarity: bool,
}

impl RunConfig {
    pub fn new(model_tag: ModelTag, dataset_path: impl Into<PathBuf>, backend: BackendSpec) -> Self {
        RunConfig {
            model_tag,
            prompt_mode: None,
            override_prompt_mode: false,
            generation: GenerationConfig::evaluation(),
            retry: RetryPolicy::default(),
            dataset_path: dataset_path.into(),
            backend,
            output_dir: default_output_dir(),
            credentials_file: None,
            workers: default_workers(),
            strict: false,
            undefined_policy: UndefinedPolicy::default(),
            embedding_similarity: true,
        }
    }

    /// Reads TOML. Relative paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.dataset_path);
        resolve(&mut config.output_dir);
        if let Some(p) = config.credentials_file.as_mut() {
            resolve(p);
        }
        Ok(config)
    }

    pub fn prompt_mode(&self) -> Result<PromptMode> {
        let implied = match self.model_tag {
            ModelTag::Base => Some(PromptMode::Detailed),
            ModelTag::Finetuned => Some(PromptMode::Concise),
            ModelTag::Custom => None,
        };
        match (implied, self.prompt_mode) {
            (Some(i), Some(m)) if i != m && !self.override_prompt_mode => Err(Error::Config(
                format!(
                    "{:?} runs use the {:?} prompt; set override_prompt_mode to use {:?}",
                    self.model_tag, i, m
                ),
            )),
            (_, Some(m)) => Ok(m),
            (Some(i), None) => Ok(i),
            (None, None) => Ok(PromptMode::Detailed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prompt_mode()?;
        self.generation.validate()?;
        self.retry.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: LabelId,
    pub counts: ConfusionCounts,
    pub metrics: LabelMetrics,
    /// Over narratives; absent when F1 is undefined.
    pub interval: Option<IntervalEstimate>,
    /// Mean over true-positive reason pairs; absent when there are none.
    pub similarity: Option<SimilarityScores>,
    pub tp_reason_pairs: u64,
    /// True-positive pairs where one side had no tokens; scored as 0.
    pub empty_reason_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub counts: ConfusionCounts,
    pub metrics: LabelMetrics,
    pub macro_f1: Option<f64>,
    pub decisions: u64,
    pub similarity: Option<SimilarityScores>,
    pub tp_reason_pairs: u64,
    pub major_tactic_accuracy: Option<f64>,
    pub major_theory_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeOutcome {
    pub index: usize,
    /// Predicted flags in canonical order.
    pub predicted: Vec<bool>,
    pub defaulted_labels: usize,
    pub failed: bool,
    pub attempts: u32,
    pub key_id: Option<String>,
    pub error: Option<String>,
    pub major_tactic: Option<LabelId>,
    pub major_theory: Option<LabelId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model_tag: ModelTag,
    pub prompt_mode: PromptMode,
    pub backend: String,
    pub dataset_path: PathBuf,
    pub dataset_hash: String,
    pub config_hash: String,
    pub narratives: usize,
    pub failed_narratives: usize,
    pub defaulted_labels: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub metadata: RunMetadata,
    pub labels: Vec<LabelReport>,
    pub global: GlobalReport,
    pub narratives: Vec<NarrativeOutcome>,
}

pub const REPORT_FILE: &str = "report.json";

impl RunReport {
    pub fn label(&self, label: LabelId) -> &LabelReport {
        &self.labels[label.global_index()]
    }

    /// Writes `report.json` into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(REPORT_FILE);
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Everything an evaluation needs besides the dataset.
pub struct EvalContext<'a> {
    pub config: &'a RunConfig,
    pub backend: &'a dyn Backend,
    pub pool: &'a ProviderPool,
    pub clock: &'a dyn Clock,
    pub embedder: Option<&'a dyn Embedder>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Loads the dataset, builds the configured backend and scores it.
pub fn evaluate_run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let mode = if config.strict { LoadMode::Strict } else { LoadMode::Lenient };
    let dataset = load_dataset(&config.dataset_path, mode)?;
    for d in &dataset.diagnostics {
        log::warn!("{}:{}: skipped: {}", config.dataset_path.display(), d.line, d.message);
    }
    let backend = config.backend.build(MockMode::Analysis, &dataset.records)?;
    let pool = config
        .backend
        .pool(config.credentials_file.as_deref(), &config.retry, std::env::vars())?;
    let embedder = HashingEmbedder::default();
    let ctx = EvalContext {
        config,
        backend: backend.as_ref(),
        pool: &pool,
        clock: &SystemClock,
        embedder: config.embedding_similarity.then_some(&embedder as &dyn Embedder),
    };
    evaluate_records(&ctx, &dataset.records)
}

/// Runs prompts through the pool in batches of `batch_size`, `workers` at a
/// time. Results come back in prompt order.
pub fn generate_batched(
    prompts: &[String],
    ctx: &EvalContext<'_>,
    accept: &(dyn Fn(&str) -> std::result::Result<(), String> + Sync),
) -> Vec<std::result::Result<crate::provider::Generation, ProviderError>> {
    let config = ctx.config;
    let mut out = Vec::with_capacity(prompts.len());
    for batch in prompts.chunks(config.generation.batch_size.max(1)) {
        let slots: Vec<Mutex<Option<_>>> = batch.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..config.workers.min(batch.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= batch.len() {
                        break;
                    }
                    let result = generate_with_retry(
                        &batch[i],
                        ctx.pool,
                        &config.retry,
                        &config.generation,
                        ctx.backend,
                        ctx.clock,
                        accept,
                    );
                    *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(result);
                });
            }
        });
        out.extend(slots.into_iter().map(|slot| {
            slot.into_inner()
                .unwrap_or_else(|p| p.into_inner())
                .expect("every slot filled")
        }));
    }
    out
}

#[derive(Default)]
struct SimilaritySums {
    pairs: u64,
    empty: u64,
    rouge1: [f64; 3],
    rouge2: [f64; 3],
    rouge_l: [f64; 3],
    bleu: f64,
    embed: f64,
    embed_n: u64,
}

impl SimilaritySums {
    fn add(&mut self, s: &SimilarityScores) {
        self.pairs += 1;
        for (acc, prf) in [
            (&mut self.rouge1, s.rouge1),
            (&mut self.rouge2, s.rouge2),
            (&mut self.rouge_l, s.rouge_l),
        ] {
            acc[0] += prf.precision;
            acc[1] += prf.recall;
            acc[2] += prf.f1;
        }
        self.bleu += s.bleu;
        if let Some(e) = s.embed_f1 {
            self.embed += e;
            self.embed_n += 1;
        }
    }

    fn add_empty(&mut self) {
        self.add(&SimilarityScores::default());
        self.empty += 1;
    }

    fn merge(&mut self, o: &SimilaritySums) {
        self.pairs += o.pairs;
        self.empty += o.empty;
        for i in 0..3 {
            self.rouge1[i] += o.rouge1[i];
            self.rouge2[i] += o.rouge2[i];
            self.rouge_l[i] += o.rouge_l[i];
        }
        self.bleu += o.bleu;
        self.embed += o.embed;
        self.embed_n += o.embed_n;
    }

    fn mean(&self) -> Option<SimilarityScores> {
        if self.pairs == 0 {
            return None;
        }
        let n = self.pairs as f64;
        let prf = |a: [f64; 3]| Prf {
            precision: a[0] / n,
            recall: a[1] / n,
            f1: a[2] / n,
        };
        Some(SimilarityScores {
            rouge1: prf(self.rouge1),
            rouge2: prf(self.rouge2),
            rouge_l: prf(self.rouge_l),
            bleu: self.bleu / n,
            embed_f1: (self.embed_n > 0).then(|| self.embed / self.embed_n as f64),
        })
    }
}

/// Generates, parses and scores every record.
pub fn evaluate_records(ctx: &EvalContext<'_>, records: &[AnnotationRecord]) -> Result<RunReport> {
    let config = ctx.config;
    config.validate()?;
    if records.is_empty() {
        return Err(MetricsError::EmptyCounts.into());
    }
    let started_unix = unix_now();
    let mode = config.prompt_mode()?;
    let prompts: Vec<String> = records
        .iter()
        .map(|r| build_prompt(mode, r.story.as_str()).rendered)
        .collect();
    let generations = generate_batched(&prompts, ctx, &|_| Ok(()));

    let mut counts = [ConfusionCounts::default(); NUM_LABELS];
    let mut sims: Vec<SimilaritySums> = (0..NUM_LABELS).map(|_| SimilaritySums::default()).collect();
    let mut narratives = Vec::with_capacity(records.len());
    let mut major_hits = [0u64; 2];
    let mut major_n = [0u64; 2];

    for (index, (record, generation)) in records.iter().zip(generations).enumerate() {
        let (parsed, outcome) = match generation {
            Ok(g) => (
                parse_output(&g.text),
                (false, g.attempts_used, Some(g.key_id), None),
            ),
            Err(e) => {
                if config.strict {
                    return Err(Error::Aborted(format!("narrative {index}: {e}")));
                }
                log::warn!("narrative {index}: {e}");
                let attempts = match &e {
                    ProviderError::GenerationFailed { attempts } => attempts.len() as u32,
                    _ => 0,
                };
                (
                    ParsedOutput::all_defaulted(""),
                    (true, attempts, None, Some(e.to_string())),
                )
            }
        };
        let gold = record.presence();
        for label in LabelId::all() {
            let g = label.global_index();
            let pred = parsed.labels[g].present;
            let outcome = classify_pair(pred, gold[g]);
            counts[g].record(outcome);
            if pred && gold[g] {
                let gold_reason = record.reason(label).unwrap_or_default();
                match similarity_scores(&parsed.labels[g].reason, gold_reason, ctx.embedder) {
                    Ok(s) => sims[g].add(&s),
                    Err(MetricsError::EmptyText) => sims[g].add_empty(),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let (major_tactic, major_theory) = select_major(&parsed, record.story.as_str());
        for (k, (pred, gold)) in [
            (major_tactic, record.major_tactic),
            (major_theory, record.major_theory),
        ]
        .into_iter()
        .enumerate()
        {
            major_n[k] += 1;
            major_hits[k] += u64::from(pred == Some(gold));
        }
        let (failed, attempts, key_id, error) = outcome;
        narratives.push(NarrativeOutcome {
            index,
            predicted: parsed.presence().to_vec(),
            defaulted_labels: parsed.defaulted_count(),
            failed,
            attempts,
            key_id,
            error,
            major_tactic,
            major_theory,
        });
    }

    let n = records.len() as u64;
    let mut labels = Vec::with_capacity(NUM_LABELS);
    for label in LabelId::all() {
        let g = label.global_index();
        let metrics = label_metrics(&counts[g])?;
        labels.push(LabelReport {
            label,
            counts: counts[g],
            metrics,
            interval: metrics.f1.map(|f| f1_interval(f, n)).transpose()?,
            similarity: sims[g].mean(),
            tp_reason_pairs: sims[g].pairs,
            empty_reason_pairs: sims[g].empty,
        });
    }
    let mut all_sims = SimilaritySums::default();
    for s in &sims {
        all_sims.merge(s);
    }
    let pooled: ConfusionCounts = counts.iter().copied().sum();
    let f1s: Vec<Option<f64>> = labels.iter().map(|l| l.metrics.f1).collect();
    let ratio = |hits: u64, total: u64| (total > 0).then(|| hits as f64 / total as f64);
    let global = GlobalReport {
        counts: pooled,
        metrics: micro_aggregate(&counts)?,
        macro_f1: match macro_f1(&f1s, config.undefined_policy) {
            Ok(v) => Some(v),
            Err(MetricsError::EmptyInput) => None,
            Err(e) => return Err(e.into()),
        },
        decisions: pooled.total(),
        similarity: all_sims.mean(),
        tp_reason_pairs: all_sims.pairs,
        major_tactic_accuracy: ratio(major_hits[0], major_n[0]),
        major_theory_accuracy: ratio(major_hits[1], major_n[1]),
    };
    let metadata = RunMetadata {
        model_tag: config.model_tag,
        prompt_mode: mode,
        backend: ctx.backend.name().to_string(),
        dataset_path: config.dataset_path.clone(),
        dataset_hash: crate::corpus::dataset_hash(records),
        config_hash: config.hash(),
        narratives: records.len(),
        failed_narratives: narratives.iter().filter(|o| o.failed).count(),
        defaulted_labels: narratives.iter().map(|o| o.defaulted_labels).sum(),
        started_unix,
        finished_unix: unix_now(),
    };
    Ok(RunReport {
        metadata,
        labels,
        global,
        narratives,
    })
}
