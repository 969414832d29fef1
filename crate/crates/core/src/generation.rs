//! Synthetic dataset generation from a triplet plan.
//!
//! Samples are generated in chunks of `workers` in parallel; each chunk is
//! appended to the dataset and the trace in sample order before the next
//! chunk starts. A rerun with `resume` skips every sample index that already
//! has a record in the dataset or a success line in the trace.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_dataset, record_from_model_text, AnnotationRecord, LoadMode, Provenance, Source};
use crate::error::{Error, Result};
use crate::prompting::build_generation_prompt;
use crate::provider::{
    generate_with_retry, Backend, Clock, GenerationConfig, ProviderError, ProviderPool, RetryPolicy,
};
use crate::sampling::GenerationSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceOutcome {
    Ok,
    Failed,
}

/// One line of the generation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sample_index: u64,
    pub attempts: u32,
    pub key_id: Option<String>,
    pub outcome: TraceOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerationSummary {
    pub planned: usize,
    pub skipped: usize,
    pub succeeded: usize,
    pub failed: usize,
}

impl GenerationSummary {
    /// Failures over attempted samples.
    pub fn failure_rate(&self) -> f64 {
        let attempted = self.succeeded + self.failed;
        if attempted == 0 {
            0.0
        } else {
            self.failed as f64 / attempted as f64
        }
    }
}

pub struct GenerationJob<'a> {
    pub backend: &'a dyn Backend,
    pub pool: &'a ProviderPool,
    pub policy: &'a RetryPolicy,
    pub config: &'a GenerationConfig,
    pub clock: &'a dyn Clock,
    pub workers: usize,
    /// Keep existing output and skip completed samples.
    pub resume: bool,
    /// Stop at the first failed sample.
    pub strict: bool,
}

fn read_trace(path: &Path) -> Result<Vec<TraceEntry>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is ignored
        match serde_json::from_str(&line) {
            Ok(entry) => out.push(entry),
            Err(e) => log::warn!("{}:{}: unreadable trace line: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Sample indices already present in the output.
pub fn completed_samples(dataset: &Path, trace: &Path) -> Result<BTreeSet<u64>> {
    let mut done: BTreeSet<u64> = read_trace(trace)?
        .into_iter()
        .filter(|e| e.outcome == TraceOutcome::Ok)
        .map(|e| e.sample_index)
        .collect();
    if dataset.exists() {
        for record in load_dataset(dataset, LoadMode::Lenient)?.records {
            if let Some(i) = record.provenance.sample_index {
                done.insert(i);
            }
        }
    }
    Ok(done)
}

fn open_output(path: &Path, append: bool) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut options = OpenOptions::new();
    options.create(true);
    if append {
        options.append(true);
    } else {
        options.write(true).truncate(true);
    }
    options.open(path).map_err(|e| Error::io(path, e))
}

fn generate_one(seed: &GenerationSeed, job: &GenerationJob<'_>) -> (Option<AnnotationRecord>, TraceEntry) {
    let prompt = build_generation_prompt(seed);
    let accept = |text: &str| record_from_model_text(text).map(|_| ());
    match generate_with_retry(&prompt, job.pool, job.policy, job.config, job.backend, job.clock, &accept) {
        Ok(g) => {
            let mut record = record_from_model_text(&g.text).expect("accepted text validates");
            record.provenance = Provenance {
                source: Source::Synthetic,
                provider: Some(g.provider.clone()),
                key_id: Some(g.key_id.clone()),
                sample_index: Some(seed.sample_index),
                nonce: Some(seed.nonce),
                attempts: Some(g.attempts_used),
            };
            let entry = TraceEntry {
                sample_index: seed.sample_index,
                attempts: g.attempts_used,
                key_id: Some(g.key_id),
                outcome: TraceOutcome::Ok,
                message: None,
            };
            (Some(record), entry)
        }
        Err(e) => {
            let (attempts, key_id) = match &e {
                ProviderError::GenerationFailed { attempts } => (
                    attempts.len() as u32,
                    attempts.last().map(|a| a.key_id.clone()),
                ),
                _ => (0, None),
            };
            let entry = TraceEntry {
                sample_index: seed.sample_index,
                attempts,
                key_id,
                outcome: TraceOutcome::Failed,
                message: Some(e.to_string()),
            };
            (None, entry)
        }
    }
}

/// Generates every seed not yet completed, appending records to `dataset`
/// and one trace line per attempted sample to `trace`.
pub fn generate_dataset(
    seeds: &[GenerationSeed],
    job: &GenerationJob<'_>,
    dataset: &Path,
    trace: &Path,
) -> Result<GenerationSummary> {
    if job.workers == 0 {
        return Err(Error::Config("workers must be positive".into()));
    }
    job.config.validate()?;
    job.policy.validate()?;
    let done = if job.resume {
        completed_samples(dataset, trace)?
    } else {
        BTreeSet::new()
    };
    let mut data_out = open_output(dataset, job.resume)?;
    let mut trace_out = open_output(trace, job.resume)?;
    let todo: Vec<&GenerationSeed> = seeds
        .iter()
        .filter(|s| !done.contains(&s.sample_index))
        .collect();
    let mut summary = GenerationSummary {
        planned: seeds.len(),
        skipped: seeds.len() - todo.len(),
        ..Default::default()
    };

    for chunk in todo.chunks(job.workers) {
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|seed| scope.spawn(move || generate_one(seed, job)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("generation worker panicked"))
                .collect()
        });
        for (record, entry) in results {
            if let Some(record) = record {
                let line = serde_json::to_string(&record.to_json()).expect("record serializes");
                writeln!(data_out, "{line}").map_err(|e| Error::io(dataset, e))?;
                summary.succeeded += 1;
            } else {
                log::warn!(
                    "sample {} failed: {}",
                    entry.sample_index,
                    entry.message.as_deref().unwrap_or("")
                );
                summary.failed += 1;
            }
            let line = serde_json::to_string(&entry).expect("trace serializes");
            writeln!(trace_out, "{line}").map_err(|e| Error::io(trace, e))?;
            if job.strict && entry.outcome == TraceOutcome::Failed {
                data_out.flush().map_err(|e| Error::io(dataset, e))?;
                trace_out.flush().map_err(|e| Error::io(trace, e))?;
                return Err(Error::Aborted(format!(
                    "sample {} failed and strict mode is on",
                    entry.sample_index
                )));
            }
        }
        data_out.flush().map_err(|e| Error::io(dataset, e))?;
        trace_out.flush().map_err(|e| Error::io(trace, e))?;
    }
    Ok(summary)
}
