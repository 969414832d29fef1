//! Scores a "base" and a "fine-tuned" stand-in on a mock dataset and prints
//! the comparison tables.
//!
//! The base run uses a backend that flips 30% of gold labels; the fine-tuned
//! run flips 5%.

use cyberlens::evaluation::{compare_runs, evaluate_run, render_comparison, BackendSpec, ModelTag, ReportFormat, RunConfig};
use cyberlens::generation::{generate_dataset, GenerationJob};
use cyberlens::provider::{GenerationConfig, MockBackend, MockMode, ProviderPool, RetryPolicy, VirtualClock};
use cyberlens::sampling::{plan_triplets, seeds_for_plan, TripletSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("cyberlens-eval-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let data = dir.join("data.jsonl");

    let seeds = seeds_for_plan(&plan_triplets(144, &TripletSpace::full(), 3), 3);
    let backend = MockBackend::new(MockMode::Dataset, 3);
    let pool = ProviderPool::offline("mock");
    let job = GenerationJob {
        backend: &backend,
        pool: &pool,
        policy: &RetryPolicy::default(),
        config: &GenerationConfig::default(),
        clock: &VirtualClock::new(),
        workers: 8,
        resume: false,
        strict: false,
    };
    generate_dataset(&seeds, &job, &data, &dir.join("trace.jsonl"))?;

    let base = evaluate_run(&RunConfig::new(ModelTag::Base, &data, BackendSpec::Bitflip { rate: 0.3, seed: 1 }))?;
    let ft = evaluate_run(&RunConfig::new(ModelTag::Finetuned, &data, BackendSpec::Bitflip { rate: 0.05, seed: 2 }))?;
    println!("{} decisions per run", base.global.decisions);

    let comparison = compare_runs(&base, &ft)?;
    println!("{}", render_comparison(&comparison, ReportFormat::Markdown)?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
