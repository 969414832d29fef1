//! Generates a small synthetic dataset with the offline mock backend, one
//! sample of which never produces usable output, then resumes the run.

use cyberlens::corpus::{load_dataset, LoadMode};
use cyberlens::generation::{generate_dataset, GenerationJob};
use cyberlens::provider::{FaultInjection, GenerationConfig, MockBackend, MockMode, ProviderPool, RetryPolicy, VirtualClock};
use cyberlens::sampling::{plan_triplets, seeds_for_plan, TripletSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile_dir()?;
    let seeds = seeds_for_plan(&plan_triplets(12, &TripletSpace::reduced(2, 3, 2), 1), 1);
    let backend = MockBackend::new(MockMode::Dataset, 1).with_faults(FaultInjection {
        transport_first: 1,
        permanent_malformed: [5].into(),
        ..Default::default()
    });
    let pool = ProviderPool::offline("mock");
    let clock = VirtualClock::new();
    let mut job = GenerationJob {
        backend: &backend,
        pool: &pool,
        policy: &RetryPolicy::default(),
        config: &GenerationConfig::default(),
        clock: &clock,
        workers: 4,
        resume: false,
        strict: false,
    };
    let data = dir.join("data.jsonl");
    let trace = dir.join("trace.jsonl");
    let summary = generate_dataset(&seeds, &job, &data, &trace)?;
    println!("{summary:?}, failure rate {:.1}%", summary.failure_rate() * 100.0);
    println!("virtual time slept: {:.0}s", clock.total());

    job.resume = true;
    let again = generate_dataset(&seeds, &job, &data, &trace)?;
    println!("resume: {again:?}");

    let loaded = load_dataset(&data, LoadMode::Strict)?;
    let first = &loaded.records[0];
    println!("{} records; first is {} / {} / {}", loaded.records.len(), first.fraud_type.display_name(), first.major_tactic.display_name(), first.major_theory.display_name());
    println!("{}", first.story.as_str());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("cyberlens-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
