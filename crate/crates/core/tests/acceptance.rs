//! Acceptance criteria 1-10. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cyberlens::corpus::{
    load_dataset, record_from_model_text, repair_json_text, save_dataset, AnnotationRecord, LoadMode,
};
use cyberlens::evaluation::{evaluate_run, flip_mask, BackendSpec, ModelTag, RunConfig, RunReport};
use cyberlens::generation::{generate_dataset, GenerationJob};
use cyberlens::metrics::{
    f1_interval, hallucination_rate, hallucination_reduction, macro_f1, pr_product, rouge_l, rouge_n,
    significance_marker, tokenize, Significance, UndefinedPolicy,
};
use cyberlens::parsing::{parse_output, ParseStatus, PARSING_FAILED};
use cyberlens::prompting::{build_generation_prompt, render_target};
use cyberlens::provider::{
    backoff_delay, generate_with_retry, FaultInjection, GenerationConfig, MockBackend, MockMode,
    ProviderError, ProviderPool, RetryPolicy, VirtualClock,
};
use cyberlens::sampling::{plan_triplets, read_plan, seeds_for_plan, write_plan, TripletSpace};
use cyberlens::taxonomy::{LabelId, NUM_LABELS};

use common::{brute_lcs, random_record, score, Tally};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(value: f64, target: f64, tol: f64, what: &str) -> Result<(), String> {
    check(
        (value - target).abs() <= tol + 1e-12,
        format!("{what} = {value:.6}, expected {target} +/- {tol}"),
    )
}

// Printed F1 columns of the per-label classification table, canonical order.
const BASE_F1: [f64; NUM_LABELS] = [
    0.70, 0.43, 0.95, 0.90, 0.62, 0.48, 0.12, 0.53, 0.40, 0.20, 0.65, 0.47, 0.65, 0.90, // tactics
    0.77, 0.79, 0.85, 0.81, 0.63, 0.39, // theories
];
const FT_F1: [f64; NUM_LABELS] = [
    0.76, 0.72, 1.00, 0.98, 0.86, 0.17, 0.83, 0.67, 0.60, 0.67, 0.56, 0.82, 0.97, 0.97, //
    0.91, 0.80, 0.87, 0.82, 0.59, 0.82,
];

fn criterion_1() -> Outcome {
    let h = hallucination_rate(0.26);
    within(h, 0.74, 1e-12, "hallucination_rate(0.26)")?;
    let r = hallucination_reduction(0.36, 0.14).map_err(|e| e.to_string())?;
    within(r, 61.1, 0.05, "reduction(0.36, 0.14) %")?;
    let pr = pr_product(0.83, 0.42);
    within(pr, 0.35, 0.005, "pr_product(0.83, 0.42)")?;
    Ok(format!("hallucination 0.74, reduction {r:.2}%, PR {pr:.4}"))
}

fn criterion_2() -> Outcome {
    let macro_of = |v: &[f64]| macro_f1(&v.iter().map(|&x| Some(x)).collect::<Vec<_>>(), UndefinedPolicy::Exclude);
    let base = macro_of(&BASE_F1).map_err(|e| e.to_string())?;
    let ft = macro_of(&FT_F1).map_err(|e| e.to_string())?;
    // independent mean of the printed values
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    within(base, mean(&BASE_F1), 1e-12, "base macro vs plain mean")?;
    within(ft, mean(&FT_F1), 1e-12, "ft macro vs plain mean")?;
    within(base, 0.61, 0.005, "base macro-F1")?;
    within(ft, 0.78, 0.01, "fine-tuned macro-F1")?;
    Ok(format!("base {base:.4}, fine-tuned {ft:.4}"))
}

fn criterion_3() -> Outcome {
    let half = f1_interval(0.5, 144).map_err(|e| e.to_string())?;
    check(
        (0.0415..=0.0420).contains(&half.se),
        format!("se(0.5, 144) = {:.5}", half.se),
    )?;
    let collection = significance_marker(0.65, 0.56, 144).map_err(|e| e.to_string())?;
    check(
        collection == Significance::NotSignificant,
        format!("Collection marker {}", collection.as_str()),
    )?;
    let evasion = significance_marker(0.12, 0.83, 144).map_err(|e| e.to_string())?;
    check(evasion == Significance::P001, format!("Defense Evasion marker {}", evasion.as_str()))?;
    let ci = f1_interval(0.64, 144).map_err(|e| e.to_string())?;
    within(ci.lo, 0.58, 0.01, "CI(0.64, 144) lower")?;
    within(ci.hi, 0.70, 0.01, "CI(0.64, 144) upper")?;
    Ok(format!(
        "se {:.5}, CI [{:.4}, {:.4}], markers n.s. / ***",
        half.se, ci.lo, ci.hi
    ))
}

fn fuzz_text(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "[", "]", "Present:", "Reason:", "Yes", "No", "N/A", "yes/no", "\n", " ", "Reconnaissance",
        "Initial Contact", "Fear & Intimidation", "Command & Control", "Authority/Social Proof", "{",
        "}", "\"", "```", "é", "🙂", "\\", "(?i)", ".*", "\r\n", "\t",
    ];
    let n = rng.random_range(0..60);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.8) {
                PIECES[rng.random_range(0..PIECES.len())].to_string()
            } else {
                let len = rng.random_range(1..6);
                (0..len).map(|_| char::from_u32(rng.random_range(1..0x2FFF)).unwrap_or('?')).collect()
            }
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..10_000 {
        let text = fuzz_text(&mut rng);
        let parsed = catch_unwind(|| parse_output(&text)).map_err(|_| format!("parse_output panicked on case {i}: {text:?}"))?;
        check(parsed.labels.len() == NUM_LABELS, "wrong label count")?;
    }
    for i in 0..1_000 {
        let record = random_record(&mut rng, i);
        let parsed = parse_output(&render_target(&record));
        check(
            parsed.presence() == record.presence(),
            format!("round trip lost flags for record {i}"),
        )?;
        check(parsed.defaulted_count() == 0, format!("record {i} has defaulted labels"))?;
    }
    // golden fixtures
    let recon = LabelId::tactic(0).unwrap();
    let contact = LabelId::tactic(2).unwrap();
    let na = parse_output("[Reconnaissance]\nPresent: N/A\nReason: n/a");
    check(!na.present(recon) && na.get(recon).status == ParseStatus::Matched, "N/A should be absent")?;
    check(
        !na.present(contact) && na.reason(contact) == PARSING_FAILED && na.get(contact).status == ParseStatus::Defaulted,
        "missing label should default",
    )?;
    let both = parse_output("[Reconnaissance]\nPresent: Yes/No\nReason: unsure");
    check(both.present(recon), "\"Yes/No\" should count as present")?;
    let no = parse_output("[Reconnaissance]\nPresent: No\nReason: nothing\n[Initial Contact]\nPresent: yes\nReason: called");
    check(!no.present(recon) && no.reason(recon) == "nothing", "reason should stop at next header")?;
    check(no.present(contact) && no.reason(contact) == "called", "second section")?;
    let empty = parse_output("");
    check(empty.defaulted_count() == NUM_LABELS && !empty.presence().iter().any(|&p| p), "empty text")?;
    Ok("10000 fuzz cases, 1000/1000 round trips, 6 golden fixtures".into())
}

fn fuzz_json(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "{", "}", "[", "]", ",", ":", "\"", "\\", "```", "```json", "\n", " ", "a", "1", "true", "null",
        "Here:", "Sure!", ",}", ",]", "\"x\"", "{\"k\": [1, 2,],}",
    ];
    let n = rng.random_range(0..40);
    (0..n).map(|_| PIECES[rng.random_range(0..PIECES.len())]).collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut repaired = 0;
    for i in 0..10_000 {
        let text = fuzz_json(&mut rng);
        if let Ok(once) = repair_json_text(&text) {
            repaired += 1;
            let twice = repair_json_text(&once).map_err(|e| format!("case {i}: second pass failed: {e}"))?;
            check(twice == once, format!("case {i} not idempotent: {text:?}"))?;
        }
    }
    let expected: serde_json::Value = serde_json::json!({"Story": "a, b", "list": [1, 2], "n": {"x": "}"}});
    let body = r#"{"Story": "a, b", "list": [1, 2], "n": {"x": "}"}}"#;
    let trailing = r#"{"Story": "a, b", "list": [1, 2,], "n": {"x": "}",},}"#;
    let golden = [
        format!("```json\n{body}\n```"),
        format!("```\n{body}\n```"),
        format!("Sure! Here is the record:\n{body}\nLet me know if you need more."),
        format!("Output: {body} (end)"),
        trailing.to_string(),
        format!("```json\n{trailing}\n```\nDone."),
    ];
    for (i, raw) in golden.iter().enumerate() {
        let fixed = repair_json_text(raw).map_err(|e| format!("golden {i}: {e}"))?;
        let value: serde_json::Value =
            serde_json::from_str(&fixed).map_err(|e| format!("golden {i} still invalid: {e}"))?;
        check(value == expected, format!("golden {i} changed content"))?;
    }
    Ok(format!("{repaired} repairable fuzz inputs idempotent, {}/{} golden fixed", golden.len(), golden.len()))
}

fn criterion_6() -> Outcome {
    let space = TripletSpace::full();
    let plan = plan_triplets(1500, &space, 42);
    check(plan.entries.len() == 840, format!("{} entries", plan.entries.len()))?;
    let twos = plan.entries.iter().filter(|e| e.count == 2).count();
    let ones = plan.entries.iter().filter(|e| e.count == 1).count();
    let sum: u64 = plan.entries.iter().map(|e| e.count).sum();
    check(twos == 660 && ones == 180 && sum == 1500, format!("{twos} twos, {ones} ones, sum {sum}"))?;
    let uniform = 1500.0 / 10.0;
    let marginals = plan.fraud_type_marginals();
    check(marginals.len() == 10, "fraud-type count")?;
    let worst = marginals
        .iter()
        .map(|(_, n)| (*n as f64 - uniform).abs() / uniform)
        .fold(0.0, f64::max);
    check(worst <= 0.05, format!("marginal deviation {:.1}%", worst * 100.0))?;
    check(plan_triplets(1500, &space, 42) == plan, "not deterministic")?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_plan(&plan, &a).map_err(|e| e.to_string())?;
    write_plan(&plan_triplets(1500, &space, 42), &b).map_err(|e| e.to_string())?;
    check(std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap(), "plan files differ")?;
    check(read_plan(&a).map_err(|e| e.to_string())? == plan, "plan file round trip")?;
    Ok(format!("660x2 + 180x1 = 1500, worst marginal deviation {:.2}%", worst * 100.0))
}

fn criterion_7() -> Outcome {
    let policy = RetryPolicy::default();
    let closed: Vec<f64> = (1..=8).map(|a| f64::min(60.0, 5.0 * 2f64.powi(a - 1))).collect();
    let delays: Vec<f64> = (1..=8).map(|a| backoff_delay(a, &policy)).collect();
    check(delays == closed, format!("delays {delays:?}"))?;
    check(closed == [5.0, 10.0, 20.0, 40.0, 60.0, 60.0, 60.0, 60.0], "closed form")?;

    let seed = seeds_for_plan(&plan_triplets(1, &TripletSpace::reduced(1, 1, 1), 0), 0)[0];
    let prompt = build_generation_prompt(&seed);
    let accept = |t: &str| record_from_model_text(t).map(|_| ());
    let config = GenerationConfig::default();

    let run = |faults: FaultInjection, policy: &RetryPolicy| {
        let backend = MockBackend::new(MockMode::Dataset, 0).with_faults(faults);
        let clock = VirtualClock::new();
        let pool = ProviderPool::offline("mock");
        let result = generate_with_retry(&prompt, &pool, policy, &config, &backend, &clock, &accept);
        (result, clock.sleeps())
    };
    let failed_attempts = |r: &Result<_, ProviderError>| match r {
        Err(ProviderError::GenerationFailed { attempts }) => Some(attempts.len()),
        _ => None,
    };

    let transport = FaultInjection {
        transport_first: 1_000,
        ..Default::default()
    };
    let (r, sleeps) = run(transport.clone(), &policy);
    check(failed_attempts(&r) == Some(4), "transport: expected 4 failed attempts")?;
    check(sleeps == closed[..4], format!("transport sleeps {sleeps:?}"))?;
    let long = RetryPolicy {
        max_outer_retries: 8,
        ..RetryPolicy::default()
    };
    let (_, sleeps) = run(transport, &long);
    check(sleeps == closed, format!("8-attempt transport sleeps {sleeps:?}"))?;

    let malformed = FaultInjection {
        permanent_malformed: [seed.sample_index].into(),
        ..Default::default()
    };
    let (r, sleeps) = run(malformed, &policy);
    check(failed_attempts(&r) == Some(4), "malformed: expected 4 failed attempts")?;
    check(sleeps == [2.0, 4.0, 6.0, 8.0], format!("malformed sleeps {sleeps:?}"))?;
    Ok("5,10,20,40,60,60,60,60 and 2,4,6,8; 4 attempts".into())
}

fn eval(path: &std::path::Path, backend: BackendSpec) -> Result<RunReport, String> {
    let config = RunConfig::new(ModelTag::Finetuned, path, backend);
    evaluate_run(&config).map_err(|e| e.to_string())
}

/// Compares a report against the brute-force scorer.
fn agrees(report: &RunReport, per: &[Tally; NUM_LABELS], pooled: &Tally) -> Result<(), String> {
    let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= f64::EPSILON,
        (None, None) => true,
        _ => false,
    };
    for (l, t) in report.labels.iter().zip(per) {
        let c = l.counts;
        check(
            (c.tp, c.fp, c.tn, c.fn_) == (t.tp, t.fp, t.tn, t.fn_),
            format!("{} counts differ", l.label.id()),
        )?;
        let m = &l.metrics;
        check(
            same(Some(m.accuracy), Some(t.accuracy()))
                && same(m.precision, t.precision())
                && same(m.recall, t.recall())
                && same(m.f1, t.f1()),
            format!("{} metrics differ", l.label.id()),
        )?;
    }
    let g = report.global.counts;
    check((g.tp, g.fp, g.tn, g.fn_) == (pooled.tp, pooled.fp, pooled.tn, pooled.fn_), "pooled counts")?;
    check(same(report.global.metrics.f1, pooled.f1()), "pooled F1")?;
    let defined: Vec<f64> = per.iter().filter_map(Tally::f1).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    check(same(report.global.macro_f1, mean), "macro F1")?;
    check(report.global.decisions == pooled.total(), "decision count")?;
    Ok(())
}

fn flipped(records: &[AnnotationRecord], rate: f64, seed: u64) -> Vec<[bool; NUM_LABELS]> {
    records
        .iter()
        .map(|r| {
            let mask = flip_mask(r.story.as_str().trim_matches('\n'), rate, seed);
            let gold = r.presence();
            std::array::from_fn(|l| gold[l] ^ mask[l])
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = plan_triplets(40, &TripletSpace::reduced(2, 4, 5), 8);
    let plan_path = dir.path().join("plan.jsonl");
    write_plan(&plan, &plan_path).map_err(|e| e.to_string())?;
    let seeds = seeds_for_plan(&read_plan(&plan_path).map_err(|e| e.to_string())?, 8);

    let backend = MockBackend::new(MockMode::Dataset, 8);
    let pool = ProviderPool::offline("mock");
    let job = GenerationJob {
        backend: &backend,
        pool: &pool,
        policy: &RetryPolicy::default(),
        config: &GenerationConfig::default(),
        clock: &VirtualClock::new(),
        workers: 4,
        resume: false,
        strict: false,
    };
    let data = dir.path().join("data.jsonl");
    let summary = generate_dataset(&seeds, &job, &data, &dir.path().join("trace.jsonl")).map_err(|e| e.to_string())?;
    check(summary.succeeded == 40 && summary.failed == 0, format!("generation {summary:?}"))?;

    let loaded = load_dataset(&data, LoadMode::Lenient).map_err(|e| e.to_string())?;
    check(loaded.diagnostics.is_empty(), format!("{} violations", loaded.diagnostics.len()))?;
    check(loaded.records.len() == 40, "record count")?;
    let mut sink = Vec::new();
    let code = cyberlens::cli::run(["cyberlens", "validate", data.to_str().unwrap()], &BTreeMap::new(), &mut sink);
    check(code == 0, format!("validate exit {code}"))?;

    let echo = eval(&data, BackendSpec::Echo)?;
    for l in &echo.labels {
        if l.metrics.support == 0 {
            continue;
        }
        let m = &l.metrics;
        check(
            m.accuracy == 1.0 && m.precision == Some(1.0) && m.recall == Some(1.0) && m.f1 == Some(1.0),
            format!("echo {} not perfect", l.label.id()),
        )?;
        let s = l.similarity.ok_or("missing similarity")?;
        check(
            s.rouge1.f1 == 1.0 && s.rouge2.f1 == 1.0 && s.rouge_l.f1 == 1.0,
            format!("echo {} similarity {s:?}", l.label.id()),
        )?;
        check((s.embed_f1.unwrap_or(0.0) - 1.0).abs() < 1e-9, "echo embedding similarity")?;
    }
    let gold: Vec<[bool; NUM_LABELS]> = loaded.records.iter().map(|r| r.presence()).collect();
    let (per, pooled) = score(&gold, &gold);
    agrees(&echo, &per, &pooled)?;

    let flip = eval(&data, BackendSpec::Bitflip { rate: 0.1, seed: 3 })?;
    let pred = flipped(&loaded.records, 0.1, 3);
    let flips: usize = pred.iter().zip(&gold).map(|(p, g)| (0..NUM_LABELS).filter(|&l| p[l] != g[l]).count()).sum();
    check(flips > 0, "bit-flip backend flipped nothing")?;
    let (per, pooled) = score(&pred, &gold);
    agrees(&flip, &per, &pooled)?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!("40 records, 0 violations, echo perfect, {flips} flips scored identically, {secs:.1}s"))
}

fn criterion_9() -> Outcome {
    let r = rouge_n("the cat sat", "the cat ran", 1).map_err(|e| e.to_string())?;
    for (name, v) in [("P", r.precision), ("R", r.recall), ("F", r.f1)] {
        within(v, 2.0 / 3.0, 1e-12, &format!("rouge-1 {name}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let vocab = ["a", "b", "c", "d", "e"];
    let sentence = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=10);
        (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
    };
    for i in 0..1_000 {
        let (a, b) = (sentence(&mut rng), sentence(&mut rng));
        let (ta, tb) = (tokenize(&a), tokenize(&b));
        let lcs = brute_lcs(&ta, &tb);
        check(lcs <= ta.len().min(tb.len()), "LCS bound")?;
        let ab = rouge_l(&a, &b).map_err(|e| e.to_string())?;
        let ba = rouge_l(&b, &a).map_err(|e| e.to_string())?;
        within(ab.precision, lcs as f64 / ta.len() as f64, 1e-12, &format!("case {i} precision"))?;
        within(ab.recall, lcs as f64 / tb.len() as f64, 1e-12, &format!("case {i} recall"))?;
        check(ab.precision == ba.recall && ab.recall == ba.precision, format!("case {i} P/R swap"))?;
        check((ab.f1 - ba.f1).abs() <= 1e-12, format!("case {i} F symmetry"))?;
        check((0.0..=1.0).contains(&ab.f1), "F out of range")?;
    }
    Ok("rouge-1 2/3, 1000 LCS cases match the brute-force oracle".into())
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let records: Vec<AnnotationRecord> = (0..144).map(|i| random_record(&mut rng, i)).collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.jsonl");
    save_dataset(&records, &data).map_err(|e| e.to_string())?;
    let gold: Vec<[bool; NUM_LABELS]> = records.iter().map(|r| r.presence()).collect();

    let mut lines = Vec::new();
    for backend in [BackendSpec::Bitflip { rate: 0.25, seed: 10 }, BackendSpec::Unparseable] {
        let report = eval(&data, backend.clone())?;
        let pred = match backend {
            BackendSpec::Unparseable => vec![[false; NUM_LABELS]; records.len()],
            _ => flipped(&records, 0.25, 10),
        };
        let (per, pooled) = score(&pred, &gold);
        check(pooled.total() == 2880, format!("scorer counted {}", pooled.total()))?;
        check(report.global.decisions == 2880, format!("{} decisions", report.global.decisions))?;
        for l in &report.labels {
            check(l.counts.total() == 144, format!("{} has {} decisions", l.label.id(), l.counts.total()))?;
        }
        agrees(&report, &per, &pooled)?;
        lines.push(format!("{}: 2880", backend.kind()));
    }
    Ok(lines.join(", "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric identities", criterion_1),
        ("macro-F1 reproduction", criterion_2),
        ("interval formulas and markers", criterion_3),
        ("parser totality and fidelity", criterion_4),
        ("JSON repair", criterion_5),
        ("sampler balance", criterion_6),
        ("backoff and retry schedule", criterion_7),
        ("end-to-end oracle run", criterion_8),
        ("ROUGE oracle", criterion_9),
        ("decision conservation", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
