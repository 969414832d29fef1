use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use cyberlens::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use cyberlens::corpus::{load_dataset, LoadMode};
use cyberlens::evaluation::{load_comparison_csv, RunReport, GLOBAL_ROW};

fn cli(args: &[&str]) -> (i32, String) {
    cli_env(args, &[])
}

fn cli_env(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let env: BTreeMap<String, String> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let mut out = Vec::new();
    let code = run(std::iter::once("cyberlens").chain(args.iter().copied()), &env, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, n: &str) -> std::path::PathBuf {
    let plan = dir.join("plan.jsonl");
    let data = dir.join("data.jsonl");
    assert_eq!(cli(&["plan", "--n", n, "--space", "2,4,5", "--out", p(&plan), "--seed", "3"]).0, EXIT_OK);
    let (code, out) = cli(&["generate", "--plan", p(&plan), "--out", p(&data), "--seed", "3"]);
    assert_eq!(code, EXIT_OK, "{out}");
    data
}

#[test]
fn plan_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let (code, out) = cli(&["plan", "--n", "1500", "--out", p(&a), "--seed", "9"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("1500 samples over 840 triplets"), "{out}");
    cli_env(&["plan", "--n", "1500", "--out", p(&b)], &[("CYBERLENS_SEED", "9")]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let empty = dir.path().join("e.jsonl");
    assert_eq!(cli(&["plan", "--n", "0", "--out", p(&empty)]).0, EXIT_OK);
    let sum: u64 = std::fs::read_to_string(&empty)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["count"].as_u64().unwrap())
        .sum();
    assert_eq!(sum, 0);
}

#[test]
fn generate_is_idempotent_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "20");
    let first = std::fs::read(&data).unwrap();
    assert_eq!(load_dataset(&data, LoadMode::Strict).unwrap().records.len(), 20);

    // same inputs, fresh run
    let plan = dir.path().join("plan.jsonl");
    cli(&["generate", "--plan", p(&plan), "--out", p(&data), "--seed", "3"]);
    assert_eq!(std::fs::read(&data).unwrap(), first);

    // simulate an interrupt: keep the first 7 records and 7 trace lines
    let keep = |path: &Path| {
        let text = std::fs::read_to_string(path).unwrap();
        let kept: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        std::fs::write(path, kept).unwrap();
    };
    keep(&data);
    keep(&dir.path().join("data.jsonl.trace.jsonl"));
    let (code, out) = cli(&["generate", "--plan", p(&plan), "--out", p(&data), "--seed", "3", "--resume"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("skipped 7, generated 13"), "{out}");
    assert_eq!(std::fs::read(&data).unwrap(), first);
}

#[test]
fn generate_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.jsonl");
    let data = dir.path().join("data.jsonl");
    let config = dir.path().join("app.toml");
    std::fs::write(
        &config,
        "[backend]\nkind = \"mock\"\npermanent_failures = [2]\n\n[retry]\nbase_backoff = 0.001\nbackoff_cap = 0.001\nmalformed_sleep_factor = 0.001\n",
    )
    .unwrap();
    cli(&["plan", "--n", "10", "--space", "1,2,5", "--out", p(&plan)]);
    let (code, out) = cli(&["generate", "--plan", p(&plan), "--out", p(&data), "--config", p(&config)]);
    assert_eq!(code, EXIT_DATA);
    assert!(out.contains("generated 9, failed 1 (failure rate 10.00%)"), "{out}");
    let trace = std::fs::read_to_string(dir.path().join("data.jsonl.trace.jsonl")).unwrap();
    assert_eq!(trace.lines().filter(|l| l.contains("\"failed\"")).count(), 1);

    let (code, _) = cli(&["generate", "--plan", p(&plan), "--out", p(&data), "--config", p(&config), "--strict"]);
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn validate_lists_violations_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "5");
    let (code, out) = cli(&["validate", p(&data)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("5 valid records, 0 violations"), "{out}");

    // third line: major tactic not marked present
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut bad: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    let major = bad["Major_Tactic"].as_str().unwrap().to_string();
    let key = bad["Tactics"]
        .as_object()
        .unwrap()
        .keys()
        .find(|k| cyberlens::taxonomy::normalize_label(k).ok() == cyberlens::taxonomy::normalize_label(&major).ok())
        .unwrap()
        .clone();
    bad["Tactics"][&key] = "No".into();
    bad["Tactics"].as_object_mut().unwrap().remove(&format!("{key}_Reason"));
    lines[2] = bad.to_string();
    std::fs::write(&data, lines.join("\n") + "\n").unwrap();
    let (code, out) = cli(&["validate", p(&data)]);
    assert_eq!(code, EXIT_DATA);
    assert!(out.contains(&format!("{}:3:", data.display())), "{out}");
    assert!(out.contains("4 valid records, 1 violations"), "{out}");

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let (code, out) = cli(&["validate", p(&empty)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("0 valid records, 0 violations"));
}

#[test]
fn evaluate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "12");
    for (tag, backend) in [("base", "kind = \"bitflip\"\nrate = 0.3\nseed = 1"), ("finetuned", "kind = \"echo\"")] {
        std::fs::write(
            dir.path().join(format!("{tag}.toml")),
            format!("model_tag = \"{tag}\"\ndataset_path = \"data.jsonl\"\noutput_dir = \"runs\"\n\n[backend]\n{backend}\n"),
        )
        .unwrap();
    }
    for tag in ["base", "finetuned"] {
        let config = dir.path().join(format!("{tag}.toml"));
        let (code, out) = cli(&["evaluate", p(&config), "--format", "csv"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("12 narratives, 240 decisions"), "{out}");
        assert!(dir.path().join(format!("runs/{tag}/report.csv")).exists());
    }
    let base = dir.path().join("runs/base/report.json");
    let ft = dir.path().join("runs/finetuned/report.json");
    assert_eq!(RunReport::load(&ft).unwrap().global.macro_f1, Some(1.0));

    let (code, md) = cli(&["compare", p(&base), p(&ft)]);
    assert_eq!(code, EXIT_OK);
    assert!(md.contains("GLOBAL"));
    let csv = dir.path().join("cmp.csv");
    assert_eq!(cli(&["compare", p(&base), p(&ft), "--format", "csv", "--out", p(&csv)]).0, EXIT_OK);
    let rows = load_comparison_csv(&csv).unwrap();
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[20].label, GLOBAL_ROW);
    // identical inputs give a byte-identical table
    let again = dir.path().join("cmp2.csv");
    cli(&["compare", p(&base), p(&ft), "--format", "csv", "--out", p(&again)]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());

    // a run over different data is refused
    let other = tempfile::tempdir().unwrap();
    let data = generate(other.path(), "6");
    std::fs::write(
        other.path().join("r.toml"),
        format!("model_tag = \"base\"\ndataset_path = {:?}\n\n[backend]\nkind = \"echo\"\n", p(&data)),
    )
    .unwrap();
    cli(&["evaluate", p(&other.path().join("r.toml"))]);
    let (code, _) = cli(&["compare", p(&other.path().join("runs/base/report.json")), p(&ft)]);
    assert_eq!(code, EXIT_DATA);

    // base runs may not use the concise prompt without the override
    std::fs::write(
        dir.path().join("bad.toml"),
        "model_tag = \"base\"\nprompt_mode = \"concise\"\ndataset_path = \"data.jsonl\"\n",
    )
    .unwrap();
    assert_eq!(cli(&["evaluate", p(&dir.path().join("bad.toml"))]).0, EXIT_USAGE);
}

#[test]
fn prompt_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let narrative = dir.path().join("n.txt");
    std::fs::write(&narrative, "They called me from the bank and asked for my OTP.\n").unwrap();
    let (code, detailed) = cli(&["prompt", p(&narrative)]);
    assert_eq!(code, EXIT_OK);
    let (_, concise) = cli(&["prompt", p(&narrative), "--mode", "concise"]);
    assert!(detailed.len() > concise.len());
    assert!(concise.contains("asked for my OTP"));

    let output = dir.path().join("out.txt");
    std::fs::write(
        &output,
        "[Initial Contact]\nPresent: Yes\nReason: The caller asked for the OTP.\n\n[Fear & Intimidation]\nPresent: no\nReason: N/A",
    )
    .unwrap();
    let (code, out) = cli(&["parse", p(&output), p(&output), "--narrative", p(&narrative)]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["defaulted_labels"], 18);
    assert_eq!(lines[0]["tactical"][2], true);
    assert_eq!(lines[0]["major_tactic"], "initial_contact");
    assert_eq!(lines[0], lines[1]);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cyberlens");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["frobnicate"]), Some(2));
    assert_eq!(status(&["validate", "/nonexistent/file.jsonl"]), Some(1));
}
