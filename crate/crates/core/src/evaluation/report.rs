use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use super::{ComparisonReport, ComparisonRow, RunReport, GLOBAL_ROW};
use crate::error::{Error, Result};
use crate::metrics::SimilarityScores;
use crate::taxonomy::normalize_label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    JsonLines,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::JsonLines => "jsonl",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" | "jsonl" | "jsonlines" => Ok(ReportFormat::JsonLines),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

fn signed(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.2}"))
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.1}%"))
}

fn display_label(id: &str) -> String {
    if id == GLOBAL_ROW {
        "GLOBAL".to_string()
    } else {
        normalize_label(id).map_or_else(|_| id.to_string(), |l| l.display_name().to_string())
    }
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_lines(lines: impl IntoIterator<Item = serde_json::Value>) -> String {
    lines
        .into_iter()
        .map(|v| serde_json::to_string(&v).expect("json serializes") + "\n")
        .collect()
}

pub fn render_comparison(report: &ComparisonReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => csv_string(&report.rows),
        ReportFormat::JsonLines => Ok(json_lines(
            std::iter::once(json!({
                "kind": "meta",
                "dataset_hash": report.dataset_hash,
                "base_config_hash": report.base_config_hash,
                "ft_config_hash": report.ft_config_hash,
                "narratives": report.narratives,
                "base_macro_f1": report.base_macro_f1,
                "ft_macro_f1": report.ft_macro_f1,
            }))
            .chain(report.rows.iter().map(|r| {
                let mut v = serde_json::to_value(r).expect("row serializes");
                v.as_object_mut()
                    .expect("row is an object")
                    .insert("kind".into(), json!("row"));
                v
            })),
        )),
        ReportFormat::Markdown => Ok(comparison_markdown(report)),
    }
}

fn comparison_markdown(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Base vs. fine-tuned\n\nNarratives: {}. Dataset: `{}`.\n\nMacro F1: base {}, fine-tuned {}.\n",
        report.narratives,
        &report.dataset_hash[..report.dataset_hash.len().min(12)],
        ratio(report.base_macro_f1),
        ratio(report.ft_macro_f1),
    );
    out.push_str("## Classification\n\n| Label | Acc (base) | Acc (FT) | Δ Acc | F1 (base) | F1 (FT) | Δ F1 | Sig. |\n|---|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            display_label(&r.label),
            ratio(Some(r.base_accuracy)),
            ratio(Some(r.ft_accuracy)),
            signed(Some(r.delta_accuracy)),
            ratio(r.base_f1),
            ratio(r.ft_f1),
            signed(r.delta_f1),
            r.significance.map_or("n/a", |s| s.as_str()),
        );
    }
    out.push_str("\nSignificance: *** p < 0.001, ** p < 0.01, * p < 0.05, † p < 0.10, n.s. otherwise.\n\n");
    out.push_str("## Hallucination rate\n\n| Label | Base | FT | Abs. change | Rel. change |\n|---|---|---|---|---|\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            display_label(&r.label),
            ratio(r.base_hallucination),
            ratio(r.ft_hallucination),
            signed(r.hallucination_abs_change),
            percent(r.hallucination_rel_change),
        );
    }
    out.push_str("\n## Precision-recall product\n\n| Label | P (base) | R (base) | P·R (base) | P (FT) | R (FT) | P·R (FT) |\n|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            display_label(&r.label),
            ratio(r.base_precision),
            ratio(r.base_recall),
            ratio(r.base_pr_product),
            ratio(r.ft_precision),
            ratio(r.ft_recall),
            ratio(r.ft_pr_product),
        );
    }
    out
}

#[derive(Serialize)]
struct RunCsvRow {
    label: String,
    tp: u64,
    fp: u64,
    tn: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    support: u64,
    accuracy: f64,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    f1_se: Option<f64>,
    f1_ci_lo: Option<f64>,
    f1_ci_hi: Option<f64>,
    hallucination_rate: Option<f64>,
    pr_product: Option<f64>,
    tp_reason_pairs: u64,
    rouge1_f1: Option<f64>,
    rouge2_f1: Option<f64>,
    rouge_l_f1: Option<f64>,
    bleu: Option<f64>,
    embed_f1: Option<f64>,
}

fn similarity_columns(s: Option<&SimilarityScores>) -> [Option<f64>; 5] {
    [
        s.map(|s| s.rouge1.f1),
        s.map(|s| s.rouge2.f1),
        s.map(|s| s.rouge_l.f1),
        s.map(|s| s.bleu),
        s.and_then(|s| s.embed_f1),
    ]
}

fn run_rows(report: &RunReport) -> Vec<RunCsvRow> {
    let mut rows: Vec<RunCsvRow> = report
        .labels
        .iter()
        .map(|l| {
            let [r1, r2, rl, b, e] = similarity_columns(l.similarity.as_ref());
            RunCsvRow {
                label: l.label.id().to_string(),
                tp: l.counts.tp,
                fp: l.counts.fp,
                tn: l.counts.tn,
                fn_: l.counts.fn_,
                support: l.metrics.support,
                accuracy: l.metrics.accuracy,
                precision: l.metrics.precision,
                recall: l.metrics.recall,
                f1: l.metrics.f1,
                f1_se: l.interval.map(|i| i.se),
                f1_ci_lo: l.interval.map(|i| i.lo),
                f1_ci_hi: l.interval.map(|i| i.hi),
                hallucination_rate: l.metrics.hallucination_rate,
                pr_product: l.metrics.pr_product,
                tp_reason_pairs: l.tp_reason_pairs,
                rouge1_f1: r1,
                rouge2_f1: r2,
                rouge_l_f1: rl,
                bleu: b,
                embed_f1: e,
            }
        })
        .collect();
    let g = &report.global;
    let [r1, r2, rl, b, e] = similarity_columns(g.similarity.as_ref());
    rows.push(RunCsvRow {
        label: GLOBAL_ROW.to_string(),
        tp: g.counts.tp,
        fp: g.counts.fp,
        tn: g.counts.tn,
        fn_: g.counts.fn_,
        support: g.metrics.support,
        accuracy: g.metrics.accuracy,
        precision: g.metrics.precision,
        recall: g.metrics.recall,
        f1: g.metrics.f1,
        f1_se: None,
        f1_ci_lo: None,
        f1_ci_hi: None,
        hallucination_rate: g.metrics.hallucination_rate,
        pr_product: g.metrics.pr_product,
        tp_reason_pairs: g.tp_reason_pairs,
        rouge1_f1: r1,
        rouge2_f1: r2,
        rouge_l_f1: rl,
        bleu: b,
        embed_f1: e,
    });
    rows
}

pub fn render_run(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => csv_string(&run_rows(report)),
        ReportFormat::JsonLines => Ok(json_lines(
            std::iter::once(json!({"kind": "meta", "metadata": report.metadata}))
                .chain(report.labels.iter().map(|l| json!({"kind": "label", "report": l})))
                .chain(std::iter::once(json!({"kind": "global", "report": report.global}))),
        )),
        ReportFormat::Markdown => {
            let m = &report.metadata;
            let mut out = String::new();
            let _ = writeln!(
                out,
                "# Evaluation: {:?} model, {:?} prompt, {} backend\n\nNarratives: {} ({} failed). Decisions: {}. Unparsed label sections: {}.\n",
                m.model_tag, m.prompt_mode, m.backend, m.narratives, m.failed_narratives, report.global.decisions, m.defaulted_labels
            );
            out.push_str("| Label | Support | Acc | P | R | F1 | 95% CI | Halluc. | TP pairs | ROUGE-1 | ROUGE-L | BLEU |\n|---|---|---|---|---|---|---|---|---|---|---|---|\n");
            for row in run_rows(report) {
                let ci = row
                    .f1_ci_lo
                    .zip(row.f1_ci_hi)
                    .map_or_else(|| "n/a".to_string(), |(lo, hi)| format!("[{lo:.2}, {hi:.2}]"));
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                    display_label(&row.label),
                    row.support,
                    ratio(Some(row.accuracy)),
                    ratio(row.precision),
                    ratio(row.recall),
                    ratio(row.f1),
                    ci,
                    ratio(row.hallucination_rate),
                    row.tp_reason_pairs,
                    ratio(row.rouge1_f1),
                    ratio(row.rouge_l_f1),
                    ratio(row.bleu),
                );
            }
            let _ = writeln!(out, "\nMacro F1: {}.", ratio(report.global.macro_f1));
            Ok(out)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_comparison(report: &ComparisonReport, format: ReportFormat, path: &Path) -> Result<()> {
    write(path, &render_comparison(report, format)?)
}

pub fn emit_run(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    write(path, &render_run(report, format)?)
}

/// Reads comparison rows written in CSV form.
pub fn load_comparison_csv(path: &Path) -> Result<Vec<ComparisonRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<ComparisonRow>, _>>()
        .map_err(|e| Error::parse(path, e))
}
