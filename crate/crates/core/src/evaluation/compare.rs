use serde::{Deserialize, Serialize};

use super::RunReport;
use crate::error::{Error, Result};
use crate::metrics::{significance_test, LabelMetrics, Significance};

/// `label` value of the pooled row.
pub const GLOBAL_ROW: &str = "global";

/// One label (or the pooled row), base against fine-tuned. Flat so it maps
/// one-to-one onto a CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub support: u64,
    pub base_accuracy: f64,
    pub ft_accuracy: f64,
    pub delta_accuracy: f64,
    pub base_precision: Option<f64>,
    pub ft_precision: Option<f64>,
    pub base_recall: Option<f64>,
    pub ft_recall: Option<f64>,
    pub base_f1: Option<f64>,
    pub ft_f1: Option<f64>,
    pub delta_f1: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub significance: Option<Significance>,
    pub base_hallucination: Option<f64>,
    pub ft_hallucination: Option<f64>,
    pub hallucination_abs_change: Option<f64>,
    /// Percent, relative to the base rate.
    pub hallucination_rel_change: Option<f64>,
    pub base_pr_product: Option<f64>,
    pub ft_pr_product: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset_hash: String,
    pub base_config_hash: String,
    pub ft_config_hash: String,
    pub narratives: usize,
    pub base_macro_f1: Option<f64>,
    pub ft_macro_f1: Option<f64>,
    /// 20 label rows in canonical order, then the global row.
    pub rows: Vec<ComparisonRow>,
}

fn row(label: String, base: &LabelMetrics, ft: &LabelMetrics, n: u64) -> Result<ComparisonRow> {
    let diff = |b: Option<f64>, f: Option<f64>| b.zip(f).map(|(b, f)| f - b);
    let test = base
        .f1
        .zip(ft.f1)
        .map(|(b, f)| significance_test(b, f, n))
        .transpose()?;
    let rel = base
        .hallucination_rate
        .zip(ft.hallucination_rate)
        .filter(|(b, _)| *b > 0.0)
        .map(|(b, f)| (f - b) / b * 100.0);
    Ok(ComparisonRow {
        label,
        support: base.support,
        base_accuracy: base.accuracy,
        ft_accuracy: ft.accuracy,
        delta_accuracy: ft.accuracy - base.accuracy,
        base_precision: base.precision,
        ft_precision: ft.precision,
        base_recall: base.recall,
        ft_recall: ft.recall,
        base_f1: base.f1,
        ft_f1: ft.f1,
        delta_f1: diff(base.f1, ft.f1),
        z: test.map(|t| t.z),
        p_value: test.map(|t| t.p),
        significance: test.map(|t| t.marker),
        base_hallucination: base.hallucination_rate,
        ft_hallucination: ft.hallucination_rate,
        hallucination_abs_change: diff(base.hallucination_rate, ft.hallucination_rate),
        hallucination_rel_change: rel,
        base_pr_product: base.pr_product,
        ft_pr_product: ft.pr_product,
    })
}

/// Per-label and pooled deltas. Both runs must have scored the same
/// dataset.
pub fn compare_runs(base: &RunReport, ft: &RunReport) -> Result<ComparisonReport> {
    if base.metadata.dataset_hash != ft.metadata.dataset_hash {
        return Err(Error::DatasetMismatch {
            base: base.metadata.dataset_hash.clone(),
            finetuned: ft.metadata.dataset_hash.clone(),
        });
    }
    let n = base.metadata.narratives as u64;
    let mut rows = Vec::with_capacity(base.labels.len() + 1);
    for (b, f) in base.labels.iter().zip(&ft.labels) {
        rows.push(row(b.label.id().to_string(), &b.metrics, &f.metrics, n)?);
    }
    rows.push(row(
        GLOBAL_ROW.to_string(),
        &base.global.metrics,
        &ft.global.metrics,
        n,
    )?);
    Ok(ComparisonReport {
        dataset_hash: base.metadata.dataset_hash.clone(),
        base_config_hash: base.metadata.config_hash.clone(),
        ft_config_hash: ft.metadata.config_hash.clone(),
        narratives: base.metadata.narratives,
        base_macro_f1: base.global.macro_f1,
        ft_macro_f1: ft.global.macro_f1,
        rows,
    })
}
