//! Classification statistics, interval estimates and explanation similarity.

mod similarity;

pub use similarity::{
    bleu, embed_similarity, rouge_l, rouge_n, similarity_scores, tokenize, Embedder,
    HashingEmbedder, Prf, SimilarityScores,
};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no decisions to score")]
    EmptyCounts,
    #[error("base rate is zero; relative change undefined")]
    ZeroBaseRate,
    #[error("text has no tokens")]
    EmptyText,
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("nothing to average")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// z for a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Tp,
    Fp,
    Tn,
    Fn,
}

pub fn classify_pair(pred: bool, gold: bool) -> Outcome {
    match (pred, gold) {
        (true, true) => Outcome::Tp,
        (true, false) => Outcome::Fp,
        (false, false) => Outcome::Tn,
        (false, true) => Outcome::Fn,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Tp => self.tp += 1,
            Outcome::Fp => self.fp += 1,
            Outcome::Tn => self.tn += 1,
            Outcome::Fn => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Gold positives.
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.tn + o.tn, self.fn_ + o.fn_)
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// Adds `(pred, gold)` pairs to `counts`.
pub fn accumulate(
    mut counts: ConfusionCounts,
    pairs: impl IntoIterator<Item = (bool, bool)>,
) -> ConfusionCounts {
    for (pred, gold) in pairs {
        counts.record(classify_pair(pred, gold));
    }
    counts
}

/// Ratios are `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub hallucination_rate: Option<f64>,
    pub pr_product: Option<f64>,
    pub support: u64,
}

/// Share of positive predictions that are wrong. Written as `1 - precision`
/// so the two always sum to exactly 1.
pub fn hallucination_rate(precision: f64) -> f64 {
    1.0 - precision
}

pub fn pr_product(precision: f64, recall: f64) -> f64 {
    precision * recall
}

/// Harmonic mean; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn label_metrics(c: &ConfusionCounts) -> Result<LabelMetrics, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let both = precision.zip(recall);
    Ok(LabelMetrics {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        precision,
        recall,
        f1: both.map(|(p, r)| f1_score(p, r)),
        hallucination_rate: precision.map(hallucination_rate),
        pr_product: both.map(|(p, r)| pr_product(p, r)),
        support: c.support(),
    })
}

/// Relative change `(base - ft) / base` in percent.
pub fn hallucination_reduction(base_rate: f64, ft_rate: f64) -> Result<f64, MetricsError> {
    if base_rate <= 0.0 {
        return Err(MetricsError::ZeroBaseRate);
    }
    Ok((base_rate - ft_rate) / base_rate * 100.0)
}

/// Pools the counts of all labels, then scores the pool.
pub fn micro_aggregate(per_label: &[ConfusionCounts]) -> Result<LabelMetrics, MetricsError> {
    if per_label.is_empty() {
        return Err(MetricsError::EmptyCounts);
    }
    label_metrics(&per_label.iter().copied().sum())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedPolicy {
    /// Leave undefined values out of the mean.
    #[default]
    Exclude,
    /// Count undefined values as 0.
    Zero,
}

/// Unweighted mean of per-label F1.
pub fn macro_f1(f1s: &[Option<f64>], policy: UndefinedPolicy) -> Result<f64, MetricsError> {
    let undefined = f1s.iter().filter(|v| v.is_none()).count();
    let values: Vec<f64> = match policy {
        UndefinedPolicy::Exclude => {
            if undefined > 0 {
                log::warn!("macro F1: excluding {undefined} undefined label scores");
            }
            f1s.iter().flatten().copied().collect()
        }
        UndefinedPolicy::Zero => f1s.iter().map(|v| v.unwrap_or(0.0)).collect(),
    };
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: u64,
}

/// `SE = sqrt(F(1-F)/n)` and `F ± 1.96 SE`, clamped to `[0, 1]`.
pub fn f1_interval(f1: f64, n: u64) -> Result<IntervalEstimate, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidInput("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&f1) {
        return Err(MetricsError::InvalidInput(format!("{f1} is not a ratio")));
    }
    let se = (f1 * (1.0 - f1) / n as f64).sqrt();
    Ok(IntervalEstimate {
        point: f1,
        se,
        lo: (f1 - Z_95 * se).clamp(0.0, 1.0),
        hi: (f1 + Z_95 * se).clamp(0.0, 1.0),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "***")]
    P001,
    #[serde(rename = "**")]
    P01,
    #[serde(rename = "*")]
    P05,
    #[serde(rename = "†")]
    P10,
    #[serde(rename = "n.s.")]
    NotSignificant,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Significance::P001
        } else if p < 0.01 {
            Significance::P01
        } else if p < 0.05 {
            Significance::P05
        } else if p < 0.10 {
            Significance::P10
        } else {
            Significance::NotSignificant
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Significance::P001 => "***",
            Significance::P01 => "**",
            Significance::P05 => "*",
            Significance::P10 => "†",
            Significance::NotSignificant => "n.s.",
        }
    }
}

impl std::fmt::Display for Significance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTest {
    pub z: f64,
    pub p: f64,
    pub marker: Significance,
}

/// Two-sided z-test on the difference of two F1 scores, each with the
/// binomial standard error over `n` narratives.
pub fn significance_test(f1_base: f64, f1_ft: f64, n: u64) -> Result<SignificanceTest, MetricsError> {
    let base = f1_interval(f1_base, n)?;
    let ft = f1_interval(f1_ft, n)?;
    let delta = (f1_ft - f1_base).abs();
    let se = (base.se.powi(2) + ft.se.powi(2)).sqrt();
    let z = if delta == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        delta / se
    };
    // two-sided normal tail: 2 * (1 - Phi(z)) = erfc(z / sqrt 2)
    let p = if z.is_infinite() { 0.0 } else { erfc(z / std::f64::consts::SQRT_2) };
    Ok(SignificanceTest {
        z,
        p,
        marker: Significance::from_p(p),
    })
}

pub fn significance_marker(f1_base: f64, f1_ft: f64, n: u64) -> Result<Significance, MetricsError> {
    significance_test(f1_base, f1_ft, n).map(|t| t.marker)
}
