use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{f1_score, MetricsError};

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(matches: usize, candidate: usize, reference: usize) -> Self {
        let ratio = |den: usize| if den == 0 { 0.0 } else { matches as f64 / den as f64 };
        let (precision, recall) = (ratio(candidate), ratio(reference));
        Prf {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    const ONE: Prf = Prf {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Matches clipped by the reference multiplicity.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let matches = c
        .iter()
        .map(|(gram, count)| (*count).min(r.get(gram).copied().unwrap_or(0)))
        .sum();
    (
        matches,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

fn tokens_pair(candidate: &str, reference: &str) -> Result<(Vec<String>, Vec<String>), MetricsError> {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    if c.is_empty() || r.is_empty() {
        return Err(MetricsError::EmptyText);
    }
    Ok((c, r))
}

/// N-gram overlap. When neither text is long enough for order `n`, identical
/// texts score 1 and different texts 0.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<Prf, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidInput("n-gram order must be at least 1".into()));
    }
    let (c, r) = tokens_pair(candidate, reference)?;
    let (matches, c_total, r_total) = clipped_matches(&c, &r, n);
    if c_total == 0 && r_total == 0 {
        return Ok(if c == r { Prf::ONE } else { Prf::default() });
    }
    Ok(Prf::from_counts(matches, c_total, r_total))
}

pub(crate) fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diagonal = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diagonal + 1 } else { above.max(row[j]) };
            diagonal = above;
        }
    }
    row[b.len()]
}

/// Longest-common-subsequence overlap.
pub fn rouge_l(candidate: &str, reference: &str) -> Result<Prf, MetricsError> {
    let (c, r) = tokens_pair(candidate, reference)?;
    Ok(Prf::from_counts(lcs_len(&c, &r), c.len(), r.len()))
}

/// Geometric mean of clipped n-gram precisions (orders 1..=max_n) times the
/// brevity penalty. Orders 2 and up use add-one smoothing.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> Result<f64, MetricsError> {
    if max_n == 0 {
        return Err(MetricsError::InvalidInput("max_n must be at least 1".into()));
    }
    let (c, r) = tokens_pair(candidate, reference)?;
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (matches, total, _) = clipped_matches(&c, &r, n);
        let p = if n == 1 {
            matches as f64 / total as f64
        } else {
            (matches as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    let brevity = if c.len() < r.len() {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    Ok((brevity * (log_sum / max_n as f64).exp()).min(1.0))
}

/// Token embedding source for [`embed_similarity`].
pub trait Embedder: Send + Sync {
    /// One vector per token, all of the same dimension.
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricsError>;
}

/// Character-trigram feature hashing. Context-free, so identical tokens
/// always embed identically; a stand-in when no learned embedder is
/// configured.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: 256 }
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricsError> {
        if self.dim == 0 {
            return Err(MetricsError::EmbedderUnavailable("zero dimension".into()));
        }
        Ok(tokens
            .iter()
            .map(|token| {
                let padded: Vec<char> = format!("#{token}#").chars().collect();
                let mut v = vec![0.0; self.dim];
                for gram in padded.windows(3.min(padded.len())) {
                    let text: String = gram.iter().collect();
                    let bucket = crate::digest::stable_hash(&text) as usize % self.dim;
                    v[bucket] += 1.0;
                }
                v
            })
            .collect())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Greedy matching: recall averages, over reference tokens, the best cosine
/// to any candidate token; precision does the same from the candidate side.
/// Negative cosines count as 0.
pub fn embed_similarity(
    candidate: &str,
    reference: &str,
    embedder: &dyn Embedder,
) -> Result<Prf, MetricsError> {
    let (c, r) = tokens_pair(candidate, reference)?;
    let ce = embedder.embed(&c)?;
    let re = embedder.embed(&r)?;
    if ce.len() != c.len() || re.len() != r.len() {
        return Err(MetricsError::EmbedderUnavailable("wrong number of vectors".into()));
    }
    let greedy = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|x| to.iter().map(|y| cosine(x, y)).fold(0.0, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    let precision = greedy(&ce, &re);
    let recall = greedy(&re, &ce);
    Ok(Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub bleu: f64,
    pub embed_f1: Option<f64>,
}

/// All similarity scores for one pair. `EmptyText` when either side has no
/// tokens; callers decide whether that counts as zero.
pub fn similarity_scores(
    candidate: &str,
    reference: &str,
    embedder: Option<&dyn Embedder>,
) -> Result<SimilarityScores, MetricsError> {
    Ok(SimilarityScores {
        rouge1: rouge_n(candidate, reference, 1)?,
        rouge2: rouge_n(candidate, reference, 2)?,
        rouge_l: rouge_l(candidate, reference)?,
        bleu: bleu(candidate, reference, 4)?,
        embed_f1: match embedder {
            Some(e) => match embed_similarity(candidate, reference, e) {
                Ok(prf) => Some(prf.f1),
                Err(MetricsError::EmbedderUnavailable(why)) => {
                    log::warn!("embedding similarity skipped: {why}");
                    None
                }
                Err(other) => return Err(other),
            },
            None => None,
        },
    })
}
