//! Balanced coverage of (fraud type, major tactic, major theory) triplets and
//! per-sample generation seeds.
//!
//! Every triplet gets `n_total / |C|` samples; the `n_total % |C|` leftover
//! samples go one each to triplets picked by a seeded shuffle, so counts never
//! differ by more than one.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{normalize_fraud_type, normalize_label, FraudType, LabelId, LabelKind};

/// Axes of the design space. Usually the full label space, but any subset
/// can be planned over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSpace {
    pub fraud_types: Vec<FraudType>,
    pub tactics: Vec<LabelId>,
    pub theories: Vec<LabelId>,
}

impl TripletSpace {
    pub fn full() -> Self {
        TripletSpace {
            fraud_types: FraudType::all().collect(),
            tactics: LabelId::tactics().collect(),
            theories: LabelId::theories().collect(),
        }
    }

    /// First `n` entries of each axis.
    pub fn reduced(fraud_types: usize, tactics: usize, theories: usize) -> Self {
        TripletSpace {
            fraud_types: FraudType::all().take(fraud_types).collect(),
            tactics: LabelId::tactics().take(tactics).collect(),
            theories: LabelId::theories().take(theories).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.fraud_types.len() * self.tactics.len() * self.theories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lexicographic by (fraud type, tactic, theory).
    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.len());
        for &fraud_type in &self.fraud_types {
            for &major_tactic in &self.tactics {
                for &major_theory in &self.theories {
                    out.push(Triplet {
                        fraud_type,
                        major_tactic,
                        major_theory,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub fraud_type: FraudType,
    pub major_tactic: LabelId,
    pub major_theory: LabelId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanEntry {
    pub triplet: Triplet,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletPlan {
    pub entries: Vec<PlanEntry>,
    pub total: u64,
}

impl TripletPlan {
    /// Per-fraud-type totals, in the order fraud types first appear.
    pub fn fraud_type_marginals(&self) -> Vec<(FraudType, u64)> {
        let mut out: Vec<(FraudType, u64)> = Vec::new();
        for entry in &self.entries {
            match out.iter_mut().find(|(ft, _)| *ft == entry.triplet.fraud_type) {
                Some((_, total)) => *total += entry.count,
                None => out.push((entry.triplet.fraud_type, entry.count)),
            }
        }
        out
    }
}

pub fn plan_triplets(n_total: u64, space: &TripletSpace, rng_seed: u64) -> TripletPlan {
    let triplets = space.triplets();
    if triplets.is_empty() {
        return TripletPlan {
            entries: Vec::new(),
            total: 0,
        };
    }
    let cells = triplets.len() as u64;
    let base = n_total / cells;
    let remainder = (n_total % cells) as usize;

    let mut order: Vec<usize> = (0..triplets.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let mut counts = vec![base; triplets.len()];
    for &cell in &order[..remainder] {
        counts[cell] += 1;
    }

    TripletPlan {
        entries: triplets
            .into_iter()
            .zip(counts)
            .map(|(triplet, count)| PlanEntry { triplet, count })
            .collect(),
        total: n_total,
    }
}

/// Conditioning for one synthetic sample. Its token is embedded verbatim in
/// the generation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenerationSeed {
    pub fraud_type: FraudType,
    pub major_tactic: LabelId,
    pub major_theory: LabelId,
    pub sample_index: u64,
    pub nonce: u64,
}

impl GenerationSeed {
    pub fn triplet(&self) -> Triplet {
        Triplet {
            fraud_type: self.fraud_type,
            major_tactic: self.major_tactic,
            major_theory: self.major_theory,
        }
    }

    pub fn token(&self) -> String {
        self.to_string()
    }

    /// Inverse of [`GenerationSeed::token`]; looks for the token anywhere in
    /// `text`.
    pub fn find_in(text: &str) -> Option<Self> {
        let start = text.find(SEED_PREFIX)?;
        let rest = &text[start + SEED_PREFIX.len()..];
        let token = rest.split_whitespace().next()?;
        let mut parts = token.split('|');
        let fraud_type = normalize_fraud_type(parts.next()?).ok()?;
        let major_tactic = normalize_label(parts.next()?)
            .ok()
            .filter(|id| id.kind() == LabelKind::Tactic)?;
        let major_theory = normalize_label(parts.next()?)
            .ok()
            .filter(|id| id.kind() == LabelKind::Theory)?;
        let sample_index = parts.next()?.parse().ok()?;
        let nonce = u64::from_str_radix(parts.next()?, 16).ok()?;
        parts.next().is_none().then_some(GenerationSeed {
            fraud_type,
            major_tactic,
            major_theory,
            sample_index,
            nonce,
        })
    }
}

const SEED_PREFIX: &str = "seed:";

impl fmt::Display for GenerationSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{SEED_PREFIX}{}|{}|{}|{}|{:016x}",
            self.fraud_type.id(),
            self.major_tactic.id(),
            self.major_theory.id(),
            self.sample_index,
            self.nonce
        )
    }
}

/// One seed per planned sample, in plan order.
pub fn seeds_for_plan(plan: &TripletPlan, rng_seed: u64) -> Vec<GenerationSeed> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds = Vec::with_capacity(plan.total as usize);
    for entry in &plan.entries {
        for _ in 0..entry.count {
            seeds.push(GenerationSeed {
                fraud_type: entry.triplet.fraud_type,
                major_tactic: entry.triplet.major_tactic,
                major_theory: entry.triplet.major_theory,
                sample_index: seeds.len() as u64,
                nonce: rng.random(),
            });
        }
    }
    seeds
}

#[derive(Serialize, Deserialize)]
struct PlanRow {
    fraud_type: String,
    major_tactic: String,
    major_theory: String,
    count: u64,
}

/// One JSON object per triplet.
pub fn write_plan(plan: &TripletPlan, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for entry in &plan.entries {
        let row = PlanRow {
            fraud_type: entry.triplet.fraud_type.id().to_string(),
            major_tactic: entry.triplet.major_tactic.id().to_string(),
            major_theory: entry.triplet.major_theory.id().to_string(),
            count: entry.count,
        };
        let line = serde_json::to_string(&row).expect("plan row serializes");
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_plan(path: &Path) -> Result<TripletPlan> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: index + 1,
            message,
        };
        let row: PlanRow = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let fraud_type =
            normalize_fraud_type(&row.fraud_type).map_err(|e| malformed(e.to_string()))?;
        let major_tactic = normalize_label(&row.major_tactic)
            .ok()
            .filter(|id| id.kind() == LabelKind::Tactic)
            .ok_or_else(|| malformed(format!("not a tactic: {}", row.major_tactic)))?;
        let major_theory = normalize_label(&row.major_theory)
            .ok()
            .filter(|id| id.kind() == LabelKind::Theory)
            .ok_or_else(|| malformed(format!("not a theory: {}", row.major_theory)))?;
        entries.push(PlanEntry {
            triplet: Triplet {
                fraud_type,
                major_tactic,
                major_theory,
            },
            count: row.count,
        });
    }
    let total = entries.iter().map(|e| e.count).sum();
    Ok(TripletPlan { entries, total })
}
