#![allow(dead_code)]

use cyberlens::corpus::{AnnotationRecord, NarrativeText, Provenance};
use cyberlens::taxonomy::{FraudType, LabelId, NUM_FRAUD_TYPES, NUM_LABELS, NUM_TACTICS, NUM_THEORIES};
use rand::seq::IndexedRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "caller", "bank", "otp", "urgent", "police", "parcel", "crypto", "refund", "link", "account",
    "verify", "threat", "prize", "loan", "video", "arrest", "investment", "friend", "customs", "wallet",
    "[note]", "(aside)", "n/a-ish", "yes-man", "\"quoted\"", "50%", "Rs.", "x-ray",
];

fn words(rng: &mut impl Rng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A valid record with random flags and word-salad reasons. Majors are
/// forced present.
pub fn random_record(rng: &mut impl Rng, index: usize) -> AnnotationRecord {
    let mut flags: [bool; NUM_LABELS] = std::array::from_fn(|_| rng.random_bool(0.4));
    let mt = rng.random_range(0..NUM_TACTICS);
    let mth = rng.random_range(0..NUM_THEORIES);
    flags[mt] = true;
    flags[NUM_TACTICS + mth] = true;
    let mut reasons: Vec<Option<String>> = Vec::with_capacity(NUM_LABELS);
    for &on in &flags {
        reasons.push(on.then(|| format!("because {}", words(rng, 1, 12))));
    }
    let tactic_reason: [Option<String>; NUM_TACTICS] = std::array::from_fn(|i| reasons[i].clone());
    let theory_reason: [Option<String>; NUM_THEORIES] =
        std::array::from_fn(|i| reasons[NUM_TACTICS + i].clone());
    AnnotationRecord {
        story: NarrativeText::new(format!("Case {index}. {}", words(rng, 5, 60))).unwrap(),
        fraud_type: FraudType::new(rng.random_range(0..NUM_FRAUD_TYPES)).unwrap(),
        tactic_present: std::array::from_fn(|i| flags[i]),
        tactic_reason,
        theory_present: std::array::from_fn(|i| flags[NUM_TACTICS + i]),
        theory_reason,
        major_tactic: LabelId::tactic(mt).unwrap(),
        major_theory: LabelId::theory(mth).unwrap(),
        provenance: Provenance::default(),
    }
}

/// Confusion counts and ratios computed from flag vectors alone.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Tally {
    pub fn add(&mut self, pred: bool, gold: bool) {
        match (pred, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> Option<f64> {
        (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
    }
}

/// Brute-force scorer: one tally per label plus the pooled tally.
pub fn score(pred: &[[bool; NUM_LABELS]], gold: &[[bool; NUM_LABELS]]) -> ([Tally; NUM_LABELS], Tally) {
    assert_eq!(pred.len(), gold.len());
    let mut per = [Tally::default(); NUM_LABELS];
    let mut pooled = Tally::default();
    for (p, g) in pred.iter().zip(gold) {
        for l in 0..NUM_LABELS {
            per[l].add(p[l], g[l]);
            pooled.add(p[l], g[l]);
        }
    }
    (per, pooled)
}

/// Longest common subsequence by enumerating every subsequence of `a`.
/// Only for short inputs.
pub fn brute_lcs(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 16);
    let is_subsequence = |picked: &[&String]| {
        let mut it = b.iter();
        picked.iter().all(|w| it.any(|x| x == *w))
    };
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let picked: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
            is_subsequence(&picked).then_some(picked.len())
        })
        .max()
        .unwrap_or(0)
}
