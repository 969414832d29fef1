//! Offline backends used as evaluation oracles.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::AnnotationRecord;
use crate::digest::stable_hash;
use crate::prompting::{extract_narrative, render_block, render_target};
use crate::provider::{Backend, BackendFailure, GenerationConfig, ProviderKey};
use crate::taxonomy::{LabelId, NUM_LABELS};

// keyed the way `extract_narrative` returns the text
fn lookup_key(story: &str) -> String {
    story.trim_matches('\n').to_string()
}

fn gold_index(records: &[AnnotationRecord]) -> HashMap<String, usize> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| (lookup_key(r.story.as_str()), i))
        .collect()
}

/// Answers every prompt with the gold analysis block of the narrative it
/// contains. Unknown narratives get an empty reply.
#[derive(Debug, Clone)]
pub struct EchoBackend {
    targets: HashMap<String, String>,
}

impl EchoBackend {
    pub fn new(records: &[AnnotationRecord]) -> Self {
        EchoBackend {
            targets: records
                .iter()
                .map(|r| (lookup_key(r.story.as_str()), render_target(r)))
                .collect(),
        }
    }
}

impl Backend for EchoBackend {
    fn name(&self) -> &str {
        "echo"
    }

    fn complete(
        &self,
        prompt: &str,
        _config: &GenerationConfig,
        _key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        Ok(extract_narrative(prompt)
            .and_then(|n| self.targets.get(n))
            .cloned()
            .unwrap_or_default())
    }
}

/// Which of the 20 labels a [`BitFlipBackend`] flips for a narrative: each
/// independently with probability `rate`, from a generator seeded by `seed`
/// and the narrative text.
pub fn flip_mask(narrative: &str, rate: f64, seed: u64) -> [bool; NUM_LABELS] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(narrative));
    std::array::from_fn(|_| rng.random::<f64>() < rate)
}

/// Gold answers with labels flipped per [`flip_mask`]. A flipped-on label
/// gets a placeholder reason; a flipped-off label loses its reason.
#[derive(Debug, Clone)]
pub struct BitFlipBackend {
    records: Vec<AnnotationRecord>,
    index: HashMap<String, usize>,
    rate: f64,
    seed: u64,
}

pub const FLIPPED_REASON: &str = "Inserted by the bit-flip backend.";

impl BitFlipBackend {
    pub fn new(records: &[AnnotationRecord], rate: f64, seed: u64) -> Self {
        BitFlipBackend {
            records: records.to_vec(),
            index: gold_index(records),
            rate,
            seed,
        }
    }
}

impl Backend for BitFlipBackend {
    fn name(&self) -> &str {
        "bitflip"
    }

    fn complete(
        &self,
        prompt: &str,
        _config: &GenerationConfig,
        _key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        let Some(narrative) = extract_narrative(prompt) else {
            return Ok(String::new());
        };
        let Some(record) = self.index.get(narrative).map(|&i| &self.records[i]) else {
            return Ok(String::new());
        };
        let mask = flip_mask(narrative, self.rate, self.seed);
        let gold = record.presence();
        let flags: [bool; NUM_LABELS] = std::array::from_fn(|g| gold[g] ^ mask[g]);
        Ok(render_block(&flags, |g| {
            record
                .reason(LabelId::from_global(g).expect("in range"))
                .or(Some(FLIPPED_REASON))
        }))
    }
}

/// Always returns prose with no analysis sections.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnparseableBackend;

impl Backend for UnparseableBackend {
    fn name(&self) -> &str {
        "unparseable"
    }

    fn complete(
        &self,
        _prompt: &str,
        _config: &GenerationConfig,
        _key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        Ok("I am unable to analyze this narrative.".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::sample_record;
    use crate::parsing::parse_output;
    use crate::prompting::build_concise_prompt;
    use crate::provider::Secret;

    fn key() -> ProviderKey {
        ProviderKey::new("k", "offline", Secret::new(""))
    }

    #[test]
    fn echo_returns_gold_block() {
        let record = sample_record();
        let backend = EchoBackend::new(std::slice::from_ref(&record));
        let prompt = build_concise_prompt(record.story.as_str()).rendered;
        let text = backend.complete(&prompt, &GenerationConfig::default(), &key()).unwrap();
        assert_eq!(text, render_target(&record));
        assert_eq!(
            backend
                .complete("unknown", &GenerationConfig::default(), &key())
                .unwrap(),
            ""
        );
    }

    #[test]
    fn bitflip_applies_mask() {
        let record = sample_record();
        let backend = BitFlipBackend::new(std::slice::from_ref(&record), 0.5, 9);
        let prompt = build_concise_prompt(record.story.as_str()).rendered;
        let text = backend.complete(&prompt, &GenerationConfig::default(), &key()).unwrap();
        let parsed = parse_output(&text);
        let mask = flip_mask(record.story.as_str(), 0.5, 9);
        let gold = record.presence();
        for g in 0..NUM_LABELS {
            assert_eq!(parsed.labels[g].present, gold[g] ^ mask[g]);
        }
        assert_eq!(flip_mask("x", 0.0, 1), [false; NUM_LABELS]);
        assert_eq!(flip_mask("x", 1.0, 1), [true; NUM_LABELS]);
    }
}
