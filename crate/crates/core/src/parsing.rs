//! Extraction of per-label decisions from free-form model output.
//!
//! For every label the parser looks for
//! `[<label>] <ws> Present: <value> <ws> Reason: <text>` (case-insensitive,
//! `.` matching newlines). A value containing "yes" means present; anything
//! else, including "no", "n/a" and unrecognized values, means absent. The
//! reason runs until the next known label header. Labels with no match are
//! recorded as absent with the reason "Parsing Failed".

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::taxonomy::{LabelId, LabelKind, NUM_LABELS, NUM_TACTICS, NUM_THEORIES};

pub const PARSING_FAILED: &str = "Parsing Failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Matched,
    Defaulted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelParse {
    pub present: bool,
    pub reason: String,
    pub status: ParseStatus,
}

impl LabelParse {
    fn defaulted() -> Self {
        LabelParse {
            present: false,
            reason: PARSING_FAILED.to_string(),
            status: ParseStatus::Defaulted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedOutput {
    /// Canonical label order.
    pub labels: Vec<LabelParse>,
    pub raw_text: String,
}

impl ParsedOutput {
    pub fn get(&self, label: LabelId) -> &LabelParse {
        &self.labels[label.global_index()]
    }

    pub fn present(&self, label: LabelId) -> bool {
        self.get(label).present
    }

    pub fn reason(&self, label: LabelId) -> &str {
        &self.get(label).reason
    }

    pub fn presence(&self) -> [bool; NUM_LABELS] {
        std::array::from_fn(|g| self.labels[g].present)
    }

    pub fn defaulted_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| l.status == ParseStatus::Defaulted)
            .count()
    }

    /// What an empty or failed generation parses to.
    pub fn all_defaulted(raw_text: impl Into<String>) -> Self {
        ParsedOutput {
            labels: vec![LabelParse::defaulted(); NUM_LABELS],
            raw_text: raw_text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionVectors {
    pub tactical: [bool; NUM_TACTICS],
    pub behavioral: [bool; NUM_THEORIES],
    pub major_tactic: Option<LabelId>,
    pub major_theory: Option<LabelId>,
}

struct Patterns {
    sections: Vec<Regex>,
    header: Regex,
}

/// Alternation over every surface form of the given labels, longest first.
fn header_alternation(labels: impl Iterator<Item = LabelId>) -> String {
    let forms: BTreeSet<String> = labels
        .flat_map(|l| l.def().surface_forms())
        .map(regex::escape)
        .collect();
    let mut forms: Vec<String> = forms.into_iter().collect();
    forms.sort_by_key(|f| std::cmp::Reverse(f.len()));
    forms.join("|")
}

fn patterns() -> &'static Patterns {
    static PATTERNS: OnceLock<Patterns> = OnceLock::new();
    PATTERNS.get_or_init(|| Patterns {
        sections: LabelId::all()
            .map(|label| {
                let alt = header_alternation(std::iter::once(label));
                Regex::new(&format!(
                    r"(?is)\[\s*(?:{alt})\s*\]\s*Present:\s*(.*?)\s*Reason:\s*(.*)"
                ))
                .expect("section pattern compiles")
            })
            .collect(),
        header: Regex::new(&format!(
            r"(?i)\[\s*(?:{})\s*\]",
            header_alternation(LabelId::all())
        ))
        .expect("header pattern compiles"),
    })
}

/// Maps a raw Present value. "yes" is checked first, so "Yes/No" counts as
/// present.
pub fn present_value(raw: &str) -> bool {
    raw.to_lowercase().contains("yes")
}

/// Never fails; see the module docs for the rules.
pub fn parse_output(text: &str) -> ParsedOutput {
    let p = patterns();
    let labels = p
        .sections
        .iter()
        .map(|re| match re.captures(text) {
            Some(caps) => {
                let present_raw = caps.get(1).map_or("", |m| m.as_str());
                let tail = caps.get(2).map_or("", |m| m.as_str());
                let reason = match p.header.find(tail) {
                    Some(next) => &tail[..next.start()],
                    None => tail,
                };
                LabelParse {
                    present: present_value(present_raw),
                    reason: reason.trim().to_string(),
                    status: ParseStatus::Matched,
                }
            }
            None => LabelParse::defaulted(),
        })
        .collect();
    ParsedOutput {
        labels,
        raw_text: text.to_string(),
    }
}

/// Flags in canonical order; majors unset.
pub fn to_vectors(parsed: &ParsedOutput) -> PredictionVectors {
    PredictionVectors {
        tactical: std::array::from_fn(|i| parsed.labels[i].present),
        behavioral: std::array::from_fn(|i| parsed.labels[NUM_TACTICS + i].present),
        major_tactic: None,
        major_theory: None,
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Share of the reason's distinct tokens that also occur in the narrative.
/// Empty reason scores 0.
pub fn alignment(reason: &str, narrative: &str) -> f64 {
    let reason_tokens: BTreeSet<String> = tokens(reason).collect();
    if reason_tokens.is_empty() {
        return 0.0;
    }
    let narrative_tokens: BTreeSet<String> = tokens(narrative).collect();
    reason_tokens.intersection(&narrative_tokens).count() as f64 / reason_tokens.len() as f64
}

/// Major label per dimension under an arbitrary reason score: the highest
/// scoring present label, earliest canonical index on ties.
pub fn select_major_by(
    parsed: &ParsedOutput,
    score: impl Fn(&str) -> f64,
) -> (Option<LabelId>, Option<LabelId>) {
    let best = |kind: LabelKind| {
        let mut best: Option<(LabelId, f64)> = None;
        for label in LabelId::all().filter(|l| l.kind() == kind && parsed.present(*l)) {
            let s = score(parsed.reason(label));
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((label, s));
            }
        }
        best.map(|(label, _)| label)
    };
    (best(LabelKind::Tactic), best(LabelKind::Theory))
}

pub fn select_major(parsed: &ParsedOutput, narrative: &str) -> (Option<LabelId>, Option<LabelId>) {
    select_major_by(parsed, |reason| alignment(reason, narrative))
}

/// [`to_vectors`] with majors filled by [`select_major`].
pub fn predict(parsed: &ParsedOutput, narrative: &str) -> PredictionVectors {
    let (major_tactic, major_theory) = select_major(parsed, narrative);
    PredictionVectors {
        major_tactic,
        major_theory,
        ..to_vectors(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(name: &str) -> LabelId {
        crate::taxonomy::normalize_label(name).unwrap()
    }

    #[test]
    fn single_section() {
        let parsed =
            parse_output("[Reconnaissance]\nPresent: Yes\nReason: profiled the victim online");
        let r = parsed.get(id("Reconnaissance"));
        assert!(r.present);
        assert_eq!(r.reason, "profiled the victim online");
        assert_eq!(r.status, ParseStatus::Matched);
        assert_eq!(parsed.defaulted_count(), 19);
    }

    #[test]
    fn na_and_no_are_absent() {
        let parsed = parse_output(
            "[Impact]\nPresent: N/A\nReason: nothing\n[Collection]\nPresent: no\nReason: N/A\n[Discovery]\nPresent: maybe\nReason: unclear",
        );
        for name in ["Impact", "Collection", "Discovery"] {
            assert!(!parsed.present(id(name)));
            assert_eq!(parsed.get(id(name)).status, ParseStatus::Matched);
        }
        assert_eq!(parsed.reason(id("Impact")), "nothing");
    }

    #[test]
    fn yes_checked_before_no() {
        let parsed = parse_output("[Pivoting] Present: Yes/No Reason: both");
        assert!(parsed.present(id("Pivoting")));
    }

    #[test]
    fn missing_label_defaults() {
        let parsed = parse_output("[Impact]\nPresent: Yes\nReason: lost money");
        let pivoting = parsed.get(id("Pivoting"));
        assert!(!pivoting.present);
        assert_eq!(pivoting.reason, PARSING_FAILED);
        assert_eq!(pivoting.status, ParseStatus::Defaulted);
    }

    #[test]
    fn case_aliases_and_truncation() {
        let text = "[urgency & scarcity]\npresent: YES\nreason: deadline of ten minutes [not a label]\n\n[AUTHORITY/SOCIAL PROOF]\nPresent: yes\nReason: fake police";
        let parsed = parse_output(text);
        assert!(parsed.present(id("Urgency and Scarcity")));
        assert_eq!(
            parsed.reason(id("Urgency and Scarcity")),
            "deadline of ten minutes [not a label]"
        );
        assert_eq!(
            parsed.reason(id("Authority, Social Proof, and Impersonation")),
            "fake police"
        );
    }

    #[test]
    fn empty_and_garbage_inputs() {
        for text in ["", "]]][[[", "[Impact]", "[Impact] Present:", "Present: Yes Reason: x"] {
            let parsed = parse_output(text);
            assert_eq!(parsed.labels.len(), NUM_LABELS);
            assert_eq!(parsed.presence(), [false; NUM_LABELS]);
        }
    }

    #[test]
    fn vectors_copy_flags() {
        let all = ParsedOutput::all_defaulted("");
        let v = to_vectors(&all);
        assert_eq!(v.tactical, [false; 14]);
        assert_eq!(v.behavioral, [false; 6]);

        let v = to_vectors(&parse_output("[Initial Contact]\nPresent: Yes\nReason: called"));
        let mut expected = [false; 14];
        expected[2] = true;
        assert_eq!(v.tactical, expected);
        assert_eq!(v.major_tactic, None);
    }

    #[test]
    fn major_selection() {
        let narrative = "the caller knew my bank details and threatened arrest";
        let single = parse_output("[Impact]\nPresent: Yes\nReason: zzz qqq");
        assert_eq!(select_major(&single, narrative).0, Some(id("Impact")));

        let two = parse_output(
            "[Reconnaissance]\nPresent: Yes\nReason: unrelated words entirely here\n[Collection]\nPresent: Yes\nReason: knew my bank details",
        );
        assert_eq!(select_major(&two, narrative).0, Some(id("Collection")));

        let tie = parse_output(
            "[Fear and Intimidation]\nPresent: Yes\nReason: threatened arrest\n[Urgency and Scarcity]\nPresent: Yes\nReason: threatened arrest",
        );
        assert_eq!(
            select_major(&tie, narrative),
            (None, Some(id("Fear and Intimidation")))
        );
        assert_eq!(select_major(&ParsedOutput::all_defaulted(""), narrative), (None, None));
    }

    #[test]
    fn alignment_values() {
        assert_eq!(alignment("", "anything"), 0.0);
        assert_eq!(alignment("a b c d", "a b"), 0.5);
        assert_eq!(alignment("A, a!", "a"), 1.0);
    }

    fn section_strategy() -> impl Strategy<Value = String> {
        let label = prop::sample::select(
            LabelId::all()
                .flat_map(|l| l.def().surface_forms())
                .collect::<Vec<_>>(),
        );
        (label, "[ \n]{0,3}", "(?i)(yes|no|n/a|maybe|)", "[a-z \\[\\]\n]{0,30}")
            .prop_map(|(l, ws, v, r)| format!("[{l}]{ws}Present: {v}{ws}Reason: {r}"))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn total_on_arbitrary_text(text in "\\PC*") {
            let parsed = parse_output(&text);
            prop_assert_eq!(parsed.labels.len(), NUM_LABELS);
        }

        #[test]
        fn total_on_structured_noise(sections in prop::collection::vec(section_strategy(), 0..30), junk in "[\\[\\]a-zA-Z:\n ]{0,50}") {
            let text = format!("{junk}{}", sections.join(&junk));
            let parsed = parse_output(&text);
            for l in &parsed.labels {
                if l.status == ParseStatus::Defaulted {
                    prop_assert!(!l.present);
                    prop_assert_eq!(&l.reason, PARSING_FAILED);
                }
            }
            prop_assert_eq!(parse_output(&text), parsed);
        }

        #[test]
        fn major_invariant_under_monotone_transform(
            sections in prop::collection::vec(section_strategy(), 0..30),
            narrative in "[a-z ]{0,60}",
        ) {
            let parsed = parse_output(&sections.join("\n"));
            let plain = select_major_by(&parsed, |r| alignment(r, &narrative));
            let squared = select_major_by(&parsed, |r| alignment(r, &narrative).powi(2));
            let shifted = select_major_by(&parsed, |r| 3.0 * alignment(r, &narrative) + 1.0);
            prop_assert_eq!(plain, squared);
            prop_assert_eq!(plain, shifted);
            if let Some(t) = plain.0 { prop_assert!(parsed.present(t)); }
            if let Some(b) = plain.1 { prop_assert!(parsed.present(b)); }
        }
    }
}
