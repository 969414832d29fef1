//! Prompt construction and the 20-section analysis block.
//!
//! Templates live in `templates/` and use `{{name}}` placeholders. The
//! narrative is always wrapped in `<narrative>` tags so it can be recovered
//! from a rendered prompt.

use serde::{Deserialize, Serialize};

use crate::corpus::{
    AnnotationRecord, KEY_FRAUD_TYPE, KEY_MAJOR_TACTIC, KEY_MAJOR_THEORY, KEY_STORY, KEY_TACTICS,
    KEY_THEORIES, REASON_SUFFIX,
};
use crate::sampling::GenerationSeed;
use crate::taxonomy::{FraudType, LabelId, NUM_LABELS};

const DETAILED_TEMPLATE: &str = include_str!("../templates/detailed.txt");
const CONCISE_TEMPLATE: &str = include_str!("../templates/concise.txt");
const GENERATION_TEMPLATE: &str = include_str!("../templates/generation.txt");

pub const NARRATIVE_OPEN: &str = "<narrative>";
pub const NARRATIVE_CLOSE: &str = "</narrative>";
/// Reason text for absent labels.
pub const NO_REASON: &str = "N/A";

/// What to look for, per label, in canonical order.
static INDICATORS: [&str; NUM_LABELS] = [
    "The offender knows the victim's name, workplace, family, purchases, loans or online activity before the victim shares them.",
    "The offender sets up infrastructure in advance: fake websites, apps, call centers, SIM cards, mule accounts or forged documents.",
    "The first message, call, advertisement, friend request or listing through which the offender reaches the victim.",
    "The moment the victim takes the harmful action: paying, clicking, installing, sharing a code or handing over documents.",
    "The offender keeps the victim engaged across days or weeks through repeated calls, messages, follow-ups or new pretexts.",
    "Demands grow over time: fees multiply, amounts rise, new charges appear or the pressure becomes more severe.",
    "The offender hides identity or traces: spoofed numbers, internet calling, deleted chats, layered accounts, fake names.",
    "The offender obtains passwords, one-time codes, card numbers, PINs or identity documents from the victim.",
    "After access, the offender explores the victim's device, accounts, contacts, photos or finances for further value.",
    "The offender uses the victim's account, device or contacts to reach and defraud other people.",
    "The offender gathers screenshots, recordings, images, documents or conversation logs from the victim.",
    "The offender directs the victim in real time: keeps them on a call, dictates each step, forbids contact with others.",
    "Money or data leaves the victim's control: transfers, withdrawals, purchases or uploads to the offender.",
    "The harm to the victim: money lost, reputation damaged, emotional distress, legal trouble or lost access.",
    "Explicit or implied threats of arrest, exposure, legal action, violence or loss.",
    "Deadlines, countdowns, limited slots, expiring offers or claims that delay will cause loss.",
    "Claims of official status, uniforms, badges, letters, logos, fake testimonials or references to many other participants.",
    "Small first requests, early favors, trial payouts or returned amounts that lead the victim into larger commitments.",
    "Promises of prizes, lottery wins, refunds with bonuses or returns far above normal rates.",
    "Affection, romance, sympathy, friendship, guilt or personal stories used to build trust and lower suspicion.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    /// All 20 definitions plus format rules, for zero-shot models.
    Detailed,
    /// A short instruction, for models already trained on the format.
    Concise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub narrative: String,
    pub mode: PromptMode,
    pub rendered: String,
    pub approx_token_count: usize,
}

/// Whitespace-delimited token count.
pub fn approx_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    debug_assert!(!out.contains("{{"), "unfilled placeholder");
    out
}

fn definitions(labels: impl Iterator<Item = LabelId>, with_indicators: bool) -> String {
    labels
        .map(|label| {
            let def = label.def();
            let mut entry = format!("[{}]\n{}", def.name, def.description);
            if !def.example.is_empty() {
                entry.push_str(&format!("\nExample: {}", def.example));
            }
            if with_indicators {
                entry.push_str(&format!(
                    "\nLook for: {}",
                    INDICATORS[label.global_index()]
                ));
            }
            entry
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn format_spec() -> String {
    LabelId::all()
        .map(|label| {
            format!(
                "[{}]\nPresent: Yes or No\nReason: one or two sentences of evidence, or {NO_REASON}",
                label.display_name()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn bundle(mode: PromptMode, template: &str, vars: &[(&str, &str)], narrative: &str) -> PromptBundle {
    let system_instruction = template
        .split(NARRATIVE_OPEN)
        .next()
        .unwrap_or_default()
        .trim_end()
        .to_string();
    let system_instruction = fill(&system_instruction, vars);
    let mut all_vars = vars.to_vec();
    all_vars.push(("narrative", narrative));
    let rendered = fill(template, &all_vars);
    PromptBundle {
        system_instruction,
        narrative: narrative.to_string(),
        mode,
        approx_token_count: approx_token_count(&rendered),
        rendered,
    }
}

pub fn build_detailed_prompt(narrative: &str) -> PromptBundle {
    let tactics = definitions(LabelId::tactics(), true);
    let theories = definitions(LabelId::theories(), true);
    let format = format_spec();
    bundle(
        PromptMode::Detailed,
        DETAILED_TEMPLATE,
        &[
            ("tactic_definitions", &tactics),
            ("theory_definitions", &theories),
            ("format", &format),
        ],
        narrative,
    )
}

pub fn build_concise_prompt(narrative: &str) -> PromptBundle {
    bundle(PromptMode::Concise, CONCISE_TEMPLATE, &[], narrative)
}

pub fn build_prompt(mode: PromptMode, narrative: &str) -> PromptBundle {
    match mode {
        PromptMode::Detailed => build_detailed_prompt(narrative),
        PromptMode::Concise => build_concise_prompt(narrative),
    }
}

/// JSON skeleton listing every key the dataset schema expects.
fn schema_skeleton() -> String {
    let section = |labels: &mut dyn Iterator<Item = LabelId>| {
        labels
            .map(|l| {
                format!(
                    "    \"{key}\": \"Yes\" | \"No\",\n    \"{key}{REASON_SUFFIX}\": \"<reason, only when Yes>\"",
                    key = l.schema_key()
                )
            })
            .collect::<Vec<_>>()
            .join(",\n")
    };
    format!(
        "{{\n  \"{KEY_STORY}\": \"<story>\",\n  \"{KEY_FRAUD_TYPE}\": \"<fraud type>\",\n  \"{KEY_TACTICS}\": {{\n{}\n  }},\n  \"{KEY_THEORIES}\": {{\n{}\n  }},\n  \"{KEY_MAJOR_TACTIC}\": \"<primary attack stage>\",\n  \"{KEY_MAJOR_THEORY}\": \"<primary behavioral theory>\"\n}}",
        section(&mut LabelId::tactics()),
        section(&mut LabelId::theories()),
    )
}

/// Dataset-generation prompt for one planned sample. The seed token is
/// embedded verbatim so backends and audits can recover the conditioning.
pub fn build_generation_prompt(seed: &GenerationSeed) -> String {
    let fraud: FraudType = seed.fraud_type;
    let fraud_line = format!("{} ({})", fraud.display_name(), fraud.def().description);
    fill(
        GENERATION_TEMPLATE,
        &[
            ("fraud_type", &fraud_line),
            ("major_tactic", seed.major_tactic.display_name()),
            ("major_theory", seed.major_theory.display_name()),
            ("schema", &schema_skeleton()),
            ("tactic_definitions", &definitions(LabelId::tactics(), false)),
            ("theory_definitions", &definitions(LabelId::theories(), false)),
            ("seed", &seed.token()),
        ],
    )
}

/// Text between the last `<narrative>` and the following `</narrative>`.
pub fn extract_narrative(prompt: &str) -> Option<&str> {
    let start = prompt.rfind(NARRATIVE_OPEN)? + NARRATIVE_OPEN.len();
    let end = prompt[start..].find(NARRATIVE_CLOSE)? + start;
    Some(prompt[start..end].trim_matches('\n'))
}

/// Collapses whitespace and replaces `[` so a reason can never look like a
/// section header.
pub fn sanitize_reason(reason: &str) -> String {
    reason
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace('[', "(")
}

/// Renders the 20-section block from flags and reasons indexed by global
/// label index. Absent labels, or present labels with no reason, get
/// [`NO_REASON`].
pub fn render_block<'a>(
    present: &[bool; NUM_LABELS],
    reason: impl Fn(usize) -> Option<&'a str>,
) -> String {
    LabelId::all()
        .map(|label| {
            let g = label.global_index();
            let text = reason(g)
                .filter(|_| present[g])
                .map(sanitize_reason)
                .filter(|r| !r.is_empty())
                .unwrap_or_else(|| NO_REASON.to_string());
            format!(
                "[{}]\nPresent: {}\nReason: {}",
                label.display_name(),
                if present[g] { "Yes" } else { "No" },
                text
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// The gold analysis block for a record.
pub fn render_target(record: &AnnotationRecord) -> String {
    let present = record.presence();
    render_block(&present, |g| {
        record.reason(LabelId::from_global(g).expect("global index in range"))
    })
}
