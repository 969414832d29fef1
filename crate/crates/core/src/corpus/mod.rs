//! Annotation records: the dataset JSON schema, its validation, and
//! line-delimited persistence.
//!
//! Records are ground truth, so validation is strict: Yes/No fields accept
//! only those two words (any case), reasons must accompany exactly the
//! positive labels, and both major labels must be positive.

mod io;
mod repair;

pub use io::{dataset_hash, load_dataset, save_dataset, LineDiagnostic, LoadMode, LoadedDataset};
pub use repair::{repair_json_text, RepairError};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::taxonomy::{
    normalize_fraud_type, normalize_key, normalize_label, FraudType, LabelId, LabelKind,
    NUM_LABELS, NUM_TACTICS, NUM_THEORIES,
};

pub const KEY_STORY: &str = "Story";
pub const KEY_FRAUD_TYPE: &str = "Fraud_Type";
pub const KEY_TACTICS: &str = "Tactics";
pub const KEY_THEORIES: &str = "Behavioural_Theories";
pub const KEY_MAJOR_TACTIC: &str = "Major_Tactic";
pub const KEY_MAJOR_THEORY: &str = "Major_Theory";
pub const KEY_PROVENANCE: &str = "Provenance";
pub const REASON_SUFFIX: &str = "_Reason";

/// Target narrative length in lines. Outside this range is a warning only.
pub const TARGET_LINES: std::ops::RangeInclusive<usize> = 12..=25;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("missing field {0}")]
    MissingField(String),
    #[error("field {field} has the wrong type (expected {expected})")]
    WrongType {
        field: String,
        expected: &'static str,
    },
    #[error("unexpected field {0:?}")]
    UnexpectedField(String),
    #[error("story is empty")]
    EmptyStory,
    #[error("invalid present value for {label}: {value:?}")]
    InvalidPresentValue { label: String, value: String },
    #[error("reason for {0} must be given exactly when the label is present")]
    ReasonConsistency(String),
    #[error("major {0} is not marked present")]
    MajorNotPositive(LabelKind),
    #[error("major {kind} {value:?} does not name a {kind}")]
    InvalidMajor { kind: LabelKind, value: String },
    #[error("unknown fraud type {0:?}")]
    UnknownFraudType(String),
    #[error("invalid provenance: {0}")]
    InvalidProvenance(String),
}

/// Non-empty victim narrative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrativeText(String);

impl NarrativeText {
    pub fn new(body: impl Into<String>) -> Result<Self, RecordError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(RecordError::EmptyStory);
        }
        Ok(NarrativeText(body))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Non-blank lines.
    pub fn line_count(&self) -> usize {
        self.0.lines().filter(|l| !l.trim().is_empty()).count()
    }

    pub fn within_target_length(&self) -> bool {
        TARGET_LINES.contains(&self.line_count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub story: NarrativeText,
    pub fraud_type: FraudType,
    pub tactic_present: [bool; NUM_TACTICS],
    pub tactic_reason: [Option<String>; NUM_TACTICS],
    pub theory_present: [bool; NUM_THEORIES],
    pub theory_reason: [Option<String>; NUM_THEORIES],
    pub major_tactic: LabelId,
    pub major_theory: LabelId,
    pub provenance: Provenance,
}

impl AnnotationRecord {
    pub fn present(&self, label: LabelId) -> bool {
        match label.kind() {
            LabelKind::Tactic => self.tactic_present[label.index()],
            LabelKind::Theory => self.theory_present[label.index()],
        }
    }

    pub fn reason(&self, label: LabelId) -> Option<&str> {
        match label.kind() {
            LabelKind::Tactic => self.tactic_reason[label.index()].as_deref(),
            LabelKind::Theory => self.theory_reason[label.index()].as_deref(),
        }
    }

    /// All 20 flags in canonical order.
    pub fn presence(&self) -> [bool; NUM_LABELS] {
        let mut out = [false; NUM_LABELS];
        for id in LabelId::all() {
            out[id.global_index()] = self.present(id);
        }
        out
    }

    /// Serializes to the dataset schema. Inverse of [`validate_record`].
    pub fn to_json(&self) -> Value {
        let section = |ids: &mut dyn Iterator<Item = LabelId>| {
            let mut map = Map::new();
            for id in ids {
                let flag = if self.present(id) { "Yes" } else { "No" };
                map.insert(id.schema_key().to_string(), Value::from(flag));
                if let Some(reason) = self.reason(id) {
                    map.insert(
                        format!("{}{}", id.schema_key(), REASON_SUFFIX),
                        Value::from(reason),
                    );
                }
            }
            Value::Object(map)
        };
        let mut obj = Map::new();
        obj.insert(KEY_STORY.into(), Value::from(self.story.as_str()));
        obj.insert(KEY_FRAUD_TYPE.into(), Value::from(self.fraud_type.display_name()));
        obj.insert(KEY_TACTICS.into(), section(&mut LabelId::tactics()));
        obj.insert(KEY_THEORIES.into(), section(&mut LabelId::theories()));
        obj.insert(
            KEY_MAJOR_TACTIC.into(),
            Value::from(self.major_tactic.display_name()),
        );
        obj.insert(
            KEY_MAJOR_THEORY.into(),
            Value::from(self.major_theory.display_name()),
        );
        obj.insert(
            KEY_PROVENANCE.into(),
            serde_json::to_value(&self.provenance).expect("provenance serializes"),
        );
        Value::Object(obj)
    }
}

/// Field lookup: exact key first, then any key equal after normalization.
fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(key).or_else(|| {
        let wanted = normalize_key(key);
        obj.iter()
            .find(|(k, _)| normalize_key(k) == wanted)
            .map(|(_, v)| v)
    })
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, RecordError> {
    field(obj, key).ok_or_else(|| RecordError::MissingField(key.to_string()))
}

fn required_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, RecordError> {
    required(obj, key)?
        .as_str()
        .ok_or_else(|| RecordError::WrongType {
            field: key.to_string(),
            expected: "string",
        })
}

fn parse_yes_no(label: LabelId, value: &Value) -> Result<bool, RecordError> {
    let invalid = || RecordError::InvalidPresentValue {
        label: label.display_name().to_string(),
        value: value.to_string(),
    };
    match value.as_str().map(|s| s.trim().to_ascii_lowercase()) {
        Some(v) if v == "yes" => Ok(true),
        Some(v) if v == "no" => Ok(false),
        _ => Err(invalid()),
    }
}

/// Empty, whitespace, "N/A", "None" and null all mean "no reason given".
fn parse_reason(label: LabelId, value: &Value) -> Result<Option<String>, RecordError> {
    match value {
        Value::Null => Ok(None),
        Value::String(s) => {
            let trimmed = s.trim();
            let lowered = trimmed.to_ascii_lowercase();
            if trimmed.is_empty() || lowered == "n/a" || lowered == "none" {
                Ok(None)
            } else {
                Ok(Some(s.clone()))
            }
        }
        _ => Err(RecordError::WrongType {
            field: format!("{}{}", label.schema_key(), REASON_SUFFIX),
            expected: "string",
        }),
    }
}

struct Section<const N: usize> {
    present: [bool; N],
    reason: [Option<String>; N],
}

fn parse_section<const N: usize>(
    obj: &Map<String, Value>,
    section_key: &str,
    kind: LabelKind,
) -> Result<Section<N>, RecordError> {
    let section = required(obj, section_key)?
        .as_object()
        .ok_or_else(|| RecordError::WrongType {
            field: section_key.to_string(),
            expected: "object",
        })?;

    let mut present: [Option<bool>; N] = [None; N];
    let mut reason: [Option<String>; N] = std::array::from_fn(|_| None);
    for (key, value) in section {
        let normalized = normalize_key(key);
        let (name, is_reason) = match normalized.strip_suffix("reason") {
            Some(stem) if !stem.is_empty() && normalize_label(stem).is_ok() => (stem, true),
            _ => (normalized.as_str(), false),
        };
        let label = normalize_label(name)
            .ok()
            .filter(|id| id.kind() == kind)
            .ok_or_else(|| RecordError::UnexpectedField(key.clone()))?;
        if is_reason {
            reason[label.index()] = parse_reason(label, value)?;
        } else {
            present[label.index()] = Some(parse_yes_no(label, value)?);
        }
    }

    let mut flags = [false; N];
    for index in 0..N {
        let label = match kind {
            LabelKind::Tactic => LabelId::tactic(index),
            LabelKind::Theory => LabelId::theory(index),
        }
        .expect("index within section size");
        flags[index] = present[index].ok_or_else(|| {
            RecordError::MissingField(format!("{}.{}", section_key, label.schema_key()))
        })?;
        if flags[index] != reason[index].is_some() {
            return Err(RecordError::ReasonConsistency(
                label.display_name().to_string(),
            ));
        }
    }
    Ok(Section {
        present: flags,
        reason,
    })
}

fn parse_major(
    obj: &Map<String, Value>,
    key: &str,
    kind: LabelKind,
) -> Result<LabelId, RecordError> {
    let value = required_str(obj, key)?;
    normalize_label(value)
        .ok()
        .filter(|id| id.kind() == kind)
        .ok_or_else(|| RecordError::InvalidMajor {
            kind,
            value: value.to_string(),
        })
}

/// Checks a parsed JSON tree against the dataset schema and every record
/// invariant.
pub fn validate_record(candidate: &Value) -> Result<AnnotationRecord, RecordError> {
    let obj = candidate.as_object().ok_or(RecordError::NotAnObject)?;

    let story = NarrativeText::new(required_str(obj, KEY_STORY)?)?;
    let fraud_name = required_str(obj, KEY_FRAUD_TYPE)?;
    let fraud_type = normalize_fraud_type(fraud_name)
        .map_err(|_| RecordError::UnknownFraudType(fraud_name.to_string()))?;
    let tactics: Section<NUM_TACTICS> = parse_section(obj, KEY_TACTICS, LabelKind::Tactic)?;
    let theories: Section<NUM_THEORIES> = parse_section(obj, KEY_THEORIES, LabelKind::Theory)?;
    let major_tactic = parse_major(obj, KEY_MAJOR_TACTIC, LabelKind::Tactic)?;
    let major_theory = parse_major(obj, KEY_MAJOR_THEORY, LabelKind::Theory)?;

    if !tactics.present[major_tactic.index()] {
        return Err(RecordError::MajorNotPositive(LabelKind::Tactic));
    }
    if !theories.present[major_theory.index()] {
        return Err(RecordError::MajorNotPositive(LabelKind::Theory));
    }

    let provenance = match field(obj, KEY_PROVENANCE) {
        None | Some(Value::Null) => Provenance::default(),
        Some(value) => serde_json::from_value(value.clone())
            .map_err(|e| RecordError::InvalidProvenance(e.to_string()))?,
    };

    if !story.within_target_length() {
        log::warn!(
            "narrative has {} lines, outside the {}-{} target",
            story.line_count(),
            TARGET_LINES.start(),
            TARGET_LINES.end()
        );
    }

    Ok(AnnotationRecord {
        story,
        fraud_type,
        tactic_present: tactics.present,
        tactic_reason: tactics.reason,
        theory_present: theories.present,
        theory_reason: theories.reason,
        major_tactic,
        major_theory,
        provenance,
    })
}

/// Repair, parse and validate raw model text in one step.
pub fn record_from_model_text(raw: &str) -> Result<AnnotationRecord, String> {
    let repaired = repair_json_text(raw).map_err(|e| e.to_string())?;
    let value: Value = serde_json::from_str(&repaired).map_err(|e| format!("invalid JSON: {e}"))?;
    validate_record(&value).map_err(|e| e.to_string())
}
