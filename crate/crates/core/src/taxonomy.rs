//! Fixed label spaces: the 14 lifecycle tactics, the 6 behavioral theories and
//! the 10 fraud categories, with name normalization shared by every other
//! module.
//!
//! Tactic and theory order is canonical. Every vector of decisions in this
//! crate is indexed by that order, tactics first, then theories.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_TACTICS: usize = 14;
pub const NUM_THEORIES: usize = 6;
pub const NUM_FRAUD_TYPES: usize = 10;
/// Tactics followed by theories.
pub const NUM_LABELS: usize = NUM_TACTICS + NUM_THEORIES;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("label name is empty")]
    EmptyName,
    #[error("unknown label: {0:?}")]
    UnknownLabel(String),
    #[error("unknown fraud type: {0:?}")]
    UnknownFraudType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Tactic,
    Theory,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelKind::Tactic => f.write_str("tactic"),
            LabelKind::Theory => f.write_str("theory"),
        }
    }
}

/// A tactic or theory, addressed by its position in the canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId {
    kind: LabelKind,
    index: usize,
}

impl LabelId {
    pub fn tactic(index: usize) -> Option<Self> {
        (index < NUM_TACTICS).then_some(LabelId {
            kind: LabelKind::Tactic,
            index,
        })
    }

    pub fn theory(index: usize) -> Option<Self> {
        (index < NUM_THEORIES).then_some(LabelId {
            kind: LabelKind::Theory,
            index,
        })
    }

    /// Position in the joint 20-label order (tactics, then theories).
    pub fn from_global(global: usize) -> Option<Self> {
        if global < NUM_TACTICS {
            Self::tactic(global)
        } else {
            Self::theory(global - NUM_TACTICS)
        }
    }

    pub fn kind(self) -> LabelKind {
        self.kind
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn global_index(self) -> usize {
        match self.kind {
            LabelKind::Tactic => self.index,
            LabelKind::Theory => NUM_TACTICS + self.index,
        }
    }

    pub fn def(self) -> &'static LabelDef {
        match self.kind {
            LabelKind::Tactic => &TACTICS[self.index],
            LabelKind::Theory => &THEORIES[self.index],
        }
    }

    pub fn id(self) -> &'static str {
        self.def().id
    }

    pub fn display_name(self) -> &'static str {
        self.def().name
    }

    /// Key used in dataset JSON, e.g. `Command_and_Control`.
    pub fn schema_key(self) -> &'static str {
        self.def().schema_key
    }

    /// All 20 labels in canonical order.
    pub fn all() -> impl Iterator<Item = LabelId> + Clone {
        (0..NUM_LABELS).map(|g| LabelId::from_global(g).expect("in range"))
    }

    pub fn tactics() -> impl Iterator<Item = LabelId> + Clone {
        (0..NUM_TACTICS).map(|i| LabelId {
            kind: LabelKind::Tactic,
            index: i,
        })
    }

    pub fn theories() -> impl Iterator<Item = LabelId> + Clone {
        (0..NUM_THEORIES).map(|i| LabelId {
            kind: LabelKind::Theory,
            index: i,
        })
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl Serialize for LabelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for LabelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        normalize_label(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FraudType(usize);

impl FraudType {
    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_FRAUD_TYPES).then_some(FraudType(index))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn def(self) -> &'static FraudTypeDef {
        &FRAUD_TYPES[self.0]
    }

    pub fn id(self) -> &'static str {
        self.def().id
    }

    pub fn display_name(self) -> &'static str {
        self.def().name
    }

    pub fn all() -> impl Iterator<Item = FraudType> + Clone {
        (0..NUM_FRAUD_TYPES).map(FraudType)
    }
}

impl fmt::Display for FraudType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl Serialize for FraudType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for FraudType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        normalize_fraud_type(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Serialize)]
pub struct LabelDef {
    /// lower_snake_case machine identifier.
    pub id: &'static str,
    /// Display name, canonical capitalization.
    pub name: &'static str,
    pub schema_key: &'static str,
    /// What the label means (tactic description or theory mechanism).
    pub description: &'static str,
    /// Concrete illustration from scam casework. Empty for theories.
    pub example: &'static str,
    /// Alternative surface forms accepted by [`normalize_label`].
    pub aliases: &'static [&'static str],
}

impl LabelDef {
    /// Every accepted surface form: display name, id, schema key, aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &'static str> {
        [self.name, self.id, self.schema_key]
            .into_iter()
            .chain(self.aliases.iter().copied())
    }
}

#[derive(Debug, Serialize)]
pub struct FraudTypeDef {
    pub id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
    pub aliases: &'static [&'static str],
}

static TACTICS: [LabelDef; NUM_TACTICS] = [
    LabelDef {
        id: "reconnaissance",
        name: "Reconnaissance",
        schema_key: "Reconnaissance",
        description: "Collecting personal information about the victim to prepare the scam.",
        example: "Buying leaked data, scraping social media profiles for names, phone numbers, and family links.",
        aliases: &[],
    },
    LabelDef {
        id: "resource_development",
        name: "Resource Development",
        schema_key: "Resource_Development",
        description: "Acquiring digital or human resources required to commit cybercrime.",
        example: "Renting fake call center spaces, purchasing SIM cards and spoofing applications, hiring money mules.",
        aliases: &[],
    },
    LabelDef {
        id: "initial_contact",
        name: "Initial Contact",
        schema_key: "Initial_Contact",
        description: "Initiating deceptive communication with the victim.",
        example: "Romance-scam direct messages, fake technical support calls, fraudulent job-offer SMS messages.",
        aliases: &[],
    },
    LabelDef {
        id: "detonation",
        name: "Detonation",
        schema_key: "Detonation",
        description: "Triggering the fraudulent act by inducing the victim to take a harmful action.",
        example: "Convincing the victim to share OTPs, install spyware, or transfer money.",
        aliases: &[],
    },
    LabelDef {
        id: "persistence",
        name: "Persistence",
        schema_key: "Persistence",
        description: "Maintaining prolonged interaction to maximize exploitation.",
        example: "Repeated scam calls, sustained emotional manipulation, continued TeamViewer access.",
        aliases: &[],
    },
    LabelDef {
        id: "escalation",
        name: "Escalation",
        schema_key: "Escalation",
        description: "Transitioning from low-level fraud to higher-stakes criminal activity.",
        example: "Using cloned fingerprints for AEPS fraud after initial data compromise.",
        aliases: &[],
    },
    LabelDef {
        id: "defense_evasion",
        name: "Defense Evasion",
        schema_key: "Defense_Evasion",
        description: "Obscuring the offender's identity, location, or digital trace.",
        example: "Use of VoIP numbers, VPN services, and cryptocurrency for laundering.",
        aliases: &["Defence Evasion"],
    },
    LabelDef {
        id: "credential_harvesting",
        name: "Credential Harvesting",
        schema_key: "Credential_Harvesting",
        description: "Extracting sensitive authentication or personal credentials.",
        example: "Deploying keyloggers, gaining banking passwords through romance-based manipulation.",
        aliases: &[],
    },
    LabelDef {
        id: "discovery",
        name: "Discovery",
        schema_key: "Discovery",
        description: "Gaining deeper access to victim data for subsequent exploitation.",
        example: "Accessing contact lists, photo galleries, and messages to extract blackmail material.",
        aliases: &[],
    },
    LabelDef {
        id: "pivoting",
        name: "Pivoting",
        schema_key: "Pivoting",
        description: "Leveraging one compromised victim to reach additional victims.",
        example: "Sending scam SMS messages to contacts stored on an infected device.",
        aliases: &[],
    },
    LabelDef {
        id: "collection",
        name: "Collection",
        schema_key: "Collection",
        description: "Capturing valuable information from victim devices.",
        example: "Recording calls, accessing WhatsApp chats through spyware.",
        aliases: &[],
    },
    LabelDef {
        id: "command_and_control",
        name: "Command and Control",
        schema_key: "Command_and_Control",
        description: "Directly controlling or coercing victim behavior.",
        example: "Threatening disclosure of private material unless payment is made (sextortion).",
        aliases: &["Command & Control", "C2"],
    },
    LabelDef {
        id: "exfiltration",
        name: "Exfiltration",
        schema_key: "Exfiltration",
        description: "Illegally transferring funds or sensitive data out of victim control.",
        example: "Sending stolen money to mule accounts or data to criminal Telegram groups.",
        aliases: &[],
    },
    LabelDef {
        id: "impact",
        name: "Impact",
        schema_key: "Impact",
        description: "Social, financial, or psychological harm inflicted on the victim.",
        example: "Monetary loss, identity theft, suicide due to blackmail, defamation through leaked images.",
        aliases: &[],
    },
];

static THEORIES: [LabelDef; NUM_THEORIES] = [
    LabelDef {
        id: "fear_and_intimidation",
        name: "Fear and Intimidation",
        schema_key: "Fear_and_Intimidation",
        description: "Rooted in loss aversion and negative affect under Prospect Theory. Captures threats, coercion, or fear-inducing stimuli, where victims overweight potential losses and comply to avoid perceived negative outcomes.",
        example: "",
        aliases: &["Fear & Intimidation"],
    },
    LabelDef {
        id: "urgency_and_scarcity",
        name: "Urgency and Scarcity",
        schema_key: "Urgency_and_Scarcity",
        description: "Based on the scarcity principle of persuasion. Leverages deadlines, expiring opportunities, and high-pressure scenarios, where a perceived reduction in time disrupts rational evaluation and increases impulsive compliance.",
        example: "",
        aliases: &["Urgency & Scarcity"],
    },
    LabelDef {
        id: "authority_social_proof_and_impersonation",
        name: "Authority, Social Proof, and Impersonation",
        schema_key: "Authority_Social_Proof_and_Impersonation",
        description: "Derived from the authority and social proof principles of persuasion. Reflects impersonation of trusted institutions (e.g., banks, police) or fabricated consensus, causing victims to defer to perceived expertise or majority behavior.",
        example: "",
        aliases: &[
            "Authority/Social Proof",
            "Authority Social Proof",
            "Authority, Social Proof, and Impersonation",
            "authority_social",
        ],
    },
    LabelDef {
        id: "consistency_and_reciprocity",
        name: "Consistency and Reciprocity",
        schema_key: "Consistency_and_Reciprocity",
        description: "Based on the commitment/consistency and reciprocity principles of persuasion. Exploits the human tendency to honor prior commitments or repay favors, where small initial requests escalate into larger exploitative actions.",
        example: "",
        aliases: &["Consistency & Reciprocity", "consistency_and_rec"],
    },
    LabelDef {
        id: "phantom_riches",
        name: "Phantom Riches",
        schema_key: "Phantom_Riches",
        description: "Grounded in the Prospect Theory value function. Refers to exaggerated rewards such as fictitious prizes or unusually high investment returns, exploiting the tendency to overweight low-probability but high-gain outcomes.",
        example: "",
        aliases: &[],
    },
    LabelDef {
        id: "emotional_exploitation",
        name: "Emotional Exploitation",
        schema_key: "Emotional_Exploitation",
        description: "Captures the affective dimension central to modern scams (e.g., romance and sextortion fraud). Uses empathy triggers, emotional narratives, and relational bonding to bypass analytic judgment and increase vulnerability.",
        example: "",
        aliases: &[],
    },
];

static FRAUD_TYPES: [FraudTypeDef; NUM_FRAUD_TYPES] = [
    FraudTypeDef {
        id: "advertisement_fraud",
        name: "Advertisement Fraud",
        description: "Fake listings, offers or classified advertisements used to collect advance payments for goods or services that never arrive.",
        aliases: &["Ad Fraud"],
    },
    FraudTypeDef {
        id: "customer_care_technical_support_fraud",
        name: "Customer Care/Technical Support Fraud",
        description: "Impersonation of customer-care desks or technical support to obtain remote access, card details or payments.",
        aliases: &["Customer Care Fraud", "Technical Support Fraud", "Tech Support Fraud"],
    },
    FraudTypeDef {
        id: "customs_pig_butchering_matrimonial_fraud",
        name: "Customs Fraud/Pig Butchering/Matrimonial Fraud",
        description: "Relationship-based schemes (online romance, matrimonial matches) that end in fake customs duties on gifts or long-running fake investments.",
        aliases: &["Customs Fraud", "Pig Butchering", "Matrimonial Fraud"],
    },
    FraudTypeDef {
        id: "investment_fraud",
        name: "Investment Fraud",
        description: "Promises of unrealistic returns through fake trading platforms, tips groups or Ponzi-style schemes.",
        aliases: &[],
    },
    FraudTypeDef {
        id: "insurance_fraud",
        name: "Insurance Fraud",
        description: "Fake policy renewals, bonus releases or claim settlements that require the victim to pay fees or share details.",
        aliases: &[],
    },
    FraudTypeDef {
        id: "job_fraud",
        name: "Job Fraud",
        description: "Fake employment or task-based earning offers that demand registration fees, deposits or personal documents.",
        aliases: &["Job Scam"],
    },
    FraudTypeDef {
        id: "loan_scam",
        name: "Loan Scam",
        description: "Instant-loan apps or fake lenders that extract processing fees, harvest contacts and harass borrowers.",
        aliases: &["Loan Fraud", "Loan App Scam"],
    },
    FraudTypeDef {
        id: "sextortion",
        name: "Sextortion",
        description: "Extortion using recorded or morphed intimate images, typically after a video call or online relationship.",
        aliases: &[],
    },
    FraudTypeDef {
        id: "digital_arrest",
        name: "Digital Arrest",
        description: "Impersonation of police, customs or investigative agencies who confine the victim on a video call and demand money to avoid arrest.",
        aliases: &[],
    },
    FraudTypeDef {
        id: "crypto_investment_fraud",
        name: "Crypto Investment Fraud",
        description: "Fake cryptocurrency exchanges, mining schemes or token offerings that show fabricated gains and block withdrawals.",
        aliases: &["Crypto Fraud", "Cryptocurrency Investment Fraud"],
    },
];

/// The fixed label space. Cheap to construct; all data is static.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabelSpace {
    pub tactics: &'static [LabelDef],
    pub theories: &'static [LabelDef],
    pub fraud_types: &'static [FraudTypeDef],
}

impl LabelSpace {
    pub fn triplet_count(&self) -> usize {
        self.tactics.len() * self.theories.len() * self.fraud_types.len()
    }
}

pub fn canonical_space() -> LabelSpace {
    LabelSpace {
        tactics: &TACTICS,
        theories: &THEORIES,
        fraud_types: &FRAUD_TYPES,
    }
}

/// Lowercase, `&` read as "and", everything but letters and digits dropped.
pub fn normalize_key(name: &str) -> String {
    name.replace('&', " and ")
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn lookup_table() -> &'static std::collections::HashMap<String, LabelId> {
    static TABLE: std::sync::OnceLock<std::collections::HashMap<String, LabelId>> =
        std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = std::collections::HashMap::new();
        for id in LabelId::all() {
            for form in id.def().surface_forms() {
                let previous = table.insert(normalize_key(form), id);
                assert!(
                    previous.is_none() || previous == Some(id),
                    "label surface form {form:?} collides"
                );
            }
        }
        table
    })
}

/// Resolves a tactic or theory name in any registered surface form.
pub fn normalize_label(name: &str) -> Result<LabelId, TaxonomyError> {
    let key = normalize_key(name);
    if key.is_empty() {
        return Err(TaxonomyError::EmptyName);
    }
    lookup_table()
        .get(&key)
        .copied()
        .ok_or_else(|| TaxonomyError::UnknownLabel(name.to_string()))
}

pub fn normalize_fraud_type(name: &str) -> Result<FraudType, TaxonomyError> {
    let key = normalize_key(name);
    if key.is_empty() {
        return Err(TaxonomyError::EmptyName);
    }
    FraudType::all()
        .find(|ft| {
            let def = ft.def();
            [def.name, def.id]
                .iter()
                .chain(def.aliases.iter())
                .any(|form| normalize_key(form) == key)
        })
        .ok_or_else(|| TaxonomyError::UnknownFraudType(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn canonical_order_and_sizes() {
        let space = canonical_space();
        assert_eq!(space.tactics.len(), 14);
        assert_eq!(space.theories.len(), 6);
        assert_eq!(space.fraud_types.len(), 10);
        assert_eq!(space.tactics[0].name, "Reconnaissance");
        assert_eq!(space.tactics[13].name, "Impact");
        assert_eq!(space.theories[0].name, "Fear and Intimidation");
        assert_eq!(space.theories[5].name, "Emotional Exploitation");
        assert_eq!(space.triplet_count(), 840);
    }

    #[test]
    fn identifiers_unique_after_normalization() {
        let mut seen = HashSet::new();
        for id in LabelId::all() {
            assert!(seen.insert(normalize_key(id.display_name())));
        }
        let mut fraud = HashSet::new();
        for ft in FraudType::all() {
            assert!(fraud.insert(normalize_key(ft.display_name())));
        }
    }

    #[test]
    fn resolves_aliases() {
        assert_eq!(
            normalize_label("command_and_control").unwrap(),
            LabelId::tactic(11).unwrap()
        );
        assert_eq!(
            normalize_label("Command & Control").unwrap(),
            LabelId::tactic(11).unwrap()
        );
        assert_eq!(
            normalize_label("Authority/Social Proof").unwrap(),
            LabelId::theory(2).unwrap()
        );
        assert_eq!(
            normalize_label("  URGENCY & scarcity ").unwrap(),
            LabelId::theory(1).unwrap()
        );
        assert_eq!(
            normalize_label("Teleportation"),
            Err(TaxonomyError::UnknownLabel("Teleportation".into()))
        );
        assert_eq!(normalize_label(" _ "), Err(TaxonomyError::EmptyName));
    }

    #[test]
    fn every_surface_form_round_trips() {
        for id in LabelId::all() {
            for form in id.def().surface_forms() {
                assert_eq!(normalize_label(form).unwrap(), id, "{form}");
                assert_eq!(normalize_label(&form.to_uppercase()).unwrap(), id);
                assert_eq!(normalize_label(&form.replace(' ', "_")).unwrap(), id);
            }
        }
    }

    #[test]
    fn fraud_types_resolve() {
        assert_eq!(normalize_fraud_type("Sextortion").unwrap().index(), 7);
        assert_eq!(normalize_fraud_type("digital_arrest").unwrap().index(), 8);
        assert_eq!(
            normalize_fraud_type("Customer Care/Technical Support Fraud")
                .unwrap()
                .index(),
            1
        );
        assert!(normalize_fraud_type("Bank Robbery").is_err());
        for ft in FraudType::all() {
            assert_eq!(normalize_fraud_type(ft.id()).unwrap(), ft);
        }
    }

    #[test]
    fn global_index_layout() {
        let all: Vec<_> = LabelId::all().collect();
        assert_eq!(all.len(), NUM_LABELS);
        for (g, id) in all.iter().enumerate() {
            assert_eq!(id.global_index(), g);
        }
        assert_eq!(all[14].kind(), LabelKind::Theory);
        assert!(LabelId::tactic(14).is_none());
        assert!(LabelId::theory(6).is_none());
    }

    #[test]
    fn serialization_is_stable() {
        let a = serde_json::to_string(&canonical_space()).unwrap();
        let b = serde_json::to_string(&canonical_space()).unwrap();
        assert_eq!(a, b);
    }
}
