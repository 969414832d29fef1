//! Deterministic offline backend.
//!
//! Output is assembled from fixed phrase slots. Each slot carries a logit per
//! variant and the variant is drawn from the temperature-scaled softmax of
//! those logits, so low temperatures collapse to the highest-logit variant.
//! The random source is seeded from the caller's seed and the prompt.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Backend, BackendFailure, GenerationConfig, ProviderKey};
use crate::corpus::{AnnotationRecord, NarrativeText, Provenance, KEY_PROVENANCE};
use crate::digest::stable_hash;
use crate::prompting::{extract_narrative, render_block};
use crate::sampling::GenerationSeed;
use crate::taxonomy::{FraudType, LabelId, NUM_LABELS, NUM_TACTICS, NUM_THEORIES};

/// `exp(z_i / T) / sum_j exp(z_j / T)`, computed with the max logit
/// subtracted.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|z| ((z - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Inverse-CDF draw; `u` in `[0, 1)`.
pub fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len().saturating_sub(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    /// A dataset record in the JSON schema, conditioned on the seed token in
    /// the prompt.
    Dataset,
    /// A 20-section analysis block for the narrative in the prompt.
    Analysis,
}

struct Sampler {
    rng: ChaCha8Rng,
    temperature: f64,
}

impl Sampler {
    fn choose(&mut self, logits: &[f64]) -> usize {
        let probs = softmax(logits, self.temperature);
        sample_categorical(&probs, self.rng.random::<f64>())
    }

    fn pick<'a>(&mut self, slot: &Slot<'a>) -> &'a str {
        slot.variants[self.choose(slot.logits)]
    }

    /// Binary decision with logit `z` for yes against 0 for no.
    fn flag(&mut self, z: f64) -> bool {
        self.choose(&[z, 0.0]) == 0
    }
}

struct Slot<'a> {
    variants: &'a [&'a str],
    logits: &'a [f64],
}

const AGE: Slot = Slot {
    variants: &["34", "27", "52", "45", "61"],
    logits: &[2.0, 1.2, 1.0, 0.8, 0.3],
};
const OCCUPATION: Slot = Slot {
    variants: &["school teacher", "software engineer", "retired bank clerk", "shop owner", "nursing student"],
    logits: &[2.0, 1.5, 1.0, 0.8, 0.6],
};
const CITY: Slot = Slot {
    variants: &["Pune", "Bengaluru", "Lucknow", "Kochi", "Jaipur"],
    logits: &[2.0, 1.6, 1.1, 0.9, 0.7],
};
const MONTH: Slot = Slot {
    variants: &["March", "August", "November", "January"],
    logits: &[2.0, 1.4, 1.0, 0.5],
};
const AMOUNT: Slot = Slot {
    variants: &["Rs 2,40,000", "Rs 85,000", "Rs 6,70,000", "Rs 1,15,000"],
    logits: &[2.0, 1.5, 1.0, 0.7],
};
const OPENER: Slot = Slot {
    variants: &[
        "I am a {age}-year-old {occupation} from {city}.",
        "This happened to me last {month} while I was living in {city}.",
        "I never thought I would fall for something like this, but I was cheated in {city} last {month}.",
    ],
    logits: &[2.0, 1.0, 0.5],
};
const FILLER: Slot = Slot {
    variants: &[
        "At that point nothing about it felt unusual to me.",
        "I kept telling myself that everything was being done properly.",
        "My family did not know anything about what was going on.",
        "I did not sleep properly for several nights during all this.",
        "Looking back, there were small signs that I ignored.",
        "I even searched online, but the details looked genuine.",
        "Everything they sent me had official looking logos and signatures.",
        "They always replied quickly and never lost their patience with me.",
        "I borrowed part of the money from a close friend.",
        "A colleague later told me she had heard of similar cases.",
        "I felt too embarrassed to ask anyone for advice at the time.",
        "The whole thing took less than two weeks from start to finish.",
    ],
    logits: &[2.0, 1.6, 1.3, 1.0, 0.8, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2],
};
const CLOSER: Slot = Slot {
    variants: &[
        "I have filed a complaint with the cyber crime cell and I am sharing this so that others stay alert.",
        "I reported it on the national cyber crime portal, but the money has not come back yet.",
    ],
    logits: &[2.0, 1.0],
};
const TARGET_LINES: Slot = Slot {
    variants: &["16", "18", "14", "21", "24"],
    logits: &[2.0, 1.7, 1.2, 1.0, 0.5],
};
const DATASET_FRAMING: Slot = Slot {
    variants: &["plain", "fenced", "preamble", "trailing_comma"],
    logits: &[3.0, 1.0, 0.5, 0.3],
};
const ANALYSIS_PREAMBLE: Slot = Slot {
    variants: &["", "Here is the structured analysis of the narrative.\n\n", "Analysis:\n"],
    logits: &[3.0, 1.0, 0.5],
};

struct FraudScript {
    persona: &'static str,
    channel: &'static str,
    bait: &'static str,
    demand: &'static str,
    boosted: &'static [&'static str],
}

static FRAUD_SCRIPTS: [FraudScript; 10] = [
    FraudScript {
        persona: "a seller on a classifieds website",
        channel: "a chat on the listing app",
        bait: "an advertisement for a used scooter at half the market price",
        demand: "an advance token amount to hold the scooter",
        boosted: &["urgency_and_scarcity", "resource_development", "phantom_riches"],
    },
    FraudScript {
        persona: "a man who said he was from my bank's customer care",
        channel: "a phone call",
        bait: "a complaint I had posted about a failed refund",
        demand: "installing a screen-sharing app to process the refund",
        boosted: &["credential_harvesting", "authority_social_proof_and_impersonation", "collection", "urgency_and_scarcity"],
    },
    FraudScript {
        persona: "a woman I met on a matrimonial website",
        channel: "long messages on WhatsApp",
        bait: "a gift parcel she said she had sent me from London",
        demand: "customs clearance charges for the parcel",
        boosted: &["emotional_exploitation", "persistence", "reconnaissance", "consistency_and_reciprocity"],
    },
    FraudScript {
        persona: "an advisor in a stock tips group",
        channel: "a Telegram investment group",
        bait: "screenshots of members earning 30 percent a week",
        demand: "deposits into a trading account on their platform",
        boosted: &["phantom_riches", "consistency_and_reciprocity", "persistence", "resource_development"],
    },
    FraudScript {
        persona: "a caller claiming to be from my insurance company",
        channel: "a phone call",
        bait: "a bonus that was supposedly pending on my old policy",
        demand: "a processing fee to release the bonus",
        boosted: &["authority_social_proof_and_impersonation", "reconnaissance", "urgency_and_scarcity", "phantom_riches"],
    },
    FraudScript {
        persona: "a recruiter for an online part-time job",
        channel: "SMS and then WhatsApp",
        bait: "easy money for liking videos and rating hotels",
        demand: "prepaid tasks that needed my own money",
        boosted: &["phantom_riches", "consistency_and_reciprocity", "escalation", "resource_development"],
    },
    FraudScript {
        persona: "an agent of an instant loan app",
        channel: "the loan app and phone calls",
        bait: "a quick loan with no paperwork",
        demand: "repayments far above the loan amount",
        boosted: &["discovery", "pivoting", "fear_and_intimidation", "command_and_control", "collection"],
    },
    FraudScript {
        persona: "a woman who sent me a friend request",
        channel: "a video call on social media",
        bait: "friendly chats that quickly turned personal",
        demand: "payment to stop an edited video from being shared",
        boosted: &["collection", "command_and_control", "fear_and_intimidation", "emotional_exploitation"],
    },
    FraudScript {
        persona: "a man in uniform who said he was a police officer",
        channel: "a video call",
        bait: "a parcel with drugs that had supposedly been booked in my name",
        demand: "transferring my savings for 'verification' by the agency",
        boosted: &["fear_and_intimidation", "authority_social_proof_and_impersonation", "command_and_control", "defense_evasion", "urgency_and_scarcity"],
    },
    FraudScript {
        persona: "a crypto mentor I found on Instagram",
        channel: "Instagram messages and a trading website",
        bait: "a new coin that was about to be listed",
        demand: "buying the coin through their exchange",
        boosted: &["phantom_riches", "defense_evasion", "persistence", "consistency_and_reciprocity"],
    },
];

/// First-person narrative line and annotator-style reason for each label.
static LABEL_TEXT: [(&str, &str); NUM_LABELS] = [
    ("Before anything else, they already knew my full name, my employer and details about my family.",
     "The scammer already knew personal details such as the victim's name, employer and family before contact."),
    ("Later I found out they were using rented SIM cards and a fake office number to look legitimate.",
     "The offenders prepared rented SIM cards and a fake office number to support the scam."),
    ("It all began when {persona} contacted me through {channel}.",
     "The scammer initiated contact with the victim through {channel}."),
    ("They convinced me to go ahead with {demand}, and I paid {amount}.",
     "The victim was induced to act by going ahead with {demand}, paying {amount}."),
    ("For weeks they kept calling and messaging me every day so that I would not back out.",
     "The scammers kept the victim engaged with daily calls and messages over several weeks."),
    ("After the first payment they asked for much larger amounts and even took a loan in my name.",
     "The fraud escalated from a small first payment to larger demands and a loan in the victim's name."),
    ("They only used internet calling numbers and moved the money through several accounts so it could not be traced.",
     "The offenders hid their identity using internet calling numbers and layered accounts."),
    ("They asked me for my net banking password and the OTP that came on my phone.",
     "The scammer obtained the victim's banking password and OTP."),
    ("Through the app they went through my contacts and photo gallery.",
     "The scammers accessed the victim's contacts and photo gallery to find more to exploit."),
    ("Soon my friends also received messages from my number asking them for money.",
     "The victim's account was used to send scam messages to friends and contacts."),
    ("They recorded our calls and kept screenshots of all my chats.",
     "The scammers recorded calls and captured chats from the victim."),
    ("They told me exactly what to do and not to disconnect the call or tell anyone.",
     "The scammers directly controlled the victim's actions and kept them isolated on the call."),
    ("The money went to an account that was emptied within minutes.",
     "The victim's money was transferred out to an account that was quickly drained."),
    ("I lost {amount} and I still feel anxious every time my phone rings.",
     "The victim suffered a financial loss of {amount} and lasting anxiety."),
    ("They threatened that I would be arrested and my family would be shamed.",
     "The scammer used threats of arrest and public shame to frighten the victim."),
    ("They kept saying I had only a few minutes left before the offer or case would close.",
     "The scammer created time pressure, saying only minutes were left."),
    ("They sent official-looking letters and ID cards and said many others had already done the same.",
     "The scammer impersonated an official body and claimed others had already complied."),
    ("They first returned a small amount to me so I would trust them with more.",
     "A small early payout created a sense of obligation and commitment to continue."),
    ("They promised returns much higher than anything I had ever earned.",
     "The scammer promised unrealistically high rewards."),
    ("They talked about their own problems and made me feel they truly cared about me.",
     "The scammer built an emotional bond with the victim to lower their guard."),
];

/// Words in a narrative that suggest a label, used in analysis mode.
static LABEL_CUES: [&[&str]; NUM_LABELS] = [
    &["already knew", "full name", "my employer"],
    &["rented sim", "fake office", "sim cards"],
    &["contacted me", "began when", "friend request", "called me"],
    &["convinced me", "i paid", "transferred"],
    &["for weeks", "every day", "kept calling"],
    &["larger amounts", "loan in my name"],
    &["internet calling", "could not be traced", "several accounts"],
    &["password", "otp"],
    &["contacts and photo", "photo gallery"],
    &["my friends also", "from my number"],
    &["recorded", "screenshots"],
    &["not to disconnect", "told me exactly"],
    &["emptied", "money went"],
    &["i lost", "anxious"],
    &["threatened", "arrested"],
    &["few minutes", "minutes left"],
    &["official-looking", "police officer", "customer care", "many others"],
    &["small amount", "returned"],
    &["returns much higher", "earning 30 percent", "bonus"],
    &["truly cared", "matrimonial", "personal"],
];

const BASE_AFFINITY: [f64; NUM_LABELS] = [
    -1.5, -1.5, 2.5, 2.5, -1.0, -2.0, -1.5, -1.0, -2.0, -2.5, -1.5, -1.5, 1.5, 2.5, -1.0, -0.5,
    -0.5, -1.5, -1.0, -1.0,
];

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter().fold(template.to_string(), |acc, (k, v)| {
        acc.replace(&format!("{{{k}}}"), v)
    })
}

fn sampler(prompt: &str, seed: u64, config: &GenerationConfig) -> Sampler {
    Sampler {
        rng: ChaCha8Rng::seed_from_u64(seed ^ stable_hash(prompt)),
        temperature: config.temperature,
    }
}

/// Pure function of `(prompt, seed, config, mode)`.
pub fn mock_generate(prompt: &str, seed: u64, config: &GenerationConfig, mode: MockMode) -> String {
    let mut s = sampler(prompt, seed, config);
    match mode {
        MockMode::Dataset => dataset_text(prompt, &mut s),
        MockMode::Analysis => analysis_text(prompt, &mut s),
    }
}

fn dataset_text(prompt: &str, s: &mut Sampler) -> String {
    let conditioning = GenerationSeed::find_in(prompt);
    let (fraud_type, major_tactic, major_theory) = match conditioning {
        Some(seed) => (seed.fraud_type, seed.major_tactic, seed.major_theory),
        None => {
            let h = stable_hash(prompt);
            (
                FraudType::new((h % 10) as usize).expect("in range"),
                LabelId::tactic(((h >> 8) % NUM_TACTICS as u64) as usize).expect("in range"),
                LabelId::theory(((h >> 16) % NUM_THEORIES as u64) as usize).expect("in range"),
            )
        }
    };
    let script = &FRAUD_SCRIPTS[fraud_type.index()];

    let mut present = [false; NUM_LABELS];
    for label in LabelId::all() {
        let boosted = script.boosted.contains(&label.id());
        let z = BASE_AFFINITY[label.global_index()] + if boosted { 3.0 } else { 0.0 };
        present[label.global_index()] = s.flag(z);
    }
    present[major_tactic.global_index()] = true;
    present[major_theory.global_index()] = true;

    let vars = [
        ("age", s.pick(&AGE)),
        ("occupation", s.pick(&OCCUPATION)),
        ("city", s.pick(&CITY)),
        ("month", s.pick(&MONTH)),
        ("amount", s.pick(&AMOUNT)),
        ("persona", script.persona),
        ("channel", script.channel),
        ("demand", script.demand),
    ];
    let target: usize = s.pick(&TARGET_LINES).parse().expect("numeric slot");

    let mut lines = vec![
        fill(s.pick(&OPENER), &vars),
        format!("It started with {}.", script.bait),
    ];
    for label in LabelId::all().filter(|l| present[l.global_index()]) {
        lines.push(fill(LABEL_TEXT[label.global_index()].0, &vars));
    }
    let closer = fill(s.pick(&CLOSER), &vars);
    // fillers are drawn without replacement until the pool runs out
    let mut unused: Vec<usize> = (0..FILLER.variants.len()).collect();
    while lines.len() + 1 < target {
        if unused.is_empty() {
            unused = (0..FILLER.variants.len()).collect();
        }
        let logits: Vec<f64> = unused.iter().map(|&i| FILLER.logits[i]).collect();
        let k = s.choose(&logits);
        lines.push(FILLER.variants[unused.remove(k)].to_string());
    }
    lines.push(closer);

    let reason = |label: LabelId| {
        present[label.global_index()].then(|| fill(LABEL_TEXT[label.global_index()].1, &vars))
    };
    let record = AnnotationRecord {
        story: NarrativeText::new(lines.join("\n")).expect("non-empty story"),
        fraud_type,
        tactic_present: std::array::from_fn(|i| present[i]),
        tactic_reason: std::array::from_fn(|i| reason(LabelId::tactic(i).expect("in range"))),
        theory_present: std::array::from_fn(|i| present[NUM_TACTICS + i]),
        theory_reason: std::array::from_fn(|i| reason(LabelId::theory(i).expect("in range"))),
        major_tactic,
        major_theory,
        provenance: Provenance::default(),
    };
    let mut json = record.to_json();
    json.as_object_mut()
        .expect("record serializes to an object")
        .remove(KEY_PROVENANCE);
    let body = serde_json::to_string_pretty(&json).expect("json serializes");

    match s.pick(&DATASET_FRAMING) {
        "fenced" => format!("```json\n{body}\n```"),
        "preamble" => format!("Here is the generated record:\n{body}\nLet me know if you need another."),
        "trailing_comma" => {
            let cut = body.rfind('}').expect("object body");
            format!("{},\n}}", body[..cut].trim_end())
        }
        _ => body,
    }
}

fn analysis_text(prompt: &str, s: &mut Sampler) -> String {
    let narrative = extract_narrative(prompt).unwrap_or(prompt);
    let lowered = narrative.to_lowercase();
    let sentences: Vec<&str> = narrative
        .split(['\n', '.'])
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect();

    let mut flags = [false; NUM_LABELS];
    let mut reasons: [String; NUM_LABELS] = std::array::from_fn(|_| String::new());
    for label in LabelId::all() {
        let g = label.global_index();
        let cued = LABEL_CUES[g].iter().any(|cue| lowered.contains(cue));
        flags[g] = s.flag(if cued { 3.0 } else { -3.0 });
        if flags[g] {
            let evidence = sentences
                .iter()
                .find(|sentence| {
                    let lower = sentence.to_lowercase();
                    LABEL_CUES[g].iter().any(|cue| lower.contains(cue))
                })
                .copied()
                .unwrap_or("the narrative describes this behavior");
            reasons[g] = format!("The victim reports: {evidence}.");
        }
    }
    let preamble = s.pick(&ANALYSIS_PREAMBLE);
    format!("{preamble}{}", render_block(&flags, |g| flags[g].then_some(reasons[g].as_str())))
}

/// Per-prompt fault schedule for [`MockBackend`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultInjection {
    /// First N calls for each prompt fail at the transport level.
    pub transport_first: u32,
    /// Next N calls for each prompt return unusable text.
    pub malformed_first: u32,
    /// Sample indices (read from the seed token) that never get a usable
    /// payload.
    pub permanent_malformed: BTreeSet<u64>,
}

impl FaultInjection {
    pub fn is_empty(&self) -> bool {
        self.transport_first == 0 && self.malformed_first == 0 && self.permanent_malformed.is_empty()
    }
}

#[derive(Debug)]
pub struct MockBackend {
    mode: MockMode,
    seed: u64,
    faults: FaultInjection,
    calls: Mutex<HashMap<u64, u32>>,
}

impl MockBackend {
    pub fn new(mode: MockMode, seed: u64) -> Self {
        MockBackend {
            mode,
            seed,
            faults: FaultInjection::default(),
            calls: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_faults(mut self, faults: FaultInjection) -> Self {
        self.faults = faults;
        self
    }

    fn malformed(call: u32) -> String {
        if call % 2 == 1 {
            "I'm sorry, I cannot produce that record right now.".to_string()
        } else {
            "{\"Story\": \"I received a call from".to_string()
        }
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(
        &self,
        prompt: &str,
        config: &GenerationConfig,
        _key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        let call = {
            let mut calls = self.calls.lock().unwrap_or_else(|p| p.into_inner());
            let count = calls.entry(stable_hash(prompt)).or_default();
            *count += 1;
            *count
        };
        if call <= self.faults.transport_first {
            return Err(BackendFailure::Transport("injected transport failure".into()));
        }
        let permanent = GenerationSeed::find_in(prompt)
            .is_some_and(|seed| self.faults.permanent_malformed.contains(&seed.sample_index));
        if permanent || call <= self.faults.transport_first + self.faults.malformed_first {
            return Ok(Self::malformed(call));
        }
        Ok(mock_generate(prompt, self.seed, config, self.mode))
    }
}
