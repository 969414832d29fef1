//! Cleans up chatty model replies and validates them as annotation records.
//! The hand-written reply below leaves out most labels and is rejected; the
//! mock replies that follow are complete.

use cyberlens::corpus::{record_from_model_text, repair_json_text, validate_record};
use cyberlens::prompting::build_generation_prompt;
use cyberlens::provider::{mock_generate, GenerationConfig, MockMode};
use cyberlens::sampling::{plan_triplets, seeds_for_plan, TripletSpace};

const REPLY: &str = r#"Sure! Here is the record you asked for:
```json
{
  "Story": "A man called saying he was from customs.\nHe said my parcel had drugs and I must pay a fine.",
  "Fraud_Type": "Customs Fraud",
  "Tactics": {
    "Initial_Contact": "Yes",
    "Initial_Contact_Reason": "A stranger called claiming to be from customs.",
    "Detonation": "Yes",
    "Detonation_Reason": "I paid the fine.",
  },
  "Behavioural_Theories": {
    "Fear_Intimidation": "Yes",
    "Fear_Intimidation_Reason": "He threatened arrest over the parcel.",
  },
  "Major_Tactic": "Initial Contact",
  "Major_Theory": "Fear & Intimidation",
}
```
Let me know if you need another one."#;

fn main() {
    let fixed = match repair_json_text(REPLY) {
        Ok(text) => text,
        Err(e) => return eprintln!("unrepairable: {e}"),
    };
    println!("{fixed}\n");
    let value: serde_json::Value = match serde_json::from_str(&fixed) {
        Ok(v) => v,
        Err(e) => return eprintln!("still not JSON: {e}"),
    };
    match validate_record(&value) {
        Ok(record) => {
            let present: Vec<_> = cyberlens::taxonomy::LabelId::all()
                .filter(|&l| record.present(l))
                .map(|l| l.display_name())
                .collect();
            println!("valid: {} present labels: {}", present.len(), present.join(", "));
        }
        Err(e) => println!("rejected: {e}"),
    }

    let config = GenerationConfig { temperature: 1.0, ..GenerationConfig::default() };
    for seed in seeds_for_plan(&plan_triplets(4, &TripletSpace::full(), 0), 0) {
        let raw = mock_generate(&build_generation_prompt(&seed), seed.nonce, &config, MockMode::Dataset);
        let first_line = raw.lines().next().unwrap_or("");
        match record_from_model_text(&raw) {
            Ok(r) => println!("{first_line:<40} -> valid, major {}", r.major_tactic.display_name()),
            Err(e) => println!("{first_line:<40} -> {e}"),
        }
    }
}
