//! Parses a raw model answer into 20 flags, reasons and major labels.

use cyberlens::parsing::{parse_output, predict, ParseStatus};
use cyberlens::taxonomy::LabelId;

const ANSWER: &str = "Here is my analysis.

[Initial Contact]
Present: Yes
Reason: The caller reached out claiming to be from the bank.

[Credential Harvesting]
Present: YES
Reason: He asked for the OTP sent to my phone [urgently].

[Impact]
Present: yes/no
Reason: Money left my account.

[Fear & Intimidation]
Present: No
Reason: N/A

[Urgency & Scarcity]
Present: Yes
Reason: He said the account would be blocked in ten minutes.";

fn main() {
    let narrative = "Someone from the bank called. He said my account would be blocked in ten minutes \
        unless I shared the OTP. After I shared it, money left my account.";
    let parsed = parse_output(ANSWER);
    for label in LabelId::all() {
        let p = parsed.get(label);
        if p.status == ParseStatus::Matched {
            println!("{:<24} {:<5} {}", label.display_name(), p.present, p.reason);
        }
    }
    println!("{} labels missing from the answer default to absent", parsed.defaulted_count());
    let vectors = predict(&parsed, narrative);
    println!(
        "major tactic {:?}, major theory {:?}",
        vectors.major_tactic.map(|l| l.display_name()),
        vectors.major_theory.map(|l| l.display_name())
    );
}
