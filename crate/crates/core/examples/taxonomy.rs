//! Lists the label spaces and shows how free-form names are normalized.

use cyberlens::taxonomy::{normalize_fraud_type, normalize_label, FraudType, LabelId};

fn main() {
    println!("tactics:");
    for label in LabelId::tactics() {
        println!("  {:>2} {:<24} {}", label.global_index(), label.display_name(), label.def().description);
    }
    println!("theories:");
    for label in LabelId::theories() {
        println!("  {:>2} {:<28} {}", label.global_index(), label.display_name(), label.def().description);
    }
    println!("fraud types: {}", FraudType::all().map(|f| f.display_name()).collect::<Vec<_>>().join(", "));

    for raw in ["command and control", "C2", "Fear_&_Intimidation", "authority / social proof", "phishing?"] {
        match normalize_label(raw) {
            Ok(label) => println!("{raw:?} -> {}", label.id()),
            Err(e) => println!("{raw:?} -> {e}"),
        }
    }
    println!("{:?}", normalize_fraud_type("Investment Fraud").map(|f| f.id()));
}
