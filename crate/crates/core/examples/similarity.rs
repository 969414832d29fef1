//! Scores a predicted explanation against the reference one.

use cyberlens::metrics::{similarity_scores, HashingEmbedder};

fn main() {
    let reference = "The caller pretended to be a police officer and threatened arrest.";
    let candidates = [
        "The caller pretended to be a police officer and threatened arrest.",
        "The scammer posed as a police officer and threatened to arrest the victim.",
        "The victim received a parcel notification.",
    ];
    let embedder = HashingEmbedder::default();
    for c in candidates {
        match similarity_scores(c, reference, Some(&embedder)) {
            Ok(s) => println!(
                "R1 {:.2}  R2 {:.2}  RL {:.2}  BLEU {:.2}  embed {:.2}  | {c}",
                s.rouge1.f1,
                s.rouge2.f1,
                s.rouge_l.f1,
                s.bleu,
                s.embed_f1.unwrap_or(f64::NAN)
            ),
            Err(e) => println!("{e}: {c}"),
        }
    }
}
