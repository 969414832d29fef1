//! Renders the detailed and concise analysis prompts for one narrative.

use cyberlens::prompting::{build_prompt, PromptMode};

fn main() {
    let narrative = "I got a WhatsApp message offering part-time work liking videos.\n\
        After a few small payouts they asked me to deposit money for a premium task.\n\
        When I tried to withdraw they demanded a tax and then stopped replying.";
    for mode in [PromptMode::Detailed, PromptMode::Concise] {
        let bundle = build_prompt(mode, narrative);
        println!("{mode:?}: ~{} tokens, {} chars", bundle.approx_token_count, bundle.rendered.len());
    }
    let concise = build_prompt(PromptMode::Concise, narrative);
    println!("\n{}", concise.rendered);
}
