//! Key rotation and backoff against a flaky backend, on a virtual clock.

use cyberlens::provider::{
    backoff_delay, generate_with_retry, Backend, BackendFailure, GenerationConfig, ProviderKey, ProviderPool,
    RetryPolicy, Secret, VirtualClock,
};
use std::sync::atomic::{AtomicU32, Ordering};

/// Fails at the transport level on key "a", returns prose on the first call
/// to "b" and JSON after that.
struct Flaky {
    calls: AtomicU32,
}

impl Backend for Flaky {
    fn name(&self) -> &str {
        "flaky"
    }

    fn complete(&self, _prompt: &str, _config: &GenerationConfig, key: &ProviderKey) -> Result<String, BackendFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        match (key.key_id.as_str(), n) {
            ("a", _) => Err(BackendFailure::Transport("connection reset".into())),
            (_, n) if n < 2 => Ok("Sorry, try again later.".into()),
            _ => Ok("{\"ok\": true}".into()),
        }
    }
}

fn main() {
    let policy = RetryPolicy::default();
    let schedule: Vec<f64> = (1..=7).map(|a| backoff_delay(a, &policy)).collect();
    println!("transport backoff schedule: {schedule:?}");

    let keys = vec![
        ProviderKey::new("a", "demo", Secret::new("sk-aaaa")),
        ProviderKey::new("b", "demo", Secret::new("sk-bbbb")),
    ];
    let pool = ProviderPool::new(keys, Some(3)).expect("keys");
    let clock = VirtualClock::new();
    let accept = |text: &str| {
        serde_json::from_str::<serde_json::Value>(text).map(|_| ()).map_err(|e| e.to_string())
    };
    let backend = Flaky { calls: AtomicU32::new(0) };
    match generate_with_retry("prompt", &pool, &policy, &GenerationConfig::default(), &backend, &clock, &accept) {
        Ok(g) => {
            println!("succeeded on attempt {} with key {}", g.attempts_used, g.key_id);
            for d in g.diagnostics {
                println!("  attempt {} key {} {:?} slept {}s: {}", d.attempt, d.key_id, d.outcome, d.slept, d.message);
            }
        }
        Err(e) => println!("gave up: {e}"),
    }
    println!("sleeps {:?}", clock.sleeps());
    // secrets never show up in debug output
    println!("{:?}", pool.snapshot()[0]);
}
