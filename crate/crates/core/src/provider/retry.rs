use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, GenerationConfig, ProviderError, ProviderKey, ProviderPool, RetryPolicy};

/// Sleeping, abstracted so retry schedules can be tested without waiting.
pub trait Clock: Send + Sync {
    fn sleep(&self, seconds: f64);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, seconds: f64) {
        if seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(seconds));
        }
    }
}

/// Records requested sleeps and returns immediately.
#[derive(Debug, Default)]
pub struct VirtualClock {
    sleeps: Mutex<Vec<f64>>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sleeps(&self) -> Vec<f64> {
        self.sleeps.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn total(&self) -> f64 {
        self.sleeps().iter().sum()
    }
}

impl Clock for VirtualClock {
    fn sleep(&self, seconds: f64) {
        self.sleeps
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(seconds);
    }
}

/// `min(cap, base * mult^(attempt - 1))`, attempts counted from 1.
pub fn backoff_delay(attempt: u32, policy: &RetryPolicy) -> f64 {
    let exponent = attempt.saturating_sub(1).min(i32::MAX as u32) as i32;
    (policy.base_backoff * policy.backoff_mult.powi(exponent)).min(policy.backoff_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    /// No payload: network error or provider error status.
    Transport,
    /// Payload returned but rejected by the acceptance check.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptDiagnostic {
    pub attempt: u32,
    pub key_id: String,
    pub outcome: AttemptOutcome,
    pub message: String,
    pub slept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub attempts_used: u32,
    pub key_id: String,
    pub provider: String,
    /// Failed attempts preceding the success.
    pub diagnostics: Vec<AttemptDiagnostic>,
}

/// Runs one prompt through the pool with bounded retries.
///
/// At most `policy.max_outer_retries` backend calls are made. A transport
/// failure bumps the key's failure count, sleeps `backoff_delay(n)` where `n`
/// counts transport failures for this prompt, and rotates to the next key. A
/// payload rejected by `accept` sleeps `malformed_sleep_factor * attempt` and
/// stays on the key until `retries_per_key` consecutive rejections.
pub fn generate_with_retry(
    prompt: &str,
    pool: &ProviderPool,
    policy: &RetryPolicy,
    config: &GenerationConfig,
    backend: &dyn Backend,
    clock: &dyn Clock,
    accept: &dyn Fn(&str) -> Result<(), String>,
) -> Result<Generation, ProviderError> {
    if prompt.trim().is_empty() {
        return Err(ProviderError::EmptyPrompt);
    }
    policy.validate()?;

    let mut diagnostics = Vec::new();
    let mut transport_failures = 0u32;
    let mut rejections_on_key = 0u32;
    let mut key: ProviderKey = pool.acquire_next_key()?;

    for attempt in 1..=policy.max_outer_retries {
        if !pool.is_enabled(&key.key_id) {
            key = pool.acquire_next_key()?;
            rejections_on_key = 0;
        }
        let rotate = match backend.complete(prompt, config, &key) {
            Ok(text) => match accept(&text) {
                Ok(()) => {
                    return Ok(Generation {
                        text,
                        attempts_used: attempt,
                        key_id: key.key_id,
                        provider: key.provider_name,
                        diagnostics,
                    });
                }
                Err(message) => {
                    rejections_on_key += 1;
                    let slept = policy.malformed_sleep_factor * attempt as f64;
                    clock.sleep(slept);
                    diagnostics.push(AttemptDiagnostic {
                        attempt,
                        key_id: key.key_id.clone(),
                        outcome: AttemptOutcome::Rejected,
                        message,
                        slept,
                    });
                    rejections_on_key >= policy.retries_per_key
                }
            },
            Err(failure) => {
                pool.record_failure(&key.key_id);
                transport_failures += 1;
                let slept = backoff_delay(transport_failures, policy);
                clock.sleep(slept);
                diagnostics.push(AttemptDiagnostic {
                    attempt,
                    key_id: key.key_id.clone(),
                    outcome: AttemptOutcome::Transport,
                    message: failure.to_string(),
                    slept,
                });
                true
            }
        };
        if rotate && attempt < policy.max_outer_retries {
            key = pool.acquire_next_key()?;
            rejections_on_key = 0;
        }
    }
    Err(ProviderError::GenerationFailed {
        attempts: diagnostics,
    })
}
