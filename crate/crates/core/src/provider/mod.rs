//! Text-generation backends behind a rotating credential pool.
//!
//! [`generate_with_retry`] drives one sample: transport failures are charged
//! to the key, backed off exponentially and rotated away from; payloads that
//! come back but fail the caller's acceptance check are retried after a
//! linear sleep. All sleeping goes through a [`Clock`] so tests can run on a
//! [`VirtualClock`].

mod credentials;
mod http;
mod mock;
mod retry;

pub use credentials::{load_credentials, CREDENTIAL_ENV_PREFIX};
pub use http::HttpBackend;
pub use mock::{
    mock_generate, sample_categorical, softmax, FaultInjection, MockBackend, MockMode,
};
pub use retry::{
    backoff_delay, generate_with_retry, AttemptDiagnostic, AttemptOutcome, Clock, Generation,
    SystemClock, VirtualClock,
};

use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("every key in the provider pool is disabled")]
    PoolExhausted,
    #[error("generation failed after {} attempts", .attempts.len())]
    GenerationFailed { attempts: Vec<AttemptDiagnostic> },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid retry policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("duplicate key id {0:?}")]
    DuplicateKey(String),
}

/// A credential. Never printed.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderKey {
    pub key_id: String,
    pub provider_name: String,
    pub secret: Secret,
    pub failure_count: u32,
    pub disabled: bool,
}

impl ProviderKey {
    pub fn new(key_id: impl Into<String>, provider: impl Into<String>, secret: Secret) -> Self {
        ProviderKey {
            key_id: key_id.into(),
            provider_name: provider.into(),
            secret,
            failure_count: 0,
            disabled: false,
        }
    }
}

#[derive(Debug)]
struct PoolState {
    keys: Vec<ProviderKey>,
    cursor: usize,
}

/// Round-robin credential pool with failure tracking. Safe to share between
/// worker threads.
#[derive(Debug)]
pub struct ProviderPool {
    state: Mutex<PoolState>,
    disable_after: Option<u32>,
}

impl ProviderPool {
    /// `disable_after`: failures at which a key is taken out of rotation.
    pub fn new(keys: Vec<ProviderKey>, disable_after: Option<u32>) -> Result<Self, ProviderError> {
        let mut seen = std::collections::HashSet::new();
        for key in &keys {
            if !seen.insert(key.key_id.clone()) {
                return Err(ProviderError::DuplicateKey(key.key_id.clone()));
            }
        }
        Ok(ProviderPool {
            state: Mutex::new(PoolState { keys, cursor: 0 }),
            disable_after,
        })
    }

    /// One unnamed key for offline backends.
    pub fn offline(provider: &str) -> Self {
        ProviderPool::new(
            vec![ProviderKey::new("offline", provider, Secret::new(""))],
            None,
        )
        .expect("single key")
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, PoolState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Next enabled key in cyclic order.
    pub fn acquire_next_key(&self) -> Result<ProviderKey, ProviderError> {
        let mut state = self.lock();
        let n = state.keys.len();
        for step in 0..n {
            let index = (state.cursor + step) % n;
            if !state.keys[index].disabled {
                state.cursor = (index + 1) % n;
                return Ok(state.keys[index].clone());
            }
        }
        Err(ProviderError::PoolExhausted)
    }

    pub fn record_failure(&self, key_id: &str) {
        let mut state = self.lock();
        if let Some(key) = state.keys.iter_mut().find(|k| k.key_id == key_id) {
            key.failure_count += 1;
            if let Some(limit) = self.disable_after {
                if key.failure_count >= limit && !key.disabled {
                    log::warn!(
                        "disabling key {} after {} failures",
                        key.key_id,
                        key.failure_count
                    );
                    key.disabled = true;
                }
            }
        }
    }

    pub fn disable(&self, key_id: &str) {
        let mut state = self.lock();
        if let Some(key) = state.keys.iter_mut().find(|k| k.key_id == key_id) {
            key.disabled = true;
        }
    }

    pub fn is_enabled(&self, key_id: &str) -> bool {
        self.lock()
            .keys
            .iter()
            .any(|k| k.key_id == key_id && !k.disabled)
    }

    pub fn snapshot(&self) -> Vec<ProviderKey> {
        self.lock().keys.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_outer_retries: u32,
    /// Consecutive rejected payloads from one key before rotating away from it.
    pub retries_per_key: u32,
    pub base_backoff: f64,
    pub backoff_mult: f64,
    pub backoff_cap: f64,
    /// Seconds per attempt slept after a rejected payload.
    pub malformed_sleep_factor: f64,
    /// Transport failures at which a key is disabled. `None` never disables.
    pub key_disable_threshold: Option<u32>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_outer_retries: 4,
            retries_per_key: 2,
            base_backoff: 5.0,
            backoff_mult: 2.0,
            backoff_cap: 60.0,
            malformed_sleep_factor: 2.0,
            key_disable_threshold: Some(10),
        }
    }
}

impl RetryPolicy {
    // negated comparisons so NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |msg: &str| Err(ProviderError::InvalidPolicy(msg.to_string()));
        if self.max_outer_retries == 0 || self.retries_per_key == 0 {
            return bad("retry counts must be positive");
        }
        if !(self.base_backoff > 0.0 && self.backoff_mult > 0.0 && self.malformed_sleep_factor > 0.0)
        {
            return bad("backoff parameters must be positive");
        }
        if !(self.backoff_cap >= self.base_backoff) {
            return bad("backoff_cap must be at least base_backoff");
        }
        if self.key_disable_threshold == Some(0) {
            return bad("key_disable_threshold must be positive");
        }
        Ok(())
    }
}

/// Decoding parameters forwarded to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub do_sample: bool,
    pub batch_size: usize,
    pub max_context_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self::evaluation()
    }
}

impl GenerationConfig {
    pub fn evaluation() -> Self {
        GenerationConfig {
            max_new_tokens: 1536,
            temperature: 0.1,
            top_p: 0.9,
            repetition_penalty: 1.1,
            do_sample: true,
            batch_size: 32,
            max_context_tokens: 4096,
        }
    }

    pub fn production() -> Self {
        GenerationConfig {
            temperature: 0.01,
            ..Self::evaluation()
        }
    }

    // negated comparisons so NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.temperature > 0.0) {
            return Err(ProviderError::InvalidConfig("temperature must be > 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProviderError::InvalidConfig("top_p must be in (0, 1]".into()));
        }
        if self.batch_size == 0 {
            return Err(ProviderError::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendFailure {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {message}")]
    Provider { status: u16, message: String },
}

/// `complete(prompt, config, credential) -> text | failure`.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(
        &self,
        prompt: &str,
        config: &GenerationConfig,
        key: &ProviderKey,
    ) -> Result<String, BackendFailure>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(
        &self,
        prompt: &str,
        config: &GenerationConfig,
        key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        (**self).complete(prompt, config, key)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(
        &self,
        prompt: &str,
        config: &GenerationConfig,
        key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        (**self).complete(prompt, config, key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> ProviderPool {
        let keys = (0..n)
            .map(|i| {
                ProviderKey::new(
                    ((b'A' + i as u8) as char).to_string(),
                    "test",
                    Secret::new("s"),
                )
            })
            .collect();
        ProviderPool::new(keys, None).unwrap()
    }

    fn ids(pool: &ProviderPool, calls: usize) -> Vec<String> {
        (0..calls)
            .map(|_| pool.acquire_next_key().unwrap().key_id)
            .collect()
    }

    #[test]
    fn round_robin() {
        assert_eq!(ids(&pool(3), 4), ["A", "B", "C", "A"]);
    }

    #[test]
    fn skips_disabled() {
        let p = pool(2);
        p.disable("A");
        assert_eq!(ids(&p, 3), ["B", "B", "B"]);
    }

    #[test]
    fn exhausted() {
        let p = pool(2);
        p.disable("A");
        p.disable("B");
        assert_eq!(p.acquire_next_key(), Err(ProviderError::PoolExhausted));
        let empty = ProviderPool::new(Vec::new(), None).unwrap();
        assert_eq!(empty.acquire_next_key(), Err(ProviderError::PoolExhausted));
    }

    #[test]
    fn failure_threshold_disables() {
        let keys = vec![ProviderKey::new("A", "t", Secret::new("s"))];
        let p = ProviderPool::new(keys, Some(2)).unwrap();
        p.record_failure("A");
        assert!(p.is_enabled("A"));
        p.record_failure("A");
        assert!(!p.is_enabled("A"));
        assert_eq!(p.snapshot()[0].failure_count, 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let keys = vec![
            ProviderKey::new("A", "t", Secret::new("s")),
            ProviderKey::new("A", "t", Secret::new("s")),
        ];
        assert!(matches!(
            ProviderPool::new(keys, None),
            Err(ProviderError::DuplicateKey(_))
        ));
    }

    #[test]
    fn secrets_are_redacted() {
        let key = ProviderKey::new("A", "openai", Secret::new("sk-very-secret"));
        assert!(!format!("{key:?}").contains("very-secret"));
    }

    #[test]
    fn concurrent_rotation_is_fair() {
        let p = pool(4);
        let counts = Mutex::new(std::collections::HashMap::<String, usize>::new());
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..100 {
                        let id = p.acquire_next_key().unwrap().key_id;
                        *counts.lock().unwrap().entry(id).or_default() += 1;
                    }
                });
            }
        });
        let counts = counts.into_inner().unwrap();
        assert!(counts.values().all(|&c| c == 200));
    }

    #[test]
    fn policy_and_config_defaults() {
        let policy = RetryPolicy::default();
        policy.validate().unwrap();
        assert_eq!(policy.max_outer_retries, 4);
        assert_eq!(policy.retries_per_key, 2);
        assert_eq!(policy.base_backoff, 5.0);
        assert_eq!(policy.backoff_cap, 60.0);
        let bad = RetryPolicy {
            backoff_cap: 1.0,
            ..RetryPolicy::default()
        };
        assert!(bad.validate().is_err());

        let eval = GenerationConfig::evaluation();
        assert_eq!(eval.max_new_tokens, 1536);
        assert_eq!(eval.temperature, 0.1);
        assert_eq!(GenerationConfig::production().temperature, 0.01);
        assert!(GenerationConfig {
            temperature: 0.0,
            ..eval.clone()
        }
        .validate()
        .is_err());
        assert!(GenerationConfig { top_p: 1.5, ..eval }.validate().is_err());
    }
}
