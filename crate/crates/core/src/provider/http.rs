use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{Backend, BackendFailure, GenerationConfig, ProviderKey};

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    #[serde(flatten)]
    config: &'a GenerationConfig,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Generic JSON completion endpoint.
///
/// `POST {base_url}` with body `{"prompt": ..., <generation config fields>}`
/// and `Authorization: Bearer <secret>`; a 2xx response must carry
/// `{"text": ...}`. Provider-specific payloads belong in an adapter service
/// in front of this contract.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    name: String,
    base_url: String,
    agent: Agent,
}

impl HttpBackend {
    pub fn new(name: impl Into<String>, base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            name: name.into(),
            base_url: base_url.into(),
            agent,
        }
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(
        &self,
        prompt: &str,
        config: &GenerationConfig,
        key: &ProviderKey,
    ) -> Result<String, BackendFailure> {
        let mut request = self.agent.post(&self.base_url);
        if !key.secret.expose().is_empty() {
            request = request.header("Authorization", &format!("Bearer {}", key.secret.expose()));
        }
        let mut response = request
            .send_json(CompletionRequest { prompt, config })
            .map_err(|e| BackendFailure::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let message = response
                .body_mut()
                .read_to_string()
                .unwrap_or_default()
                .chars()
                .take(200)
                .collect();
            return Err(BackendFailure::Provider { status, message });
        }
        response
            .body_mut()
            .read_json::<CompletionResponse>()
            .map(|r| r.text)
            .map_err(|e| BackendFailure::Transport(format!("bad response body: {e}")))
    }
}
