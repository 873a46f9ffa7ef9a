//! HTTP client for chat-completion servers of the kind local inference
//! runtimes expose.
//!
//! Wire shape: POST a JSON object `{model, messages, temperature, seed,
//! max_tokens}` and read the completion from `choices[0].message.content`.

use super::{BackendConfig, BackendError, ChatBackend, Semaphore};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    seed: u64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: MessageBody,
}

#[derive(Deserialize)]
struct MessageBody {
    content: String,
}

/// Blocking chat-completion client with a global in-flight request bound.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    limiter: Semaphore,
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build();
        HttpBackend {
            agent: agent_config.into(),
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            limiter: Semaphore::new(config.concurrency),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError> {
        let request = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.temperature,
            seed,
            max_tokens: self.max_tokens,
        };

        let _permit = self.limiter.acquire();
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|err| match err {
                ureq::Error::Timeout(t) => BackendError::Timeout(t.to_string()),
                ureq::Error::StatusCode(code) => {
                    BackendError::Transport(format!("server returned HTTP {code}"))
                }
                other => BackendError::Transport(other.to_string()),
            })?;

        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Protocol(format!("malformed completion body: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
        Ok(content)
    }
}
