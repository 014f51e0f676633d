//! Chat-completion requests with retry and backoff.
//!
//! Request body: `{"model": ..., "messages": [{"role": "user", "content": prompt}], "temperature": t}`
//! with a bearer token. The reply text is `choices[0].message.content`
//! (or `choices[0].text`); a body that is not in either shape is taken
//! verbatim.
//!
//! Refusals: an empty reply, `finish_reason == "content_filter"`, status 451,
//! or a 400 whose body mentions a content filter or moderation.

use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON body and returns the raw reply. `Err` means the request
/// never produced an HTTP response (connect failure, timeout, reset).
pub trait Transport: Send + Sync {
    fn post_json(&self, body: &str) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
    endpoint: String,
    token: String,
}

impl UreqTransport {
    pub fn new(endpoint: impl Into<String>, token: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.into(),
            token: token.into(),
        }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, body: &str) -> Result<HttpReply, String> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.token))
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (1-based `attempt`), doubling each time.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Text(String),
    Refusal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub reply: Reply,
    pub attempts: u32,
}

impl Completion {
    pub fn retries(&self) -> u32 {
        self.attempts.saturating_sub(1)
    }
}

enum Classified {
    Done(Reply),
    Transient(String),
    Fatal(LlmError),
}

fn mentions_moderation(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    ["content_filter", "content_policy", "moderation", "responsibleaipolicyviolation"]
        .iter()
        .any(|m| lower.contains(m))
}

fn extract_text(body: &str) -> Reply {
    let Ok(value) = serde_json::from_str::<Value>(body) else {
        return text_or_refusal(body);
    };
    let choice = &value["choices"][0];
    if choice["finish_reason"] == "content_filter" {
        return Reply::Refusal;
    }
    let content = choice["message"]["content"].as_str().or_else(|| choice["text"].as_str());
    match content {
        Some(text) => text_or_refusal(text),
        None if value.get("choices").is_some() => Reply::Refusal,
        None => text_or_refusal(body),
    }
}

fn text_or_refusal(text: &str) -> Reply {
    if text.trim().is_empty() {
        Reply::Refusal
    } else {
        Reply::Text(text.to_string())
    }
}

fn classify(reply: HttpReply) -> Classified {
    match reply.status {
        200..=299 => Classified::Done(extract_text(&reply.body)),
        451 => Classified::Done(Reply::Refusal),
        400 if mentions_moderation(&reply.body) => Classified::Done(Reply::Refusal),
        401 | 403 => Classified::Fatal(LlmError::Authentication { status: reply.status }),
        408 | 425 | 429 | 500..=599 => Classified::Transient(format!("HTTP {}", reply.status)),
        status => Classified::Fatal(LlmError::Status {
            status,
            body: reply.body.chars().take(200).collect(),
        }),
    }
}

/// A chat-completion client bound to one model.
pub struct ChatClient<T: Transport> {
    transport: T,
    model: String,
    temperature: f64,
    retry: RetryPolicy,
}

impl<T: Transport> ChatClient<T> {
    pub fn new(transport: T, model: impl Into<String>, temperature: f64, retry: RetryPolicy) -> Self {
        Self {
            transport,
            model: model.into(),
            temperature,
            retry,
        }
    }

    pub fn request_body(&self, prompt: &str) -> String {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        })
        .to_string()
    }

    pub fn request_summary(&self, prompt: &str) -> Result<Completion, LlmError> {
        let body = self.request_body(prompt);
        let max_attempts = self.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            let outcome = match self.transport.post_json(&body) {
                Ok(reply) => classify(reply),
                Err(e) => Classified::Transient(e),
            };
            match outcome {
                Classified::Done(reply) => return Ok(Completion { reply, attempts: attempt }),
                Classified::Fatal(e) => return Err(e),
                Classified::Transient(e) => last_error = e,
            }
            if attempt < max_attempts {
                thread::sleep(self.retry.backoff(attempt));
            }
        }
        Err(LlmError::Transport {
            attempts: max_attempts,
            message: last_error,
        })
    }
}

/// One-off request against an HTTP endpoint.
pub fn request_summary(
    endpoint: &str,
    token: &str,
    model: &str,
    prompt: &str,
    retry: RetryPolicy,
) -> Result<Completion, LlmError> {
    let transport = UreqTransport::new(endpoint, token, Duration::from_secs(120));
    ChatClient::new(transport, model, 0.0, retry).request_summary(prompt)
}
