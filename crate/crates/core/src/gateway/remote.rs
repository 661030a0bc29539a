//! Chat-completion client for the remote backend.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendConfig, RetryPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

pub(crate) struct RemoteClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
    body_base: serde_json::Value,
    retry: RetryPolicy,
}

impl RemoteClient {
    pub(crate) fn new(config: &BackendConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::Config(format!("credential variable {} is not set", config.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint: config.endpoint.clone(),
            api_key,
            body_base: json!({
                "model": config.model,
                "temperature": config.temperature,
                "max_tokens": config.max_tokens,
            }),
            retry: config.retry.clone(),
        })
    }

    fn attempt(&self, prompt: &str, system: Option<&str>) -> Attempt {
        let mut messages = Vec::new();
        if let Some(system) = system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        let mut body = self.body_base.clone();
        body["messages"] = messages.into();

        let response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        match status {
            200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
                Ok(parsed) => match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
                    Some(content) => Attempt::Done(content),
                    None => Attempt::Fatal("response has no message content".into()),
                },
                Err(e) => Attempt::Fatal(format!("malformed response body: {e}")),
            },
            408 | 409 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {}", truncate(&text))),
            _ => Attempt::Fatal(format!("HTTP {status}: {}", truncate(&text))),
        }
    }

    pub(crate) fn complete(&self, prompt: &str, system: Option<&str>) -> Result<String> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts {
            match self.attempt(prompt, system) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(msg) => return Err(Error::Backend(msg)),
                Attempt::Retry(msg) => {
                    log::warn!("attempt {attempt}/{} failed: {msg}", self.retry.max_attempts);
                    last = msg;
                    if attempt < self.retry.max_attempts {
                        std::thread::sleep(self.retry.backoff(attempt));
                    }
                }
            }
        }
        Err(Error::Backend(format!(
            "giving up after {} attempts: {last}",
            self.retry.max_attempts
        )))
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
