use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::RETRY_AFTER;
use serde_json::{json, Value};

use crate::error::{GatewayError, ProviderError};
use crate::provider::{Provider, ProviderReply, Usage};
use crate::request::{Request, ThinkingBudget};

/// Which upstream service a provider talks to; selects the environment
/// variables holding its endpoint and credentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Service {
    Judge,
    Collect,
}

impl Service {
    pub fn key_var(self) -> &'static str {
        match self {
            Service::Judge => "JUDGE_API_KEY",
            Service::Collect => "COLLECT_API_KEY",
        }
    }

    pub fn url_var(self) -> &'static str {
        match self {
            Service::Judge => "JUDGE_BASE_URL",
            Service::Collect => "COLLECT_BASE_URL",
        }
    }
}

/// Adapter for OpenAI-compatible chat-completion endpoints.
///
/// Judge replies carry the message content as the body. Collection replies
/// are re-encoded as `{"thought": ..., "output": ...}` where `thought` is the
/// provider's `reasoning_content` (empty when absent).
pub struct HttpProvider {
    client: Client,
    base_url: String,
    api_key: String,
    service: Service,
}

impl HttpProvider {
    pub fn new(
        service: Service,
        base_url: impl Into<String>,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpProvider {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            service,
        })
    }

    pub fn from_env(service: Service) -> Result<Self, GatewayError> {
        let read = |var: &str| {
            std::env::var(var)
                .ok()
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| GatewayError::Config(format!("{var} is not set")))
        };
        let key = read(service.key_var())?;
        let url = read(service.url_var())?;
        HttpProvider::new(service, url, key, Duration::from_secs(120))
    }
}

impl Provider for HttpProvider {
    fn send(&self, req: &Request) -> Result<ProviderReply, ProviderError> {
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&request_body(req))
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if let Some(err) = classify_status(status, retry_after, &text) {
            return Err(err);
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Status {
            status,
            message: format!("response is not JSON: {e}"),
        })?;
        parse_reply(self.service, &value)
    }
}

pub(crate) fn classify_status(
    status: u16,
    retry_after: Option<Duration>,
    body: &str,
) -> Option<ProviderError> {
    match status {
        200..=299 => None,
        401 | 403 => Some(ProviderError::Auth(truncate(body))),
        429 => Some(ProviderError::RateLimited { retry_after }),
        _ => Some(ProviderError::Status {
            status,
            message: truncate(body),
        }),
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

pub(crate) fn request_body(req: &Request) -> Value {
    match req {
        Request::Judge(j) => json!({
            "model": j.model_id,
            "messages": [{ "role": "user", "content": j.prompt }],
            "temperature": j.params.temperature,
            "max_tokens": j.params.max_output_tokens,
        }),
        Request::Collect(c) => {
            let mut content = vec![json!({ "type": "text", "text": c.prompt })];
            content.extend(
                c.frames
                    .iter()
                    .map(|f| json!({ "type": "image_url", "image_url": { "url": f } })),
            );
            // Providers in this family encode a dynamic budget as -1.
            let budget: i64 = match c.budget {
                ThinkingBudget::Fixed(n) => i64::from(n),
                ThinkingBudget::Dynamic => -1,
            };
            json!({
                "model": c.model_id,
                "messages": [{ "role": "user", "content": content }],
                "thinking_budget": budget,
            })
        }
    }
}

pub(crate) fn parse_reply(service: Service, v: &Value) -> Result<ProviderReply, ProviderError> {
    let malformed = |what: &str| ProviderError::Status {
        status: 200,
        message: format!("malformed completion: {what}"),
    };
    let message = v
        .pointer("/choices/0/message")
        .ok_or_else(|| malformed("no choices[0].message"))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("no message content"))?;
    let body = match service {
        Service::Judge => content.to_string(),
        Service::Collect => {
            let thought = message
                .get("reasoning_content")
                .and_then(Value::as_str)
                .unwrap_or_default();
            json!({ "thought": thought, "output": content }).to_string()
        }
    };
    let usage = v.get("usage").map(|u| {
        let field = |p: &str| u.pointer(p).and_then(Value::as_u64).unwrap_or(0);
        let thought = field("/completion_tokens_details/reasoning_tokens");
        let input = field("/prompt_tokens");
        let completion = field("/completion_tokens");
        let output = completion.saturating_sub(thought);
        let total = u
            .get("total_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(input + completion);
        Usage {
            thought,
            input,
            output,
            total,
        }
    });
    Ok(ProviderReply { body, usage })
}
