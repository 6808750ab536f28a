use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, GatewayError};

pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";

const MAX_RETRIES: u32 = 3;

/// OpenAI-compatible chat-completions client.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    client: Client,
    base_url: String,
    api_key: Option<String>,
    model: Option<String>,
    backoff: Duration,
}

enum Attempt {
    Done(String),
    Retry(GatewayError),
    Fail(GatewayError),
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let client = Client::builder().timeout(Duration::from_secs(120)).build().expect("http client builds");
        Self {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            model: None,
            backoff: Duration::from_millis(500),
        }
    }

    /// Overrides the model named in each request.
    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    /// Base delay before the first retry; doubles on each further retry.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.model.as_deref().unwrap_or(&request.model),
            "messages": request.messages,
            "temperature": request.temperature,
        });
        if let Some(max) = request.max_tokens {
            body["max_tokens"] = json!(max);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut call = self.client.post(format!("{}/chat/completions", self.base_url)).json(body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = match call.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(GatewayError::Transport(e.to_string())),
        };
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse().ok());
            return Attempt::Retry(GatewayError::RateLimited { retry_after });
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(GatewayError::Transport(e.to_string())),
        };
        if status.is_server_error() {
            return Attempt::Retry(GatewayError::Transport(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Attempt::Fail(GatewayError::Transport(format!("{status}: {text}")));
        }
        let parsed: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Fail(GatewayError::Transport(format!("invalid completion body: {e}"))),
        };
        match parsed.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(content) => Attempt::Done(content.to_string()),
            None => Attempt::Fail(GatewayError::Transport("completion body has no choices[0].message.content".into())),
        }
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.check()?;
        let body = self.body(request);
        let mut delay = self.backoff;
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if retries >= MAX_RETRIES => return Err(e),
                Attempt::Retry(e) => {
                    tracing::warn!(error = %e, retries, "retrying chat completion");
                    std::thread::sleep(delay);
                    delay *= 2;
                    retries += 1;
                }
            }
        }
    }
}
