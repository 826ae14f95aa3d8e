//! JSON-over-HTTP chat-completion client (OpenAI-compatible wire shape).

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, BackendResponse, CompletionRequest, TokenLogprob};

pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// `base_url` is either the full `/chat/completions` endpoint or the API
    /// root it hangs off.
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let base = base_url.into();
        let endpoint = if base.trim_end_matches('/').ends_with("/chat/completions") {
            base
        } else {
            format!("{}/chat/completions", base.trim_end_matches('/'))
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            endpoint,
            api_key,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn request_body(request: &CompletionRequest) -> serde_json::Value {
    let mut body = json!({
        "model": request.model_name,
        "messages": request.messages,
        "max_tokens": request.max_tokens,
    });
    if request.greedy {
        body["temperature"] = json!(0.0);
    }
    if request.want_logprobs {
        body["logprobs"] = json!(true);
        body["top_logprobs"] = json!(request.top_logprobs_k);
    }
    body
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, BackendError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(request_body(request))
            .map_err(|e| BackendError::Transport {
                message: e.to_string(),
                transient: true,
            })?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| BackendError::Transport {
            message: e.to_string(),
            transient: true,
        })?;
        match status {
            200..=299 => parse_chat_response(&body),
            401 | 403 => Err(BackendError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => Err(BackendError::Transport {
                message: format!("HTTP {status}"),
                transient: true,
            }),
            _ => Err(BackendError::Transport {
                message: format!(
                    "HTTP {status}: {}",
                    String::from_utf8_lossy(&body).chars().take(200).collect::<String>()
                ),
                transient: false,
            }),
        }
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    logprobs: Option<WireLogprobs>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireLogprobs {
    #[serde(default)]
    content: Option<Vec<WirePosition>>,
}

#[derive(Deserialize)]
struct WirePosition {
    token: String,
    logprob: f64,
    #[serde(default)]
    top_logprobs: Vec<WireTop>,
}

#[derive(Deserialize)]
struct WireTop {
    token: String,
    logprob: f64,
}

/// Decodes a chat-completion response body. The first generated position's
/// `top_logprobs` become the first-token entries; if the server sent no
/// alternatives, the sampled token alone is used. A body without a
/// logprobs block yields an empty entry list.
pub fn parse_chat_response(body: &[u8]) -> Result<BackendResponse, BackendError> {
    let wire: WireResponse =
        serde_json::from_slice(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
    let text = choice.message.content.unwrap_or_default();
    let first = choice
        .logprobs
        .and_then(|l| l.content)
        .and_then(|c| c.into_iter().next());
    let first_token_logprobs = match first {
        None => Vec::new(),
        Some(pos) if pos.top_logprobs.is_empty() => vec![TokenLogprob {
            token: pos.token,
            logprob: pos.logprob,
        }],
        Some(pos) => pos
            .top_logprobs
            .into_iter()
            .map(|t| TokenLogprob {
                token: t.token,
                logprob: t.logprob,
            })
            .collect(),
    };
    Ok(BackendResponse {
        text,
        first_token_logprobs,
    })
}
