//! OpenAI-compatible chat-completions client.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{estimate_tokens, ChatProvider, ChatRequest, ChatResponse, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model_id: String,
    /// Model name sent on the wire when it differs from the pricing id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire_model: Option<String>,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "yes")]
    pub supports_temperature: bool,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn yes() -> bool {
    true
}

fn default_timeout_s() -> f64 {
    120.0
}

pub struct OpenAiCompatible {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
}

impl OpenAiCompatible {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &HttpProviderConfig {
        &self.config
    }

    fn wire_body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.config.wire_model.as_deref().unwrap_or(&self.config.model_id),
            "messages": request.messages,
        });
        if self.config.supports_temperature {
            body["temperature"] = json!(request.temperature);
        }
        if let Some(max) = request.max_output_tokens {
            body["max_tokens"] = json!(max);
        }
        body
    }
}

impl ChatProvider for OpenAiCompatible {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn supports_temperature(&self) -> bool {
        self.config.supports_temperature
    }

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let mut builder = self.client.post(&self.config.endpoint).json(&self.wire_body(request));
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            builder = builder.bearer_auth(key);
        }
        let started = Instant::now();
        let response = builder.send().map_err(map_transport)?;
        let status = response.status();
        let text = response.text().map_err(map_transport)?;
        let latency_ms = started.elapsed().as_millis() as u64;
        if !status.is_success() {
            return Err(ProviderError::Status { status: status.as_u16(), body: text });
        }
        parse_completion(&text, request, latency_ms)
    }
}

fn map_transport(err: reqwest::Error) -> ProviderError {
    if err.is_timeout() {
        ProviderError::Timeout
    } else {
        ProviderError::Transport(err.to_string())
    }
}

fn parse_completion(text: &str, request: &ChatRequest, latency_ms: u64) -> Result<ChatResponse, ProviderError> {
    let body: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
    let content = body
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| ProviderError::InvalidResponse("missing choices[0].message.content".into()))?
        .to_string();
    let usage = body.get("usage");
    let reported = usage.and_then(|u| {
        Some((u.get("prompt_tokens")?.as_u64()?, u.get("completion_tokens")?.as_u64()?))
    });
    let (input_tokens, output_tokens, tokens_estimated) = match reported {
        Some((i, o)) => (i, o, false),
        None => {
            let prompt: u64 = request.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
            (prompt, estimate_tokens(&content), true)
        }
    };
    Ok(ChatResponse { content, input_tokens, output_tokens, latency_ms, tokens_estimated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::Message;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned response and hands back the request body.
    fn serve_once(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0usize;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; content_length];
            reader.read_exact(&mut buf).unwrap();
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            format!("{auth}\n{}", String::from_utf8(buf).unwrap())
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    fn config(endpoint: String, supports_temperature: bool) -> HttpProviderConfig {
        HttpProviderConfig {
            endpoint,
            model_id: "gpt-4o".into(),
            wire_model: None,
            api_key_env: "JUDGE_BENCH_TEST_KEY_UNSET".into(),
            supports_temperature,
            timeout_s: 5.0,
        }
    }

    fn request() -> ChatRequest {
        ChatRequest::new("gpt-4o", vec![Message::system("be strict"), Message::user("judge this")])
    }

    #[test]
    fn reads_content_and_usage() {
        let (url, handle) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"{\"decision\": true}"}}],"usage":{"prompt_tokens":321,"completion_tokens":12}}"#,
        );
        let provider = OpenAiCompatible::new(config(url, true)).unwrap();
        let response = provider.send(&request()).unwrap();
        assert_eq!(response.content, r#"{"decision": true}"#);
        assert_eq!((response.input_tokens, response.output_tokens), (321, 12));
        assert!(!response.tokens_estimated);

        let captured = handle.join().unwrap();
        let body: serde_json::Value = serde_json::from_str(captured.lines().nth(1).unwrap()).unwrap();
        assert_eq!(body["model"], "gpt-4o");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "judge this");
    }

    #[test]
    fn drops_temperature_when_unsupported_and_estimates_tokens() {
        let (url, handle) = serve_once("200 OK", r#"{"choices":[{"message":{"content":"false because closed"}}]}"#);
        let provider = OpenAiCompatible::new(config(url, false)).unwrap();
        let response = provider.send(&request()).unwrap();
        assert!(response.tokens_estimated);
        assert_eq!(response.input_tokens, 4);
        assert_eq!(response.output_tokens, 3);
        let captured = handle.join().unwrap();
        let body: serde_json::Value = serde_json::from_str(captured.lines().nth(1).unwrap()).unwrap();
        assert!(body.get("temperature").is_none());
    }

    #[test]
    fn http_errors_carry_status_and_body() {
        let (url, handle) = serve_once("429 Too Many Requests", r#"{"error":"slow down"}"#);
        let provider = OpenAiCompatible::new(config(url, true)).unwrap();
        let err = provider.send(&request()).unwrap_err();
        assert_eq!(err, ProviderError::Status { status: 429, body: r#"{"error":"slow down"}"#.into() });
        assert!(err.is_transient());
        handle.join().unwrap();
    }

    #[test]
    fn malformed_body_is_not_transient() {
        let err = parse_completion("{}", &request(), 1).unwrap_err();
        assert!(matches!(err, ProviderError::InvalidResponse(_)));
        assert!(!err.is_transient());
    }
}
