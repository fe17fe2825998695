//! HTTP/JSON adapters for hosted providers.
//!
//! Endpoints and credentials come from the environment only:
//! `GENREAD_{TEXT,IMAGE,EMBED}_URL` (required), `..._KEY` (bearer token,
//! optional) and `..._MODEL` (optional model name).
//!
//! Payloads, all `POST <url>` with `Content-Type: application/json`:
//!
//! * text: `{"model", "messages": [{"role": "user", "content"}], "temperature"?}`
//!   → `{"choices": [{"message": {"content"}}]}`
//! * image: `{"model", "prompt", "size": "WxH", "seed"?, "reference_image"?: base64, "response_format": "b64_json"}`
//!   → `{"data": [{"b64_json"}]}`
//! * embedding: `{"model", "input"}` for text or `{"model", "input_image": base64}` for images
//!   → `{"data": [{"embedding": [f64, ...]}]}`

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde_json::{json, Value};
use thiserror::Error;

use super::{
    check_text_input, EmbeddingProvider, EmbeddingVector, ImageArtifact, ImageGenRequest, ImageProvider,
    ProviderError, RenderedImage, TextGenRequest, TextProvider,
};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("environment variable {0} is not set")]
pub struct MissingEnv(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderEndpoint {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
}

impl ProviderEndpoint {
    /// Reads `GENREAD_<KIND>_URL`, `_KEY` and `_MODEL`; `kind` is `TEXT`,
    /// `IMAGE` or `EMBED`.
    pub fn from_env(kind: &str, default_model: &str) -> Result<Self, MissingEnv> {
        let var = |suffix: &str| std::env::var(format!("GENREAD_{kind}_{suffix}")).ok().filter(|v| !v.is_empty());
        let url = var("URL").ok_or_else(|| MissingEnv(format!("GENREAD_{kind}_URL")))?;
        Ok(Self { url, api_key: var("KEY"), model: var("MODEL").unwrap_or_else(|| default_model.to_string()) })
    }
}

fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder().timeout(timeout).build().expect("http client")
}

fn post_json(client: &reqwest::blocking::Client, ep: &ProviderEndpoint, body: &Value) -> Result<Value, ProviderError> {
    let mut rb = client.post(&ep.url).json(body);
    if let Some(key) = &ep.api_key {
        rb = rb.bearer_auth(key);
    }
    let resp = rb.send().map_err(|e| ProviderError::Unavailable(e.to_string()))?;
    let status = resp.status();
    if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
        return Err(ProviderError::Unavailable(format!("authentication failed ({status})")));
    }
    if !status.is_success() {
        return Err(ProviderError::Unavailable(format!("{} returned {status}", ep.url)));
    }
    resp.json::<Value>().map_err(|e| ProviderError::MalformedResponse(e.to_string()))
}

pub struct HttpTextProvider {
    endpoint: ProviderEndpoint,
    temperature: Option<f64>,
    client: reqwest::blocking::Client,
}

impl HttpTextProvider {
    pub fn new(endpoint: ProviderEndpoint, temperature: Option<f64>, timeout: Duration) -> Self {
        Self { endpoint, temperature, client: client(timeout) }
    }
}

impl TextProvider for HttpTextProvider {
    fn model_name(&self) -> &str {
        &self.endpoint.model
    }

    fn generate_text(&self, req: &TextGenRequest) -> Result<String, ProviderError> {
        req.validate()?;
        let mut body = json!({
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": req.render_prompt()}],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        let v = post_json(&self.client, &self.endpoint, &body)?;
        let text = v["choices"][0]["message"]["content"].as_str().ok_or(ProviderError::EmptyResponse)?;
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyResponse);
        }
        Ok(text.to_string())
    }
}

pub struct HttpImageProvider {
    endpoint: ProviderEndpoint,
    width_px: u32,
    height_px: u32,
    client: reqwest::blocking::Client,
}

impl HttpImageProvider {
    pub fn new(endpoint: ProviderEndpoint, width_px: u32, height_px: u32, timeout: Duration) -> Self {
        Self { endpoint, width_px, height_px, client: client(timeout) }
    }
}

fn sniff_media_type(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG") {
        "image/png"
    } else if bytes.starts_with(&[0xFF, 0xD8]) {
        "image/jpeg"
    } else if bytes.starts_with(b"RIFF") && bytes.get(8..12) == Some(b"WEBP") {
        "image/webp"
    } else {
        "application/octet-stream"
    }
}

impl ImageProvider for HttpImageProvider {
    fn model_name(&self) -> &str {
        &self.endpoint.model
    }

    fn render(&self, req: &ImageGenRequest, reference: Option<&ImageArtifact>) -> Result<RenderedImage, ProviderError> {
        req.validate()?;
        let mut prompt = req.prompt_text.clone();
        if !req.style_notes.is_empty() {
            prompt.push_str("\nStyle: ");
            prompt.push_str(&req.style_notes.join(", "));
        }
        let mut body = json!({
            "model": self.endpoint.model,
            "prompt": prompt,
            "size": format!("{}x{}", self.width_px, self.height_px),
            "response_format": "b64_json",
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        if let Some(r) = reference {
            body["reference_image"] = json!(B64.encode(&r.bytes));
        }
        let v = post_json(&self.client, &self.endpoint, &body)?;
        let b64 = v["data"][0]["b64_json"].as_str().ok_or(ProviderError::EmptyResponse)?;
        let bytes = B64.decode(b64).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        if bytes.is_empty() {
            return Err(ProviderError::EmptyResponse);
        }
        Ok(RenderedImage {
            media_type: sniff_media_type(&bytes).to_string(),
            bytes,
            width_px: self.width_px,
            height_px: self.height_px,
        })
    }
}

pub struct HttpEmbeddingProvider {
    endpoint: ProviderEndpoint,
    dims: usize,
    token_budget: usize,
    client: reqwest::blocking::Client,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: ProviderEndpoint, dims: usize, token_budget: usize, timeout: Duration) -> Self {
        Self { endpoint, dims, token_budget, client: client(timeout) }
    }

    fn parse(&self, v: &Value) -> Result<EmbeddingVector, ProviderError> {
        let arr = v["data"][0]["embedding"].as_array().ok_or(ProviderError::EmptyResponse)?;
        let values = arr
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| ProviderError::MalformedResponse("non-numeric embedding value".into())))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != self.dims {
            return Err(ProviderError::MalformedResponse(format!(
                "expected {} dims, got {}",
                self.dims,
                values.len()
            )));
        }
        EmbeddingVector::new(values)
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn model_name(&self) -> &str {
        &self.endpoint.model
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn token_budget(&self) -> usize {
        self.token_budget
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        check_text_input(text, self.token_budget)?;
        let v = post_json(&self.client, &self.endpoint, &json!({"model": self.endpoint.model, "input": text}))?;
        self.parse(&v)
    }

    fn embed_image(&self, image: &ImageArtifact) -> Result<EmbeddingVector, ProviderError> {
        let body = json!({"model": self.endpoint.model, "input_image": B64.encode(&image.bytes)});
        let v = post_json(&self.client, &self.endpoint, &body)?;
        self.parse(&v)
    }
}
