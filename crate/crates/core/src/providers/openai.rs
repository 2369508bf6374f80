//! OpenAI-compatible chat and embedding endpoints.

use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;

use super::{ChatModel, ChatRequest, Completion, Embedder, ProviderError};
use crate::transport::{send_with_retry, HttpRequest, HttpTransport, RetryPolicy};

pub struct OpenAiChat {
    transport: Arc<dyn HttpTransport>,
    url: String,
    model: String,
    token: Option<String>,
    retry: RetryPolicy,
}

impl OpenAiChat {
    pub fn new(
        transport: Arc<dyn HttpTransport>,
        endpoint: &str,
        model: &str,
        token: Option<String>,
        retry: RetryPolicy,
    ) -> Self {
        OpenAiChat {
            transport,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            token,
            retry,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl ChatModel for OpenAiChat {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ProviderError> {
        let body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let http = HttpRequest::post_json(&self.url, body).bearer(self.token.clone());
        let delivered = send_with_retry(self.transport.as_ref(), &http, &self.retry)?;
        let parsed: ChatResponse = serde_json::from_str(&delivered.response.body)
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        Ok(Completion {
            text,
            retries: delivered.retries,
        })
    }
}

pub struct OpenAiEmbedder {
    transport: Arc<dyn HttpTransport>,
    url: String,
    model: String,
    token: Option<String>,
    retry: RetryPolicy,
}

impl OpenAiEmbedder {
    pub fn new(
        transport: Arc<dyn HttpTransport>,
        endpoint: &str,
        model: &str,
        token: Option<String>,
        retry: RetryPolicy,
    ) -> Self {
        OpenAiEmbedder {
            transport,
            url: format!("{}/embeddings", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            token,
            retry,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

impl Embedder for OpenAiEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({ "model": self.model, "input": texts });
        let http = HttpRequest::post_json(&self.url, body).bearer(self.token.clone());
        let delivered = send_with_retry(self.transport.as_ref(), &http, &self.retry)?;
        let parsed: EmbeddingResponse = serde_json::from_str(&delivered.response.body)
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(ProviderError::BadResponse(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}
