//! Text-model interactions: summarizing papers, extracting units, naming
//! atoms, reconstructing ideas, judging reconstructions, the LLM selection
//! baseline, and embeddings.
//!
//! Every call goes through [`ChatModel`] or [`Embedder`]. The production
//! implementations speak the OpenAI-compatible wire format; [`MockChat`] and
//! [`HashEmbedder`] are deterministic offline replacements that let the whole
//! pipeline run without a network.

mod mock;
mod openai;
mod prompts;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mock::{split_sentences, HashEmbedder, MockChat};
pub use openai::{OpenAiChat, OpenAiEmbedder};
pub use prompts::{render, PromptTemplates};

use crate::atomizer::AtomVocabulary;
use crate::corpus::Paper;
use crate::transport::{RetryPolicy, TransportError, UreqTransport};

/// Environment variable holding the bearer token for chat and embeddings.
pub const LLM_TOKEN_ENV: &str = "IDEAFORGE_LLM_TOKEN";

/// Endpoint value that selects the offline mock.
pub const MOCK_ENDPOINT: &str = "mock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible API, or `"mock"`.
    pub endpoint: String,
    pub model_id: String,
    pub embedding_model: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    pub max_parallel: usize,
    pub temperature: f64,
    /// Paper bodies longer than this many characters are truncated before
    /// compression.
    pub max_input_chars: usize,
    pub embed_batch: usize,
    /// Mock embedder dimension.
    pub mock_dim: usize,
    pub mock_seed: u64,
    /// Let the mock vary repeated reconstructions when temperature > 0.
    pub mock_perturb: bool,
    pub prompt_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: MOCK_ENDPOINT.into(),
            model_id: "gemini-3-flash".into(),
            embedding_model: "all-MiniLM-L6-v2".into(),
            timeout_secs: 120.0,
            max_retries: 3,
            retry_base_delay_ms: 500,
            max_parallel: 4,
            temperature: 0.0,
            max_input_chars: 32_000,
            embed_batch: 64,
            mock_dim: 64,
            mock_seed: 0,
            mock_perturb: false,
            prompt_dir: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::Precondition(m.to_string()));
        if !(self.timeout_secs > 0.0) {
            return bad("timeout must be > 0");
        }
        if self.max_parallel < 1 {
            return bad("max_parallel must be >= 1");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if self.embed_batch < 1 || self.mock_dim < 1 {
            return bad("embed_batch and mock_dim must be >= 1");
        }
        Ok(())
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == MOCK_ENDPOINT
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.retry_base_delay_ms),
            max_delay: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Compress,
    ExtractUnits,
    Canonicalize,
    Reconstruct,
    Judge,
    SelectAtoms,
}

/// One chat call. `inputs` carries the raw task arguments next to the
/// rendered prompt; network models ignore it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub task: Task,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub retries: u32,
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ProviderError>;

    /// True for deterministic offline stand-ins.
    fn is_offline(&self) -> bool {
        false
    }
}

pub trait Embedder: Send + Sync {
    /// Raw (unnormalized) vectors, one per text.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `values`. Fails on empty, non-finite, or zero vectors.
    pub fn normalized(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::BadResponse("empty embedding".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(ProviderError::BadResponse("non-finite embedding entry".into()));
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ProviderError::BadResponse("zero-norm embedding".into()));
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Dot product; equal to cosine similarity for unit vectors.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.values, &other.values)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRating {
    pub score: u8,
    pub rationale: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("{LLM_TOKEN_ENV} is not set but endpoint {0} requires it")]
    MissingToken(String),
    #[error("{0:?}: empty completion")]
    EmptyCompletion(Task),
    #[error("{task:?}: unparseable completion: {reason}")]
    Parse { task: Task, reason: String },
    #[error("completion named unknown atoms: {}", .0.join(", "))]
    UnknownAtoms(Vec<String>),
    #[error("completion named {got} distinct atoms, {wanted} required")]
    TooFewAtoms { wanted: usize, got: usize },
    #[error("embedding dimension {found} differs from {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Lowercased alphanumeric words longer than two characters, minus a short
/// stop list. Shared by the mock embedder and the mock judge.
pub fn content_tokens(text: &str) -> Vec<String> {
    const STOP: [&str; 24] = [
        "the", "and", "for", "with", "that", "this", "from", "into", "are", "was", "were", "which", "using",
        "use", "its", "their", "our", "can", "via", "over", "each", "has", "have", "not",
    ];
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() > 2)
        .map(str::to_lowercase)
        .filter(|w| !STOP.contains(&w.as_str()))
        .collect()
}

/// 64-bit digest of `(seed, text)`, stable across platforms and releases.
pub fn stable_hash(seed: u64, text: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(text.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Items of a `1. item` / `2) item` list. Continuation lines join the
/// preceding item; blank items are dropped with a warning.
pub fn parse_numbered_list(text: &str) -> Result<Vec<String>, String> {
    let mut items: Vec<String> = Vec::new();
    let mut saw_number = false;
    for line in text.lines() {
        let trimmed = line.trim();
        let digits = trimmed.chars().take_while(char::is_ascii_digit).count();
        let rest = &trimmed[digits..];
        if digits > 0 && (rest.starts_with('.') || rest.starts_with(')')) {
            saw_number = true;
            items.push(rest[1..].trim().to_string());
        } else if saw_number && !trimmed.is_empty() {
            if let Some(last) = items.last_mut() {
                if !last.is_empty() {
                    last.push(' ');
                }
                last.push_str(trimmed);
            }
        }
    }
    if !saw_number {
        return Err("no numbered lines".into());
    }
    let before = items.len();
    items.retain(|s| !s.is_empty());
    if items.len() < before {
        log::warn!("dropped {} blank list items", before - items.len());
    }
    Ok(items)
}

/// Reads `score: <1-5>` (case-insensitive; `=` also accepted).
pub fn parse_judge_score(text: &str) -> Result<u8, String> {
    let lower = text.to_lowercase();
    let mut search = lower.as_str();
    while let Some(pos) = search.find("score") {
        let rest = search[pos + 5..].trim_start();
        if let Some(rest) = rest.strip_prefix(':').or_else(|| rest.strip_prefix('=')) {
            let rest = rest.trim_start();
            let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
            if let Ok(v @ 1..=5) = digits.parse::<u8>() {
                return Ok(v);
            }
            return Err(format!("score value {:?} is not an integer in 1..5", rest.lines().next().unwrap_or("")));
        }
        search = &search[pos + 5..];
    }
    Err("no `score:` line".into())
}

/// Index minimizing the summed cosine distance to all other vectors; ties go
/// to the lowest index.
pub fn medoid_index(vectors: &[EmbeddingVector]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in vectors.iter().enumerate() {
        let total: f64 = vectors.iter().map(|w| 1.0 - v.cosine(w)).sum();
        if total < best.0 {
            best = (total, i);
        }
    }
    best.1
}

/// A configured chat model plus embedder.
pub struct Provider {
    chat: Arc<dyn ChatModel>,
    embedder: Arc<dyn Embedder>,
    config: ProviderConfig,
    prompts: PromptTemplates,
    retries: AtomicU64,
}

impl Provider {
    pub fn new(chat: Arc<dyn ChatModel>, embedder: Arc<dyn Embedder>, config: ProviderConfig) -> Self {
        Provider {
            chat,
            embedder,
            config,
            prompts: PromptTemplates::default(),
            retries: AtomicU64::new(0),
        }
    }

    /// The offline mock with default settings.
    pub fn mock() -> Self {
        Provider::from_config(&ProviderConfig::default()).expect("mock config is valid")
    }

    /// Builds the mock or the HTTP clients. For a live endpoint the token is
    /// read from [`LLM_TOKEN_ENV`] up front, so a missing token fails before
    /// any request is made.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        Self::from_config_with_token(config, std::env::var(LLM_TOKEN_ENV).ok())
    }

    pub fn from_config_with_token(config: &ProviderConfig, token: Option<String>) -> Result<Self, ProviderError> {
        config.validate()?;
        let mut provider = if config.is_mock() {
            let chat = if config.mock_perturb {
                MockChat::with_perturbation(config.mock_seed)
            } else {
                MockChat::new()
            };
            Provider::new(
                Arc::new(chat),
                Arc::new(HashEmbedder::new(config.mock_dim, config.mock_seed)),
                config.clone(),
            )
        } else {
            let token = token.filter(|t| !t.is_empty()).ok_or_else(|| ProviderError::MissingToken(config.endpoint.clone()))?;
            let transport = Arc::new(UreqTransport::new(Duration::from_secs_f64(config.timeout_secs)));
            let retry = config.retry_policy();
            let chat = OpenAiChat::new(transport.clone(), &config.endpoint, &config.model_id, Some(token.clone()), retry);
            let embedder = OpenAiEmbedder::new(transport, &config.endpoint, &config.embedding_model, Some(token), retry);
            Provider::new(Arc::new(chat), Arc::new(embedder), config.clone())
        };
        if let Some(dir) = &config.prompt_dir {
            provider.prompts = PromptTemplates::load_dir(dir)?;
        }
        Ok(provider)
    }

    pub fn with_prompts(mut self, prompts: PromptTemplates) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn is_offline(&self) -> bool {
        self.chat.is_offline()
    }

    /// Retries spent across all chat calls so far.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn call(&self, task: Task, prompt: String, inputs: Vec<String>) -> Result<String, ProviderError> {
        let request = ChatRequest {
            task,
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.config.temperature,
            inputs,
        };
        let completion = self.chat.complete(&request)?;
        self.retries.fetch_add(completion.retries as u64, Ordering::Relaxed);
        let text = completion.text.trim().to_string();
        if text.is_empty() {
            return Err(ProviderError::EmptyCompletion(task));
        }
        Ok(text)
    }

    /// Runs `f` over `items` with at most `max_parallel` concurrent calls,
    /// returning results in input order.
    pub fn bounded_map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        if self.config.max_parallel <= 1 || items.len() <= 1 {
            return items.iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.config.max_parallel).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }

    /// Distills a paper body into a methodology-focused summary.
    pub fn compress_paper(&self, paper: &Paper) -> Result<String, ProviderError> {
        let body = paper.body.as_deref().map(str::trim).unwrap_or("");
        if body.is_empty() {
            return Err(ProviderError::Precondition(format!("paper `{}` has no body", paper.id)));
        }
        let body = truncate_chars(body, self.config.max_input_chars);
        let prompt = render(&self.prompts.compress, &[("body", body)]);
        self.call(Task::Compress, prompt, vec![body.to_string()])
    }

    /// Units in order of appearance.
    pub fn extract_units(&self, blog: &str) -> Result<Vec<String>, ProviderError> {
        if blog.trim().is_empty() {
            return Err(ProviderError::Precondition("empty summary".into()));
        }
        let prompt = render(&self.prompts.extract, &[("blog", blog)]);
        let text = self.call(Task::ExtractUnits, prompt, vec![blog.to_string()])?;
        let units = parse_numbered_list(&text).map_err(|reason| ProviderError::Parse {
            task: Task::ExtractUnits,
            reason,
        })?;
        if units.is_empty() {
            return Err(ProviderError::Parse {
                task: Task::ExtractUnits,
                reason: "every list item was blank".into(),
            });
        }
        Ok(units)
    }

    /// One description for a cluster of units. Offline, this is the medoid
    /// member under the embedding geometry.
    pub fn canonicalize_atom(&self, members: &[String]) -> Result<String, ProviderError> {
        match members {
            [] => Err(ProviderError::Precondition("atom has no members".into())),
            [only] => Ok(only.clone()),
            _ if self.is_offline() => {
                let vectors = self.embed_texts(members)?;
                Ok(members[medoid_index(&vectors)].clone())
            }
            _ => {
                let listing: String = members.iter().map(|m| format!("- {m}\n")).collect();
                let prompt = render(&self.prompts.canonicalize, &[("members", &listing)]);
                self.call(Task::Canonicalize, prompt, members.to_vec())
            }
        }
    }

    pub fn reconstruct_idea(&self, atoms: &[String]) -> Result<String, ProviderError> {
        if atoms.is_empty() {
            return Err(ProviderError::Precondition("nothing to reconstruct".into()));
        }
        let listing: String = atoms.iter().map(|a| format!("- {a}\n")).collect();
        let prompt = render(&self.prompts.reconstruct, &[("atoms", &listing)]);
        self.call(Task::Reconstruct, prompt, atoms.to_vec())
    }

    pub fn judge_reconstruction(&self, original: &str, reconstruction: &str) -> Result<JudgeRating, ProviderError> {
        if original.trim().is_empty() || reconstruction.trim().is_empty() {
            return Err(ProviderError::Precondition("judge needs two non-empty texts".into()));
        }
        let prompt = render(
            &self.prompts.judge,
            &[("original", original), ("reconstruction", reconstruction)],
        );
        let text = self.call(
            Task::Judge,
            prompt,
            vec![original.to_string(), reconstruction.to_string()],
        )?;
        let score = parse_judge_score(&text).map_err(|reason| ProviderError::Parse {
            task: Task::Judge,
            reason,
        })?;
        let rationale = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("rationale:"))
            .unwrap_or("")
            .trim()
            .to_string();
        Ok(JudgeRating { score, rationale })
    }

    /// LLM baseline: the whole vocabulary goes into the prompt in an order
    /// shuffled by `seed`, and the model names `count` atoms.
    pub fn llm_select_atoms(
        &self,
        vocabulary: &AtomVocabulary,
        count: usize,
        seed: u64,
    ) -> Result<Vec<usize>, ProviderError> {
        let v = vocabulary.len();
        if count > v {
            return Err(ProviderError::Precondition(format!(
                "cannot select {count} atoms from a vocabulary of {v}"
            )));
        }
        let order = shuffled_atom_order(v, seed);
        let listing: String = order
            .iter()
            .map(|&id| format!("[{id}] {}\n", vocabulary.atoms[id].canonical_text))
            .collect();
        let prompt = render(
            &self.prompts.select,
            &[("count", &count.to_string()), ("atoms", &listing)],
        );
        let mut inputs = vec![count.to_string()];
        inputs.extend(order.iter().map(|id| id.to_string()));
        let text = self.call(Task::SelectAtoms, prompt, inputs)?;
        let items = parse_numbered_list(&text).map_err(|reason| ProviderError::Parse {
            task: Task::SelectAtoms,
            reason,
        })?;
        let mut picked = Vec::new();
        let mut unknown = Vec::new();
        for item in &items {
            let digits: String = item
                .trim_start_matches(|c: char| !c.is_ascii_digit())
                .chars()
                .take_while(char::is_ascii_digit)
                .collect();
            match digits.parse::<usize>() {
                Ok(id) if id < v => {
                    if !picked.contains(&id) {
                        picked.push(id);
                    }
                }
                _ => unknown.push(item.clone()),
            }
        }
        if !unknown.is_empty() {
            return Err(ProviderError::UnknownAtoms(unknown));
        }
        if picked.len() < count {
            return Err(ProviderError::TooFewAtoms {
                wanted: count,
                got: picked.len(),
            });
        }
        picked.truncate(count);
        Ok(picked)
    }

    /// Unit-norm embeddings, batched, one per text.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(ProviderError::Precondition(format!("text {i} is empty")));
        }
        let batches: Vec<&[String]> = texts.chunks(self.config.embed_batch).collect();
        let raw = self.bounded_map(&batches, |batch| self.embedder.embed(batch));
        let mut out = Vec::with_capacity(texts.len());
        let mut dim = None;
        for batch in raw {
            for values in batch? {
                let expected = *dim.get_or_insert(values.len());
                if values.len() != expected {
                    return Err(ProviderError::DimensionMismatch {
                        expected,
                        found: values.len(),
                    });
                }
                out.push(EmbeddingVector::normalized(values)?);
            }
        }
        Ok(out)
    }
}

/// Atom ids `0..v` in the order presented to the LLM baseline for `seed`.
pub fn shuffled_atom_order(v: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn truncate_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((byte, _)) => {
            log::info!("truncating input from {} to {max_chars} characters", text.chars().count());
            &text[..byte]
        }
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_list_parsing() {
        assert_eq!(
            parse_numbered_list("Here you go:\n1. alpha\n2) beta\n   continued\n3. gamma").unwrap(),
            vec!["alpha", "beta continued", "gamma"]
        );
        assert_eq!(parse_numbered_list("1. a\n2.   \n3. c").unwrap(), vec!["a", "c"]);
        assert!(parse_numbered_list("alpha\nbeta").is_err());
    }

    #[test]
    fn judge_score_parsing() {
        assert_eq!(parse_judge_score("Score: 4\nrationale: fine"), Ok(4));
        assert_eq!(parse_judge_score("the score = 2"), Ok(2));
        assert!(parse_judge_score("score: six").is_err());
        assert!(parse_judge_score("score: 7").is_err());
        assert!(parse_judge_score("looks great").is_err());
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
        assert_eq!(truncate_chars("abc", 10), "abc");
    }

    #[test]
    fn stable_hash_is_seed_sensitive() {
        assert_eq!(stable_hash(1, "x"), stable_hash(1, "x"));
        assert_ne!(stable_hash(1, "x"), stable_hash(2, "x"));
    }

    #[test]
    fn config_validation() {
        let mut c = ProviderConfig::default();
        assert!(c.validate().is_ok());
        c.max_parallel = 0;
        assert!(c.validate().is_err());
        c = ProviderConfig {
            timeout_secs: 0.0,
            ..ProviderConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn live_endpoint_without_token_fails_fast() {
        let cfg = ProviderConfig {
            endpoint: "http://127.0.0.1:9/v1".into(),
            ..ProviderConfig::default()
        };
        assert!(matches!(
            Provider::from_config_with_token(&cfg, None),
            Err(ProviderError::MissingToken(_))
        ));
    }
}
