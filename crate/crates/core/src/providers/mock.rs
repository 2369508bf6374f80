//! Deterministic offline stand-ins for the chat and embedding endpoints.
//!
//! The chat mock answers from the structured `inputs` of each request rather
//! than by reading prompts, so editing a template never changes mock output.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{content_tokens, stable_hash, ChatModel, ChatRequest, Completion, Embedder, ProviderError, Task};

const MOCK_DIGEST_SENTENCES: usize = 24;
const FILLER: [&str; 6] = ["notably", "furthermore", "broadly", "concretely", "overall", "ultimately"];

/// Template-based chat mock.
///
/// * compress: the first sentences of the body, whitespace-normalized.
/// * extract: one numbered item per sentence of the summary.
/// * canonicalize: the first member (the provider computes the medoid
///   before ever reaching the mock).
/// * reconstruct: a bulleted concatenation of the atoms. With a perturbation
///   seed and temperature > 0, each repeat of the same request drops one word
///   and adds a filler word, reproducibly.
/// * judge: `1 + round(4 · overlap)` where overlap is the fraction of the
///   original's content words present in the reconstruction.
/// * select: the first `count` atoms in the order they were listed.
#[derive(Debug, Default)]
pub struct MockChat {
    perturb_seed: Option<u64>,
    repeats: Mutex<HashMap<u64, u64>>,
}

impl MockChat {
    pub fn new() -> Self {
        MockChat::default()
    }

    pub fn with_perturbation(seed: u64) -> Self {
        MockChat {
            perturb_seed: Some(seed),
            repeats: Mutex::new(HashMap::new()),
        }
    }

    fn reconstruct(&self, atoms: &[String], temperature: f64) -> String {
        let mut text = String::from("Proposed research direction combining:\n");
        for a in atoms {
            text.push_str("- ");
            text.push_str(a.trim());
            text.push('\n');
        }
        let Some(seed) = self.perturb_seed.filter(|_| temperature > 0.0) else {
            return text;
        };
        let key = stable_hash(seed, &atoms.join("\u{1f}"));
        let repeat = {
            let mut map = self.repeats.lock().expect("mock counter poisoned");
            let slot = map.entry(key).or_insert(0);
            *slot += 1;
            *slot
        };
        let mut rng = ChaCha8Rng::seed_from_u64(key ^ repeat.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut words: Vec<&str> = text.split_whitespace().collect();
        if words.len() > 1 {
            let drop = rng.random_range(0..words.len());
            words.remove(drop);
        }
        let filler = FILLER.choose(&mut rng).expect("non-empty filler list");
        let at = rng.random_range(0..=words.len());
        words.insert(at, filler);
        words.join(" ")
    }
}

pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = current.split_whitespace().collect::<Vec<_>>().join(" ");
            if !s.is_empty() {
                out.push(s);
            }
            current.clear();
        }
    }
    let s = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
    out
}

fn overlap_score(original: &str, reconstruction: &str) -> u8 {
    let orig: BTreeSet<String> = content_tokens(original).into_iter().collect();
    if orig.is_empty() {
        return 1;
    }
    let recon: BTreeSet<String> = content_tokens(reconstruction).into_iter().collect();
    let overlap = orig.intersection(&recon).count() as f64 / orig.len() as f64;
    (1.0 + (4.0 * overlap).round()).clamp(1.0, 5.0) as u8
}

impl ChatModel for MockChat {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ProviderError> {
        let input = |i: usize| request.inputs.get(i).map(String::as_str).unwrap_or("");
        let text = match request.task {
            Task::Compress => split_sentences(input(0))
                .into_iter()
                .take(MOCK_DIGEST_SENTENCES)
                .collect::<Vec<_>>()
                .join(" "),
            Task::ExtractUnits => split_sentences(input(0))
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{}. {s}\n", i + 1))
                .collect(),
            Task::Canonicalize => input(0).to_string(),
            Task::Reconstruct => self.reconstruct(&request.inputs, request.temperature),
            Task::Judge => {
                let score = overlap_score(input(0), input(1));
                format!("score: {score}\nrationale: content-word overlap")
            }
            Task::SelectAtoms => {
                let count: usize = input(0).parse().unwrap_or(0);
                request.inputs[1..]
                    .iter()
                    .take(count)
                    .enumerate()
                    .map(|(i, id)| format!("{}. {id}\n", i + 1))
                    .collect()
            }
        };
        Ok(Completion { text, retries: 0 })
    }

    fn is_offline(&self) -> bool {
        true
    }
}

/// Feature-hashing embedder: every content word maps to a seeded Gaussian
/// vector; a text embeds as the sum over its words. Texts without content
/// words hash as a whole. Texts sharing words land close together, which
/// gives the offline pipeline real cluster structure.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashEmbedder { dim, seed }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(self.seed, token));
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(64, 0)
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut tokens = content_tokens(text);
                if tokens.is_empty() {
                    tokens.push(text.to_string());
                }
                let mut acc = vec![0.0; self.dim];
                for t in &tokens {
                    for (a, x) in acc.iter_mut().zip(self.token_vector(t)) {
                        *a += x;
                    }
                }
                acc
            })
            .collect())
    }
}
