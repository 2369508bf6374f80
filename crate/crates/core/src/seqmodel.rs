//! Autoregressive categorical models over atom tokens.
//!
//! [`AtomLm`] is an interpolated, additively smoothed n-gram model. For a
//! context `h` and next token `w`,
//!
//! ```text
//! p(w | h) = Σ_k  λ_k · (c(h_k, w) + α) / (c(h_k) + α·V)
//! ```
//!
//! where `h_k` is the last `k` tokens of `h` (`k = 0 .. order-1`), `V` is the
//! full token count (atoms plus BOS and EOS) and the weights `λ_k` sum to
//! one. Every probability is strictly positive and every distribution sums
//! to one. Training sequences are padded with `order - 1` BOS tokens and
//! terminated with EOS; scores average log-probabilities over atom positions
//! only.
//!
//! The same type serves as the coherence model (trained on paper sequences)
//! and the availability model (trained on researcher sequences).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT: &str = "ideaforge-atomlm/1";

/// Samples per independently seeded generator; chunk `c` uses `seed + c`.
pub const SAMPLE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    /// Context length plus one (3 = trigram).
    pub order: usize,
    pub alpha: f64,
    /// Interpolation weight per context length, shortest first: `weights[0]`
    /// is the unigram weight.
    pub weights: Vec<f64>,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 3,
            alpha: 0.1,
            weights: vec![0.2, 0.3, 0.5],
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<(), SeqModelError> {
        let bad = |m: String| Err(SeqModelError::InvalidConfig(m));
        if self.order < 1 {
            return bad("order must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.weights.len() != self.order {
            return bad(format!("{} weights for order {}", self.weights.len(), self.order));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("weights must be non-negative".into());
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {sum}, expected 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeqModelError {
    #[error("token {token} outside the vocabulary of {limit}")]
    TokenOutOfRange { token: usize, limit: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot score an empty sequence")]
    EmptySequence,
    #[error("temperature must be >= 0, got {0}")]
    NegativeTemperature(f64),
    #[error("cannot draw {length} distinct atoms from {atoms}")]
    VocabularyTooSmall { length: usize, atoms: usize },
    #[error("no held-out sequences")]
    EmptyHeldout,
    #[error("unsupported model format {0:?}")]
    Format(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct NextCounts {
    total: u64,
    next: BTreeMap<usize, u64>,
}

/// A sequence with its mean per-atom log-probability (nats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub atom_ids: Vec<usize>,
    pub score: f64,
}

/// Options for [`AtomLm::sample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    pub temperature: f64,
    pub seed: u64,
    /// Permit an atom to appear twice in one sequence.
    pub allow_repeats: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            temperature: 1.0,
            seed: 0,
            allow_repeats: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct AtomLm {
    atom_count: usize,
    config: LmConfig,
    /// `tables[k]` maps a length-`k` context to its next-token counts.
    tables: Vec<BTreeMap<Vec<usize>, NextCounts>>,
}

impl AtomLm {
    /// A model with no observations: every distribution is uniform.
    pub fn untrained(atom_count: usize, config: LmConfig) -> Result<Self, SeqModelError> {
        config.validate()?;
        let tables = vec![BTreeMap::new(); config.order];
        Ok(AtomLm {
            atom_count,
            config,
            tables,
        })
    }

    /// Counts n-grams over BOS-padded, EOS-terminated sequences. Empty
    /// sequences are skipped.
    pub fn train(sequences: &[Vec<usize>], atom_count: usize, config: LmConfig) -> Result<Self, SeqModelError> {
        let mut lm = Self::untrained(atom_count, config)?;
        let pad = lm.config.order - 1;
        for seq in sequences {
            if seq.is_empty() {
                continue;
            }
            lm.check_atoms(seq)?;
            let mut padded = vec![lm.bos(); pad];
            padded.extend_from_slice(seq);
            padded.push(lm.eos());
            for i in pad..padded.len() {
                let target = padded[i];
                for k in 0..lm.config.order {
                    let entry = lm.tables[k].entry(padded[i - k..i].to_vec()).or_default();
                    entry.total += 1;
                    *entry.next.entry(target).or_default() += 1;
                }
            }
        }
        Ok(lm)
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    /// Size of the token space: atoms plus BOS and EOS.
    pub fn vocab_size(&self) -> usize {
        self.atom_count + 2
    }

    pub fn bos(&self) -> usize {
        self.atom_count
    }

    pub fn eos(&self) -> usize {
        self.atom_count + 1
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    fn check_atoms(&self, tokens: &[usize]) -> Result<(), SeqModelError> {
        match tokens.iter().find(|&&t| t >= self.atom_count) {
            Some(&token) => Err(SeqModelError::TokenOutOfRange {
                token,
                limit: self.atom_count,
            }),
            None => Ok(()),
        }
    }

    /// The last `order - 1` tokens of `context`, left-padded with BOS.
    fn effective_context(&self, context: &[usize]) -> Vec<usize> {
        let need = self.config.order - 1;
        let tail = &context[context.len().saturating_sub(need)..];
        let mut ctx = vec![self.bos(); need - tail.len()];
        ctx.extend_from_slice(tail);
        ctx
    }

    fn validate_context(&self, context: &[usize]) -> Result<(), SeqModelError> {
        match context.iter().find(|&&t| t >= self.vocab_size()) {
            Some(&token) => Err(SeqModelError::TokenOutOfRange {
                token,
                limit: self.vocab_size(),
            }),
            None => Ok(()),
        }
    }

    /// Probability of every token (atoms, BOS, EOS) after `context`.
    pub fn next_dist(&self, context: &[usize]) -> Result<Vec<f64>, SeqModelError> {
        self.validate_context(context)?;
        let ctx = self.effective_context(context);
        let v = self.vocab_size() as f64;
        let alpha = self.config.alpha;
        let mut dist = vec![0.0; self.vocab_size()];
        for (k, &weight) in self.config.weights.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            let key = &ctx[ctx.len() - k..];
            let counts = self.tables[k].get(key);
            let total = counts.map_or(0, |c| c.total) as f64;
            let denom = total + alpha * v;
            let floor = weight * alpha / denom;
            for p in dist.iter_mut() {
                *p += floor;
            }
            if let Some(c) = counts {
                for (&tok, &n) in &c.next {
                    dist[tok] += weight * n as f64 / denom;
                }
            }
        }
        Ok(dist)
    }

    /// `p(token | context)` without materializing the full distribution.
    pub fn prob(&self, context: &[usize], token: usize) -> Result<f64, SeqModelError> {
        self.validate_context(context)?;
        self.validate_context(&[token])?;
        let ctx = self.effective_context(context);
        let v = self.vocab_size() as f64;
        let alpha = self.config.alpha;
        let mut p = 0.0;
        for (k, &weight) in self.config.weights.iter().enumerate() {
            let key = &ctx[ctx.len() - k..];
            let (total, n) = self.tables[k].get(key).map_or((0, 0), |c| {
                (c.total, c.next.get(&token).copied().unwrap_or(0))
            });
            p += weight * (n as f64 + alpha) / (total as f64 + alpha * v);
        }
        Ok(p)
    }

    /// Mean log-probability of the atoms of `seq`, each conditioned on the
    /// BOS-padded prefix before it.
    pub fn score(&self, seq: &[usize]) -> Result<ScoredSequence, SeqModelError> {
        if seq.is_empty() {
            return Err(SeqModelError::EmptySequence);
        }
        self.check_atoms(seq)?;
        let total: f64 = (0..seq.len())
            .map(|t| self.prob(&seq[..t], seq[t]).map(f64::ln))
            .sum::<Result<f64, _>>()?;
        Ok(ScoredSequence {
            atom_ids: seq.to_vec(),
            score: total / seq.len() as f64,
        })
    }

    /// `exp` of the mean negative log-probability per scored atom.
    pub fn perplexity(&self, heldout: &[Vec<usize>]) -> Result<f64, SeqModelError> {
        let mut nll = 0.0;
        let mut tokens = 0usize;
        for seq in heldout.iter().filter(|s| !s.is_empty()) {
            let s = self.score(seq)?;
            nll -= s.score * seq.len() as f64;
            tokens += seq.len();
        }
        if tokens == 0 {
            return Err(SeqModelError::EmptyHeldout);
        }
        Ok((nll / tokens as f64).exp())
    }

    /// Relative sampling weights over atoms after `context`: `p^(1/T)` with
    /// `excluded` atoms zeroed. `T = 0` puts all mass on the most probable
    /// allowed atom (lowest id on ties).
    pub fn step_weights(&self, context: &[usize], temperature: f64, excluded: &[usize]) -> Result<Vec<f64>, SeqModelError> {
        let dist = self.next_dist(context)?;
        let mut w: Vec<f64> = dist[..self.atom_count].to_vec();
        for &e in excluded {
            if e < w.len() {
                w[e] = 0.0;
            }
        }
        if temperature == 0.0 {
            let mut best: Option<usize> = None;
            for (i, &p) in w.iter().enumerate() {
                if p > 0.0 && best.is_none_or(|b| p > w[b]) {
                    best = Some(i);
                }
            }
            let mut out = vec![0.0; w.len()];
            if let Some(b) = best {
                out[b] = 1.0;
            }
            return Ok(out);
        }
        let max_log = w
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        for p in w.iter_mut() {
            if *p > 0.0 {
                *p = ((p.ln() - max_log) / temperature).exp();
            }
        }
        Ok(w)
    }

    /// Draws `n` sequences of `length` atoms. BOS and EOS are never emitted.
    /// Unless `allow_repeats` is set, an atom already in the sequence is
    /// excluded from later draws, which is the same as rejecting and
    /// redrawing it. Output depends only on the arguments, not on the number
    /// of worker threads.
    pub fn sample(&self, n: usize, length: usize, opts: SampleOptions) -> Result<Vec<Vec<usize>>, SeqModelError> {
        if !(opts.temperature >= 0.0) {
            return Err(SeqModelError::NegativeTemperature(opts.temperature));
        }
        if length == 0 {
            return Err(SeqModelError::InvalidConfig("sequence length must be >= 1".into()));
        }
        let needed = if opts.allow_repeats { 1 } else { length };
        if self.atom_count < needed {
            return Err(SeqModelError::VocabularyTooSmall {
                length,
                atoms: self.atom_count,
            });
        }
        let chunks: Vec<(usize, usize)> = (0..n)
            .step_by(SAMPLE_CHUNK)
            .enumerate()
            .map(|(c, start)| (c, (n - start).min(SAMPLE_CHUNK)))
            .collect();
        let parts: Vec<Result<Vec<Vec<usize>>, SeqModelError>> = chunks
            .par_iter()
            .map(|&(chunk, count)| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(chunk as u64));
                (0..count).map(|_| self.sample_one(length, &opts, &mut rng)).collect()
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }

    fn sample_one(&self, length: usize, opts: &SampleOptions, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, SeqModelError> {
        let mut seq = Vec::with_capacity(length);
        for _ in 0..length {
            let excluded: &[usize] = if opts.allow_repeats { &[] } else { &seq };
            let weights = self.step_weights(&seq, opts.temperature, excluded)?;
            seq.push(draw(&weights, rng));
        }
        Ok(seq)
    }
}

/// Index drawn proportionally to `weights` (not necessarily normalized).
fn draw(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if target < w {
            return i;
        }
        target -= w;
    }
    last
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    atom_count: usize,
    order: usize,
    alpha: f64,
    weights: Vec<f64>,
    /// One map per context length; keys are comma-joined token ids.
    tables: Vec<BTreeMap<String, NextCounts>>,
}

fn context_key(ctx: &[usize]) -> String {
    ctx.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl From<AtomLm> for ModelFile {
    fn from(lm: AtomLm) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            atom_count: lm.atom_count,
            order: lm.config.order,
            alpha: lm.config.alpha,
            weights: lm.config.weights,
            tables: lm
                .tables
                .into_iter()
                .map(|t| t.into_iter().map(|(k, v)| (context_key(&k), v)).collect())
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for AtomLm {
    type Error = SeqModelError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        if f.format != MODEL_FORMAT {
            return Err(SeqModelError::Format(f.format));
        }
        let config = LmConfig {
            order: f.order,
            alpha: f.alpha,
            weights: f.weights,
        };
        config.validate()?;
        if f.tables.len() != config.order {
            return Err(SeqModelError::Format(format!("{} tables for order {}", f.tables.len(), config.order)));
        }
        let limit = f.atom_count + 2;
        let mut tables = Vec::with_capacity(config.order);
        for (k, table) in f.tables.into_iter().enumerate() {
            let mut parsed = BTreeMap::new();
            for (key, counts) in table {
                let ctx: Vec<usize> = if key.is_empty() {
                    Vec::new()
                } else {
                    key.split(',')
                        .map(|s| s.parse::<usize>().map_err(|_| SeqModelError::Format(format!("bad context {key:?}"))))
                        .collect::<Result<_, _>>()?
                };
                if ctx.len() != k {
                    return Err(SeqModelError::Format(format!("context {key:?} in table {k}")));
                }
                if let Some(&token) = ctx.iter().chain(counts.next.keys()).find(|&&t| t >= limit) {
                    return Err(SeqModelError::TokenOutOfRange { token, limit });
                }
                parsed.insert(ctx, counts);
            }
            tables.push(parsed);
        }
        Ok(AtomLm {
            atom_count: f.atom_count,
            config,
            tables,
        })
    }
}
