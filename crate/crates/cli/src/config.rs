use std::path::{Path, PathBuf};

use ideaforge::clustering::ClusterParams;
use ideaforge::providers::ProviderConfig;
use ideaforge::sampler::SamplerConfig;
use ideaforge::seqmodel::LmConfig;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

/// Artifact locations. Relative paths resolve against `work_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub fetched: PathBuf,
    pub corpus: PathBuf,
    pub researchers: PathBuf,
    pub blogs: PathBuf,
    pub units: PathBuf,
    pub embeddings: PathBuf,
    pub clusters: PathBuf,
    pub condensed_tree: PathBuf,
    pub vocabulary: PathBuf,
    pub paper_seqs: PathBuf,
    pub researcher_seqs: PathBuf,
    pub coherence_model: PathBuf,
    pub availability_model: PathBuf,
    pub candidates: PathBuf,
    pub coherence_candidates: PathBuf,
    pub random_baseline: PathBuf,
    pub llm_baseline: PathBuf,
    pub eval_dir: PathBuf,
    pub report: PathBuf,
    pub manifest: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            fetched: "fetched.jsonl".into(),
            corpus: "corpus.jsonl".into(),
            researchers: "researchers.jsonl".into(),
            blogs: "blogs.jsonl".into(),
            units: "units.jsonl".into(),
            embeddings: "embeddings.jsonl".into(),
            clusters: "clusters.json".into(),
            condensed_tree: "condensed_tree.json".into(),
            vocabulary: "vocabulary.json".into(),
            paper_seqs: "paper_seqs.jsonl".into(),
            researcher_seqs: "researcher_seqs.jsonl".into(),
            coherence_model: "coherence_lm.json".into(),
            availability_model: "availability_lm.json".into(),
            candidates: "candidates.jsonl".into(),
            coherence_candidates: "coherence_top.jsonl".into(),
            random_baseline: "baseline_random.jsonl".into(),
            llm_baseline: "baseline_llm.jsonl".into(),
            eval_dir: "eval".into(),
            report: "report.md".into(),
            manifest: "manifest.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchSection {
    pub endpoint: Option<String>,
    pub venues: Vec<String>,
    pub first_year: i32,
    pub last_year: i32,
    pub page_size: usize,
    pub parallel: usize,
    pub max_pages: usize,
    pub max_retries: u32,
    pub timeout_secs: f64,
}

impl Default for FetchSection {
    fn default() -> Self {
        FetchSection {
            endpoint: None,
            venues: Vec::new(),
            first_year: 1900,
            last_year: 2100,
            page_size: 100,
            parallel: 4,
            max_pages: 100_000,
            max_retries: 3,
            timeout_secs: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_candidates: usize,
    pub seq_length: usize,
    pub temperature: f64,
    pub rrf_k: f64,
    pub top_k: usize,
    pub allow_repeats: bool,
    pub order_averaged_availability: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSection {
            n_candidates: d.n_candidates,
            seq_length: d.seq_length,
            temperature: d.temperature,
            rrf_k: d.rrf_k,
            top_k: d.top_k,
            allow_repeats: d.allow_repeats,
            order_averaged_availability: d.order_averaged_availability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Random draws; defaults to `sampler.top_k`.
    pub random_draws: Option<usize>,
    /// Run the LLM selection baseline.
    pub llm: bool,
    /// LLM selection calls; defaults to `sampler.top_k`.
    pub llm_calls: Option<usize>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            random_draws: None,
            llm: true,
            llm_calls: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Embed candidates as the mean of their atom centroids instead of
    /// embedding an LLM reconstruction.
    pub novelty_proxy: bool,
    /// Run the reconstruction and stability harnesses.
    pub reconstruction: bool,
    pub stability_reconstructions: usize,
    pub stability_combos: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            novelty_proxy: false,
            reconstruction: true,
            stability_reconstructions: 5,
            stability_combos: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    pub seed: u64,
    /// Corpus JSONL to ingest. Without it, `ingest` reads the output of
    /// `fetch`.
    pub input: Option<PathBuf>,
    pub paths: Paths,
    pub fetch: FetchSection,
    pub provider: ProviderConfig,
    pub cluster: ClusterParams,
    pub lm: LmConfig,
    pub sampler: SamplerSection,
    pub baseline: BaselineSection,
    pub evaluation: EvaluationSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            work_dir: "work".into(),
            seed: 0,
            input: None,
            paths: Paths::default(),
            fetch: FetchSection::default(),
            provider: ProviderConfig::default(),
            cluster: ClusterParams::default(),
            lm: LmConfig::default(),
            sampler: SamplerSection::default(),
            baseline: BaselineSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub novelty_proxy: bool,
    pub allow_repeats: bool,
}

impl PipelineConfig {
    /// Parses a TOML file. Relative `work_dir` and `input` resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.work_dir = base.join(&cfg.work_dir);
        if let Some(input) = &cfg.input {
            cfg.input = Some(base.join(input));
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        self.evaluation.novelty_proxy |= o.novelty_proxy;
        self.sampler.allow_repeats |= o.allow_repeats;
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.work_dir.as_os_str().is_empty() {
            return bad("work_dir is empty".into());
        }
        self.provider.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.lm.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.sampler_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.cluster.min_cluster_size < 2 || self.cluster.min_samples < 1 {
            return bad(format!(
                "cluster needs min_cluster_size >= 2 and min_samples >= 1, got {} and {}",
                self.cluster.min_cluster_size, self.cluster.min_samples
            ));
        }
        if self.evaluation.stability_reconstructions < 2 {
            return bad("evaluation.stability_reconstructions must be at least 2".into());
        }
        if self.fetch.first_year > self.fetch.last_year {
            return bad("fetch.first_year is after fetch.last_year".into());
        }
        if self.fetch.page_size == 0 || self.fetch.parallel == 0 {
            return bad("fetch.page_size and fetch.parallel must be positive".into());
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            n_candidates: s.n_candidates,
            seq_length: s.seq_length,
            temperature: s.temperature,
            rrf_k: s.rrf_k,
            top_k: s.top_k,
            seed: self.seed,
            allow_repeats: s.allow_repeats,
            order_averaged_availability: s.order_averaged_availability,
        }
    }

    /// `p` if absolute, else `work_dir/p`.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.work_dir.join(p)
    }
}
