//! Stage-by-stage driver for the ideaforge pipeline.
//!
//! Each [`Stage`] reads artifacts from the work directory and writes new
//! ones atomically. A manifest records content hashes of every stage's
//! inputs and outputs, so rerunning a stage whose inputs and settings have
//! not changed does nothing.

mod config;
mod error;
mod manifest;
mod render;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ideaforge::io::write_json;
use ideaforge::providers::Provider;
use serde::Serialize;

pub use config::{BaselineSection, EvaluationSection, FetchSection, Overrides, Paths, PipelineConfig, SamplerSection};
pub use error::PipelineError;
pub use manifest::{hash_bytes, hash_file, relative_to, Manifest, StageRecord, MANIFEST_FORMAT};
pub use render::render_markdown;
pub use stages::{BlogRecord, ClusterArtifact, EmbeddingRecord, SelectionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Fetch,
    Ingest,
    Compress,
    Extract,
    Embed,
    Cluster,
    Atomize,
    Train,
    Sample,
    Baseline,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::Fetch,
        Stage::Ingest,
        Stage::Compress,
        Stage::Extract,
        Stage::Embed,
        Stage::Cluster,
        Stage::Atomize,
        Stage::Train,
        Stage::Sample,
        Stage::Baseline,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Fetch => "fetch",
            Stage::Ingest => "ingest",
            Stage::Compress => "compress",
            Stage::Extract => "extract",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Atomize => "atomize",
            Stage::Train => "train",
            Stage::Sample => "sample",
            Stage::Baseline => "baseline",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    /// Inputs, settings and outputs matched the manifest.
    UpToDate,
}

struct Plan {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    settings: serde_json::Value,
    needs_provider: bool,
}

pub struct Pipeline {
    config: PipelineConfig,
    provider: Option<Provider>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Pipeline { config, provider: None })
    }

    /// Uses `provider` instead of building one from the configuration.
    pub fn with_provider(config: PipelineConfig, provider: Provider) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Pipeline {
            config,
            provider: Some(provider),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn ensure_provider(&mut self, stage: Stage) -> Result<(), PipelineError> {
        if self.provider.is_none() {
            let p = Provider::from_config(&self.config.provider)
                .map_err(|source| PipelineError::Provider { stage, source })?;
            self.provider = Some(p);
        }
        Ok(())
    }

    fn plan(&self, stage: Stage) -> Plan {
        let c = &self.config;
        let p = |path: &PathBuf| c.resolve(path);
        let paths = &c.paths;
        let (inputs, outputs, settings, needs_provider) = match stage {
            Stage::Fetch => (vec![], vec![p(&paths.fetched)], to_value(&c.fetch), false),
            Stage::Ingest => (
                vec![c.input.clone().unwrap_or_else(|| p(&paths.fetched))],
                vec![p(&paths.corpus), p(&paths.researchers)],
                to_value(&(c.fetch.first_year, c.fetch.last_year)),
                false,
            ),
            Stage::Compress => (vec![p(&paths.corpus)], vec![p(&paths.blogs)], to_value(&c.provider), true),
            Stage::Extract => (vec![p(&paths.blogs)], vec![p(&paths.units)], to_value(&c.provider), true),
            Stage::Embed => (vec![p(&paths.units)], vec![p(&paths.embeddings)], to_value(&c.provider), true),
            Stage::Cluster => (
                vec![p(&paths.units), p(&paths.embeddings)],
                vec![p(&paths.clusters), p(&paths.condensed_tree)],
                to_value(&c.cluster),
                false,
            ),
            Stage::Atomize => (
                vec![
                    p(&paths.corpus),
                    p(&paths.researchers),
                    p(&paths.units),
                    p(&paths.embeddings),
                    p(&paths.clusters),
                ],
                vec![p(&paths.vocabulary), p(&paths.paper_seqs), p(&paths.researcher_seqs)],
                to_value(&c.provider),
                true,
            ),
            Stage::Train => (
                vec![p(&paths.vocabulary), p(&paths.paper_seqs), p(&paths.researcher_seqs)],
                vec![p(&paths.coherence_model), p(&paths.availability_model)],
                to_value(&c.lm),
                false,
            ),
            Stage::Sample => (
                vec![p(&paths.vocabulary), p(&paths.coherence_model), p(&paths.availability_model)],
                vec![p(&paths.candidates), p(&paths.coherence_candidates)],
                to_value(&c.sampler),
                false,
            ),
            Stage::Baseline => {
                let mut outputs = vec![p(&paths.random_baseline)];
                if c.baseline.llm {
                    outputs.push(p(&paths.llm_baseline));
                }
                (
                    vec![p(&paths.vocabulary)],
                    outputs,
                    to_value(&(&c.baseline, c.sampler.seq_length, c.sampler.top_k, &c.provider)),
                    c.baseline.llm,
                )
            }
            Stage::Evaluate => {
                let mut inputs = vec![
                    p(&paths.corpus),
                    p(&paths.blogs),
                    p(&paths.units),
                    p(&paths.vocabulary),
                    p(&paths.paper_seqs),
                    p(&paths.candidates),
                    p(&paths.coherence_candidates),
                    p(&paths.random_baseline),
                ];
                if c.baseline.llm {
                    inputs.push(p(&paths.llm_baseline));
                }
                let dir = p(&paths.eval_dir);
                let outputs = [
                    ideaforge::evaluation::DIVERSITY_CSV,
                    ideaforge::evaluation::COHERENCE_CSV,
                    ideaforge::evaluation::NOVELTY_CSV,
                    ideaforge::evaluation::EMBEDDINGS_CSV,
                    ideaforge::evaluation::SUMMARY_JSON,
                ]
                .iter()
                .map(|f| dir.join(f))
                .collect();
                (inputs, outputs, to_value(&(&c.evaluation, &c.provider)), true)
            }
            Stage::Report => (
                vec![p(&paths.eval_dir).join(ideaforge::evaluation::SUMMARY_JSON)],
                vec![p(&paths.report)],
                serde_json::Value::Null,
                false,
            ),
        };
        Plan {
            inputs,
            outputs,
            settings,
            needs_provider,
        }
    }

    /// Runs one stage unless the manifest shows it is already up to date.
    pub fn run_stage(&mut self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        let plan = self.plan(stage);
        if let Some(missing) = plan.inputs.iter().find(|p| !p.is_file()) {
            return Err(PipelineError::MissingArtifact {
                stage,
                path: missing.clone(),
            });
        }
        let work_dir = self.config.work_dir.clone();
        let manifest_path = self.config.resolve(&self.config.paths.manifest);
        let mut manifest = Manifest::load(&manifest_path);
        let settings = hash_bytes(plan.settings.to_string().as_bytes());
        let inputs: BTreeMap<PathBuf, String> = plan
            .inputs
            .iter()
            .map(|p| (relative_to(p, &work_dir), hash_file(p).unwrap_or_default()))
            .collect();
        if manifest.is_current(stage.name(), self.config.seed, &settings, &inputs, &work_dir) {
            log::info!("{stage}: up to date");
            return Ok(StageOutcome::UpToDate);
        }
        if plan.needs_provider {
            self.ensure_provider(stage)?;
        }
        log::info!("{stage}: running");
        self.execute(stage)?;
        let mut outputs = BTreeMap::new();
        for out in &plan.outputs {
            let hash = hash_file(out).ok_or_else(|| PipelineError::Io {
                stage,
                message: format!("stage did not produce {}", out.display()),
            })?;
            outputs.insert(relative_to(out, &work_dir), hash);
        }
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                seed: self.config.seed,
                settings,
                inputs,
                outputs,
            },
        );
        write_json(&manifest_path, &manifest).map_err(|e| PipelineError::Io {
            stage,
            message: e.to_string(),
        })?;
        Ok(StageOutcome::Ran)
    }

    /// The stages `run_all` executes: all of them, except `fetch` when a
    /// corpus file is configured.
    pub fn stages(&self) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|s| *s != Stage::Fetch || self.config.input.is_none())
            .collect()
    }

    /// Runs every stage in dependency order, stopping at the first failure.
    /// The provider is built before anything runs, so a missing token fails
    /// without side effects.
    pub fn run_all(&mut self) -> Result<Vec<(Stage, StageOutcome)>, PipelineError> {
        let stages = self.stages();
        if let Some(&first) = stages.iter().find(|s| self.plan(**s).needs_provider) {
            self.ensure_provider(first)?;
        }
        stages.into_iter().map(|s| self.run_stage(s).map(|o| (s, o))).collect()
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}
