use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use ideaforge::atomizer::{
    build_researcher_sequences, map_papers, vocab_stats, vocabulary_from_labels, AtomVocabulary, PaperAtomSeq,
    ResearcherAtomSeq,
};
use ideaforge::clustering::{hdbscan_detailed, ClusterLabels, CondensedTree};
use ideaforge::corpus::{
    build_researcher_profiles, fetch_papers, load_corpus_with, save_corpus, ConceptualUnit, Corpus, CorpusError,
    FetchConfig, FetchError, LoadOptions, ResearcherProfile,
};
use ideaforge::evaluation::{
    coherence_overlap, diversity, emit_report, mann_whitney, novelty, reconstruction_eval, stability_eval, Comparison,
    EvalError, EvaluationReport, LabeledEmbedding, MethodDiversity, MethodNovelty, MethodOverlap, ReconstructionInputs,
    Representation, Stability, Summary,
};
use ideaforge::io::{read_json, read_jsonl, write_atomic, write_json, write_jsonl, ArtifactError};
use ideaforge::providers::{EmbeddingVector, Provider, ProviderError};
use ideaforge::sampler::{
    coherence_top, generate_candidates, random_baseline, rank_and_fuse, select_top, CandidateRecord,
};
use ideaforge::seqmodel::AtomLm;
use ideaforge::transport::{RetryPolicy, UreqTransport};
use serde::{Deserialize, Serialize};

use crate::render::render_markdown;
use crate::{Pipeline, PipelineError, Stage};

/// One line of `blogs.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlogRecord {
    pub paper_id: String,
    pub blog: String,
}

/// One line of `embeddings.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub unit_id: String,
    pub vector: EmbeddingVector,
}

/// Contents of `clusters.json`: one label per unit, in unit order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub seed: u64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub cluster_count: usize,
    pub noise_count: usize,
    pub unit_ids: Vec<String>,
    pub labels: Vec<i64>,
}

/// One line of a baseline file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub atoms: Vec<usize>,
    pub atom_texts: Vec<String>,
}

fn art(stage: Stage) -> impl Fn(ArtifactError) -> PipelineError {
    move |e| match e {
        ArtifactError::Parse { .. } => PipelineError::Validation {
            stage,
            message: e.to_string(),
        },
        other => PipelineError::Io {
            stage,
            message: other.to_string(),
        },
    }
}

fn prov(stage: Stage) -> impl Fn(ProviderError) -> PipelineError {
    move |source| PipelineError::Provider { stage, source }
}

fn invalid(stage: Stage, message: impl Into<String>) -> PipelineError {
    PipelineError::Validation {
        stage,
        message: message.into(),
    }
}

fn corpus_err(stage: Stage, e: CorpusError) -> PipelineError {
    match e {
        CorpusError::Artifact(a) => art(stage)(a),
        other => invalid(stage, other.to_string()),
    }
}

fn eval_err(stage: Stage, e: EvalError) -> PipelineError {
    match e {
        EvalError::Provider(source) => PipelineError::Provider { stage, source },
        EvalError::Artifact(a) => art(stage)(a),
        EvalError::Csv { .. } => PipelineError::Io {
            stage,
            message: e.to_string(),
        },
        other => invalid(stage, other.to_string()),
    }
}

fn selections(vocab: &AtomVocabulary, atoms: Vec<Vec<usize>>) -> Vec<SelectionRecord> {
    atoms
        .into_iter()
        .map(|a| SelectionRecord {
            atom_texts: a.iter().map(|&i| vocab.text(i).to_string()).collect(),
            atoms: a,
        })
        .collect()
}

impl Pipeline {
    fn provider(&self) -> &Provider {
        self.provider.as_ref().expect("provider is built before provider stages run")
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            years: self.config.fetch.first_year..=self.config.fetch.last_year,
        }
    }

    fn load_corpus(&self, stage: Stage) -> Result<Corpus, PipelineError> {
        load_corpus_with(&self.config.resolve(&self.config.paths.corpus), &self.load_options())
            .map_err(|e| corpus_err(stage, e))
    }

    fn read_jsonl<T: serde::de::DeserializeOwned>(&self, stage: Stage, path: &Path) -> Result<Vec<T>, PipelineError> {
        read_jsonl(&self.config.resolve(path)).map_err(art(stage))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, stage: Stage, path: &Path) -> Result<T, PipelineError> {
        read_json(&self.config.resolve(path)).map_err(art(stage))
    }

    fn write_jsonl<T: Serialize>(&self, stage: Stage, path: &Path, items: &[T]) -> Result<(), PipelineError> {
        write_jsonl(&self.config.resolve(path), items).map_err(art(stage))
    }

    fn write_json<T: Serialize>(&self, stage: Stage, path: &Path, value: &T) -> Result<(), PipelineError> {
        write_json(&self.config.resolve(path), value).map_err(art(stage))
    }

    pub(crate) fn execute(&mut self, stage: Stage) -> Result<(), PipelineError> {
        match stage {
            Stage::Fetch => self.fetch(),
            Stage::Ingest => self.ingest(),
            Stage::Compress => self.compress(),
            Stage::Extract => self.extract(),
            Stage::Embed => self.embed(),
            Stage::Cluster => self.cluster(),
            Stage::Atomize => self.atomize(),
            Stage::Train => self.train(),
            Stage::Sample => self.sample(),
            Stage::Baseline => self.baseline(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
        }
    }

    fn fetch(&self) -> Result<(), PipelineError> {
        let stage = Stage::Fetch;
        let f = &self.config.fetch;
        let endpoint = f
            .endpoint
            .as_ref()
            .ok_or_else(|| PipelineError::Config("fetch.endpoint is not set".into()))?;
        let mut cfg = FetchConfig::new(endpoint.clone());
        cfg.venues = f.venues.clone();
        cfg.years = f.first_year..=f.last_year;
        cfg.page_size = f.page_size;
        cfg.parallel = f.parallel;
        cfg.max_pages = f.max_pages;
        cfg.retry = RetryPolicy {
            max_retries: f.max_retries,
            ..RetryPolicy::default()
        };
        let transport = UreqTransport::new(Duration::from_secs_f64(f.timeout_secs));
        let report = fetch_papers(&transport, &cfg).map_err(|e| match e {
            FetchError::Corpus(c) => corpus_err(stage, c),
            other => PipelineError::Fetch {
                stage,
                message: other.to_string(),
            },
        })?;
        for w in &report.warnings {
            log::warn!("fetch: {w}");
        }
        log::info!(
            "fetch: {} papers from {} pages ({} retries, {} filtered out)",
            report.corpus.len(),
            report.pages,
            report.retries,
            report.filtered_out
        );
        save_corpus(&report.corpus, &self.config.resolve(&self.config.paths.fetched)).map_err(|e| corpus_err(stage, e))
    }

    fn ingest(&self) -> Result<(), PipelineError> {
        let stage = Stage::Ingest;
        let input = self
            .config
            .input
            .clone()
            .unwrap_or_else(|| self.config.resolve(&self.config.paths.fetched));
        let corpus = load_corpus_with(&input, &self.load_options()).map_err(|e| corpus_err(stage, e))?;
        if corpus.is_empty() {
            return Err(invalid(stage, format!("{} contains no papers", input.display())));
        }
        let with_blog = corpus.papers().iter().filter(|p| p.blog.is_some()).count();
        log::info!("ingest: {} papers, {} with blogs", corpus.len(), with_blog);
        save_corpus(&corpus, &self.config.resolve(&self.config.paths.corpus)).map_err(|e| corpus_err(stage, e))?;
        self.write_jsonl(stage, &self.config.paths.researchers, &build_researcher_profiles(&corpus))
    }

    fn compress(&self) -> Result<(), PipelineError> {
        let stage = Stage::Compress;
        let corpus = self.load_corpus(stage)?;
        let provider = self.provider();
        let papers: Vec<_> = corpus.papers().iter().collect();
        let blogs = provider.bounded_map(&papers, |p| match (&p.blog, &p.body) {
            (Some(blog), _) => Ok(Some(blog.clone())),
            (None, Some(_)) => provider.compress_paper(p).map(Some),
            (None, None) => Ok(None),
        });
        let mut out = Vec::new();
        for (paper, blog) in papers.iter().zip(blogs) {
            match blog.map_err(prov(stage))? {
                Some(blog) => out.push(BlogRecord {
                    paper_id: paper.id.clone(),
                    blog,
                }),
                None => log::warn!("compress: {} has neither body nor blog; skipped", paper.id),
            }
        }
        if out.is_empty() {
            return Err(invalid(stage, "no paper has a body or blog to work from"));
        }
        self.write_jsonl(stage, &self.config.paths.blogs, &out)
    }

    fn extract(&self) -> Result<(), PipelineError> {
        let stage = Stage::Extract;
        let blogs: Vec<BlogRecord> = self.read_jsonl(stage, &self.config.paths.blogs)?;
        let provider = self.provider();
        let extracted = provider.bounded_map(&blogs, |b| provider.extract_units(&b.blog));
        let mut units = Vec::new();
        for (blog, texts) in blogs.iter().zip(extracted) {
            let texts = texts.map_err(prov(stage))?;
            units.extend(
                texts
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| ConceptualUnit::new(&blog.paper_id, i, t)),
            );
        }
        log::info!("extract: {} units from {} blogs", units.len(), blogs.len());
        self.write_jsonl(stage, &self.config.paths.units, &units)
    }

    fn embed(&self) -> Result<(), PipelineError> {
        let stage = Stage::Embed;
        let units: Vec<ConceptualUnit> = self.read_jsonl(stage, &self.config.paths.units)?;
        if units.is_empty() {
            return Err(invalid(stage, "no units to embed"));
        }
        let texts: Vec<String> = units.iter().map(|u| u.text.clone()).collect();
        let vectors = self.provider().embed_texts(&texts).map_err(prov(stage))?;
        let records: Vec<EmbeddingRecord> = units
            .iter()
            .zip(vectors)
            .map(|(u, v)| EmbeddingRecord {
                unit_id: u.id.clone(),
                vector: v,
            })
            .collect();
        self.write_jsonl(stage, &self.config.paths.embeddings, &records)
    }

    fn aligned_embeddings(
        &self,
        stage: Stage,
        units: &[ConceptualUnit],
    ) -> Result<Vec<EmbeddingVector>, PipelineError> {
        let records: Vec<EmbeddingRecord> = self.read_jsonl(stage, &self.config.paths.embeddings)?;
        if records.len() != units.len() || records.iter().zip(units).any(|(r, u)| r.unit_id != u.id) {
            return Err(invalid(stage, "embeddings do not line up with units; rerun embed"));
        }
        Ok(records.into_iter().map(|r| r.vector).collect())
    }

    fn cluster(&self) -> Result<(), PipelineError> {
        let stage = Stage::Cluster;
        let params = self.config.cluster;
        let units: Vec<ConceptualUnit> = self.read_jsonl(stage, &self.config.paths.units)?;
        let embeddings = self.aligned_embeddings(stage, &units)?;
        let (labels, tree): (ClusterLabels, Option<CondensedTree>) = if units.len() < params.min_cluster_size {
            log::warn!("cluster: {} units is below min_cluster_size; all are noise", units.len());
            (
                ClusterLabels {
                    labels: vec![ClusterLabels::NOISE; units.len()],
                    cluster_count: 0,
                },
                None,
            )
        } else {
            let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.as_slice().to_vec()).collect();
            let c = hdbscan_detailed(&points, params).map_err(|e| invalid(stage, e.to_string()))?;
            (c.labels, Some(c.tree))
        };
        log::info!(
            "cluster: {} clusters, {} of {} units noise",
            labels.cluster_count,
            labels.noise_count(),
            units.len()
        );
        let artifact = ClusterArtifact {
            seed: self.config.seed,
            min_cluster_size: params.min_cluster_size,
            min_samples: params.min_samples,
            cluster_count: labels.cluster_count,
            noise_count: labels.noise_count(),
            unit_ids: units.iter().map(|u| u.id.clone()).collect(),
            labels: labels.labels,
        };
        self.write_json(stage, &self.config.paths.clusters, &artifact)?;
        self.write_json(stage, &self.config.paths.condensed_tree, &tree)
    }

    fn atomize(&self) -> Result<(), PipelineError> {
        let stage = Stage::Atomize;
        let corpus = self.load_corpus(stage)?;
        let profiles: Vec<ResearcherProfile> = self.read_jsonl(stage, &self.config.paths.researchers)?;
        let units: Vec<ConceptualUnit> = self.read_jsonl(stage, &self.config.paths.units)?;
        let embeddings = self.aligned_embeddings(stage, &units)?;
        let clusters: ClusterArtifact = self.read_json(stage, &self.config.paths.clusters)?;
        if clusters.unit_ids.len() != units.len() || clusters.unit_ids.iter().zip(&units).any(|(a, u)| *a != u.id) {
            return Err(invalid(stage, "cluster labels do not line up with units; rerun cluster"));
        }
        let labels = ClusterLabels {
            labels: clusters.labels,
            cluster_count: clusters.cluster_count,
        };
        let atom_err = |e: ideaforge::atomizer::AtomizerError| match e {
            ideaforge::atomizer::AtomizerError::Canonicalize { source, .. } => PipelineError::Provider { stage, source },
            other => invalid(stage, other.to_string()),
        };
        let vocab = vocabulary_from_labels(&units, &embeddings, &labels, self.provider()).map_err(atom_err)?;
        let paper_seqs = map_papers(&corpus, &units, &vocab).map_err(atom_err)?;
        let researcher_seqs = build_researcher_sequences(&profiles, &paper_seqs);
        let stats = vocab_stats(&vocab, &paper_seqs);
        log::info!(
            "atomize: {} atoms, noise fraction {:.3}, {:.2} atoms per paper",
            stats.atom_count,
            stats.noise_fraction,
            stats.mean_atoms_per_paper
        );
        self.write_json(stage, &self.config.paths.vocabulary, &vocab)?;
        self.write_jsonl(stage, &self.config.paths.paper_seqs, &paper_seqs)?;
        self.write_jsonl(stage, &self.config.paths.researcher_seqs, &researcher_seqs)
    }

    fn load_vocabulary(&self, stage: Stage) -> Result<AtomVocabulary, PipelineError> {
        let vocab: AtomVocabulary = self.read_json(stage, &self.config.paths.vocabulary)?;
        vocab.check_invariants().map_err(|m| invalid(stage, m))?;
        if vocab.is_empty() {
            return Err(invalid(stage, "the atom vocabulary is empty"));
        }
        Ok(vocab)
    }

    fn train(&self) -> Result<(), PipelineError> {
        let stage = Stage::Train;
        let vocab = self.load_vocabulary(stage)?;
        let papers: Vec<PaperAtomSeq> = self.read_jsonl(stage, &self.config.paths.paper_seqs)?;
        let researchers: Vec<ResearcherAtomSeq> = self.read_jsonl(stage, &self.config.paths.researcher_seqs)?;
        let train = |seqs: Vec<Vec<usize>>| {
            AtomLm::train(&seqs, vocab.len(), self.config.lm.clone()).map_err(|e| invalid(stage, e.to_string()))
        };
        let coherence = train(papers.into_iter().map(|s| s.atom_ids).collect())?;
        let availability = train(researchers.into_iter().map(|s| s.atom_ids).collect())?;
        self.write_json(stage, &self.config.paths.coherence_model, &coherence)?;
        self.write_json(stage, &self.config.paths.availability_model, &availability)
    }

    fn sample(&self) -> Result<(), PipelineError> {
        let stage = Stage::Sample;
        let vocab = self.load_vocabulary(stage)?;
        let coherence: AtomLm = self.read_json(stage, &self.config.paths.coherence_model)?;
        let availability: AtomLm = self.read_json(stage, &self.config.paths.availability_model)?;
        if coherence.atom_count() != vocab.len() || availability.atom_count() != vocab.len() {
            return Err(invalid(stage, "models were trained on a different vocabulary; rerun train"));
        }
        let cfg = self.config.sampler_config();
        let generation = generate_candidates(&coherence, &cfg).map_err(|e| invalid(stage, e.to_string()))?;
        log::info!(
            "sample: {} draws, {} distinct atom sets",
            generation.drawn,
            generation.candidates.len()
        );
        let ranked = rank_and_fuse(&generation.candidates, &coherence, &availability, &cfg)
            .map_err(|e| invalid(stage, e.to_string()))?;
        let records = |cands: Vec<ideaforge::Candidate>| -> Vec<CandidateRecord> {
            cands.iter().map(|c| c.to_record(&vocab)).collect()
        };
        self.write_jsonl(stage, &self.config.paths.candidates, &records(select_top(&ranked, cfg.top_k)))?;
        self.write_jsonl(
            stage,
            &self.config.paths.coherence_candidates,
            &records(coherence_top(&ranked, cfg.top_k)),
        )
    }

    fn baseline(&self) -> Result<(), PipelineError> {
        let stage = Stage::Baseline;
        let vocab = self.load_vocabulary(stage)?;
        let len = self.config.sampler.seq_length;
        let draws = self.config.baseline.random_draws.unwrap_or(self.config.sampler.top_k);
        let random = random_baseline(vocab.len(), draws, len, self.config.seed).map_err(|e| invalid(stage, e.to_string()))?;
        self.write_jsonl(stage, &self.config.paths.random_baseline, &selections(&vocab, random))?;
        if self.config.baseline.llm {
            let calls = self.config.baseline.llm_calls.unwrap_or(self.config.sampler.top_k);
            let provider = self.provider();
            let seeds: Vec<u64> = (0..calls as u64).map(|i| self.config.seed.wrapping_add(i)).collect();
            let picks = provider.bounded_map(&seeds, |&s| provider.llm_select_atoms(&vocab, len, s));
            let picks = picks.into_iter().collect::<Result<Vec<_>, _>>().map_err(prov(stage))?;
            self.write_jsonl(stage, &self.config.paths.llm_baseline, &selections(&vocab, picks))?;
        }
        Ok(())
    }

    /// Embeddings for candidate atom sets: the normalized mean of atom
    /// centroids under the proxy, else an embedded LLM reconstruction.
    fn candidate_embeddings(
        &self,
        stage: Stage,
        vocab: &AtomVocabulary,
        sets: &[Vec<usize>],
    ) -> Result<Vec<EmbeddingVector>, PipelineError> {
        if self.config.evaluation.novelty_proxy {
            sets.iter()
                .map(|s| {
                    let dim = vocab.atoms[s[0]].centroid.dim();
                    let mut mean = vec![0.0; dim];
                    for &a in s {
                        for (m, x) in mean.iter_mut().zip(vocab.atoms[a].centroid.as_slice()) {
                            *m += x;
                        }
                    }
                    EmbeddingVector::normalized(mean)
                        .or_else(|_| Ok(vocab.atoms[s[0]].centroid.clone()))
                        .map_err(prov(stage))
                })
                .collect()
        } else {
            let provider = self.provider();
            let texts: Vec<Vec<String>> = sets
                .iter()
                .map(|s| s.iter().map(|&a| vocab.text(a).to_string()).collect())
                .collect();
            let ideas = provider.bounded_map(&texts, |t| provider.reconstruct_idea(t));
            let ideas = ideas.into_iter().collect::<Result<Vec<_>, _>>().map_err(prov(stage))?;
            provider.embed_texts(&ideas).map_err(prov(stage))
        }
    }

    fn evaluate(&self) -> Result<(), PipelineError> {
        let stage = Stage::Evaluate;
        let paths = &self.config.paths;
        let ev = |e| eval_err(stage, e);
        let blogs: Vec<BlogRecord> = self.read_jsonl(stage, &paths.blogs)?;
        let blog_map: BTreeMap<String, String> = blogs.iter().map(|b| (b.paper_id.clone(), b.blog.clone())).collect();
        let corpus = self.load_corpus(stage)?.with_blogs(&blog_map);
        let units: Vec<ConceptualUnit> = self.read_jsonl(stage, &paths.units)?;
        let vocab = self.load_vocabulary(stage)?;
        let paper_seqs: Vec<PaperAtomSeq> = self.read_jsonl(stage, &paths.paper_seqs)?;
        let alien: Vec<CandidateRecord> = self.read_jsonl(stage, &paths.candidates)?;
        let coherence: Vec<CandidateRecord> = self.read_jsonl(stage, &paths.coherence_candidates)?;
        let mut methods: Vec<(&str, Vec<Vec<usize>>)> = vec![
            ("alien", alien.iter().map(|c| c.atoms.clone()).collect()),
            ("coherence", coherence.iter().map(|c| c.atoms.clone()).collect()),
        ];
        let random: Vec<SelectionRecord> = self.read_jsonl(stage, &paths.random_baseline)?;
        methods.push(("random", random.into_iter().map(|s| s.atoms).collect()));
        if self.config.baseline.llm {
            let llm: Vec<SelectionRecord> = self.read_jsonl(stage, &paths.llm_baseline)?;
            methods.push(("llm", llm.into_iter().map(|s| s.atoms).collect()));
        }
        methods.retain(|(name, sets)| {
            if sets.is_empty() {
                log::warn!("evaluate: {name} has no selections; skipped");
            }
            !sets.is_empty()
        });
        if methods.is_empty() {
            return Err(invalid(stage, "no candidates or baselines to evaluate"));
        }

        let mut report = EvaluationReport::new(self.config.seed);
        for (name, sets) in &methods {
            report.diversity.push(MethodDiversity {
                method: name.to_string(),
                report: diversity(sets, vocab.len()).map_err(ev)?,
            });
        }

        let corpus_sets: Vec<Vec<usize>> = paper_seqs
            .iter()
            .filter(|s| !s.atom_ids.is_empty())
            .map(|s| s.atom_ids.clone())
            .collect();
        if corpus_sets.is_empty() {
            return Err(invalid(stage, "no paper maps to any atom"));
        }
        for (name, sets) in &methods {
            report.coherence.push(MethodOverlap {
                method: name.to_string(),
                overlap: coherence_overlap(sets, &corpus_sets).map_err(ev)?,
            });
        }

        let blog_papers: Vec<(&str, String)> = corpus
            .papers()
            .iter()
            .filter_map(|p| p.blog.as_ref().map(|b| (p.id.as_str(), b.clone())))
            .collect();
        let blog_texts: Vec<String> = blog_papers.iter().map(|(_, b)| b.clone()).collect();
        let corpus_embs = self.provider().embed_texts(&blog_texts).map_err(prov(stage))?;
        for ((id, _), e) in blog_papers.iter().zip(&corpus_embs) {
            report.embeddings.push(LabeledEmbedding {
                id: format!("paper:{id}"),
                vector: e.as_slice().to_vec(),
            });
        }
        for (name, sets) in &methods {
            let embs = self.candidate_embeddings(stage, &vocab, sets)?;
            let distances = novelty(&embs, &corpus_embs).map_err(ev)?;
            for (i, e) in embs.iter().enumerate() {
                report.embeddings.push(LabeledEmbedding {
                    id: format!("{name}:{i}"),
                    vector: e.as_slice().to_vec(),
                });
            }
            report.novelty.push(MethodNovelty {
                method: name.to_string(),
                proxy: self.config.evaluation.novelty_proxy,
                distances,
            });
        }

        let snapshot = report.clone();
        let mut compare = |metric: &str, a: (&str, Vec<f64>), b: (&str, Vec<f64>)| -> Result<(), PipelineError> {
            if a.1.is_empty() || b.1.is_empty() {
                return Ok(());
            }
            report.comparisons.push(Comparison {
                metric: metric.into(),
                method_a: a.0.into(),
                method_b: b.0.into(),
                result: mann_whitney(&a.1, &b.1).map_err(ev)?,
            });
            Ok(())
        };
        let novelty_of = |m: &str, r: &EvaluationReport| -> Vec<f64> {
            r.novelty.iter().find(|n| n.method == m).map(|n| n.distances.clone()).unwrap_or_default()
        };
        let max_int_of = |m: &str, r: &EvaluationReport| -> Vec<f64> {
            r.coherence
                .iter()
                .find(|n| n.method == m)
                .map(|n| n.overlap.per_candidate.iter().map(|c| c.max_int as f64).collect())
                .unwrap_or_default()
        };
        for (other, _) in methods.iter().skip(1) {
            compare(
                "novelty",
                ("alien", novelty_of("alien", &snapshot)),
                (other, novelty_of(other, &snapshot)),
            )?;
        }
        compare(
            "a_score",
            ("alien", alien.iter().map(|c| c.a_score).collect()),
            ("coherence", coherence.iter().map(|c| c.a_score).collect()),
        )?;
        compare(
            "c_score",
            ("alien", alien.iter().map(|c| c.c_score).collect()),
            ("coherence", coherence.iter().map(|c| c.c_score).collect()),
        )?;
        for other in ["random", "llm"] {
            compare(
                "max_int",
                ("alien", max_int_of("alien", &snapshot)),
                (other, max_int_of(other, &snapshot)),
            )?;
        }

        if self.config.evaluation.reconstruction {
            let provider = self.provider();
            let inputs = ReconstructionInputs {
                corpus: &corpus,
                units: &units,
                vocabulary: &vocab,
                paper_seqs: &paper_seqs,
            };
            for repr in Representation::ALL {
                report.reconstruction.push(reconstruction_eval(&inputs, repr, provider).map_err(ev)?);
            }
            let combos: Vec<Vec<String>> = alien
                .iter()
                .take(self.config.evaluation.stability_combos)
                .map(|c| c.atom_texts.clone())
                .collect();
            let m = self.config.evaluation.stability_reconstructions;
            let per_combo = stability_eval(&combos, provider, m).map_err(ev)?;
            let mean = if per_combo.is_empty() {
                0.0
            } else {
                per_combo.iter().sum::<f64>() / per_combo.len() as f64
            };
            report.stability = Some(Stability {
                reconstructions: m,
                per_combo,
                mean,
            });
        }

        emit_report(&report, &self.config.resolve(&paths.eval_dir)).map_err(ev)?;
        Ok(())
    }

    fn report(&self) -> Result<(), PipelineError> {
        let stage = Stage::Report;
        let path = self.config.paths.eval_dir.join(ideaforge::evaluation::SUMMARY_JSON);
        let summary: Summary = self.read_json(stage, &path)?;
        let text = render_markdown(&summary);
        write_atomic(&self.config.resolve(&self.config.paths.report), text.as_bytes()).map_err(art(stage))
    }
}
