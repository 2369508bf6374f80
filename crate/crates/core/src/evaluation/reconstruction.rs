use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::atomizer::{AtomVocabulary, PaperAtomSeq};
use crate::corpus::{ConceptualUnit, Corpus};
use crate::providers::{dot, Provider};

/// What an idea is rebuilt from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// The paper's extracted conceptual units.
    Units,
    /// Canonical texts of the paper's atoms only.
    Atoms,
    /// Atoms, plus the raw text of units that clustering left as noise.
    AtomsPlusNoise,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::Units, Representation::AtomsPlusNoise, Representation::Atoms];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Units => "units",
            Representation::Atoms => "atoms",
            Representation::AtomsPlusNoise => "atoms_plus_noise",
        }
    }
}

pub struct ReconstructionInputs<'a> {
    pub corpus: &'a Corpus,
    pub units: &'a [ConceptualUnit],
    pub vocabulary: &'a AtomVocabulary,
    pub paper_seqs: &'a [PaperAtomSeq],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRating {
    pub paper_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub representation: Representation,
    /// Count of ratings 1 through 5.
    pub histogram: [usize; 5],
    pub mean: f64,
    pub ratings: Vec<PaperRating>,
    /// Papers whose representation was empty; they are scored 1.
    pub empty_inputs: usize,
    /// Papers the provider failed on, with the error text. Not scored.
    pub failures: Vec<(String, String)>,
}

/// Texts a paper is reconstructed from under `repr`, in unit order.
pub fn representation_texts(inputs: &ReconstructionInputs, paper_id: &str, repr: Representation) -> Vec<String> {
    let mut units: Vec<&ConceptualUnit> = inputs.units.iter().filter(|u| u.paper_id == paper_id).collect();
    units.sort_by_key(|u| u.ordinal);
    match repr {
        Representation::Units => units.iter().map(|u| u.text.clone()).collect(),
        Representation::Atoms => inputs
            .paper_seqs
            .iter()
            .find(|s| s.paper_id == paper_id)
            .map(|s| s.atom_ids.iter().map(|&a| inputs.vocabulary.text(a).to_string()).collect())
            .unwrap_or_default(),
        Representation::AtomsPlusNoise => {
            let index = inputs.vocabulary.unit_index();
            let mut used = Vec::new();
            let mut out = Vec::new();
            for u in units {
                match index.get(u.id.as_str()) {
                    Some(&a) if !used.contains(&a) => {
                        used.push(a);
                        out.push(inputs.vocabulary.text(a).to_string());
                    }
                    Some(_) => {}
                    None => out.push(u.text.clone()),
                }
            }
            out
        }
    }
}

/// Rebuilds every paper that has a blog from `repr` and has the judge rate
/// the result against the blog on a 1-5 scale.
pub fn reconstruction_eval(
    inputs: &ReconstructionInputs,
    repr: Representation,
    provider: &Provider,
) -> Result<ReconstructionReport, EvalError> {
    let papers: Vec<_> = inputs.corpus.papers().iter().filter(|p| p.blog.is_some()).collect();
    if papers.is_empty() {
        return Err(EvalError::Empty("papers with blogs"));
    }
    let outcomes = provider.bounded_map(&papers, |paper| {
        let texts = representation_texts(inputs, &paper.id, repr);
        if texts.is_empty() {
            return Ok(None);
        }
        let rebuilt = provider.reconstruct_idea(&texts)?;
        let blog = paper.blog.as_deref().unwrap_or_default();
        provider.judge_reconstruction(blog, &rebuilt).map(|r| Some(r.score))
    });
    let mut report = ReconstructionReport {
        representation: repr,
        histogram: [0; 5],
        mean: 0.0,
        ratings: Vec::new(),
        empty_inputs: 0,
        failures: Vec::new(),
    };
    for (paper, outcome) in papers.iter().zip(outcomes) {
        let score = match outcome {
            Ok(Some(s)) => s,
            Ok(None) => {
                report.empty_inputs += 1;
                1
            }
            Err(e) => {
                log::warn!("reconstruction of {} failed: {e}", paper.id);
                report.failures.push((paper.id.clone(), e.to_string()));
                continue;
            }
        };
        report.histogram[usize::from(score.clamp(1, 5)) - 1] += 1;
        report.ratings.push(PaperRating {
            paper_id: paper.id.clone(),
            score,
        });
    }
    if !report.ratings.is_empty() {
        report.mean =
            report.ratings.iter().map(|r| f64::from(r.score)).sum::<f64>() / report.ratings.len() as f64;
    }
    Ok(report)
}

/// For each atom combination, `m` independent reconstructions are embedded
/// and their mean pairwise cosine similarity is reported.
pub fn stability_eval(combos: &[Vec<String>], provider: &Provider, m: usize) -> Result<Vec<f64>, EvalError> {
    if m < 2 {
        return Err(EvalError::Invalid(format!("stability needs at least 2 reconstructions, got {m}")));
    }
    let mut out = Vec::with_capacity(combos.len());
    for combo in combos {
        let texts = (0..m)
            .map(|_| provider.reconstruct_idea(combo))
            .collect::<Result<Vec<_>, _>>()?;
        let embs = provider.embed_texts(&texts)?;
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..m {
            for j in i + 1..m {
                total += dot(embs[i].as_slice(), embs[j].as_slice());
                pairs += 1;
            }
        }
        out.push(total / pairs as f64);
    }
    Ok(out)
}

/// Mean rating per representation, for checking their ordering.
pub fn mean_by_representation(reports: &[ReconstructionReport]) -> BTreeMap<&'static str, f64> {
    reports.iter().map(|r| (r.representation.name(), r.mean)).collect()
}

