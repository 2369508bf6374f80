//! From clustered units to an atom vocabulary and atom sequences.
//!
//! Each non-noise cluster of conceptual units becomes one atom with a dense
//! token id. Papers become the ordered list of atoms their units express;
//! researchers become the concatenation of their papers' atom lists.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::clustering::{hdbscan, ClusterError, ClusterLabels, ClusterParams};
use crate::corpus::{ConceptualUnit, Corpus, ResearcherProfile};
use crate::providers::{EmbeddingVector, Provider, ProviderError};

/// Researcher sequences keep at most this many of their most recent tokens.
pub const MAX_RESEARCHER_TOKENS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: usize,
    #[serde(rename = "text")]
    pub canonical_text: String,
    #[serde(rename = "members")]
    pub member_unit_ids: Vec<String>,
    /// Normalized mean of the member embeddings.
    pub centroid: EmbeddingVector,
}

/// Token ids `0..V` are atoms; `V` is BOS and `V + 1` is EOS.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomVocabulary {
    pub atoms: Vec<Atom>,
    #[serde(rename = "noise")]
    pub noise_unit_ids: Vec<String>,
}

impl AtomVocabulary {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn bos(&self) -> usize {
        self.atoms.len()
    }

    pub fn eos(&self) -> usize {
        self.atoms.len() + 1
    }

    pub fn text(&self, id: usize) -> &str {
        &self.atoms[id].canonical_text
    }

    /// Unit id to atom id, for every clustered unit.
    pub fn unit_index(&self) -> HashMap<&str, usize> {
        self.atoms
            .iter()
            .flat_map(|a| a.member_unit_ids.iter().map(move |u| (u.as_str(), a.id)))
            .collect()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = HashMap::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.id != i {
                return Err(format!("atom at position {i} has id {}", atom.id));
            }
            for u in &atom.member_unit_ids {
                if seen.insert(u.as_str(), i).is_some() {
                    return Err(format!("unit {u} belongs to two atoms"));
                }
            }
        }
        for u in &self.noise_unit_ids {
            if seen.contains_key(u.as_str()) {
                return Err(format!("noise unit {u} is also an atom member"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperAtomSeq {
    pub paper_id: String,
    pub atom_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearcherAtomSeq {
    pub researcher_id: String,
    pub atom_ids: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VocabStats {
    pub atom_count: usize,
    pub unit_count: usize,
    pub noise_units: usize,
    pub noise_fraction: f64,
    pub paper_count: usize,
    pub mean_atoms_per_paper: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AtomizerError {
    #[error("{units} units but {embeddings} embeddings")]
    LengthMismatch { units: usize, embeddings: usize },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("canonicalizing atom {atom}: {source}")]
    Canonicalize {
        atom: usize,
        #[source]
        source: ProviderError,
    },
    #[error("unit {unit} references unknown paper {paper}")]
    UnknownPaper { unit: String, paper: String },
}

/// Clusters unit embeddings and turns each cluster into an atom. Atoms are
/// numbered by their first member's position in `units`. With fewer units
/// than `min_cluster_size` everything is noise.
pub fn build_vocabulary(
    units: &[ConceptualUnit],
    embeddings: &[EmbeddingVector],
    params: ClusterParams,
    provider: &Provider,
) -> Result<AtomVocabulary, AtomizerError> {
    if units.len() != embeddings.len() {
        return Err(AtomizerError::LengthMismatch {
            units: units.len(),
            embeddings: embeddings.len(),
        });
    }
    let labels = if units.len() < params.min_cluster_size {
        ClusterLabels {
            labels: vec![ClusterLabels::NOISE; units.len()],
            cluster_count: 0,
        }
    } else {
        let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.as_slice().to_vec()).collect();
        hdbscan(&points, params)?
    };
    vocabulary_from_labels(units, embeddings, &labels, provider)
}

/// Builds atoms from precomputed cluster labels.
pub fn vocabulary_from_labels(
    units: &[ConceptualUnit],
    embeddings: &[EmbeddingVector],
    labels: &ClusterLabels,
    provider: &Provider,
) -> Result<AtomVocabulary, AtomizerError> {
    let members = labels.members();
    let texts: Vec<Vec<String>> = members
        .iter()
        .map(|idx| idx.iter().map(|&i| units[i].text.clone()).collect())
        .collect();
    let canonical = provider.bounded_map(&texts, |m| provider.canonicalize_atom(m));
    let mut atoms = Vec::with_capacity(members.len());
    for (id, (idx, text)) in members.iter().zip(canonical).enumerate() {
        let text = text.map_err(|source| AtomizerError::Canonicalize { atom: id, source })?;
        let dim = embeddings[idx[0]].dim();
        let mut mean = vec![0.0; dim];
        for &i in idx {
            for (m, x) in mean.iter_mut().zip(embeddings[i].as_slice()) {
                *m += x;
            }
        }
        let centroid = EmbeddingVector::normalized(mean)
            .or_else(|_| EmbeddingVector::normalized(embeddings[idx[0]].as_slice().to_vec()))
            .map_err(|source| AtomizerError::Canonicalize { atom: id, source })?;
        atoms.push(Atom {
            id,
            canonical_text: text,
            member_unit_ids: idx.iter().map(|&i| units[i].id.clone()).collect(),
            centroid,
        });
    }
    let noise_unit_ids = labels
        .labels
        .iter()
        .zip(units)
        .filter(|(l, _)| **l == ClusterLabels::NOISE)
        .map(|(_, u)| u.id.clone())
        .collect();
    Ok(AtomVocabulary { atoms, noise_unit_ids })
}

/// One sequence per corpus paper, in corpus order. Atoms appear in the order
/// of their earliest unit; repeats collapse to the first occurrence.
pub fn map_papers(
    corpus: &Corpus,
    units: &[ConceptualUnit],
    vocabulary: &AtomVocabulary,
) -> Result<Vec<PaperAtomSeq>, AtomizerError> {
    let unit_atom = vocabulary.unit_index();
    let mut by_paper: BTreeMap<&str, Vec<&ConceptualUnit>> = BTreeMap::new();
    for u in units {
        if corpus.get(&u.paper_id).is_none() {
            return Err(AtomizerError::UnknownPaper {
                unit: u.id.clone(),
                paper: u.paper_id.clone(),
            });
        }
        by_paper.entry(u.paper_id.as_str()).or_default().push(u);
    }
    let mut out = Vec::with_capacity(corpus.len());
    for paper in corpus.papers() {
        let mut paper_units = by_paper.remove(paper.id.as_str()).unwrap_or_default();
        paper_units.sort_by_key(|u| u.ordinal);
        let mut atom_ids: Vec<usize> = Vec::new();
        for u in paper_units {
            if let Some(&a) = unit_atom.get(u.id.as_str()) {
                if !atom_ids.contains(&a) {
                    atom_ids.push(a);
                }
            }
        }
        if atom_ids.is_empty() {
            log::warn!("paper {} has no clustered units; excluded from training", paper.id);
        }
        out.push(PaperAtomSeq {
            paper_id: paper.id.clone(),
            atom_ids,
        });
    }
    Ok(out)
}

/// Concatenates each researcher's paper sequences in profile order (year,
/// then id), keeping the last [`MAX_RESEARCHER_TOKENS`] tokens. Researchers
/// with no atoms are dropped.
pub fn build_researcher_sequences(
    profiles: &[ResearcherProfile],
    paper_seqs: &[PaperAtomSeq],
) -> Vec<ResearcherAtomSeq> {
    build_researcher_sequences_capped(profiles, paper_seqs, MAX_RESEARCHER_TOKENS)
}

pub fn build_researcher_sequences_capped(
    profiles: &[ResearcherProfile],
    paper_seqs: &[PaperAtomSeq],
    max_tokens: usize,
) -> Vec<ResearcherAtomSeq> {
    let by_paper: HashMap<&str, &[usize]> = paper_seqs
        .iter()
        .map(|s| (s.paper_id.as_str(), s.atom_ids.as_slice()))
        .collect();
    profiles
        .iter()
        .filter_map(|profile| {
            let mut tokens: Vec<usize> = profile
                .paper_ids
                .iter()
                .filter_map(|p| by_paper.get(p.as_str()))
                .flat_map(|s| s.iter().copied())
                .collect();
            if tokens.is_empty() {
                return None;
            }
            if tokens.len() > max_tokens {
                tokens.drain(..tokens.len() - max_tokens);
            }
            Some(ResearcherAtomSeq {
                researcher_id: profile.id.clone(),
                atom_ids: tokens,
            })
        })
        .collect()
}

pub fn vocab_stats(vocabulary: &AtomVocabulary, paper_seqs: &[PaperAtomSeq]) -> VocabStats {
    let clustered: usize = vocabulary.atoms.iter().map(|a| a.member_unit_ids.len()).sum();
    let noise = vocabulary.noise_unit_ids.len();
    let units = clustered + noise;
    let tokens: usize = paper_seqs.iter().map(|s| s.atom_ids.len()).sum();
    VocabStats {
        atom_count: vocabulary.len(),
        unit_count: units,
        noise_units: noise,
        noise_fraction: if units == 0 { 0.0 } else { noise as f64 / units as f64 },
        paper_count: paper_seqs.len(),
        mean_atoms_per_paper: if paper_seqs.is_empty() {
            0.0
        } else {
            tokens as f64 / paper_seqs.len() as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LoadOptions, Paper};

    fn unit(paper: &str, ordinal: usize) -> ConceptualUnit {
        ConceptualUnit::new(paper, ordinal, format!("unit {ordinal} of {paper}"))
    }

    fn vocab(groups: &[&[&str]]) -> AtomVocabulary {
        AtomVocabulary {
            atoms: groups
                .iter()
                .enumerate()
                .map(|(id, members)| Atom {
                    id,
                    canonical_text: format!("atom {id}"),
                    member_unit_ids: members.iter().map(|s| s.to_string()).collect(),
                    centroid: EmbeddingVector::normalized(vec![1.0]).unwrap(),
                })
                .collect(),
            noise_unit_ids: vec![],
        }
    }

    fn corpus(ids: &[&str]) -> Corpus {
        let papers = ids
            .iter()
            .map(|id| Paper {
                id: id.to_string(),
                title: String::new(),
                venue: "v".into(),
                year: 2024,
                authors: vec!["a".into()],
                body: None,
                blog: None,
            })
            .collect();
        Corpus::from_papers(papers, &LoadOptions::default()).unwrap()
    }

    #[test]
    fn paper_order_follows_ordinals_and_skips_noise() {
        let units = vec![unit("p", 2), unit("p", 0), unit("p", 1)];
        // u0 -> atom A (0), u1 -> noise, u2 -> atom B (1)
        let v = vocab(&[&["p#0"], &["p#2"]]);
        let seqs = map_papers(&corpus(&["p"]), &units, &v).unwrap();
        assert_eq!(seqs[0].atom_ids, vec![0, 1]);
    }

    #[test]
    fn repeated_atoms_keep_first_occurrence() {
        let units = vec![unit("p", 0), unit("p", 1), unit("p", 2)];
        // ordinals map to [B, A, A]
        let v = vocab(&[&["p#1", "p#2"], &["p#0"]]);
        let seqs = map_papers(&corpus(&["p"]), &units, &v).unwrap();
        assert_eq!(seqs[0].atom_ids, vec![1, 0]);
    }

    #[test]
    fn all_noise_paper_is_empty_and_unknown_paper_errors() {
        let v = vocab(&[]);
        let seqs = map_papers(&corpus(&["p"]), &[unit("p", 0)], &v).unwrap();
        assert!(seqs[0].atom_ids.is_empty());
        let err = map_papers(&corpus(&["p"]), &[unit("q", 0)], &v).unwrap_err();
        assert!(matches!(err, AtomizerError::UnknownPaper { .. }));
    }

    fn profile(id: &str, papers: &[&str]) -> ResearcherProfile {
        ResearcherProfile {
            id: id.into(),
            name_key: id.into(),
            paper_ids: papers.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn seq(id: &str, atoms: &[usize]) -> PaperAtomSeq {
        PaperAtomSeq {
            paper_id: id.into(),
            atom_ids: atoms.to_vec(),
        }
    }

    #[test]
    fn researcher_concatenation_drop_and_truncation() {
        let seqs = vec![seq("p1", &[0, 1]), seq("p2", &[2]), seq("p3", &[])];
        let out = build_researcher_sequences(&[profile("r", &["p1", "p2"]), profile("n", &["p3"])], &seqs);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].atom_ids, vec![0, 1, 2]);

        let long: Vec<PaperAtomSeq> = (0..70).map(|i| seq(&format!("q{i:02}"), &[i])).collect();
        let ids: Vec<String> = (0..70).map(|i| format!("q{i:02}")).collect();
        let p = ResearcherProfile {
            id: "r".into(),
            name_key: "r".into(),
            paper_ids: ids,
        };
        let out = build_researcher_sequences(&[p], &long);
        assert_eq!(out[0].atom_ids, (6..70).collect::<Vec<_>>());
    }

    #[test]
    fn stats_on_empty_inputs_are_zero() {
        let s = vocab_stats(&AtomVocabulary::default(), &[]);
        assert_eq!(s, VocabStats::default());
    }

    #[test]
    fn fewer_units_than_min_cluster_size_are_all_noise() {
        let units: Vec<_> = (0..3).map(|i| unit("p", i)).collect();
        let emb: Vec<_> = (0..3)
            .map(|i| EmbeddingVector::normalized(vec![i as f64, 1.0]).unwrap())
            .collect();
        let v = build_vocabulary(&units, &emb, ClusterParams::default(), &Provider::mock()).unwrap();
        assert_eq!(v.len(), 0);
        assert_eq!(v.noise_unit_ids.len(), 3);
    }

    #[test]
    fn vocabulary_wire_format() {
        let v = vocab(&[&["p#0"]]);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["atoms"][0]["text"], "atom 0");
        assert_eq!(json["atoms"][0]["members"][0], "p#0");
        assert!(json["noise"].is_array());
    }
}
