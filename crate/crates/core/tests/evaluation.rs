use std::path::{Path, PathBuf};

use ideaforge::evaluation::{
    coherence_overlap, diversity, emit_report, gini, mann_whitney, mann_whitney_normal_p, novelty, read_csv,
    stability_eval, CoherenceRow, Comparison, DiversityRow, EvaluationReport, LabeledEmbedding, MethodDiversity,
    MethodNovelty, MethodOverlap, NoveltyRow, Summary, COHERENCE_CSV, DIVERSITY_CSV, EMBEDDINGS_CSV, NOVELTY_CSV,
    SUMMARY_JSON,
};
use ideaforge::providers::{EmbeddingVector, Provider};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;

use oracles::{brute_mw_p, brute_novelty, brute_overlap, pair_u, pairwise_gini, random_set};

#[test]
fn overlap_matches_pairwise_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let atoms = rng.random_range(3..30);
        let corpus: Vec<Vec<usize>> = (0..rng.random_range(1..20)).map(|_| random_set(&mut rng, atoms, 6)).collect();
        let cands: Vec<Vec<usize>> = (0..10).map(|_| random_set(&mut rng, atoms, 4)).collect();
        let report = coherence_overlap(&cands, &corpus).unwrap();
        for (cand, got) in cands.iter().zip(&report.per_candidate) {
            let (best_int, best_jac) = brute_overlap(cand, &corpus);
            assert_eq!(got.max_int, best_int);
            assert!((got.max_jac - best_jac).abs() < 1e-12);
            assert!(got.max_int <= cand.len());
            assert!((0.0..=1.0).contains(&got.max_jac));
        }
        let mean = report.per_candidate.iter().map(|c| c.max_int as f64).sum::<f64>() / 10.0;
        assert!((report.max_int_mean - mean).abs() < 1e-12);
    }
}

#[test]
fn candidate_inside_the_corpus_overlaps_fully() {
    let r = coherence_overlap(&[vec![2, 0, 1]], &[vec![0, 1, 2], vec![5]]).unwrap();
    assert_eq!(r.per_candidate[0].max_int, 3);
    assert_eq!(r.per_candidate[0].max_jac, 1.0);
    assert!(coherence_overlap(&[vec![0]], &[]).is_err());
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    EmbeddingVector::normalized((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn novelty_matches_pairwise_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let dim = rng.random_range(2..10);
        let corpus: Vec<EmbeddingVector> = (0..rng.random_range(1..15)).map(|_| unit(&mut rng, dim)).collect();
        let cands: Vec<EmbeddingVector> = (0..5).map(|_| unit(&mut rng, dim)).collect();
        let got = novelty(&cands, &corpus).unwrap();
        for (c, d) in cands.iter().zip(got) {
            let slices: Vec<&[f64]> = corpus.iter().map(|p| p.as_slice()).collect();
            assert!((d - brute_novelty(c.as_slice(), &slices)).abs() < 1e-12);
            assert!((0.0..=2.0).contains(&d));
        }
    }
    let same = unit(&mut rng, 4);
    assert!(novelty(&[same.clone()], &[same]).unwrap()[0].abs() < 1e-12);
    assert!(novelty(&[unit(&mut rng, 3)], &[unit(&mut rng, 4)]).is_err());
}

#[test]
fn gini_matches_pairwise_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(1..20) as f64).collect();
        assert!((gini(&x) - pairwise_gini(&x)).abs() < 1e-12);
    }
    for n in [2usize, 5, 50] {
        let mut x = vec![0.0; n];
        x[0] = 7.0;
        assert!((gini(&x) - (n - 1) as f64 / n as f64).abs() < 1e-12);
        assert_eq!(gini(&vec![3.0; n]), 0.0);
    }
}

#[test]
fn diversity_fields_match_direct_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let vocab = rng.random_range(15..60);
        let sel: Vec<Vec<usize>> = (0..rng.random_range(1..40))
            .map(|_| rand::seq::index::sample(&mut rng, vocab, 3).into_vec())
            .collect();
        let r = diversity(&sel, vocab).unwrap();
        let mut counts = vec![0u64; vocab];
        for s in &sel {
            for &a in s {
                counts[a] += 1;
            }
        }
        let used: Vec<f64> = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect();
        let total = 3 * sel.len() as u64;
        assert_eq!(r.unique_atoms, used.len());
        assert_eq!(r.total_selections, total);
        assert!((r.coverage - used.len() as f64 / vocab as f64).abs() < 1e-12);
        assert!((r.mean_repetition - total as f64 / used.len() as f64).abs() < 1e-12);
        assert!((r.gini - pairwise_gini(&used)).abs() < 1e-12);
        let mut sorted = used.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let top: f64 = sorted.iter().take(10).sum();
        assert!((r.top10_share - top / total as f64).abs() < 1e-12);
    }
    assert!(diversity(&[vec![9]], 5).is_err());
    assert!(diversity(&[], 5).is_err());
}

#[test]
fn mann_whitney_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..150 {
        let n1 = rng.random_range(1..7);
        let n2 = rng.random_range(1..7);
        // Small integer values force ties.
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0..5) as f64).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random_range(0..5) as f64).collect();
        let r = mann_whitney(&a, &b).unwrap();
        assert!(r.exact);
        assert_eq!(r.u, pair_u(&a, &b));
        assert!((r.p - brute_mw_p(&a, &b)).abs() < 1e-9, "{a:?} {b:?}");
        assert!((r.r - (1.0 - 2.0 * r.u / (n1 * n2) as f64).abs()).abs() < 1e-12);
    }
}

#[test]
fn mann_whitney_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (n1, n2) in [(4, 6), (15, 20), (40, 30)] {
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random_range(0.3..1.3)).collect();
        let ab = mann_whitney(&a, &b).unwrap();
        let ba = mann_whitney(&b, &a).unwrap();
        assert!((ab.u + ba.u - (n1 * n2) as f64).abs() < 1e-9);
        assert!((ab.p - ba.p).abs() < 1e-9);
        assert!((ab.r - ba.r).abs() < 1e-12);
    }
}

#[test]
fn exact_and_normal_paths_agree_for_moderate_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let a: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(0.1..1.1)).collect();
        let exact = mann_whitney(&a, &b).unwrap();
        assert!(exact.exact);
        let approx = mann_whitney_normal_p(&a, &b).unwrap();
        assert!((exact.p - approx).abs() < 0.05, "{} vs {approx}", exact.p);
    }
}

#[test]
fn large_samples_use_the_normal_path() {
    let a: Vec<f64> = (0..30).map(f64::from).collect();
    let b: Vec<f64> = (15..45).map(f64::from).collect();
    let r = mann_whitney(&a, &b).unwrap();
    assert!(!r.exact);
    assert_eq!(r.p, mann_whitney_normal_p(&a, &b).unwrap());
    assert!(r.p < 0.01);
}

pub fn sample_report() -> EvaluationReport {
    let mut report = EvaluationReport::new(42);
    let alien = vec![vec![0, 1, 2], vec![3, 4, 5]];
    let corpus = vec![vec![0, 1, 9], vec![4, 5, 6, 7]];
    report.diversity.push(MethodDiversity {
        method: "alien".into(),
        report: diversity(&alien, 10).unwrap(),
    });
    report.coherence.push(MethodOverlap {
        method: "alien".into(),
        overlap: coherence_overlap(&alien, &corpus).unwrap(),
    });
    report.novelty.push(MethodNovelty {
        method: "alien".into(),
        proxy: true,
        distances: vec![0.25, 0.5],
    });
    report.comparisons.push(Comparison {
        metric: "novelty".into(),
        method_a: "alien".into(),
        method_b: "random".into(),
        result: mann_whitney(&[0.25, 0.5], &[0.125, 0.375]).unwrap(),
    });
    report.embeddings.push(LabeledEmbedding {
        id: "alien-0".into(),
        vector: vec![0.6, 0.8],
    });
    report
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn emitted_files_match_golden_copies() {
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&sample_report(), dir.path()).unwrap();
    assert_eq!(written.len(), 5);
    let bless = std::env::var_os("IDEAFORGE_BLESS").is_some();
    for name in [DIVERSITY_CSV, COHERENCE_CSV, NOVELTY_CSV, EMBEDDINGS_CSV, SUMMARY_JSON] {
        let got = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let golden = golden_dir().join(name);
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&golden, &got).unwrap();
        }
        assert_eq!(got, std::fs::read_to_string(&golden).unwrap(), "{name}");
    }
}

#[test]
fn tables_parse_back_to_the_report() {
    let report = sample_report();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let div: Vec<DiversityRow> = read_csv(&dir.path().join(DIVERSITY_CSV)).unwrap();
    assert_eq!(div[0].gini, report.diversity[0].report.gini);
    assert_eq!(div[0].coverage, report.diversity[0].report.coverage);
    let coh: Vec<CoherenceRow> = read_csv(&dir.path().join(COHERENCE_CSV)).unwrap();
    assert_eq!(coh.len(), 2);
    assert_eq!(coh[1].atoms, "3 4 5");
    assert_eq!(coh[1].max_int, 2);
    assert_eq!(coh[1].max_jac, 0.4);
    let nov: Vec<NoveltyRow> = read_csv(&dir.path().join(NOVELTY_CSV)).unwrap();
    assert_eq!(nov.iter().map(|r| r.distance).collect::<Vec<_>>(), vec![0.25, 0.5]);
    let summary: Summary = serde_json::from_slice(&std::fs::read(dir.path().join(SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(summary, report.summary());
}

#[test]
fn empty_report_writes_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&EvaluationReport::new(0), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(COHERENCE_CSV)).unwrap();
    assert_eq!(text, "method,candidate,atoms,max_int,max_jac\n");
    let rows: Vec<CoherenceRow> = read_csv(&dir.path().join(COHERENCE_CSV)).unwrap();
    assert!(rows.is_empty());
    assert_eq!(std::fs::read_to_string(dir.path().join(EMBEDDINGS_CSV)).unwrap(), "id\n");
}

#[test]
fn unwritable_destination_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(emit_report(&sample_report(), &blocker.join("eval")).is_err());
}

#[test]
fn mock_reconstructions_are_perfectly_stable() {
    let provider = Provider::mock();
    let combos = vec![vec!["graph neural networks".to_string(), "protein folding".to_string()]];
    let s = stability_eval(&combos, &provider, 3).unwrap();
    assert!((s[0] - 1.0).abs() < 1e-9);
    assert!(stability_eval(&combos, &provider, 1).is_err());
}
