use std::collections::HashMap;

use ideaforge::seqmodel::{AtomLm, LmConfig, SampleOptions, SeqModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;

use oracles::chi_square;

fn corpus(rng: &mut ChaCha8Rng, atoms: usize, n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=5);
            (0..len).map(|_| rng.random_range(0..atoms)).collect()
        })
        .collect()
}

/// Interpolated additive smoothing computed straight from raw n-gram counts.
fn oracle_prob(seqs: &[Vec<usize>], atoms: usize, cfg: &LmConfig, context: &[usize], token: usize) -> f64 {
    let bos = atoms;
    let eos = atoms + 1;
    let v = (atoms + 2) as f64;
    let order = cfg.order;
    let mut padded_ctx = vec![bos; order - 1];
    padded_ctx.extend_from_slice(context);
    let ctx = &padded_ctx[padded_ctx.len() - (order - 1)..];
    let mut p = 0.0;
    for (k, &w) in cfg.weights.iter().enumerate() {
        let hist = &ctx[ctx.len() - k..];
        let (mut total, mut hit) = (0usize, 0usize);
        for s in seqs {
            let mut toks = vec![bos; order - 1];
            toks.extend_from_slice(s);
            toks.push(eos);
            for i in order - 1..toks.len() {
                if &toks[i - k..i] == hist {
                    total += 1;
                    if toks[i] == token {
                        hit += 1;
                    }
                }
            }
        }
        p += w * (hit as f64 + cfg.alpha) / (total as f64 + cfg.alpha * v);
    }
    p
}

#[test]
fn probabilities_match_count_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let atoms = 6;
    let seqs = corpus(&mut rng, atoms, 30);
    let cfg = LmConfig::default();
    let lm = AtomLm::train(&seqs, atoms, cfg.clone()).unwrap();
    for _ in 0..200 {
        let len = rng.random_range(0..4);
        let ctx: Vec<usize> = (0..len).map(|_| rng.random_range(0..atoms)).collect();
        let dist = lm.next_dist(&ctx).unwrap();
        for tok in 0..atoms + 2 {
            let expect = oracle_prob(&seqs, atoms, &cfg, &ctx, tok);
            assert!((dist[tok] - expect).abs() < 1e-12);
            assert!((lm.prob(&ctx, tok).unwrap() - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn distributions_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let atoms = 25;
    let lm = AtomLm::train(&corpus(&mut rng, atoms, 200), atoms, LmConfig::default()).unwrap();
    for _ in 0..1000 {
        let len = rng.random_range(0..6);
        let ctx: Vec<usize> = (0..len).map(|_| rng.random_range(0..atoms + 2)).collect();
        let dist = lm.next_dist(&ctx).unwrap();
        assert_eq!(dist.len(), atoms + 2);
        assert!(dist.iter().all(|&p| p > 0.0));
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn single_training_sequence_example() {
    let lm = AtomLm::train(&[vec![0, 1]], 2, LmConfig::default()).unwrap();
    let v = 4.0;
    // Unigram counts: 0, 1, EOS over three positions; bigram (BOS) -> 0 once;
    // trigram (BOS, BOS) -> 0 once.
    let expect = 0.2 * (1.0 + 0.1) / (3.0 + 0.1 * v) + 0.3 * (1.0 + 0.1) / (1.0 + 0.1 * v) + 0.5 * (1.0 + 0.1) / (1.0 + 0.1 * v);
    assert!((lm.prob(&[], 0).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn zero_temperature_follows_the_argmax_path() {
    let seqs = vec![vec![2, 0, 1], vec![2, 0, 1], vec![2, 0, 3]];
    let lm = AtomLm::train(&seqs, 4, LmConfig::default()).unwrap();
    let opts = SampleOptions {
        temperature: 0.0,
        seed: 9,
        allow_repeats: false,
    };
    let draws = lm.sample(5, 3, opts).unwrap();
    assert!(draws.iter().all(|d| d == &vec![2, 0, 1]));
    // Greedy oracle: at each step, the highest-probability unused atom.
    let mut path = Vec::new();
    for _ in 0..3 {
        let dist = lm.next_dist(&path).unwrap();
        let best = (0..4).filter(|a| !path.contains(a)).max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a))).unwrap();
        path.push(best);
    }
    assert_eq!(path, vec![2, 0, 1]);
}

#[test]
fn zero_temperature_ties_resolve_to_lowest_id() {
    let lm = AtomLm::untrained(5, LmConfig::default()).unwrap();
    let w = lm.step_weights(&[], 0.0, &[0]).unwrap();
    assert_eq!(w, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn unit_temperature_draws_follow_the_model() {
    let seqs = vec![vec![0, 1], vec![0, 2], vec![3], vec![0, 1, 2]];
    let lm = AtomLm::train(&seqs, 4, LmConfig::default()).unwrap();
    let n = 20_000;
    let draws = lm
        .sample(
            n,
            1,
            SampleOptions {
                temperature: 1.0,
                seed: 4,
                allow_repeats: false,
            },
        )
        .unwrap();
    let mut obs = [0u64; 4];
    for d in &draws {
        obs[d[0]] += 1;
    }
    let dist = lm.next_dist(&[]).unwrap();
    let atom_mass: f64 = dist[..4].iter().sum();
    let expected: Vec<f64> = dist[..4].iter().map(|p| p / atom_mass * n as f64).collect();
    // 3 degrees of freedom; the 0.999 quantile is 16.27.
    assert!(chi_square(&obs, &expected) < 16.27);
}

#[test]
fn very_high_temperature_is_nearly_uniform() {
    let seqs = vec![vec![0, 0, 0, 0], vec![0, 1]];
    let lm = AtomLm::train(&seqs, 4, LmConfig::default()).unwrap();
    let w = lm.step_weights(&[], 1e6, &[]).unwrap();
    let total: f64 = w.iter().sum();
    for x in &w {
        assert!((x / total - 0.25).abs() < 1e-5);
    }
}

#[test]
fn nll_of_unseen_sequences_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let atoms = 12;
    let train = corpus(&mut rng, atoms, 50);
    let lm = AtomLm::train(&train, atoms, LmConfig::default()).unwrap();
    let untrained = AtomLm::untrained(atoms, LmConfig::default()).unwrap();
    let v = (atoms + 2) as f64;
    for seq in corpus(&mut rng, atoms, 50) {
        let s = untrained.score(&seq).unwrap();
        assert!((-s.score - v.ln()).abs() < 1e-12);
        assert!(lm.score(&seq).unwrap().score.is_finite());
    }
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

#[test]
fn more_smoothing_moves_toward_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let atoms = 8;
    let seqs = corpus(&mut rng, atoms, 40);
    let uniform = vec![1.0 / (atoms + 2) as f64; atoms + 2];
    let contexts: Vec<Vec<usize>> = (0..50)
        .map(|_| (0..rng.random_range(0..3)).map(|_| rng.random_range(0..atoms)).collect())
        .collect();
    for ctx in &contexts {
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let cfg = LmConfig {
                alpha,
                ..LmConfig::default()
            };
            let lm = AtomLm::train(&seqs, atoms, cfg).unwrap();
            let tv = total_variation(&lm.next_dist(ctx).unwrap(), &uniform);
            assert!(tv <= last + 1e-12, "alpha {alpha}: {tv} > {last}");
            last = tv;
        }
    }
}

/// Probability that the sampler emits `seq` at temperature 1 with repeats
/// masked: each step renormalizes over atoms not yet used.
fn sampling_prob(lm: &AtomLm, seq: &[usize]) -> f64 {
    let mut p = 1.0;
    for t in 0..seq.len() {
        let dist = lm.next_dist(&seq[..t]).unwrap();
        let allowed: f64 = (0..lm.atom_count()).filter(|a| !seq[..t].contains(a)).map(|a| dist[a]).sum();
        p *= dist[seq[t]] / allowed;
    }
    p
}

#[test]
fn sampling_frequencies_match_enumerated_sequence_probabilities() {
    let seqs = vec![vec![0, 1, 2], vec![1, 2], vec![3, 0], vec![0, 1]];
    let lm = AtomLm::train(&seqs, 4, LmConfig::default()).unwrap();
    let n = 50_000;
    let draws = lm
        .sample(
            n,
            2,
            SampleOptions {
                temperature: 1.0,
                seed: 21,
                allow_repeats: false,
            },
        )
        .unwrap();
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for d in draws {
        *counts.entry(d).or_default() += 1;
    }
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut total_p = 0.0;
    for a in 0..4 {
        for b in (0..4).filter(|&b| b != a) {
            let p = sampling_prob(&lm, &[a, b]);
            total_p += p;
            obs.push(counts.get(&vec![a, b]).copied().unwrap_or(0));
            exp.push(p * n as f64);
        }
    }
    assert!((total_p - 1.0).abs() < 1e-12);
    assert_eq!(counts.len(), 12);
    // 11 degrees of freedom; the 0.999 quantile is 31.26.
    assert!(chi_square(&obs, &exp) < 31.26);
    // The sampler and the scorer agree on which sequence is most likely.
    let best_sampled = counts.iter().max_by_key(|(_, &c)| c).unwrap().0.clone();
    let mut best_scored = (f64::NEG_INFINITY, vec![]);
    for a in 0..4 {
        for b in (0..4).filter(|&b| b != a) {
            let p = sampling_prob(&lm, &[a, b]);
            if p > best_scored.0 {
                best_scored = (p, vec![a, b]);
            }
        }
    }
    assert_eq!(best_sampled, best_scored.1);
}

#[test]
fn perplexity_prefers_in_domain_text() {
    let mut train = Vec::new();
    for _ in 0..30 {
        train.push(vec![0, 1, 2]);
        train.push(vec![3, 4, 5]);
    }
    let lm = AtomLm::train(&train, 8, LmConfig::default()).unwrap();
    let near = lm.perplexity(&[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
    let far = lm.perplexity(&[vec![6, 7, 6], vec![7, 6, 7]]).unwrap();
    assert!(near < far);
    assert!(near >= 1.0);
    assert!(matches!(lm.perplexity(&[vec![]]), Err(SeqModelError::EmptyHeldout)));
}

#[test]
fn samples_depend_only_on_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lm = AtomLm::train(&corpus(&mut rng, 10, 40), 10, LmConfig::default()).unwrap();
    let opts = SampleOptions {
        temperature: 1.0,
        seed: 77,
        allow_repeats: false,
    };
    let a = lm.sample(700, 3, opts).unwrap();
    let b = lm.sample(700, 3, opts).unwrap();
    assert_eq!(a, b);
    let other = lm.sample(700, 3, SampleOptions { seed: 78, ..opts }).unwrap();
    assert_ne!(a, other);
    assert!(a.iter().all(|s| s[0] != s[1] && s[1] != s[2] && s[0] != s[2]));
    let threads = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    assert_eq!(threads.install(|| lm.sample(700, 3, opts).unwrap()), a);
}

#[test]
fn model_round_trips_through_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lm = AtomLm::train(&corpus(&mut rng, 6, 20), 6, LmConfig::default()).unwrap();
    let json = serde_json::to_string(&lm).unwrap();
    let back: AtomLm = serde_json::from_str(&json).unwrap();
    for ctx in [vec![], vec![1], vec![2, 3]] {
        assert_eq!(lm.next_dist(&ctx).unwrap(), back.next_dist(&ctx).unwrap());
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let lm = AtomLm::untrained(3, LmConfig::default()).unwrap();
    assert!(lm.score(&[]).is_err());
    assert!(lm.score(&[3]).is_err());
    assert!(lm.next_dist(&[9]).is_err());
    let opts = SampleOptions {
        temperature: 1.0,
        seed: 0,
        allow_repeats: false,
    };
    assert!(lm.sample(1, 4, opts).is_err());
    assert!(lm.sample(1, 4, SampleOptions { allow_repeats: true, ..opts }).is_ok());
    assert!(lm.sample(1, 2, SampleOptions { temperature: -1.0, ..opts }).is_err());
    assert!(AtomLm::train(&[vec![5]], 3, LmConfig::default()).is_err());
    let bad = LmConfig {
        weights: vec![0.5, 0.6, 0.1],
        ..LmConfig::default()
    };
    assert!(AtomLm::untrained(3, bad).is_err());
}
