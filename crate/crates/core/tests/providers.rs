use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ideaforge::atomizer::{Atom, AtomVocabulary};
use ideaforge::corpus::Paper;
use ideaforge::providers::{
    parse_judge_score, parse_numbered_list, shuffled_atom_order, ChatModel, ChatRequest, Completion, Embedder,
    EmbeddingVector, HashEmbedder, MockChat, OpenAiChat, OpenAiEmbedder, Provider, ProviderConfig, ProviderError,
    Task,
};
use ideaforge::transport::{HttpRequest, HttpResponse, HttpTransport, RetryPolicy, TransportError};

/// Replies with `statuses` in turn, then with `ok_body`.
struct Scripted {
    statuses: Vec<u16>,
    ok_body: String,
    calls: AtomicUsize,
}

impl Scripted {
    fn new(statuses: &[u16], ok_body: &str) -> Arc<Self> {
        Arc::new(Scripted {
            statuses: statuses.to_vec(),
            ok_body: ok_body.to_string(),
            calls: AtomicUsize::new(0),
        })
    }
}

impl HttpTransport for Scripted {
    fn send(&self, _request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match self.statuses.get(n) {
            Some(&status) => HttpResponse {
                status,
                body: "busy".into(),
            },
            None => HttpResponse::ok(self.ok_body.clone()),
        })
    }
}

const CHAT_OK: &str = r#"{"choices":[{"message":{"content":"score: 4\nrationale: close"}}]}"#;

fn live_provider(transport: Arc<Scripted>, retries: u32) -> Provider {
    let policy = RetryPolicy::immediate(retries);
    let chat = OpenAiChat::new(transport.clone(), "http://llm.test/v1", "m", Some("t".into()), policy);
    let embedder = OpenAiEmbedder::new(transport, "http://llm.test/v1", "e", Some("t".into()), policy);
    Provider::new(Arc::new(chat), Arc::new(embedder), ProviderConfig::default())
}

#[test]
fn rate_limits_are_retried_and_counted() {
    let transport = Scripted::new(&[429, 503], CHAT_OK);
    let provider = live_provider(transport.clone(), 3);
    let rating = provider.judge_reconstruction("a", "b").unwrap();
    assert_eq!(rating.score, 4);
    assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
    assert_eq!(provider.retries(), 2);
}

#[test]
fn retries_give_up_after_the_limit() {
    let transport = Scripted::new(&[429; 10], CHAT_OK);
    let provider = live_provider(transport.clone(), 2);
    let err = provider.judge_reconstruction("a", "b").unwrap_err();
    assert!(matches!(
        err,
        ProviderError::Transport(TransportError::RetriesExhausted { attempts: 3, .. })
    ));
    assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let transport = Scripted::new(&[401], CHAT_OK);
    let provider = live_provider(transport.clone(), 5);
    assert!(provider.judge_reconstruction("a", "b").is_err());
    assert_eq!(transport.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn live_endpoint_without_token_fails_up_front() {
    let cfg = ProviderConfig {
        endpoint: "http://llm.test/v1".into(),
        ..ProviderConfig::default()
    };
    assert!(matches!(
        Provider::from_config_with_token(&cfg, None),
        Err(ProviderError::MissingToken(_))
    ));
    assert!(Provider::from_config_with_token(&cfg, Some(String::new())).is_err());
    assert!(Provider::from_config_with_token(&cfg, Some("t".into())).is_ok());
}

#[test]
fn embeddings_are_unit_norm_and_deterministic() {
    let provider = Provider::mock();
    let texts: Vec<String> = (0..40).map(|i| format!("graph attention variant number {i} for molecules")).collect();
    let a = provider.embed_texts(&texts).unwrap();
    let b = provider.embed_texts(&texts).unwrap();
    assert_eq!(a, b);
    for e in &a {
        let norm: f64 = e.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    assert!(provider.embed_texts(&["  ".to_string()]).is_err());
}

#[test]
fn mock_embedder_places_shared_words_closer() {
    let provider = Provider::mock();
    let e = provider
        .embed_texts(&[
            "contrastive protein representation learning".into(),
            "protein representation learning with contrastive losses".into(),
            "tax policy in medieval economies".into(),
        ])
        .unwrap();
    assert!(e[0].cosine(&e[1]) > e[0].cosine(&e[2]));
}

#[test]
fn embedder_seed_changes_vectors() {
    let t = vec!["sparse attention".to_string()];
    assert_ne!(HashEmbedder::new(16, 1).embed(&t).unwrap(), HashEmbedder::new(16, 2).embed(&t).unwrap());
}

#[test]
fn mock_extraction_numbers_sentences() {
    let provider = Provider::mock();
    let units = provider
        .extract_units("We train a model. It uses sparse attention! Results improve?")
        .unwrap();
    assert_eq!(units, vec!["We train a model.", "It uses sparse attention!", "Results improve?"]);
}

#[test]
fn mock_compression_keeps_leading_sentences() {
    let body: String = (0..40).map(|i| format!("Sentence {i} here. ")).collect();
    let paper = Paper {
        id: "p".into(),
        title: "t".into(),
        venue: "v".into(),
        year: 2020,
        authors: vec!["A".into()],
        body: Some(body),
        blog: None,
    };
    let digest = Provider::mock().compress_paper(&paper).unwrap();
    assert!(digest.starts_with("Sentence 0 here."));
    assert!(!digest.contains("Sentence 39"));
}

#[test]
fn mock_judge_rewards_overlap() {
    let provider = Provider::mock();
    let blog = "diffusion models for protein design";
    assert_eq!(provider.judge_reconstruction(blog, blog).unwrap().score, 5);
    assert_eq!(provider.judge_reconstruction(blog, "auction theory").unwrap().score, 1);
}

fn vocabulary(n: usize) -> AtomVocabulary {
    AtomVocabulary {
        atoms: (0..n)
            .map(|id| Atom {
                id,
                canonical_text: format!("atom {id}"),
                member_unit_ids: vec![format!("u{id}")],
                centroid: EmbeddingVector::normalized(vec![1.0, id as f64]).unwrap(),
            })
            .collect(),
        noise_unit_ids: vec![],
    }
}

#[test]
fn llm_selection_replays_for_a_seed() {
    let provider = Provider::mock();
    let vocab = vocabulary(30);
    let a = provider.llm_select_atoms(&vocab, 3, 11).unwrap();
    assert_eq!(a, provider.llm_select_atoms(&vocab, 3, 11).unwrap());
    // The mock names the first atoms of the shuffled listing.
    assert_eq!(a, shuffled_atom_order(30, 11)[..3].to_vec());
    let mut order = shuffled_atom_order(30, 11);
    order.sort();
    assert_eq!(order, (0..30).collect::<Vec<_>>());
    assert!(provider.llm_select_atoms(&vocab, 31, 0).is_err());
}

/// Answers every selection with a fixed list.
struct Fixed(&'static str);

impl ChatModel for Fixed {
    fn complete(&self, _request: &ChatRequest) -> Result<Completion, ProviderError> {
        Ok(Completion {
            text: self.0.to_string(),
            retries: 0,
        })
    }
}

fn fixed(text: &'static str) -> Provider {
    Provider::new(Arc::new(Fixed(text)), Arc::new(HashEmbedder::new(8, 0)), ProviderConfig::default())
}

#[test]
fn llm_selection_rejects_bad_answers() {
    let vocab = vocabulary(5);
    assert!(matches!(
        fixed("1. [2] atom 2\n2. [9] nope\n").llm_select_atoms(&vocab, 2, 0),
        Err(ProviderError::UnknownAtoms(_))
    ));
    assert!(matches!(
        fixed("1. [2]\n2. [2]\n").llm_select_atoms(&vocab, 2, 0),
        Err(ProviderError::TooFewAtoms { wanted: 2, got: 1 })
    ));
    assert_eq!(fixed("1. [4]\n2. [1]\n3. [0]").llm_select_atoms(&vocab, 2, 0).unwrap(), vec![4, 1]);
    assert!(matches!(fixed("   ").judge_reconstruction("a", "b"), Err(ProviderError::EmptyCompletion(Task::Judge))));
}

#[test]
fn list_and_score_parsing() {
    assert_eq!(
        parse_numbered_list("Intro\n1. first\ncontinued\n2) second\n3.\n").unwrap(),
        vec!["first continued", "second"]
    );
    assert!(parse_numbered_list("no list here").is_err());
    assert_eq!(parse_judge_score("Score: 3\nrationale").unwrap(), 3);
    assert_eq!(parse_judge_score("the score = 5").unwrap(), 5);
    assert!(parse_judge_score("score: 7").is_err());
    assert!(parse_judge_score("great").is_err());
}

#[test]
fn perturbed_mock_varies_repeated_reconstructions() {
    let chat = MockChat::with_perturbation(3);
    let req = ChatRequest {
        task: Task::Reconstruct,
        messages: vec![],
        temperature: 0.7,
        inputs: vec!["sparse attention".into(), "protein folding".into()],
    };
    let a = chat.complete(&req).unwrap().text;
    let b = chat.complete(&req).unwrap().text;
    assert_ne!(a, b);
    let plain = MockChat::new();
    assert_eq!(plain.complete(&req).unwrap().text, plain.complete(&req).unwrap().text);
}
