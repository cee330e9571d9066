mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{planted, serve};
use serde_json::{json, Value};
use scisource::augment::{hyde_document, ServiceGenerator, TemplateName, TextGenerator};
use scisource::corpus::{Corpus, Document};
use scisource::dense::{embed, EmbedItem, EmbeddingProvider, Role, ServiceEmbedder, VectorStore};
use scisource::exec::Execution;
use scisource::fusion::{rerank, PairScorer, ScoredDoc, ServiceReranker};
use scisource::harness::{run_pipeline, EmbeddingMode, RerankerMode, RunConfig};
use scisource::{Candidate, Error, ErrorClass, Source};

fn health() -> Value {
    json!({"status": "ok", "embed_model_fingerprint": "emb-1", "rerank_model_fingerprint": "rr-1", "query_instruction": "q: "})
}

/// Letter-count vectors over a-h, unit-normalized.
fn letter_vec(text: &str) -> Vec<f32> {
    let mut v = [0f32; 8];
    for c in text.chars() {
        if ('a'..='h').contains(&c) {
            v[c as usize - 'a' as usize] += 1.0;
        }
    }
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn texts(body: &Value) -> Vec<String> {
    body["texts"].as_array().unwrap().iter().map(|t| t.as_str().unwrap().to_string()).collect()
}

fn healthy(embed: impl Fn(&Value) -> Value + Send + Sync + 'static) -> String {
    serve(move |r| match (r.method.as_str(), r.path.as_str()) {
        ("GET", "/health") => (200, health()),
        ("POST", "/embed") => (200, embed(&r.body)),
        _ => (404, json!({"error": "no route"})),
    })
}

#[test]
fn embeds_in_batches_and_keeps_order() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let url = healthy(move |b| {
        seen.fetch_add(1, Ordering::SeqCst);
        assert_eq!(b["role"], "document");
        let v: Vec<Vec<f32>> = texts(b).iter().map(|t| letter_vec(t)).collect();
        json!({"vectors": v, "dim": 8, "model_fingerprint": "emb-1"})
    });
    let e = ServiceEmbedder::connect(&url, 8, 2).unwrap();
    assert_eq!(e.fingerprint(), "emb-1");
    let items = [
        EmbedItem { id: "1", text: "aaa" },
        EmbedItem { id: "2", text: "bbb" },
        EmbedItem { id: "3", text: "abab" },
    ];
    let vs = embed(&e, &items, Role::Document).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 2);
    assert_eq!(vs[0].as_slice()[0], 1.0);
    assert_eq!(vs[1].as_slice()[1], 1.0);
    let corpus = Corpus::new(vec![Document::new("x", "aa", ""), Document::new("y", "bb", "")]).unwrap();
    let store = VectorStore::build(&corpus, &e, Execution::Parallel, 1).unwrap();
    assert_eq!(store.provider_fingerprint(), "emb-1");
}

#[test]
fn dimension_mismatch_is_rejected() {
    let url = healthy(|b| {
        let v: Vec<Vec<f32>> = texts(b).iter().map(|t| letter_vec(t)).collect();
        json!({"vectors": v, "dim": 8, "model_fingerprint": "emb-1"})
    });
    let e = ServiceEmbedder::connect(&url, 16, 4).unwrap();
    let err = embed(&e, &[EmbedItem { id: "1", text: "abc" }], Role::Query).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 16, actual: 8 }), "{err}");

    let url = healthy(|b| {
        let v: Vec<Vec<f32>> = texts(b).iter().map(|t| letter_vec(t)[..4].to_vec()).collect();
        json!({"vectors": v, "model_fingerprint": "emb-1"})
    });
    let e = ServiceEmbedder::connect(&url, 8, 4).unwrap();
    let err = embed(&e, &[EmbedItem { id: "1", text: "abc" }], Role::Query).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }), "{err}");
}

#[test]
fn bad_vectors_and_fingerprint_drift_are_rejected() {
    let url = healthy(|b| {
        let v: Vec<Vec<f32>> = texts(b).iter().map(|_| vec![2.0; 8]).collect();
        json!({"vectors": v, "model_fingerprint": "emb-1"})
    });
    let e = ServiceEmbedder::connect(&url, 8, 4).unwrap();
    let err = embed(&e, &[EmbedItem { id: "x", text: "abc" }], Role::Query).unwrap_err();
    assert!(matches!(err, Error::BadNorm { ref id, .. } if id == "x"), "{err}");

    let url = healthy(|b| {
        let v: Vec<Vec<f32>> = texts(b).iter().map(|t| letter_vec(t)).collect();
        json!({"vectors": v, "model_fingerprint": "emb-2"})
    });
    let e = ServiceEmbedder::connect(&url, 8, 4).unwrap();
    let err = embed(&e, &[EmbedItem { id: "x", text: "abc" }], Role::Query).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Provider);
}

#[test]
fn health_must_name_checkpoints() {
    let url = serve(|_| (200, json!({"status": "ok"})));
    assert!(ServiceEmbedder::connect(&url, 8, 4).is_err());
    assert!(ServiceReranker::connect(&url, 4).is_err());
    let url = serve(|_| (503, json!({"error": "loading"})));
    let err = ServiceEmbedder::connect(&url, 8, 4).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Provider);
}

fn rerank_server(extra: usize) -> String {
    serve(move |r| match r.path.as_str() {
        "/health" => (200, health()),
        "/rerank" => {
            let q = r.body["query"].as_str().unwrap();
            let mut scores: Vec<f64> = r.body["candidates"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| {
                    let t = c["text"].as_str().unwrap();
                    q.split_whitespace().filter(|w| t.contains(w)).count() as f64
                })
                .collect();
            scores.extend(std::iter::repeat_n(0.0, extra));
            (200, json!({"scores": scores, "model_fingerprint": "rr-1"}))
        }
        _ => (404, json!({})),
    })
}

#[test]
fn rerank_scores_are_position_aligned() {
    let url = rerank_server(0);
    let s = ServiceReranker::connect(&url, 2).unwrap();
    let docs = [
        ScoredDoc { id: "a", text: "nothing here" },
        ScoredDoc { id: "b", text: "alpha beta" },
        ScoredDoc { id: "c", text: "alpha" },
    ];
    assert_eq!(s.score("alpha beta", &docs).unwrap(), vec![0.0, 2.0, 1.0]);

    let corpus = Corpus::new(vec![
        Document::new("a", "nothing", ""),
        Document::new("b", "alpha beta", ""),
        Document::new("c", "alpha", ""),
    ])
    .unwrap();
    let cands: Vec<Candidate> = ["c", "a", "b"]
        .iter()
        .enumerate()
        .map(|(i, id)| Candidate::from_branch(*id, Source::Lexical, i + 1, 1.0))
        .collect();
    let ranked = rerank(&s, "alpha beta", &cands, &corpus, 5).unwrap();
    let ids: Vec<&str> = ranked.iter().map(|(d, _)| d.as_str()).collect();
    assert_eq!(ids, ["b", "c", "a"]);
}

#[test]
fn rerank_count_mismatch_is_a_provider_error() {
    let url = rerank_server(1);
    let s = ServiceReranker::connect(&url, 8).unwrap();
    let docs = [ScoredDoc { id: "a", text: "x" }, ScoredDoc { id: "b", text: "y" }];
    let err = s.score("q", &docs).unwrap_err();
    assert!(matches!(err, Error::ScoreCount { expected: 2, actual: 3 }), "{err}");
    assert_eq!(err.class(), ErrorClass::Provider);
}

#[test]
fn generate_round_trip() {
    let url = serve(|r| {
        assert_eq!(r.path, "/generate");
        let name = r.body["template_name"].as_str().unwrap();
        let prompt = r.body["filled_prompt"].as_str().unwrap();
        assert_eq!(name, "hyde");
        assert!(prompt.contains("masks work"));
        (200, json!({"text": "Sure! {\"title\": \"Masks\", \"abstract\": \"They work.\"}"}))
    });
    let g = ServiceGenerator::new(&url).unwrap();
    let raw = g.generate(TemplateName::Hyde, &TemplateName::Hyde.fill_tweet("masks work")).unwrap();
    assert!(raw.contains("Masks"));
    let h = hyde_document(&g, "masks work").unwrap();
    assert_eq!(h.title, "Masks");
    assert_eq!(h.abstract_text, "They work.");

    let url = serve(|_| (500, json!({"error": "boom"})));
    let g = ServiceGenerator::new(&url).unwrap();
    let err = g.generate(TemplateName::Rewrite, "x").unwrap_err();
    assert_eq!(err.class(), ErrorClass::Provider);
}

#[test]
fn full_pipeline_through_service_endpoints() {
    let (corpus, queries) = planted(12, 4);
    let url = serve(|r| match r.path.as_str() {
        "/health" => (200, health()),
        "/embed" => {
            let v: Vec<Vec<f32>> = texts(&r.body).iter().map(|t| letter_vec(t)).collect();
            (200, json!({"vectors": v, "dim": 8, "model_fingerprint": "emb-1"}))
        }
        "/rerank" => {
            let q = r.body["query"].as_str().unwrap();
            let scores: Vec<f64> = r.body["candidates"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| {
                    let t = c["text"].as_str().unwrap();
                    q.split_whitespace().filter(|w| t.contains(w)).count() as f64
                })
                .collect();
            (200, json!({"scores": scores, "model_fingerprint": "rr-1"}))
        }
        _ => (404, json!({})),
    });
    let mut cfg = RunConfig::default();
    cfg.dense.provider = EmbeddingMode::Service;
    cfg.dense.endpoint = Some(url.clone());
    cfg.dense.dim = 8;
    cfg.fusion.reranker = RerankerMode::Service;
    cfg.fusion.rerank_endpoint = Some(url);
    let out = run_pipeline(&cfg, &corpus, &queries).unwrap();
    let report = out.report.unwrap();
    assert_eq!(report.mrr[&5], 1.0);
    assert_eq!(report.embedding_fingerprint.as_deref(), Some("emb-1"));
    assert_eq!(report.scorer_fingerprint.as_deref(), Some("rr-1"));
}
