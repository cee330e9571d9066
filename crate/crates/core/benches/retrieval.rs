use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scisource::corpus::{Corpus, Document, Query};
use scisource::dense::{EmbeddingVector, VectorStore};
use scisource::exec::Execution;
use scisource::harness::{EmbeddingMode, Engine, RerankerMode, RunConfig};
use scisource::lexical::{Bm25Params, InvertedIndex, NormalizationConfig, Tokenizer};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn word(r: &mut ChaCha8Rng) -> String {
    let len = r.gen_range(3..9);
    (0..len).map(|_| r.gen_range(b'a'..=b'p') as char).collect()
}

fn corpus(n: usize, seed: u64) -> Corpus {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..2000).map(|_| word(&mut r)).collect();
    let docs = (0..n)
        .map(|i| {
            let pick = |r: &mut ChaCha8Rng, k: usize| -> String {
                (0..k).map(|_| vocab[r.gen_range(0..vocab.len())].as_str()).collect::<Vec<_>>().join(" ")
            };
            let title = pick(&mut r, 10);
            let abs = pick(&mut r, 150);
            Document::new(format!("doc{i:06}"), title, abs)
        })
        .collect();
    Corpus::new(docs).unwrap()
}

fn index_build(c: &mut Criterion) {
    let corpus = corpus(5000, 1);
    let tok = Tokenizer::Whitespace(NormalizationConfig::default());
    let mut g = c.benchmark_group("index_build");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, corpus.len()), |b| {
            b.iter(|| InvertedIndex::build(black_box(&corpus), &tok, Bm25Params::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn vector_scan(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let dim = 256;
    let rows = 50_000;
    let mut store = VectorStore::new(dim, "bench");
    let random = |r: &mut ChaCha8Rng| {
        let v: Vec<f32> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        EmbeddingVector::normalize(&v).unwrap()
    };
    for i in 0..rows {
        store.push_row(&format!("d{i}"), random(&mut r)).unwrap();
    }
    let q = random(&mut r);
    let mut g = c.benchmark_group("vector_search");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, rows), |b| b.iter(|| store.search(black_box(&q), 100, exec).unwrap()));
    }
    g.finish();
}

fn batch_pipeline(c: &mut Criterion) {
    let corpus = corpus(2000, 3);
    let queries: Vec<Query> = corpus
        .documents()
        .iter()
        .step_by(10)
        .map(|d| Query::new(format!("q-{}", d.doc_id), d.title.clone(), Some(d.doc_id.as_str())))
        .collect();
    let mut cfg = RunConfig::default();
    cfg.dense.provider = EmbeddingMode::Hash;
    cfg.fusion.reranker = RerankerMode::OverlapStub;
    cfg.lexical.vocab_size = 3000;
    let mut g = c.benchmark_group("batch_pipeline");
    g.sample_size(10);
    for (name, exec) in MODES {
        let engine = Engine::build(cfg.clone(), &corpus, exec).unwrap();
        g.bench_function(BenchmarkId::new(name, queries.len()), |b| {
            b.iter(|| engine.search(black_box(&queries)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, index_build, vector_scan, batch_pipeline);
criterion_main!(benches);
