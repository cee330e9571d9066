mod common;

use std::collections::BTreeSet;

use common::{brute_rrf, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use scisource::corpus::{Corpus, Document};
use scisource::fusion::{merge_candidates, rerank, rrf_fuse, PairScorer, RrfParams, ScoredDoc};
use scisource::{Candidate, Result, Source};

fn branch(ids: &[String], source: Source) -> Vec<Candidate> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| Candidate::from_branch(id.clone(), source, i + 1, 1.0 / (i + 1) as f64))
        .collect()
}

fn distinct_ids(pool: usize, len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::sample::subsequence((0..pool).collect::<Vec<_>>(), 0..=len.min(pool))
        .prop_shuffle()
        .prop_map(|v| v.into_iter().map(|i| format!("d{i:03}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn merge_is_union_with_provenance(lex in distinct_ids(200, 30), sem in distinct_ids(200, 100)) {
        let merged = merge_candidates(&branch(&lex, Source::Lexical), &branch(&sem, Source::Semantic)).unwrap();
        let ids: BTreeSet<&str> = merged.iter().map(|c| c.doc_id.as_str()).collect();
        prop_assert_eq!(ids.len(), merged.len());
        let want: BTreeSet<&str> = lex.iter().chain(&sem).map(String::as_str).collect();
        prop_assert_eq!(&ids, &want);
        prop_assert!(merged.len() <= 130);
        for c in &merged {
            prop_assert_eq!(c.lexical.is_some(), lex.contains(&c.doc_id));
            prop_assert_eq!(c.semantic.is_some(), sem.contains(&c.doc_id));
            if let Some(h) = c.lexical {
                prop_assert_eq!(&lex[h.rank - 1], &c.doc_id);
            }
            if let Some(h) = c.semantic {
                prop_assert_eq!(&sem[h.rank - 1], &c.doc_id);
            }
        }
    }

    #[test]
    fn rrf_ignores_list_order(a in distinct_ids(40, 20), b in distinct_ids(40, 20), c in distinct_ids(40, 20)) {
        let p = RrfParams::default();
        let x = rrf_fuse(&[a.clone(), b.clone(), c.clone()], &p);
        let y = rrf_fuse(&[c, a, b], &p);
        prop_assert_eq!(x, y);
    }

    #[test]
    fn rrf_matches_oracle(
        a in distinct_ids(60, 40),
        b in distinct_ids(60, 40),
        kappa in 0.5f64..100.0,
        window in 1usize..50,
    ) {
        let p = RrfParams { rank_constant: kappa, window };
        let got = rrf_fuse(&[a.clone(), b.clone()], &p);
        let want = brute_rrf(&[a, b], kappa, window);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(&g.0, &w.0);
            prop_assert!((g.1 - w.1).abs() <= 1e-12);
        }
    }
}

#[test]
fn union_recall_dominates_each_branch() {
    let mut r = rng(21);
    let pool: Vec<String> = (0..300).map(|i| format!("d{i:03}")).collect();
    let (mut lex_hits, mut sem_hits, mut merged_hits) = (0, 0, 0);
    for _ in 0..500 {
        let lex: Vec<String> = pool.choose_multiple(&mut r, 30).cloned().collect();
        let sem: Vec<String> = pool.choose_multiple(&mut r, 100).cloned().collect();
        let gold = &pool[r.gen_range(0..pool.len())];
        let merged = merge_candidates(&branch(&lex, Source::Lexical), &branch(&sem, Source::Semantic)).unwrap();
        let in_l = lex.contains(gold);
        let in_s = sem.contains(gold);
        let in_m = merged.iter().any(|c| &c.doc_id == gold);
        assert_eq!(in_m, in_l || in_s);
        lex_hits += in_l as usize;
        sem_hits += in_s as usize;
        merged_hits += in_m as usize;
    }
    assert!(merged_hits >= lex_hits.max(sem_hits));
}

struct LengthScorer;

impl PairScorer for LengthScorer {
    fn fingerprint(&self) -> String {
        "length".into()
    }

    fn score(&self, query: &str, docs: &[ScoredDoc<'_>]) -> Result<Vec<f64>> {
        Ok(docs.iter().map(|d| -((d.text.len() as f64) - query.len() as f64).abs()).collect())
    }
}

#[test]
fn rerank_is_order_independent_and_complete() {
    let mut r = rng(2);
    let docs: Vec<Document> = (0..40)
        .map(|i| Document::new(format!("d{i:02}"), "t".repeat(r.gen_range(1..20)), "x".repeat(r.gen_range(0..20))))
        .collect();
    let corpus = Corpus::new(docs).unwrap();
    for _ in 0..50 {
        let ids: Vec<String> = corpus.documents().choose_multiple(&mut r, 25).map(|d| d.doc_id.clone()).collect();
        let mut cands = branch(&ids, Source::Semantic);
        let a = rerank(&LengthScorer, "query of len", &cands, &corpus, 5).unwrap();
        cands.shuffle(&mut r);
        let b = rerank(&LengthScorer, "query of len", &cands, &corpus, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let all = rerank(&LengthScorer, "query of len", &cands, &corpus, 100).unwrap();
        assert_eq!(all.len(), 25);
        assert_eq!(&all[..5], &a[..]);
        assert!(all.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
    }
}

#[test]
fn rerank_rejects_unknown_candidates() {
    let corpus = Corpus::new(vec![Document::new("a", "x", "")]).unwrap();
    let cands = branch(&["zz".to_string()], Source::Lexical);
    assert!(rerank(&LengthScorer, "q", &cands, &corpus, 5).is_err());
}
