//! Rank metrics for single-gold queries.
//!
//! "Success@k" is the fraction of queries whose gold document appears in the
//! top k; with one gold per query it is what retrieval tables usually call
//! Precision@k.

use crate::error::{Error, Result};

/// 1-based position of `gold` in `ranked`.
pub fn gold_rank<S: AsRef<str>>(ranked: &[S], gold: &str) -> Option<usize> {
    ranked.iter().position(|d| d.as_ref() == gold).map(|i| i + 1)
}

/// `1 / r` when the gold sits at position `r <= k`, else 0.
pub fn reciprocal_rank_at_k<S: AsRef<str>>(ranked: &[S], gold: &str, k: usize) -> f64 {
    match gold_rank(ranked, gold) {
        Some(r) if r <= k => 1.0 / r as f64,
        _ => 0.0,
    }
}

fn golds_present<G: AsRef<str>>(golds: &[Option<G>]) -> Result<Vec<&str>> {
    golds
        .iter()
        .map(|g| g.as_ref().map(AsRef::as_ref).ok_or(Error::MissingGold))
        .collect()
}

fn check_lengths(results: usize, golds: usize) -> Result<()> {
    if results != golds {
        return Err(Error::Config(format!(
            "{results} result lists for {golds} gold ids"
        )));
    }
    Ok(())
}

pub fn mrr_at_k<S: AsRef<str>, G: AsRef<str>>(results: &[Vec<S>], golds: &[Option<G>], k: usize) -> Result<f64> {
    check_lengths(results.len(), golds.len())?;
    let golds = golds_present(golds)?;
    if results.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = results
        .iter()
        .zip(&golds)
        .map(|(r, g)| reciprocal_rank_at_k(r, g, k))
        .sum();
    Ok(total / results.len() as f64)
}

pub fn success_at_k<S: AsRef<str>, G: AsRef<str>>(
    results: &[Vec<S>],
    golds: &[Option<G>],
    k: usize,
) -> Result<f64> {
    check_lengths(results.len(), golds.len())?;
    let golds = golds_present(golds)?;
    if results.is_empty() {
        return Ok(0.0);
    }
    let hits = results
        .iter()
        .zip(&golds)
        .filter(|(r, g)| matches!(gold_rank(r, g), Some(rank) if rank <= k))
        .count();
    Ok(hits as f64 / results.len() as f64)
}
