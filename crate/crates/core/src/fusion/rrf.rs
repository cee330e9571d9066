use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::candidate::sort_by_score_then_id;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrfParams {
    pub rank_constant: f64,
    /// Only the first `window` entries of each list contribute.
    pub window: usize,
}

impl Default for RrfParams {
    fn default() -> Self {
        Self {
            rank_constant: 20.0,
            window: 100,
        }
    }
}

impl RrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rank_constant > 0.0 && self.rank_constant.is_finite()) {
            return Err(Error::Config(format!(
                "rank constant must be positive, got {}",
                self.rank_constant
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("RRF window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Reciprocal rank fusion: `score(d) = Σ 1 / (rank_constant + rank(d))` over the
/// lists containing `d` within their first `window` entries.
///
/// Each document's terms are summed in ascending rank order, so the result does
/// not depend on the order of `lists`. Output is sorted by score descending,
/// ties by id ascending.
pub fn rrf_fuse<S: AsRef<str>>(lists: &[Vec<S>], params: &RrfParams) -> Vec<(String, f64)> {
    let mut ranks: HashMap<&str, Vec<usize>> = HashMap::new();
    for list in lists {
        let mut seen = HashSet::new();
        for (i, id) in list.iter().take(params.window).enumerate() {
            let id = id.as_ref();
            if seen.insert(id) {
                ranks.entry(id).or_default().push(i + 1);
            }
        }
    }
    let mut fused: Vec<(String, f64)> = ranks
        .into_iter()
        .map(|(id, mut rs)| {
            rs.sort_unstable();
            let score = rs
                .iter()
                .map(|&r| 1.0 / (params.rank_constant + r as f64))
                .sum();
            (id.to_string(), score)
        })
        .collect();
    sort_by_score_then_id(&mut fused);
    fused
}
