//! Run file in the shared-task layout: `post_id<TAB>preds`, where preds is a
//! bracketed list of up to five doc ids in rank order.

use std::io::Write;
use std::path::Path;

use super::pipeline::QueryResult;
use crate::error::{Error, Result};

pub const MAX_PREDICTIONS: usize = 5;

pub fn format_predictions<S: AsRef<str>>(ids: &[S]) -> String {
    let quoted: Vec<String> = ids
        .iter()
        .take(MAX_PREDICTIONS)
        .map(|id| format!("'{}'", id.as_ref()))
        .collect();
    format!("[{}]", quoted.join(", "))
}

/// Render the whole file. Fails when there is nothing to write or a query
/// has no predictions.
pub fn render_submission(results: &[QueryResult]) -> Result<String> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut out = String::from("post_id\tpreds\n");
    for r in results {
        if r.ranked.is_empty() {
            return Err(Error::Query {
                id: r.query_id.clone(),
                source: Box::new(Error::EmptyResults),
            });
        }
        out.push_str(&r.query_id);
        out.push('\t');
        out.push_str(&format_predictions(&r.ids()));
        out.push('\n');
    }
    Ok(out)
}

/// Validates everything before the file is created.
pub fn write_submission(results: &[QueryResult], path: &Path) -> Result<()> {
    let body = render_submission(results)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}
