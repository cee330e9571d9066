use std::collections::{HashMap, HashSet};

use crate::candidate::{Candidate, Source};
use crate::error::{Error, Result};

fn check_unique(list: &[Candidate], source: Source) -> Result<()> {
    let mut seen = HashSet::with_capacity(list.len());
    for c in list {
        if c.hit(source).is_none() {
            return Err(Error::Config(format!(
                "candidate `{}` in the {source:?} list has no {source:?} rank",
                c.doc_id
            )));
        }
        if !seen.insert(c.doc_id.as_str()) {
            return Err(Error::DuplicateId {
                kind: "candidate",
                id: c.doc_id.clone(),
            });
        }
    }
    Ok(())
}

/// Union of the two branch outputs by document id.
///
/// A document retrieved by both branches yields a single candidate carrying
/// both hits. Output lists semantic hits in semantic rank order, followed by
/// lexical-only hits in lexical rank order.
pub fn merge_candidates(lexical: &[Candidate], semantic: &[Candidate]) -> Result<Vec<Candidate>> {
    check_unique(lexical, Source::Lexical)?;
    check_unique(semantic, Source::Semantic)?;
    let lex_by_id: HashMap<&str, &Candidate> =
        lexical.iter().map(|c| (c.doc_id.as_str(), c)).collect();
    let mut out = Vec::with_capacity(lexical.len() + semantic.len());
    let mut taken = HashSet::with_capacity(semantic.len());
    for s in semantic {
        out.push(Candidate {
            doc_id: s.doc_id.clone(),
            lexical: lex_by_id.get(s.doc_id.as_str()).and_then(|l| l.lexical),
            semantic: s.semantic,
        });
        taken.insert(s.doc_id.as_str());
    }
    for l in lexical {
        if !taken.contains(l.doc_id.as_str()) {
            out.push(Candidate {
                doc_id: l.doc_id.clone(),
                lexical: l.lexical,
                semantic: None,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branch(ids: &[&str], source: Source) -> Vec<Candidate> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| Candidate::from_branch(*id, source, i + 1, 1.0 / (i + 1) as f64))
            .collect()
    }

    #[test]
    fn overlapping_branches() {
        let m = merge_candidates(
            &branch(&["a", "b"], Source::Lexical),
            &branch(&["b", "c"], Source::Semantic),
        )
        .unwrap();
        assert_eq!(m.len(), 3);
        let get = |id: &str| m.iter().find(|c| c.doc_id == id).unwrap();
        assert_eq!(get("a").sources(), [Source::Lexical]);
        assert_eq!(get("a").lexical.unwrap().rank, 1);
        assert_eq!(get("b").sources(), [Source::Lexical, Source::Semantic]);
        assert_eq!(get("b").lexical.unwrap().rank, 2);
        assert_eq!(get("b").semantic.unwrap().rank, 1);
        assert_eq!(get("c").semantic.unwrap().rank, 2);
        let order: Vec<&str> = m.iter().map(|c| c.doc_id.as_str()).collect();
        assert_eq!(order, ["b", "c", "a"]);
    }

    #[test]
    fn disjoint_thirty_and_hundred() {
        let lex: Vec<String> = (0..30).map(|i| format!("l{i}")).collect();
        let sem: Vec<String> = (0..100).map(|i| format!("s{i}")).collect();
        let lex_refs: Vec<&str> = lex.iter().map(String::as_str).collect();
        let sem_refs: Vec<&str> = sem.iter().map(String::as_str).collect();
        let m = merge_candidates(
            &branch(&lex_refs, Source::Lexical),
            &branch(&sem_refs, Source::Semantic),
        )
        .unwrap();
        assert_eq!(m.len(), 130);
    }

    #[test]
    fn empty_lexical_branch() {
        let m = merge_candidates(&[], &branch(&["x"], Source::Semantic)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].doc_id, "x");
    }

    #[test]
    fn duplicate_within_branch_rejected() {
        let err = merge_candidates(&branch(&["a", "a"], Source::Lexical), &[]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { .. }));
    }
}
