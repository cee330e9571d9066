//! Byte-pair-encoding subword vocabulary trained on the corpus.
//!
//! Base symbols are Unicode scalar values; words are whitespace-delimited and
//! carry no end-of-word marker, so a merged prefix such as `low` is shared by
//! `low` and `lower`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;

const MERGES_HEADER: &str = "#bpe-merges v1";

#[derive(Debug, Clone)]
pub struct BpeVocab {
    merges: Vec<(String, String)>,
    alphabet_size: usize,
    vocab_size: usize,
    trained_on: String,
    symbol_ids: HashMap<String, u32>,
    symbol_names: Vec<String>,
    /// (left, right) -> (rank, merged symbol id)
    merge_table: HashMap<(u32, u32), (u32, u32)>,
}

impl PartialEq for BpeVocab {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges
            && self.alphabet_size == other.alphabet_size
            && self.vocab_size == other.vocab_size
            && self.trained_on == other.trained_on
    }
}

impl Eq for BpeVocab {}

impl BpeVocab {
    fn from_parts(
        merges: Vec<(String, String)>,
        alphabet_size: usize,
        vocab_size: usize,
        trained_on: String,
    ) -> Self {
        let mut symbol_ids: HashMap<String, u32> = HashMap::new();
        let mut intern = |s: &str| -> u32 {
            let next = symbol_ids.len() as u32;
            *symbol_ids.entry(s.to_string()).or_insert(next)
        };
        let mut merge_table = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let li = intern(l);
            let ri = intern(r);
            let mi = intern(&format!("{l}{r}"));
            merge_table.entry((li, ri)).or_insert((rank as u32, mi));
        }
        let mut symbol_names = vec![String::new(); symbol_ids.len()];
        for (s, &id) in &symbol_ids {
            symbol_names[id as usize] = s.clone();
        }
        Self {
            merges,
            alphabet_size,
            vocab_size,
            trained_on,
            symbol_ids,
            symbol_names,
            merge_table,
        }
    }

    /// Merge rules in training order.
    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Number of distinct symbols (base characters plus merged symbols).
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Fingerprint of the texts the vocabulary was trained on.
    pub fn trained_on(&self) -> &str {
        &self.trained_on
    }

    /// Fingerprint of the merge rules themselves.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new();
        fp.u64(self.alphabet_size as u64).u64(self.vocab_size as u64);
        for (l, r) in &self.merges {
            fp.str(l).str(r);
        }
        fp.finish()
    }

    /// Split one whitespace-free word into subword symbols.
    ///
    /// Repeatedly merges the adjacent pair with the lowest training rank, which
    /// replays the training merges in order. Characters never seen in training
    /// stay as single-character symbols.
    pub fn encode_word(&self, word: &str) -> Vec<String> {
        let mut local: Vec<String> = Vec::new();
        let base = self.symbol_ids.len() as u32;
        let mut syms: Vec<u32> = word
            .chars()
            .map(|c| {
                let mut buf = [0u8; 4];
                let s: &str = c.encode_utf8(&mut buf);
                match self.symbol_ids.get(s) {
                    Some(&id) => id,
                    None => {
                        local.push(s.to_string());
                        base + local.len() as u32 - 1
                    }
                }
            })
            .collect();
        while syms.len() > 1 {
            let best = syms
                .windows(2)
                .filter_map(|w| self.merge_table.get(&(w[0], w[1])).map(|&(rank, m)| (rank, w[0], w[1], m)))
                .min_by_key(|&(rank, ..)| rank);
            let Some((_, l, r, merged)) = best else { break };
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(syms[i]);
                    i += 1;
                }
            }
            syms = out;
        }
        syms.into_iter()
            .map(|id| {
                if id < base {
                    self.symbol_names[id as usize].clone()
                } else {
                    local[(id - base) as usize].clone()
                }
            })
            .collect()
    }

    /// Plain-text merges file: a header line, then one `left right` pair per
    /// line in training order.
    pub fn write_merges<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{MERGES_HEADER} alphabet={} vocab={} trained_on={}",
            self.alphabet_size, self.vocab_size, self.trained_on
        )?;
        for (l, r) in &self.merges {
            writeln!(out, "{l} {r}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_merges(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_merges(std::io::BufReader::new(f), path)
    }

    pub fn read_merges<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty merges file".into()))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let rest = header
            .strip_prefix(MERGES_HEADER)
            .ok_or_else(|| bad(1, format!("expected `{MERGES_HEADER}` header")))?;
        let mut fields = HashMap::new();
        for kv in rest.split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                fields.insert(k, v);
            }
        }
        let num = |k: &str| -> Result<usize> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(1, format!("header field `{k}` missing or invalid")))
        };
        let alphabet_size = num("alphabet")?;
        let vocab_size = num("vocab")?;
        let trained_on = fields.get("trained_on").copied().unwrap_or_default().to_string();
        let mut merges = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => return Err(bad(i + 1, format!("expected `left right`, got {line:?}"))),
            }
        }
        Ok(Self::from_parts(merges, alphabet_size, vocab_size, trained_on))
    }
}

#[derive(PartialEq, Eq)]
struct HeapEntry {
    count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: (u32, u32),
}

impl Ord for HeapEntry {
    // Highest count first; among equal counts the lexicographically smallest pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Train a BPE vocabulary on already-normalized texts.
///
/// Greedily merges the most frequent adjacent pair (ties: smallest pair in
/// lexicographic order) until `vocab_size` distinct symbols exist or no pair
/// occurs at least twice.
pub fn train_bpe<S: AsRef<str>>(texts: &[S], vocab_size: usize) -> Result<BpeVocab> {
    if texts.is_empty() {
        return Err(Error::Config("cannot train BPE on an empty text list".into()));
    }
    let mut fp = Fingerprinter::new();
    let mut word_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in texts {
        let t = t.as_ref();
        fp.str(t);
        for w in t.split_whitespace() {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let alphabet: BTreeSet<char> = word_counts.keys().flat_map(|w| w.chars()).collect();
    if vocab_size <= alphabet.len() {
        return Err(Error::VocabTooSmall {
            vocab_size,
            alphabet: alphabet.len(),
        });
    }

    let mut names: Vec<Rc<str>> = alphabet.iter().map(|c| Rc::from(c.to_string())).collect();
    let mut ids: HashMap<Rc<str>, u32> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    let mut distinct = names.len();

    let counts: Vec<u64> = word_counts.values().copied().collect();
    let mut words: Vec<Vec<u32>> = word_counts
        .keys()
        .map(|w| {
            w.chars()
                .map(|c| ids[c.to_string().as_str()])
                .collect()
        })
        .collect();

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (wi, w) in words.iter().enumerate() {
        for p in w.windows(2) {
            let pair = (p[0], p[1]);
            *pair_counts.entry(pair).or_default() += counts[wi];
            pair_words.entry(pair).or_default().push(wi);
        }
    }
    let entry = |names: &[Rc<str>], pair: (u32, u32), count: u64| HeapEntry {
        count,
        left: names[pair.0 as usize].clone(),
        right: names[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<HeapEntry> = pair_counts
        .iter()
        .map(|(&pair, &count)| entry(&names, pair, count))
        .collect();

    let mut merges = Vec::new();
    while distinct < vocab_size {
        let Some(top) = heap.pop() else { break };
        if pair_counts.get(&top.pair).copied().unwrap_or(0) != top.count {
            continue;
        }
        if top.count < 2 {
            break;
        }
        let (l, r) = top.pair;
        let merged_name: Rc<str> = Rc::from(format!("{}{}", top.left, top.right));
        let merged = match ids.get(&merged_name) {
            Some(&id) => id,
            None => {
                let id = names.len() as u32;
                names.push(merged_name.clone());
                ids.insert(merged_name, id);
                distinct += 1;
                id
            }
        };
        merges.push((top.left.to_string(), top.right.to_string()));

        let mut affected = pair_words.remove(&top.pair).unwrap_or_default();
        affected.sort_unstable();
        affected.dedup();
        let mut touched: BTreeSet<(u32, u32)> = BTreeSet::new();
        for wi in affected {
            let w = &words[wi];
            if !w.windows(2).any(|p| p[0] == l && p[1] == r) {
                continue;
            }
            let c = counts[wi];
            for p in w.windows(2) {
                let pair = (p[0], p[1]);
                *pair_counts.get_mut(&pair).unwrap() -= c;
                touched.insert(pair);
            }
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(w[i]);
                    i += 1;
                }
            }
            for p in out.windows(2) {
                let pair = (p[0], p[1]);
                *pair_counts.entry(pair).or_default() += c;
                pair_words.entry(pair).or_default().push(wi);
                touched.insert(pair);
            }
            words[wi] = out;
        }
        for pair in touched {
            match pair_counts.get(&pair).copied() {
                Some(0) => {
                    pair_counts.remove(&pair);
                }
                Some(count) => heap.push(entry(&names, pair, count)),
                None => {}
            }
        }
    }

    Ok(BpeVocab::from_parts(merges, alphabet.len(), distinct, fp.finish()))
}
