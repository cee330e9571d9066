#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use scisource::corpus::{Corpus, Document, Query, QuerySet};

pub const FILLER: [&str; 16] = [
    "virus", "vaccine", "mask", "protein", "lung", "cell", "immune", "trial", "mouse", "model", "dose", "risk",
    "child", "school", "air", "ward",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn unique_word(rng: &mut ChaCha8Rng, taken: &mut BTreeSet<String>) -> String {
    loop {
        let len = rng.gen_range(6..10);
        let w: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
        if !FILLER.contains(&w.as_str()) && taken.insert(w.clone()) {
            return w;
        }
    }
}

/// `n` documents whose titles are three words found nowhere else, plus one
/// query per document quoting its title verbatim (with a link appended).
pub fn planted(n: usize, seed: u64) -> (Corpus, QuerySet) {
    let mut r = rng(seed);
    let mut taken = BTreeSet::new();
    let mut docs = Vec::new();
    let mut queries = Vec::new();
    for i in 0..n {
        let title: Vec<String> = (0..3).map(|_| unique_word(&mut r, &mut taken)).collect();
        let mut body: Vec<String> = FILLER.choose_multiple(&mut r, 8).map(|s| s.to_string()).collect();
        body.extend(title.iter().cloned());
        body.shuffle(&mut r);
        let id = format!("doc{i:03}");
        docs.push(Document::new(id.clone(), title.join(" "), body.join(" ")));
        queries.push(Query::new(
            format!("q{i:03}"),
            format!("{} https://t.co/{i}", title.join(" ")),
            Some(id.as_str()),
        ));
    }
    (Corpus::new(docs).unwrap(), QuerySet::new(queries).unwrap())
}

/// Random corpus of short whitespace-separated documents over a small vocabulary.
pub fn random_token_corpus(r: &mut ChaCha8Rng, max_docs: usize, max_tokens: usize, vocab: usize) -> Vec<Vec<String>> {
    let n = r.gen_range(1..=max_docs);
    (0..n)
        .map(|_| {
            let len = r.gen_range(1..=max_tokens);
            (0..len).map(|_| format!("t{}", r.gen_range(0..vocab))).collect()
        })
        .collect()
}

pub fn corpus_of(docs: &[Vec<String>]) -> Corpus {
    Corpus::new(
        docs.iter()
            .enumerate()
            .map(|(i, toks)| Document::new(format!("d{i:02}"), toks.join(" "), ""))
            .collect(),
    )
    .unwrap()
}

/// Okapi BM25 scored document by document straight from the token lists.
pub fn brute_bm25(docs: &[Vec<String>], ids: &[String], query: &[String], k1: f64, b: f64, k: usize) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let df = |t: &str| docs.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64;
    let mut scored = Vec::new();
    for (d, id) in docs.iter().zip(ids) {
        let mut s = 0.0;
        let mut matched = false;
        for t in query {
            let f = d.iter().filter(|x| *x == t).count() as f64;
            if f == 0.0 {
                continue;
            }
            matched = true;
            let dfv = df(t);
            let idf = (1.0 + (n - dfv + 0.5) / (dfv + 0.5)).ln();
            s += idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * d.len() as f64 / avgdl));
        }
        if matched {
            scored.push((id.clone(), s));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Reciprocal rank fusion summed list by list, ranks from 1, each list cut to `window`.
pub fn brute_rrf(lists: &[Vec<String>], kappa: f64, window: usize) -> Vec<(String, f64)> {
    let mut contrib: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for l in lists {
        for (i, d) in l.iter().take(window).enumerate() {
            contrib.entry(d.clone()).or_default().push(i + 1);
        }
    }
    let mut out: Vec<(String, f64)> = contrib
        .into_iter()
        .map(|(d, mut ranks)| {
            ranks.sort_unstable();
            (d, ranks.iter().map(|&r| 1.0 / (kappa + r as f64)).sum())
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// The merge loop as usually written down: recount every adjacent pair each
/// round, take the most frequent (ties to the smallest pair), rewrite all words.
pub fn textbook_bpe(texts: &[String], vocab_size: usize) -> Vec<(String, String)> {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for t in texts {
        for w in t.split_whitespace() {
            *freq.entry(w).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = freq
        .iter()
        .map(|(w, &c)| (w.chars().map(String::from).collect(), c))
        .collect();
    let mut symbols: BTreeSet<String> = words.iter().flat_map(|(w, _)| w.iter().cloned()).collect();
    let mut merges = Vec::new();
    while symbols.len() < vocab_size {
        let mut pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (w, c) in &words {
            for p in w.windows(2) {
                *pairs.entry((p[0].clone(), p[1].clone())).or_default() += c;
            }
        }
        let Some(best) = pairs.iter().map(|(p, c)| (*c, p)).max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        else {
            break;
        };
        if best.0 < 2 {
            break;
        }
        let (l, r) = best.1.clone();
        let joined = format!("{l}{r}");
        for (w, _) in words.iter_mut() {
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(joined.clone());
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
        symbols.insert(joined);
        merges.push((l, r));
    }
    merges
}

/// Apply merges by rank to one word, lowest rank first.
pub fn textbook_encode(word: &str, merges: &[(String, String)]) -> Vec<String> {
    let rank: HashMap<(&str, &str), usize> = merges
        .iter()
        .enumerate()
        .map(|(i, (l, r))| ((l.as_str(), r.as_str()), i))
        .collect();
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    loop {
        let best = syms
            .windows(2)
            .filter_map(|p| rank.get(&(p[0].as_str(), p[1].as_str())).map(|&r| (r, p[0].clone(), p[1].clone())))
            .min();
        let Some((_, l, r)) = best else { return syms };
        let mut out = Vec::new();
        let mut i = 0;
        while i < syms.len() {
            if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                out.push(format!("{l}{r}"));
                i += 2;
            } else {
                out.push(syms[i].clone());
                i += 1;
            }
        }
        syms = out;
    }
}

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: serde_json::Value,
}

type Handler = dyn Fn(&Request) -> (u16, serde_json::Value) + Send + Sync;

/// Minimal HTTP/1.1 server on a random local port; one request per connection.
pub fn serve(handler: impl Fn(&Request) -> (u16, serde_json::Value) + Send + Sync + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handler: Arc<Handler> = Arc::new(handler);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = handler.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() {
                    return;
                }
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or_default().to_string();
                let path = parts.next().unwrap_or_default().to_string();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0u8; len];
                reader.read_exact(&mut body).unwrap();
                let body = if body.is_empty() {
                    serde_json::Value::Null
                } else {
                    serde_json::from_slice(&body).unwrap()
                };
                let (status, resp) = handler(&Request { method, path, body });
                let resp = resp.to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{resp}",
                    resp.len()
                );
            });
        }
    });
    format!("http://{addr}")
}
