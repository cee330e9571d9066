//! Lexical retrieval: normalization, BPE subwords, BM25 over an inverted index.

pub mod bpe;
pub mod index;
pub mod normalize;
pub mod tokenizer;

pub use bpe::{train_bpe, BpeVocab};
pub use index::{bm25_score, build_inverted_index, lexical_topk, Bm25Params, InvertedIndex};
pub use normalize::{normalize_text, HashtagPolicy, NormalizationConfig};
pub use tokenizer::{tokenize, Tokenizer};
