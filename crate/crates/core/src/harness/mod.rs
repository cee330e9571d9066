//! Evaluation harness: configuration, metrics, the end-to-end pipeline,
//! ablation grids and run files.

pub mod ablation;
pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod submission;

pub use ablation::{default_grid, load_grid, parse_grid, render_ablation, render_report, run_ablation, AblationRow, GridRow};
pub use config::{
    merge_toml, AugmentConfig, DenseConfig, EmbeddingMode, EvalConfig, FusionConfig, FusionMode, GeneratorMode,
    LexicalConfig, RerankerMode, RunConfig, Stage, TokenizerKind,
};
pub use metrics::{gold_rank, mrr_at_k, reciprocal_rank_at_k, success_at_k};
pub use pipeline::{
    evaluate_results, run_pipeline, CandidateRecall, Engine, EngineParts, EvalReport, PerQuery, QueryResult, RunOutput,
    LEXICAL_INDEX_FILE, MERGES_FILE, VECTORS_FILE,
};
pub use submission::{format_predictions, render_submission, write_submission};
