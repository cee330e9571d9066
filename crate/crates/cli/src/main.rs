use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use scisource::augment::{
    augment_corpus, expand_query, hyde_document, input_hash, rewrite_query, QueryAugmentation, TemplateName,
};
use scisource::dense::VectorStore;
use scisource::harness::pipeline::{build_tokenizer, embedding_provider, text_generator};
use scisource::harness::{
    default_grid, load_grid, render_ablation, render_report, run_ablation, write_submission, EmbeddingMode,
    Engine, FusionMode, RerankerMode, RunConfig, Stage, TokenizerKind, LEXICAL_INDEX_FILE, MERGES_FILE,
    VECTORS_FILE,
};
use scisource::lexical::{BpeVocab, InvertedIndex, Tokenizer};
use scisource::{load_corpus, load_queries, Corpus, Error, ErrorClass, Execution, Format, QuerySet};

#[derive(Parser)]
#[command(name = "scisource", version, about = "Find the scientific paper a social-media post refers to")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and save an index
    Index {
        #[command(subcommand)]
        kind: IndexKind,
    },
    /// Retrieve for every query and print results as JSON lines
    Search {
        #[command(flatten)]
        run: RunArgs,
        /// Write results here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Retrieve and score against gold ids
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate a grid of configurations
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Grid file; defaults to the standard five-row table
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run one augmentation operation and print its outputs as JSON lines
    Augment {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: AugmentMode,
        /// Print filled prompts and their input hashes instead of generating
        #[arg(long)]
        prompts: bool,
    },
    /// Write a run file (`post_id<TAB>preds`)
    Submit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum IndexKind {
    /// BPE merges and the BM25 index
    Lexical {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Document embeddings
    Dense {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentMode {
    Rewrite,
    Expand,
    Hyde,
    Ad,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Lexical,
    Semantic,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Rerank,
    Rrf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Service,
    File,
    Hash,
}

#[derive(Clone, Copy, ValueEnum)]
enum RerankerArg {
    Service,
    OverlapStub,
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerArg {
    Whitespace,
    Bpe,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Tsv,
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Input format; guessed from the extension otherwise
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// TOML run config; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `index`
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, value_enum)]
    stage: Option<StageArg>,
    #[arg(long, value_enum)]
    fusion: Option<FusionArg>,
    #[arg(long)]
    lex_k: Option<usize>,
    #[arg(long)]
    sem_k: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    rrf_constant: Option<f64>,
    #[arg(long)]
    rrf_window: Option<usize>,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Model server base URL for embedding, re-ranking and generation
    /// (falls back to the config file, then $SCISOURCE_MODEL_SERVER)
    #[arg(long)]
    endpoint: Option<String>,
    /// Precomputed embedding files (file provider)
    #[arg(long)]
    vectors: Vec<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    reranker: Option<RerankerArg>,
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerArg>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Skip text normalization in the lexical branch
    #[arg(long)]
    no_preprocess: bool,
    /// Canned generation fixture (JSONL of input_hash, text)
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Run single-threaded
    #[arg(long)]
    sequential: bool,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.stage {
            cfg.stage = match s {
                StageArg::Lexical => Stage::Lexical,
                StageArg::Semantic => Stage::Semantic,
                StageArg::Full => Stage::Full,
            };
        }
        if let Some(f) = self.fusion {
            cfg.fusion.mode = match f {
                FusionArg::Rerank => FusionMode::Rerank,
                FusionArg::Rrf => FusionMode::Rrf,
            };
        }
        if let Some(v) = self.lex_k {
            cfg.lexical.k = v;
        }
        if let Some(v) = self.sem_k {
            cfg.dense.k = v;
        }
        if let Some(v) = self.top_n {
            cfg.fusion.top_n = v;
        }
        if let Some(v) = self.rrf_constant {
            cfg.fusion.rrf_constant = v;
        }
        if let Some(v) = self.rrf_window {
            cfg.fusion.rrf_window = v;
        }
        if let Some(p) = self.provider {
            cfg.dense.provider = match p {
                ProviderArg::Service => EmbeddingMode::Service,
                ProviderArg::File => EmbeddingMode::File,
                ProviderArg::Hash => EmbeddingMode::Hash,
            };
        }
        if let Some(e) = &self.endpoint {
            cfg.dense.endpoint = Some(e.clone());
            cfg.fusion.rerank_endpoint = Some(e.clone());
            cfg.augment.endpoint = Some(e.clone());
        }
        if !self.vectors.is_empty() {
            cfg.dense.vectors = self.vectors.clone();
        }
        if let Some(v) = self.dim {
            cfg.dense.dim = v;
        }
        if let Some(r) = self.reranker {
            cfg.fusion.reranker = match r {
                RerankerArg::Service => RerankerMode::Service,
                RerankerArg::OverlapStub => RerankerMode::OverlapStub,
            };
        }
        if let Some(t) = self.tokenizer {
            cfg.lexical.tokenizer = match t {
                TokenizerArg::Whitespace => TokenizerKind::Whitespace,
                TokenizerArg::Bpe => TokenizerKind::Bpe,
            };
        }
        if let Some(v) = self.vocab_size {
            cfg.lexical.vocab_size = v;
        }
        if let Some(v) = self.k1 {
            cfg.lexical.k1 = v;
        }
        if let Some(v) = self.b {
            cfg.lexical.b = v;
        }
        if self.no_preprocess {
            cfg.lexical.preprocess = false;
        }
        if let Some(f) = &self.fixture {
            cfg.augment.fixture = Some(f.clone());
            cfg.augment.generator = scisource::harness::GeneratorMode::Canned;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::available()
        }
    }

    fn format_for(&self, path: &Path) -> Format {
        match self.format {
            Some(FormatArg::Jsonl) => Format::Jsonl,
            Some(FormatArg::Tsv) => Format::Tsv,
            None => Format::from_path(path),
        }
    }

    fn corpus(&self) -> Result<Corpus, Error> {
        let path = self.corpus.as_deref().ok_or_else(|| usage("--corpus is required"))?;
        let corpus = load_corpus(path, self.format_for(path))?;
        eprintln!("loaded {} documents from {}", corpus.len(), path.display());
        Ok(corpus)
    }

    fn queries(&self) -> Result<QuerySet, Error> {
        let path = self.queries.as_deref().ok_or_else(|| usage("--queries is required"))?;
        let queries = load_queries(path, self.format_for(path))?;
        eprintln!(
            "loaded {} queries from {}{}",
            queries.len(),
            path.display(),
            if queries.has_gold { " (with gold ids)" } else { "" }
        );
        Ok(queries)
    }

    fn engine<'c>(&self, cfg: RunConfig, corpus: &'c Corpus) -> Result<Engine<'c>, Error> {
        match &self.index {
            Some(dir) => Engine::from_index_dir(cfg, corpus, dir, self.exec()),
            None => Engine::build(cfg, corpus, self.exec()),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: serde_json::Value) -> Result<(), Error> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn stdout_lines(lines: impl IntoIterator<Item = serde_json::Value>) -> Result<(), Error> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in lines {
        match writeln!(out, "{line}") {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(Error::io("<stdout>", e)),
        }
    }
    Ok(())
}

fn stdout_text(text: &str) -> Result<(), Error> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_or_train_tokenizer(cfg: &RunConfig, corpus: &Corpus, dir: &Path) -> Result<Tokenizer, Error> {
    let merges = dir.join(MERGES_FILE);
    if cfg.lexical.tokenizer == TokenizerKind::Bpe && merges.exists() {
        return Ok(Tokenizer::bpe(BpeVocab::load(&merges)?, cfg.effective_normalization()));
    }
    build_tokenizer(cfg, corpus)
}

fn index(kind: IndexKind) -> Result<(), Error> {
    match kind {
        IndexKind::Lexical { run, out } => {
            let cfg = run.config()?;
            let corpus = run.corpus()?;
            create_dir(&out)?;
            let tokenizer = build_tokenizer(&cfg, &corpus)?;
            if let Some(vocab) = tokenizer.vocab() {
                vocab.save(&out.join(MERGES_FILE))?;
                eprintln!("wrote {} merges", vocab.merges().len());
            }
            let idx = InvertedIndex::build(&corpus, &tokenizer, cfg.lexical.bm25(), run.exec())?;
            idx.save(&out.join(LEXICAL_INDEX_FILE))?;
            eprintln!("indexed {} documents, {} terms", idx.num_docs(), idx.num_terms());
        }
        IndexKind::Dense { run, out } => {
            let cfg = run.config()?;
            let corpus = run.corpus()?;
            create_dir(&out)?;
            let tokenizer = load_or_train_tokenizer(&cfg, &corpus, &out)?;
            let provider = embedding_provider(&cfg, &tokenizer)?;
            let store = VectorStore::build(&corpus, provider.as_ref(), run.exec(), cfg.dense.batch_size)?;
            store.save(&out.join(VECTORS_FILE))?;
            eprintln!(
                "embedded {} documents (dim {}, provider {})",
                store.num_docs(),
                store.dim(),
                store.provider_fingerprint()
            );
        }
    }
    Ok(())
}

fn search(run: RunArgs, output: Option<PathBuf>) -> Result<(), Error> {
    let cfg = run.config()?;
    let corpus = run.corpus()?;
    let queries = run.queries()?;
    let engine = run.engine(cfg, &corpus)?;
    let results = engine.search(&queries.queries)?;
    eprintln!("retrieved for {} queries", results.len());
    let lines = results.iter().map(|r| json!({"post_id": r.query_id, "results": r.ranked}));
    match output {
        Some(path) => {
            let mut w = create(&path)?;
            for line in lines {
                writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))
        }
        None => stdout_lines(lines),
    }
}

fn evaluate(run: RunArgs, json_out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = run.config()?;
    let corpus = run.corpus()?;
    let queries = run.queries()?;
    if !queries.has_gold {
        return Err(Error::MissingGold);
    }
    let engine = run.engine(cfg, &corpus)?;
    let report = engine.run(&queries)?.report.expect("gold ids present");
    stdout_text(&render_report(&report))?;
    if let Some(path) = json_out {
        write_json(&path, json!(report))?;
    }
    Ok(())
}

fn ablate(run: RunArgs, grid: Option<PathBuf>, json_out: Option<PathBuf>) -> Result<(), Error> {
    let rows = match &grid {
        Some(p) => load_grid(p)?,
        None => default_grid(&run.config()?)?,
    };
    let corpus = run.corpus()?;
    let queries = run.queries()?;
    let table = run_ablation(&rows, &corpus, &queries, run.exec())?;
    stdout_text(&render_ablation(&table))?;
    if let Some(path) = json_out {
        write_json(&path, json!(table))?;
    }
    Ok(())
}

fn augment(run: RunArgs, mode: AugmentMode, prompts: bool) -> Result<(), Error> {
    let mut cfg = run.config()?;
    if prompts {
        let lines: Vec<serde_json::Value> = match mode {
            AugmentMode::Ad => {
                let corpus = run.corpus()?;
                corpus
                    .documents()
                    .iter()
                    .flat_map(|d| {
                        [TemplateName::DocSummary, TemplateName::DocTweet].map(|t| {
                            let filled = t.fill_document(&d.title, &d.abstract_text);
                            json!({"id": d.doc_id, "template_name": t.as_str(), "input_hash": input_hash(t, &filled), "filled_prompt": filled})
                        })
                    })
                    .collect()
            }
            _ => {
                let t = match mode {
                    AugmentMode::Rewrite => TemplateName::Rewrite,
                    AugmentMode::Expand => TemplateName::Expand,
                    _ => TemplateName::Hyde,
                };
                run.queries()?
                    .queries
                    .iter()
                    .map(|q| {
                        let filled = t.fill_tweet(&q.text);
                        json!({"id": q.query_id, "template_name": t.as_str(), "input_hash": input_hash(t, &filled), "filled_prompt": filled})
                    })
                    .collect()
            }
        };
        return stdout_lines(lines);
    }
    match mode {
        AugmentMode::Rewrite => cfg.augment.query = QueryAugmentation::Rewrite,
        AugmentMode::Expand => cfg.augment.query = QueryAugmentation::Expand,
        AugmentMode::Hyde => cfg.augment.hyde = true,
        AugmentMode::Ad => cfg.augment.ad = true,
    }
    cfg.validate()?;
    let gen = text_generator(&cfg)?;
    let exec = run.exec();
    let lines: Vec<serde_json::Value> = match mode {
        AugmentMode::Ad => {
            let corpus = run.corpus()?;
            exec.try_map(corpus.documents(), |d| {
                let v = augment_corpus(gen.as_ref(), d)?;
                Ok::<_, Error>(json!({"cord_uid": v.doc_id, "summary": v.summary, "synthetic_tweet": v.synthetic_tweet}))
            })?
        }
        _ => {
            let queries = run.queries()?;
            exec.try_map(&queries.queries, |q| {
                let r = match mode {
                    AugmentMode::Rewrite => rewrite_query(gen.as_ref(), &q.text),
                    AugmentMode::Expand => expand_query(gen.as_ref(), &q.text),
                    _ => hyde_document(gen.as_ref(), &q.text).map(|h| h.text()),
                };
                r.map(|text| json!({"post_id": q.query_id, "text": text}))
                    .map_err(|e| Error::Query {
                        id: q.query_id.clone(),
                        source: Box::new(e),
                    })
            })?
        }
    };
    eprintln!("generated {} outputs", lines.len());
    stdout_lines(lines)
}

fn submit(run: RunArgs, output: PathBuf) -> Result<(), Error> {
    let cfg = run.config()?;
    let corpus = run.corpus()?;
    let queries = run.queries()?;
    let engine = run.engine(cfg, &corpus)?;
    let results = engine.search(&queries.queries)?;
    write_submission(&results, &output)?;
    eprintln!("wrote {} predictions to {}", results.len(), output.display());
    Ok(())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Provider => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Index { kind } => index(kind),
        Command::Search { run, output } => search(run, output),
        Command::Evaluate { run, json } => evaluate(run, json),
        Command::Ablate { run, grid, json } => ablate(run, grid, json),
        Command::Augment { run, mode, prompts } => augment(run, mode, prompts),
        Command::Submit { run, output } => submit(run, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
