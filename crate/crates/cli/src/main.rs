use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use polyrank_core::analysis::Analyzer;
use polyrank_core::corpus::{parse_qrels, parse_topics, parse_trec_docs, CollectionConfig, Language, TopicField};
use polyrank_core::embeddings::{load_embedding_table, mock_embeddings};
use polyrank_core::eval::{compare_reports, evaluate, parse_metrics, Metric};
use polyrank_core::harness::{run_experiment, train_from_spec, ExperimentSpec};
use polyrank_core::index::Index;
use polyrank_core::neural::{read_checkpoint, rerank, write_checkpoint};
use polyrank_core::retrieval::{read_run, rm3_expand, search, write_run, RetrievalConfig, RunList, Scorer, WeightedQuery};

const SNAPSHOT: &str = "index.bin";

#[derive(Parser)]
#[command(name = "polyrank", version, about = "Multilingual ad-hoc retrieval and zero-shot neural reranking")]
struct Cli {
    /// Append a `command<TAB>message` line per error cause to this file.
    #[arg(long, global = true)]
    error_log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Bm25,
    Ql,
    Sdm,
    Rm3,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index snapshot from TREC SGML documents.
    Index {
        #[arg(long, required = true, num_args = 1..)]
        docs: Vec<PathBuf>,
        #[arg(long)]
        lang: Option<Language>,
        /// Collection config (language, content tags, encoding).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve a TREC run for a topic file.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value = "title")]
        field: TopicField,
        #[arg(long, value_enum, default_value = "bm25")]
        model: Model,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        /// TOML file with [bm25], [ql], [sdm] and [rm3] tables.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        tag: Option<String>,
        /// Run file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the training phase of an experiment spec and save the model.
    Train {
        #[arg(long)]
        spec: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-epoch log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Rerank the head of a run with a trained checkpoint.
    Rerank {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value = "title")]
        field: TopicField,
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// EMB1 table; mock vectors are generated when omitted.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        mock_dim: usize,
        #[arg(long, default_value_t = 0)]
        mock_seed: u64,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a run against qrels.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "map,p@20,ndcg@20,judged@20")]
        metrics: String,
        /// Print per-query rows before the summary.
        #[arg(long)]
        per_query: bool,
        /// Paired t-test of `--run` against this run.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Run an experiment spec and write its report directory.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write deterministic mock embeddings for an index vocabulary.
    MockEmbed {
        #[arg(long, conflicts_with = "vocab")]
        index: Option<PathBuf>,
        /// One term per line.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Index { .. } => "index",
            Command::Search { .. } => "search",
            Command::Train { .. } => "train",
            Command::Rerank { .. } => "rerank",
            Command::Evaluate { .. } => "evaluate",
            Command::Experiment { .. } => "experiment",
            Command::MockEmbed { .. } => "mock-embed",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = cli.command.name();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(path) = &cli.error_log {
                if let Err(e) = append_error_log(path, name, &err) {
                    eprintln!("error: could not write error log {}: {e}", path.display());
                }
            }
            ExitCode::FAILURE
        }
    }
}

fn append_error_log(path: &Path, command: &str, err: &anyhow::Error) -> io::Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    for cause in err.chain() {
        let msg = cause.to_string().replace(['\t', '\n'], " ");
        writeln!(f, "{command}\t{msg}")?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Index { docs, lang, config, out } => cmd_index(&docs, lang, config.as_deref(), &out),
        Command::Search {
            index,
            topics,
            field,
            model,
            k,
            params,
            tag,
            out,
        } => cmd_search(&index, &topics, field, model, k, params.as_deref(), tag, out.as_deref()),
        Command::Train { spec, out, log } => cmd_train(&spec, &out, log.as_deref()),
        Command::Rerank {
            index,
            topics,
            field,
            run,
            checkpoint,
            embeddings,
            mock_dim,
            mock_seed,
            k,
            out,
        } => {
            let index = load_index(&index)?;
            let queries = load_queries(&topics, field, &index)?;
            let model = read_checkpoint(BufReader::new(open(&checkpoint)?))
                .with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
            let table = match embeddings {
                Some(p) => load_embedding_table(&p).with_context(|| format!("reading embeddings {}", p.display()))?,
                None => {
                    let mut vocab: BTreeSet<&str> = index.vocabulary().iter().map(String::as_str).collect();
                    vocab.extend(queries.iter().flat_map(|(_, t)| t.iter().map(String::as_str)));
                    mock_embeddings(&vocab.into_iter().collect::<Vec<_>>(), mock_dim, mock_seed)?
                }
            };
            let runs = read_run(BufReader::new(open(&run)?)).with_context(|| format!("reading run {}", run.display()))?;
            let empty = Vec::new();
            let reranked: Vec<RunList> = runs
                .iter()
                .map(|r| {
                    let terms = queries.iter().find(|(q, _)| *q == r.qid).map_or(&empty, |(_, t)| t);
                    rerank(&model, r, terms, &index, &table, k)
                })
                .collect();
            emit_runs(&reranked, out.as_deref())
        }
        Command::Evaluate {
            run,
            qrels,
            metrics,
            per_query,
            baseline,
        } => cmd_evaluate(&run, &qrels, &metrics, per_query, baseline.as_deref()),
        Command::Experiment { spec, out } => {
            let spec = ExperimentSpec::load(&spec)?;
            let report = run_experiment(&spec)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            report.write_to(&out)?;
            let mut stdout = io::stdout().lock();
            for sys in &report.systems {
                if let Some(v) = sys.metrics.mean(Metric::NdcgAt(20)) {
                    writeln!(stdout, "{}\tndcg@20\t{v:.4}", sys.name)?;
                }
            }
            Ok(())
        }
        Command::MockEmbed {
            index,
            vocab,
            dim,
            seed,
            out,
        } => {
            let terms: Vec<String> = match (index, vocab) {
                (Some(ix), _) => load_index(&ix)?.vocabulary().to_vec(),
                (None, Some(v)) => read_text(&v)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect(),
                (None, None) => bail!("give --index or --vocab"),
            };
            let table = mock_embeddings(&terms, dim, seed)?;
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            table.write_emb1(BufWriter::new(f))?;
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn snapshot_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(SNAPSHOT)
    } else {
        path.to_path_buf()
    }
}

fn load_index(path: &Path) -> Result<Index> {
    let p = snapshot_path(path);
    Index::read_snapshot(BufReader::new(open(&p)?)).with_context(|| format!("reading index {}", p.display()))
}

fn load_queries(path: &Path, field: TopicField, index: &Index) -> Result<Vec<(String, Vec<String>)>> {
    let analyzer = Analyzer::for_language(index.language());
    let parsed = parse_topics(BufReader::new(open(path)?), field, index.language())
        .with_context(|| format!("parsing topics {}", path.display()))?;
    for e in &parsed.errors {
        log::warn!("{}: byte {}: {}", path.display(), e.location, e.message);
    }
    Ok(parsed
        .records
        .topics
        .iter()
        .map(|t| (t.qid.clone(), analyzer.terms(t.text(field))))
        .collect())
}

fn emit_runs(runs: &[RunList], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(f);
            write_run(runs, &mut w)?;
            w.flush()?;
        }
        None => write_run(runs, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_index(docs: &[PathBuf], lang: Option<Language>, config: Option<&Path>, out: &Path) -> Result<()> {
    let config = match (config, lang) {
        (Some(p), lang) => {
            let cfg = CollectionConfig::parse(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
            if lang.is_some_and(|l| l != cfg.language) {
                bail!("--lang disagrees with the language in {}", p.display());
            }
            cfg
        }
        (None, Some(l)) => CollectionConfig::new(l),
        (None, None) => bail!("give --lang or --config"),
    };
    let mut all = Vec::new();
    for p in docs {
        let parsed = parse_trec_docs(BufReader::new(open(p)?), &config.content_tags, config.language)
            .with_context(|| format!("parsing {}", p.display()))?;
        for e in &parsed.errors {
            log::warn!("{}: byte {}: {}", p.display(), e.location, e.message);
        }
        all.extend(parsed.records);
    }
    let index = Index::build(&all, &Analyzer::for_language(config.language))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let p = out.join(SNAPSHOT);
    let mut w = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
    index.write_snapshot(&mut w)?;
    w.flush()?;
    eprintln!("indexed {} documents, {} terms", index.num_docs(), index.num_terms());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    index: &Path,
    topics: &Path,
    field: TopicField,
    model: Model,
    k: usize,
    params: Option<&Path>,
    tag: Option<String>,
    out: Option<&Path>,
) -> Result<()> {
    if k == 0 {
        bail!("--k must be at least 1");
    }
    let cfg = match params {
        Some(p) => RetrievalConfig::from_toml(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => RetrievalConfig::default(),
    };
    let index = load_index(index)?;
    let queries = load_queries(topics, field, &index)?;
    let runs: Vec<RunList> = queries
        .iter()
        .map(|(qid, terms)| {
            let q = WeightedQuery::raw(terms.iter().cloned());
            let mut run = match model {
                Model::Bm25 => search(&index, qid, &q, k, Scorer::Bm25(cfg.bm25)),
                Model::Ql => search(&index, qid, &q, k, Scorer::Ql(cfg.ql)),
                Model::Sdm => search(&index, qid, &q, k, Scorer::Sdm(cfg.sdm)),
                Model::Rm3 => {
                    let mut r = search(&index, qid, &rm3_expand(&index, &q, cfg.rm3, cfg.bm25), k, Scorer::Bm25(cfg.bm25));
                    r.tag = "rm3".into();
                    r
                }
            };
            if let Some(t) = &tag {
                run.tag = t.clone();
            }
            run
        })
        .collect();
    emit_runs(&runs, out)
}

fn cmd_train(spec: &Path, out: &Path, log: Option<&Path>) -> Result<()> {
    let spec = ExperimentSpec::load(spec)?;
    let outcome = train_from_spec(&spec)?;
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_checkpoint(&outcome.model, &mut w)?;
    w.flush()?;
    let mut text = String::from("epoch\tloss\tval_ndcg@20\n");
    for r in &outcome.log {
        text.push_str(&format!("{r}\n"));
    }
    match log {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => eprint!("{text}"),
    }
    eprintln!("best epoch {}", outcome.best_epoch);
    Ok(())
}

fn cmd_evaluate(run: &Path, qrels: &Path, metrics: &str, per_query: bool, baseline: Option<&Path>) -> Result<()> {
    let metrics = parse_metrics(metrics)?;
    let parsed = parse_qrels(BufReader::new(open(qrels)?)).with_context(|| format!("parsing {}", qrels.display()))?;
    if !parsed.errors.is_empty() {
        for e in &parsed.errors {
            eprintln!("{}: line {}: {}", qrels.display(), e.location, e.message);
        }
        bail!("{} malformed qrels line(s) in {}", parsed.errors.len(), qrels.display());
    }
    let read = |p: &Path| -> Result<Vec<RunList>> {
        read_run(BufReader::new(open(p)?)).with_context(|| format!("reading run {}", p.display()))
    };
    let report = evaluate(&read(run)?, &parsed.records, &metrics);
    let mut stdout = io::stdout().lock();
    if per_query {
        report.write_tsv(&mut stdout)?;
    } else {
        report.write_summary(&mut stdout)?;
    }
    if let Some(b) = baseline {
        let base = evaluate(&read(b)?, &parsed.records, &metrics);
        for &m in &metrics {
            let t = compare_reports(&report, &base, m)?;
            writeln!(stdout, "ttest\t{m}\tt={:.4}\tp={:.4}\tn={}", t.t, t.p, t.n)?;
        }
    }
    Ok(())
}
