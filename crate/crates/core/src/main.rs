use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use riskradar::embedding::HashingEncoder;
use riskradar::matcher::{
    generate_labeled_corpus, match_risk, precision_at_k, report_rows, score_matrix, sweep_thresholds, write_jsonl,
    write_markdown, CorpusSpec, MatchReport, QueryMode,
};
use riskradar::newsfeed::{GkgSchema, SourceDescriptor, SourceKind};
use riskradar::pipeline::{serve, Pipeline, PipelineConfig, PipelineError, RecordStore, RunOptions, RunSummary};
use riskradar::riskgraph::ExportFormat;

#[derive(Parser)]
#[command(name = "riskradar", version, about = "Risk decomposition, risk graph and news matching")]
struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true, env = "RISKRADAR_CONFIG", default_value = "riskradar.toml")]
    config: PathBuf,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Append risks from a text (one sentence per line) or JSONL file.
    IngestRisks {
        #[arg(long)]
        file: PathBuf,
    },
    /// Decompose every stored risk.
    Extract,
    /// Knowledge graph commands.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// News commands.
    News {
        #[command(subcommand)]
        command: NewsCommand,
    },
    /// Match stored risks against stored news.
    Match(MatchArgs),
    /// Full pipeline: ingest, extract, graph, news, match.
    Run,
    /// Print the latest match report.
    Report {
        #[arg(long, value_enum, default_value = "jsonl")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read-only HTTP API over the latest run.
    Serve {
        /// Overrides serve.addr.
        #[arg(long)]
        addr: Option<String>,
    },
    /// Precision@k and a threshold sweep on a synthetic labeled corpus
    /// built from the stored risks.
    Eval {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        min_total: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.1,0.2,0.3,0.35,0.4,0.5")]
        thresholds: Vec<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Rebuild the graph from stored decompositions and export it.
    Export {
        #[arg(long, value_enum, default_value = "json")]
        format: GraphFormat,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum NewsCommand {
    /// Fetch one configured source or a local fixture file.
    Fetch(FetchArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "input")]
struct FetchInput {
    /// Name of a configured source.
    #[arg(long)]
    source: Option<String>,
    /// Local GKG or RSS/Atom file.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args)]
struct FetchArgs {
    #[command(flatten)]
    input: FetchInput,
    /// GKG column layout (TOML).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    max_bytes: Option<u64>,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    no_prefilter: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "full_text")]
    FullText,
    #[value(name = "trigger_only")]
    TriggerOnly,
    #[value(name = "trigger_plus_outcome")]
    TriggerPlusOutcome,
}

impl From<ModeArg> for QueryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FullText => QueryMode::FullText,
            ModeArg::TriggerOnly => QueryMode::TriggerOnly,
            ModeArg::TriggerPlusOutcome => QueryMode::TriggerPlusOutcome,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Jsonl,
    Md,
}

fn data(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), PipelineError> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(data),
    }
}

fn print_summary(summary: &RunSummary) {
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(summary).expect("summary serializes"));
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let config = PipelineConfig::load(&cli.config)?;
    match cli.command {
        Command::IngestRisks { file } => print_summary(&Pipeline::open(config)?.ingest_risks(&file)?),
        Command::Extract => print_summary(&Pipeline::open(config)?.extract()?),
        Command::Graph { command: GraphCommand::Export { format, out } } => {
            let mut pipeline = Pipeline::open(config)?;
            if pipeline.store().decompositions()?.is_empty() {
                return Err(data("no decompositions stored; run `riskradar extract` first"));
            }
            let (graph, _) = pipeline.build_graph()?;
            let format = match format {
                GraphFormat::Dot => ExportFormat::Dot,
                GraphFormat::Json => ExportFormat::Json,
            };
            emit(out.as_deref(), graph.export(format).as_bytes())?;
        }
        Command::News { command: NewsCommand::Fetch(args) } => {
            let mut desc = match (&args.input.source, &args.input.fixture) {
                (Some(name), _) => config
                    .source(name)
                    .cloned()
                    .ok_or_else(|| PipelineError::Usage(format!("no source named {name:?} in config")))?,
                (None, Some(path)) => {
                    let path = std::path::absolute(path).map_err(data)?;
                    SourceDescriptor::new("fixture", SourceKind::LocalFixture, path.to_string_lossy())
                }
                (None, None) => unreachable!("clap enforces one input"),
            };
            if let Some(n) = args.max_bytes {
                desc.max_bytes = n;
            }
            if let Some(n) = args.timeout_secs {
                desc.timeout_secs = n;
            }
            let mut pipeline = Pipeline::open(config)?;
            if let Some(path) = &args.schema {
                let text = std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
                pipeline.set_gkg_schema(GkgSchema::from_toml_str(&text).map_err(data)?);
            }
            print_summary(&pipeline.fetch_news(&[desc])?);
        }
        Command::Match(args) => {
            let mut matching = config.matching.clone();
            if let Some(m) = args.mode {
                matching.mode = m.into();
            }
            if let Some(t) = args.threshold {
                matching.threshold = t;
            }
            if let Some(k) = args.top_k {
                matching.top_k = k;
            }
            if args.no_prefilter {
                matching.keyword_prefilter = false;
            }
            matching.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
            let (_, summary) = Pipeline::open(config)?.match_news(&matching)?;
            print_summary(&summary);
        }
        Command::Run => print_summary(&Pipeline::open(config)?.run(&RunOptions::default())?),
        Command::Report { format, out } => {
            let store = RecordStore::open_existing(&config.store_dir())?;
            if store.read(riskradar::pipeline::store::MATCHES)?.is_none() {
                return Err(data("no match results stored; run `riskradar match` first"));
            }
            let report = MatchReport { risks: store.matches()? };
            let rows = report_rows(&report, &store.news()?);
            let mut buf = Vec::new();
            match format {
                ReportFormat::Jsonl => write_jsonl(&rows, &mut buf),
                ReportFormat::Md => write_markdown(&rows, &mut buf),
            }
            .map_err(data)?;
            emit(out.as_deref(), &buf)?;
        }
        Command::Serve { addr } => {
            let addr = addr.unwrap_or_else(|| config.serve.addr.clone());
            serve(config, &addr)?;
        }
        Command::Eval { seed, min_total, thresholds, mode } => {
            let mut pipeline = Pipeline::open(config.clone())?;
            pipeline.extract()?;
            let store = pipeline.store();
            let decompositions = store.decompositions()?;
            let entries: Vec<_> = store
                .risks()?
                .into_iter()
                .map(|record| {
                    let decomposition = decompositions.iter().find(|d| d.risk_id == record.id).cloned();
                    riskradar::matcher::RiskEntry { record, decomposition }
                })
                .filter(|e| e.decomposition.is_some())
                .collect();
            let spec = CorpusSpec { min_total, seed, ..Default::default() };
            let corpus = generate_labeled_corpus(&entries, pipeline.stopwords(), &spec)?;
            let encoder = HashingEncoder::new(config.encoder.clone())?;
            let mut matching = config.matching.clone();
            if let Some(m) = mode {
                matching.mode = m.into();
            }
            println!("synthetic labeled corpus: {} items (not comparable to real-news accuracy)", corpus.items.len());
            let ranking = riskradar::matcher::MatchConfig { threshold: -1.0, ..matching.clone() };
            for entry in &entries {
                let results = match_risk(entry, &corpus.items, &encoder, &ranking, pipeline.stopwords())?;
                let ids: Vec<String> = results.into_iter().map(|r| r.news_id).collect();
                let p = precision_at_k(&ids, &corpus.relevant[&entry.record.id], matching.top_k);
                println!("{}\tprecision@{}\t{p:.4}", entry.record.id, matching.top_k);
            }
            let scores = score_matrix(&entries, &corpus, &encoder, matching.mode)?;
            println!("threshold\taccuracy\tprecision\trecall");
            for row in sweep_thresholds(&entries, &corpus, &scores, &thresholds) {
                println!("{:.4}\t{:.4}\t{:.4}\t{:.4}", row.threshold, row.accuracy, row.precision, row.recall);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
