use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, PipelineConfig};
use super::store::{self, RecordStore, RunLock, StoreError};
use crate::embedding::{EmbedError, EmbeddingCache, EmbeddingProvider, HashingEncoder, RemoteProvider};
use crate::extraction::{
    parse_risk_repository, Confidence, ExtractError, ExtractionLexicon, Extractor, LexiconExtractor,
};
use crate::matcher::{self, match_all, MatchConfig, MatchError, MatchReport, RiskEntry};
use crate::newsfeed::{
    fetch_source, parse_feed, parse_gkg, FetchError, GkgSchema, HostLimiter, NewsItem, ParseError, SourceDescriptor,
    SourceKind, Stopwords,
};
use crate::riskgraph::{GraphError, KnowledgeGraph};

const EMBEDDER_META: &str = "embedder_digest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Extract,
    Graph,
    News,
    Match,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Graph => "graph",
            Stage::News => "news",
            Stage::Match => "match",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    #[error("run stopped after stage {0}")]
    Aborted(Stage),
}

impl PipelineError {
    /// 1 usage, 2 data, 3 network.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Config(ConfigError::Read { .. }) => 1,
            PipelineError::Fetch(FetchError::Network { .. })
            | PipelineError::Embed(EmbedError::Transport(_))
            | PipelineError::Match(MatchError::Embed(EmbedError::Transport(_))) => 3,
            _ => 2,
        }
    }
}

/// Counts and timings of one command or run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovered_stage: Option<String>,
    pub risks_ingested: usize,
    pub risk_duplicates: usize,
    pub risks: usize,
    pub decomposed_full: usize,
    pub decomposed_partial: usize,
    pub decomposed_trigger_only: usize,
    pub extraction_failures: usize,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    /// Input lines (GKG) or entries (feeds) seen across sources.
    pub news_lines: usize,
    pub news_parsed: usize,
    pub parse_errors: usize,
    pub news_new: usize,
    pub news_total: usize,
    pub source_failures: usize,
    pub candidates: usize,
    pub embeddings_computed: usize,
    pub matches_emitted: usize,
    pub match_errors: usize,
    pub stage_ms: BTreeMap<String, u64>,
}

/// Test hook: stop after a stage as if the process had died, leaving the
/// partial-run marker behind.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub stop_after: Option<Stage>,
}

/// Items and errors parsed from one source payload.
pub struct SourceParse {
    pub items: Vec<NewsItem>,
    pub errors: Vec<ParseError>,
    pub units: usize,
}

fn looks_like_xml(bytes: &[u8]) -> bool {
    let body = bytes.strip_prefix(b"\xef\xbb\xbf").unwrap_or(bytes);
    body.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'<')
}

/// Parse a fetched payload. Local fixtures are sniffed: XML goes to the feed
/// parser, everything else to the GKG parser.
pub fn parse_payload(kind: SourceKind, bytes: &[u8], schema: &GkgSchema) -> SourceParse {
    let as_feed = match kind {
        SourceKind::RssUrl => true,
        SourceKind::GdeltFile => false,
        SourceKind::LocalFixture => looks_like_xml(bytes),
    };
    if as_feed {
        let (items, errors) = parse_feed(&String::from_utf8_lossy(bytes));
        let units = items.len() + errors.len();
        SourceParse { items, errors, units }
    } else {
        let parsed = parse_gkg(bytes, schema);
        SourceParse { units: parsed.lines, items: parsed.items, errors: parsed.errors }
    }
}

/// An open store with its writer lock, plus the resources the stages share.
pub struct Pipeline {
    config: PipelineConfig,
    store: RecordStore,
    lexicon: ExtractionLexicon,
    stopwords: Stopwords,
    gkg_schema: GkgSchema,
    in_run: bool,
    _lock: RunLock,
}

impl Pipeline {
    pub fn open(config: PipelineConfig) -> Result<Self, PipelineError> {
        let store = RecordStore::open(&config.store_dir())?;
        let lock = store.lock()?;
        let lexicon = match &config.paths.lexicon {
            Some(p) => ExtractionLexicon::load(&config.resolve(p))?,
            None => ExtractionLexicon::default(),
        };
        let stopwords = match &config.paths.stopwords {
            Some(p) => Stopwords::load(&config.resolve(p)).map_err(|e| PipelineError::Data(e.to_string()))?,
            None => Stopwords::default(),
        };
        let gkg_schema = match &config.paths.gkg_schema {
            Some(p) => {
                let path = config.resolve(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
                GkgSchema::from_toml_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?
            }
            None => GkgSchema::default(),
        };
        Ok(Pipeline { config, store, lexicon, stopwords, gkg_schema, in_run: false, _lock: lock })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn store(&self) -> &RecordStore {
        &self.store
    }

    pub fn gkg_schema(&self) -> &GkgSchema {
        &self.gkg_schema
    }

    pub fn set_gkg_schema(&mut self, schema: GkgSchema) {
        self.gkg_schema = schema;
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    fn summary(&self) -> RunSummary {
        RunSummary { config_digest: self.config.digest().to_string(), ..Default::default() }
    }

    fn staged<T>(
        &mut self,
        stage: Stage,
        summary: &mut RunSummary,
        f: impl FnOnce(&mut Self, &mut RunSummary) -> Result<T, PipelineError>,
    ) -> Result<T, PipelineError> {
        self.store.set_marker(stage.as_str())?;
        let started = Instant::now();
        let out = f(self, summary)?;
        summary.stage_ms.insert(stage.to_string(), started.elapsed().as_millis() as u64);
        if !self.in_run {
            self.store.clear_marker()?;
        }
        Ok(out)
    }

    /// Append the risks of a repository file. Known ids are skipped.
    pub fn ingest_risks(&mut self, path: &Path) -> Result<RunSummary, PipelineError> {
        let mut summary = self.summary();
        self.ingest_into(path, &mut summary)?;
        Ok(summary)
    }

    fn ingest_into(&mut self, path: &Path, summary: &mut RunSummary) -> Result<(), PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        let tag = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let records = parse_risk_repository(&text, &tag)?;
        if records.is_empty() {
            return Err(PipelineError::Data(format!("{}: no valid risk records", path.display())));
        }
        self.staged(Stage::Ingest, summary, |p, s| {
            let (added, dup) = p.store.append_risks(&records)?;
            s.risks_ingested += added;
            s.risk_duplicates += dup;
            s.risks = p.store.risks()?.len();
            Ok(())
        })
    }

    /// Decompose every stored risk and persist the decompositions.
    pub fn extract(&mut self) -> Result<RunSummary, PipelineError> {
        let mut summary = self.summary();
        self.extract_into(&mut summary)?;
        Ok(summary)
    }

    fn extract_into(&mut self, summary: &mut RunSummary) -> Result<Vec<RiskEntry>, PipelineError> {
        self.staged(Stage::Extract, summary, |p, s| {
            let risks = p.store.risks()?;
            if risks.is_empty() {
                return Err(PipelineError::Data("no risks ingested".into()));
            }
            let extractor = LexiconExtractor::new(p.lexicon.clone());
            let entries: Vec<RiskEntry> = risks
                .into_par_iter()
                .map(|record| {
                    let decomposition = match extractor.decompose(&record) {
                        Ok(d) => Some(d),
                        Err(e) => {
                            log::warn!("{e}");
                            None
                        }
                    };
                    RiskEntry { record, decomposition }
                })
                .collect();
            s.risks = entries.len();
            for d in entries.iter().map(|e| e.decomposition.as_ref()) {
                match d.map(|d| d.confidence) {
                    Some(Confidence::Full) => s.decomposed_full += 1,
                    Some(Confidence::Partial) => s.decomposed_partial += 1,
                    Some(Confidence::TriggerOnly) => s.decomposed_trigger_only += 1,
                    None => s.extraction_failures += 1,
                }
            }
            let decompositions: Vec<_> = entries.iter().filter_map(|e| e.decomposition.clone()).collect();
            p.store.replace_lines(store::DECOMPOSITIONS, &decompositions)?;
            Ok(entries)
        })
    }

    fn stored_entries(&self) -> Result<Vec<RiskEntry>, PipelineError> {
        let mut decompositions: HashMap<String, _> =
            self.store.decompositions()?.into_iter().map(|d| (d.risk_id.0.clone(), d)).collect();
        Ok(self
            .store
            .risks()?
            .into_iter()
            .map(|record| {
                let decomposition = decompositions.remove(&record.id.0);
                RiskEntry { record, decomposition }
            })
            .collect())
    }

    /// Build the knowledge graph from the stored decompositions and persist
    /// both exports. Trigger-only decompositions are left out.
    pub fn build_graph(&mut self) -> Result<(KnowledgeGraph, RunSummary), PipelineError> {
        let mut summary = self.summary();
        let graph = self.graph_into(&mut summary)?;
        Ok((graph, summary))
    }

    fn graph_into(&mut self, summary: &mut RunSummary) -> Result<KnowledgeGraph, PipelineError> {
        self.staged(Stage::Graph, summary, |p, s| {
            let mut graph = KnowledgeGraph::new();
            for d in p.store.decompositions()? {
                if d.confidence != Confidence::TriggerOnly {
                    graph.add_risk(&d)?;
                }
            }
            s.graph_nodes = graph.node_count();
            s.graph_edges = graph.edge_count();
            p.store.replace(store::GRAPH_JSON, graph.to_json().as_bytes())?;
            p.store.replace(store::GRAPH_DOT, graph.to_dot().as_bytes())?;
            Ok(graph)
        })
    }

    /// Fetch and parse `sources` concurrently and append new items. Items
    /// from sources that succeeded are kept even when another source fails;
    /// the first failure is then returned.
    pub fn fetch_news(&mut self, sources: &[SourceDescriptor]) -> Result<RunSummary, PipelineError> {
        let mut summary = self.summary();
        self.news_into(sources, &mut summary)?;
        Ok(summary)
    }

    fn news_into(&mut self, sources: &[SourceDescriptor], summary: &mut RunSummary) -> Result<(), PipelineError> {
        self.staged(Stage::News, summary, |p, s| {
            let base = p.config.fixtures_dir();
            let schema = p.gkg_schema.clone();
            let results: Vec<Result<SourceParse, FetchError>> = sources
                .par_iter()
                .map(|desc| {
                    let bytes = fetch_source(desc, Some(&base), HostLimiter::global())?;
                    Ok(parse_payload(desc.kind, &bytes, &schema))
                })
                .collect();
            let mut items = Vec::new();
            let mut first_failure = None;
            for (desc, result) in sources.iter().zip(results) {
                match result {
                    Ok(parsed) => {
                        for e in parsed.errors.iter().take(5) {
                            log::debug!("{}: {e}", desc.name);
                        }
                        if !parsed.errors.is_empty() {
                            log::warn!("{}: {} records rejected", desc.name, parsed.errors.len());
                        }
                        s.news_lines += parsed.units;
                        s.news_parsed += parsed.items.len();
                        s.parse_errors += parsed.errors.len();
                        items.extend(parsed.items);
                    }
                    Err(e) => {
                        log::error!("source {}: {e}", desc.name);
                        s.source_failures += 1;
                        first_failure.get_or_insert(e);
                    }
                }
            }
            let (added, _) = p.store.append_news(&items)?;
            s.news_new += added;
            s.news_total = p.store.news()?.len();
            match first_failure {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        })
    }

    fn provider(&self) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
        Ok(match &self.config.provider {
            Some(remote) => Box::new(RemoteProvider::new(remote.clone())?),
            None => Box::new(HashingEncoder::new(self.config.encoder.clone())?),
        })
    }

    /// Match every stored risk against every stored news item and persist
    /// the report files.
    pub fn match_news(&mut self, config: &MatchConfig) -> Result<(MatchReport, RunSummary), PipelineError> {
        let mut summary = self.summary();
        let report = self.match_into(config, &mut summary)?;
        Ok((report, summary))
    }

    fn match_into(&mut self, config: &MatchConfig, summary: &mut RunSummary) -> Result<MatchReport, PipelineError> {
        self.staged(Stage::Match, summary, |p, s| {
            let entries = p.stored_entries()?;
            let news = p.store.news()?;
            let provider = p.provider()?;
            let embedder = p.config.embedder_digest();
            let cache = match p.store.read(store::EMBEDDINGS)? {
                Some(bytes) if p.store.meta(EMBEDDER_META) == Some(embedder.as_str()) => {
                    let cache = EmbeddingCache::decode(&bytes)?;
                    if cache.dim() == provider.dim() {
                        cache
                    } else {
                        EmbeddingCache::new(provider.dim())
                    }
                }
                _ => EmbeddingCache::new(provider.dim()),
            };
            let (report, stats) = match_all(&entries, &news, provider.as_ref(), config, &p.stopwords, &cache)?;
            s.candidates = stats.candidates;
            s.embeddings_computed = stats.newly_embedded;
            s.matches_emitted = report.total_matches();
            s.match_errors = report.risks.iter().filter(|r| r.error.is_some()).count();
            s.news_total = news.len();

            p.store.replace(store::EMBEDDINGS, &cache.encode())?;
            p.store.set_meta(EMBEDDER_META, &embedder)?;
            p.store.replace_lines(store::MATCHES, &report.risks)?;
            let rows = matcher::report_rows(&report, &news);
            let mut jsonl = Vec::new();
            matcher::write_jsonl(&rows, &mut jsonl).map_err(|e| PipelineError::Data(e.to_string()))?;
            p.store.replace(store::REPORT_JSONL, &jsonl)?;
            let mut md = Vec::new();
            matcher::write_markdown(&rows, &mut md).map_err(|e| PipelineError::Data(e.to_string()))?;
            p.store.replace(store::REPORT_MD, &md)?;
            Ok(report)
        })
    }

    /// The full pipeline: ingest `paths.risks` when configured, then
    /// extract, graph, news from every configured source, match.
    pub fn run(&mut self, options: &RunOptions) -> Result<RunSummary, PipelineError> {
        let mut summary = self.summary();
        if let Some(previous) = self.store.recovered_from() {
            log::warn!("previous run stopped during stage {}; redoing it", previous.stage);
            summary.recovered_stage = Some(previous.stage.clone());
        }
        self.in_run = true;
        let result = self.run_stages(options, &mut summary);
        self.in_run = false;
        result?;
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        self.store.replace(store::SUMMARY, text.as_bytes())?;
        self.store.clear_marker()?;
        Ok(summary)
    }

    fn run_stages(&mut self, options: &RunOptions, summary: &mut RunSummary) -> Result<(), PipelineError> {
        let stop = |stage: Stage| match options.stop_after {
            Some(s) if s == stage => Err(PipelineError::Aborted(stage)),
            _ => Ok(()),
        };
        if let Some(risks) = self.config.paths.risks.clone() {
            let path = self.config.resolve(&risks);
            self.ingest_into(&path, summary)?;
        }
        stop(Stage::Ingest)?;
        self.extract_into(summary)?;
        stop(Stage::Extract)?;
        self.graph_into(summary)?;
        stop(Stage::Graph)?;
        let sources = self.config.sources.clone();
        self.news_into(&sources, summary)?;
        stop(Stage::News)?;
        let matching = self.config.matching.clone();
        self.match_into(&matching, summary)?;
        stop(Stage::Match)
    }
}
