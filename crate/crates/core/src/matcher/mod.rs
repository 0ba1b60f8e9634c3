//! Ranking news against risks by embedding cosine similarity.
//!
//! For each risk a query text is built ([`build_query`]), optionally a
//! keyword prefilter narrows the candidates, every candidate headline is
//! scored by cosine similarity, scores below the threshold are dropped and
//! the rest are ordered by (score desc, published_at desc, news id asc) and
//! cut to `top_k`.

mod eval;
mod report;

pub use eval::{
    accuracy_at_threshold, generate_labeled_corpus, precision_at_k, score_matrix, sweep_thresholds, CorpusSpec,
    EvalRow, LabeledCorpus,
};
pub use report::{report_rows, write_jsonl, write_markdown, ReportRow};

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, EmbedError, EmbeddingCache, EmbeddingProvider, EmbeddingVector};
use crate::extraction::{RiskDecomposition, RiskId, RiskRecord};
use crate::newsfeed::{build_keywords, matches_keywords, KeywordError, KeywordField, KeywordSet, NewsItem, Stopwords};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("risk {0} has no decomposition; mode needs one")]
    MissingDecomposition(RiskId),
    #[error(transparent)]
    Keywords(#[from] KeywordError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    #[default]
    FullText,
    TriggerOnly,
    TriggerPlusOutcome,
}

impl FromStr for QueryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full_text" => Ok(QueryMode::FullText),
            "trigger_only" => Ok(QueryMode::TriggerOnly),
            "trigger_plus_outcome" => Ok(QueryMode::TriggerPlusOutcome),
            other => Err(format!(
                "unknown mode {other:?} (expected full_text, trigger_only or trigger_plus_outcome)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub mode: QueryMode,
    pub threshold: f64,
    pub top_k: usize,
    pub keyword_prefilter: bool,
    pub keyword_fields: BTreeSet<KeywordField>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            mode: QueryMode::FullText,
            threshold: 0.35,
            top_k: 10,
            keyword_prefilter: true,
            keyword_fields: [KeywordField::Trigger].into(),
        }
    }
}

impl MatchConfig {
    /// `threshold` may exceed 1 (it then rejects everything); it must not be
    /// below -1 or NaN.
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.threshold.is_nan() || self.threshold < -1.0 {
            return Err(MatchError::InvalidConfig(format!("threshold {} below -1", self.threshold)));
        }
        if self.top_k == 0 {
            return Err(MatchError::InvalidConfig("top_k must be >= 1".into()));
        }
        if self.keyword_prefilter && self.keyword_fields.is_empty() {
            return Err(MatchError::InvalidConfig("keyword prefilter needs at least one field".into()));
        }
        Ok(())
    }
}

/// A risk and, when extraction succeeded, its decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub record: RiskRecord,
    pub decomposition: Option<RiskDecomposition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub risk_id: RiskId,
    pub news_id: String,
    pub score: f64,
    pub rank: usize,
}

pub fn build_query(entry: &RiskEntry, mode: QueryMode) -> Result<String, MatchError> {
    let decomposition = || {
        entry
            .decomposition
            .as_ref()
            .ok_or_else(|| MatchError::MissingDecomposition(entry.record.id.clone()))
    };
    Ok(match mode {
        QueryMode::FullText => entry.record.raw_text.clone(),
        QueryMode::TriggerOnly => decomposition()?.trigger.to_string(),
        QueryMode::TriggerPlusOutcome => {
            let d = decomposition()?;
            std::iter::once(d.trigger.as_str())
                .chain(d.outcomes.iter().map(|o| o.as_str()))
                .collect::<Vec<_>>()
                .join(" ")
        }
    })
}

/// The ranking order: score desc, then most recent first (undated last),
/// then news id asc.
pub fn compare_ranked(a: (f64, &NewsItem), b: (f64, &NewsItem)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.published_at.cmp(&a.1.published_at))
        .then_with(|| a.1.id.cmp(&b.1.id))
}

fn keyword_set(entry: &RiskEntry, config: &MatchConfig, stopwords: &Stopwords) -> Result<Option<KeywordSet>, MatchError> {
    if !config.keyword_prefilter {
        return Ok(None);
    }
    let d = entry
        .decomposition
        .as_ref()
        .ok_or_else(|| MatchError::MissingDecomposition(entry.record.id.clone()))?;
    Ok(Some(build_keywords(d, stopwords, &config.keyword_fields)?))
}

/// Score, threshold, order and cut already-embedded candidates.
pub fn rank_candidates(
    risk_id: &RiskId,
    query: &EmbeddingVector,
    candidates: &[(&NewsItem, &EmbeddingVector)],
    config: &MatchConfig,
) -> Result<Vec<MatchResult>, MatchError> {
    let mut scored: Vec<(f64, &NewsItem)> = Vec::with_capacity(candidates.len());
    for (item, vector) in candidates {
        let score = cosine(query, vector)?;
        if score >= config.threshold {
            scored.push((score, item));
        }
    }
    scored.sort_by(|a, b| compare_ranked(*a, *b));
    scored.truncate(config.top_k);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, item))| MatchResult {
            risk_id: risk_id.clone(),
            news_id: item.id.clone(),
            score,
            rank: i + 1,
        })
        .collect())
}

fn dedup_by_id(corpus: &[NewsItem]) -> Vec<&NewsItem> {
    let mut seen = std::collections::HashSet::new();
    corpus.iter().filter(|i| seen.insert(i.id.as_str())).collect()
}

/// Rank `corpus` for one risk. Embeds the query and every candidate.
pub fn match_risk(
    entry: &RiskEntry,
    corpus: &[NewsItem],
    provider: &dyn EmbeddingProvider,
    config: &MatchConfig,
    stopwords: &Stopwords,
) -> Result<Vec<MatchResult>, MatchError> {
    config.validate()?;
    let keys = keyword_set(entry, config, stopwords)?;
    let candidates: Vec<&NewsItem> = dedup_by_id(corpus)
        .into_iter()
        .filter(|i| keys.as_ref().is_none_or(|k| matches_keywords(i, k)))
        .collect();
    let query = provider.embed_one(&build_query(entry, config.mode)?)?;
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = candidates.iter().map(|i| i.headline.clone()).collect();
    let vectors = provider.embed_batch(&texts)?;
    let pairs: Vec<(&NewsItem, &EmbeddingVector)> = candidates.into_iter().zip(vectors.iter()).collect();
    rank_candidates(&entry.record.id, &query, &pairs, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMatches {
    pub risk_id: RiskId,
    pub results: Vec<MatchResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Match results for every risk, in input risk order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub risks: Vec<RiskMatches>,
}

impl MatchReport {
    pub fn get(&self, risk_id: &RiskId) -> Option<&RiskMatches> {
        self.risks.iter().find(|r| &r.risk_id == risk_id)
    }

    pub fn total_matches(&self) -> usize {
        self.risks.iter().map(|r| r.results.len()).sum()
    }

    pub fn all_results(&self) -> impl Iterator<Item = &MatchResult> {
        self.risks.iter().flat_map(|r| r.results.iter())
    }
}

/// Statistics from one [`match_all`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchStats {
    pub candidates: usize,
    pub newly_embedded: usize,
}

/// Rank the corpus for every risk.
///
/// Headlines are embedded at most once across all risks: vectors already in
/// `cache` are reused and new ones are added. Per-risk failures are recorded
/// in the report; the other risks are still processed.
pub fn match_all(
    entries: &[RiskEntry],
    corpus: &[NewsItem],
    provider: &dyn EmbeddingProvider,
    config: &MatchConfig,
    stopwords: &Stopwords,
    cache: &EmbeddingCache,
) -> Result<(MatchReport, MatchStats), MatchError> {
    config.validate()?;
    if cache.dim() != provider.dim() {
        return Err(EmbedError::DimensionMismatch(cache.dim(), provider.dim()).into());
    }
    let corpus = dedup_by_id(corpus);

    struct Plan<'a> {
        query: String,
        candidates: Vec<&'a NewsItem>,
    }
    let plans: Vec<Result<Plan, MatchError>> = entries
        .iter()
        .map(|entry| {
            let keys = keyword_set(entry, config, stopwords)?;
            let candidates = corpus
                .iter()
                .copied()
                .filter(|i| keys.as_ref().is_none_or(|k| matches_keywords(i, k)))
                .collect();
            Ok(Plan { query: build_query(entry, config.mode)?, candidates })
        })
        .collect();

    // embed each needed headline once, in first-needed order
    let mut needed: Vec<&NewsItem> = Vec::new();
    let mut queued = std::collections::HashSet::new();
    for plan in plans.iter().flatten() {
        for item in &plan.candidates {
            if !cache.contains(item.id_hash()) && queued.insert(item.id_hash()) {
                needed.push(item);
            }
        }
    }
    let stats = MatchStats {
        candidates: plans.iter().flatten().map(|p| p.candidates.len()).sum(),
        newly_embedded: needed.len(),
    };
    if !needed.is_empty() {
        let texts: Vec<String> = needed.iter().map(|i| i.headline.clone()).collect();
        let vectors = provider.embed_batch(&texts)?;
        if vectors.len() != needed.len() {
            return Err(EmbedError::MalformedResponse("provider returned a short batch".into()).into());
        }
        for (item, vector) in needed.iter().zip(vectors) {
            cache.insert(item.id_hash(), vector)?;
        }
    }

    let queries: Vec<String> = plans.iter().flatten().map(|p| p.query.clone()).collect();
    let query_vectors = provider.embed_batch(&queries)?;
    let mut query_iter = query_vectors.into_iter();
    type Job<'a> = (&'a RiskEntry, Result<(Plan<'a>, EmbeddingVector), MatchError>);
    let jobs: Vec<Job> = entries
        .iter()
        .zip(plans)
        .map(|(entry, plan)| {
            let job = plan.map(|p| (p, query_iter.next().expect("one query vector per plan")));
            (entry, job)
        })
        .collect();

    let risks: Vec<RiskMatches> = jobs
        .into_par_iter()
        .map(|(entry, job)| {
            let outcome = job.and_then(|(plan, query)| {
                let vectors: HashMap<u64, _> = plan
                    .candidates
                    .iter()
                    .map(|i| (i.id_hash(), cache.get(i.id_hash()).expect("embedded above")))
                    .collect();
                let pairs: Vec<(&NewsItem, &EmbeddingVector)> = plan
                    .candidates
                    .iter()
                    .map(|i| (*i, vectors[&i.id_hash()].as_ref()))
                    .collect();
                rank_candidates(&entry.record.id, &query, &pairs, config)
            });
            match outcome {
                Ok(results) => RiskMatches { risk_id: entry.record.id.clone(), results, error: None },
                Err(e) => RiskMatches { risk_id: entry.record.id.clone(), results: Vec::new(), error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok((MatchReport { risks }, stats))
}
