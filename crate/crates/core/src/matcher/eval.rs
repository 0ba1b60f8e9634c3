//! Synthetic labeled corpora and ranking metrics.
//!
//! Relevant headlines for a risk contain at least two of its trigger terms
//! mixed with neutral filler words; distractors are filler only. Filler words
//! share neither a word nor a character trigram with any risk text, so
//! distractors have no encoder feature in common with a query. Scores measured on these corpora say nothing
//! about performance on real news.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_query, MatchError, QueryMode, RiskEntry};
use crate::embedding::{cosine, EmbeddingProvider};
use crate::extraction::RiskId;
use crate::newsfeed::{content_tokens, NewsItem, Stopwords};

const FILLER: &[&str] = &[
    "weather", "festival", "garden", "recipe", "football", "concert", "museum", "holiday", "island",
    "painting", "novel", "orchestra", "volcano", "penguin", "marathon", "bakery", "poetry", "sunset",
    "mountain", "river", "cathedral", "violin", "theatre", "tulip", "safari", "glacier", "puzzle",
    "chess", "olympic", "comedy", "harvest", "lantern", "meadow", "opera", "parade", "quilt", "rainbow",
    "sculpture", "telescope", "umbrella", "vineyard", "waterfall", "zebra", "kitten", "puppy", "picnic",
    "balloon", "carnival", "dolphin", "fireworks", "gallery", "hiking", "jazz", "kayak", "lighthouse",
    "mosaic", "nectar", "orchid", "pottery", "rowing", "snowfall", "tennis", "yoga", "biscuit",
    "cinema", "dance", "embroidery", "folklore", "gymnast", "honey", "igloo", "jigsaw", "koala",
];

/// Sizes of a generated corpus. `min_total` pads with extra distractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub relevant_per_risk: usize,
    pub distractors_per_risk: usize,
    pub min_total: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { relevant_per_risk: 50, distractors_per_risk: 150, min_total: 0, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub items: Vec<NewsItem>,
    /// News ids relevant to each risk.
    pub relevant: BTreeMap<RiskId, BTreeSet<String>>,
}

impl LabeledCorpus {
    pub fn is_relevant(&self, risk: &RiskId, news_id: &str) -> bool {
        self.relevant.get(risk).is_some_and(|s| s.contains(news_id))
    }
}

/// Trigger words of a risk with hyphenated tokens split into their content
/// parts.
fn trigger_terms(entry: &RiskEntry, stopwords: &Stopwords) -> Result<Vec<String>, MatchError> {
    let d = entry
        .decomposition
        .as_ref()
        .ok_or_else(|| MatchError::MissingDecomposition(entry.record.id.clone()))?;
    let mut terms = Vec::new();
    for token in content_tokens(d.trigger.as_str(), stopwords) {
        for part in token.split('-') {
            let part = part.to_string();
            if !content_tokens(&part, stopwords).is_empty() && !terms.contains(&part) {
                terms.push(part);
            }
        }
    }
    Ok(terms)
}

fn headline(words: &mut Vec<&str>, rng: &mut ChaCha8Rng) -> String {
    words.shuffle(rng);
    words.join(" ")
}

/// Generate a labeled corpus for `entries`. Deterministic in `spec.seed`.
pub fn generate_labeled_corpus(
    entries: &[RiskEntry],
    stopwords: &Stopwords,
    spec: &CorpusSpec,
) -> Result<LabeledCorpus, MatchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut terms = Vec::with_capacity(entries.len());
    let mut risk_words = BTreeSet::new();
    let mut risk_grams = BTreeSet::new();
    for entry in entries {
        let t = trigger_terms(entry, stopwords)?;
        if t.len() < 2 {
            return Err(MatchError::InvalidConfig(format!(
                "risk {} has fewer than two trigger terms",
                entry.record.id
            )));
        }
        let lower = entry.record.raw_text.to_lowercase();
        risk_words.extend(lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_string));
        let collapsed: Vec<char> = lower.split_whitespace().collect::<Vec<_>>().join(" ").chars().collect();
        risk_grams.extend(collapsed.windows(3).map(|w| w.iter().collect::<String>()));
        terms.push(t);
    }
    let filler: Vec<&str> = FILLER
        .iter()
        .copied()
        .filter(|w| !risk_words.contains(*w))
        .filter(|w| {
            let chars: Vec<char> = w.chars().collect();
            !chars.windows(3).any(|g| risk_grams.contains(&g.iter().collect::<String>()))
        })
        .collect();
    if filler.len() < 8 {
        return Err(MatchError::InvalidConfig("risk texts leave too few filler words".into()));
    }

    let base = Utc.with_ymd_and_hms(2019, 11, 1, 0, 0, 0).single().expect("valid date");
    let mut items = Vec::new();
    let mut relevant: BTreeMap<RiskId, BTreeSet<String>> = BTreeMap::new();
    let push = |items: &mut Vec<NewsItem>, text: String, path: String| {
        let at = base + Duration::minutes(items.len() as i64);
        let item = NewsItem::new(text, format!("https://synthetic.example/{path}"), "synthetic", Some(at));
        let id = item.id.clone();
        items.push(item);
        id
    };

    for (entry, t) in entries.iter().zip(&terms) {
        let slug = entry.record.id.0.to_lowercase();
        let ids = relevant.entry(entry.record.id.clone()).or_default();
        for n in 0..spec.relevant_per_risk {
            let k = rng.random_range(2..=t.len().min(3));
            let mut words: Vec<&str> = t.choose_multiple(&mut rng, k).map(String::as_str).collect();
            let fill = rng.random_range(2..=4);
            words.extend(filler.choose_multiple(&mut rng, fill));
            let text = headline(&mut words, &mut rng);
            ids.insert(push(&mut items, text, format!("{slug}/rel/{n}")));
        }
        for n in 0..spec.distractors_per_risk {
            let fill = rng.random_range(4..=6);
            let mut words: Vec<&str> = filler.choose_multiple(&mut rng, fill).copied().collect();
            let text = headline(&mut words, &mut rng);
            push(&mut items, text, format!("{slug}/dis/{n}"));
        }
    }
    let mut n = 0;
    while items.len() < spec.min_total {
        let fill = rng.random_range(4..=6);
        let mut words: Vec<&str> = filler.choose_multiple(&mut rng, fill).copied().collect();
        let text = headline(&mut words, &mut rng);
        push(&mut items, text, format!("pad/{n}"));
        n += 1;
    }
    items.shuffle(&mut rng);
    Ok(LabeledCorpus { items, relevant })
}

/// Fraction of the first `k` results that are relevant, over `k`.
pub fn precision_at_k(ranked_news_ids: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked_news_ids.iter().take(k).filter(|id| relevant.contains(*id)).count();
    hits as f64 / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Cosine score of every (risk, item) pair, row per risk.
pub fn score_matrix(
    entries: &[RiskEntry],
    corpus: &LabeledCorpus,
    provider: &dyn EmbeddingProvider,
    mode: QueryMode,
) -> Result<Vec<Vec<f64>>, MatchError> {
    let headlines: Vec<String> = corpus.items.iter().map(|i| i.headline.clone()).collect();
    let vectors = provider.embed_batch(&headlines)?;
    let queries = entries.iter().map(|e| build_query(e, mode)).collect::<Result<Vec<_>, _>>()?;
    let query_vectors = provider.embed_batch(&queries)?;
    query_vectors
        .iter()
        .map(|q| vectors.iter().map(|v| cosine(q, v).map_err(MatchError::from)).collect())
        .collect()
}

/// Treat `score >= threshold` as a relevance prediction for every pair.
pub fn accuracy_at_threshold(
    entries: &[RiskEntry],
    corpus: &LabeledCorpus,
    scores: &[Vec<f64>],
    threshold: f64,
) -> EvalRow {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (entry, row) in entries.iter().zip(scores) {
        for (item, &score) in corpus.items.iter().zip(row) {
            match (score >= threshold, corpus.is_relevant(&entry.record.id, &item.id)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    EvalRow {
        threshold,
        accuracy: ratio(tp + tn, tp + fp + tn + fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    }
}

pub fn sweep_thresholds(
    entries: &[RiskEntry],
    corpus: &LabeledCorpus,
    scores: &[Vec<f64>],
    thresholds: &[f64],
) -> Vec<EvalRow> {
    thresholds
        .iter()
        .map(|&t| accuracy_at_threshold(entries, corpus, scores, t))
        .collect()
}
