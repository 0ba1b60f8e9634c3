//! Per-risk keyword sets and the keyword candidate filter.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::NewsItem;
use crate::extraction::{RiskDecomposition, RiskId};

const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en_v1.txt");
const MIN_KEYWORD_CHARS: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeywordError {
    #[error("empty keyword set for risk {0}")]
    Empty(RiskId),
    #[error("stopword list: {0}")]
    Load(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// One word per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self, KeywordError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| KeywordError::Load(format!("{}: {e}", path.display())))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        default_stopwords()
    }
}

/// The versioned English list shipped with the crate.
pub fn default_stopwords() -> Stopwords {
    Stopwords::parse(DEFAULT_STOPWORDS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordField {
    Trigger,
    Outcome,
    Vessel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordSet {
    pub risk_id: RiskId,
    pub keywords: BTreeSet<String>,
    pub source_fields: BTreeSet<KeywordField>,
    /// Keywords plus the content parts of hyphenated keywords; what
    /// [`keyword_filter`] compares against.
    #[serde(skip)]
    pub match_terms: BTreeSet<String>,
}

fn is_content(token: &str, stopwords: &Stopwords) -> bool {
    token.chars().count() >= MIN_KEYWORD_CHARS && !stopwords.contains(token)
}

/// Lowercased whitespace tokens of `phrase` with stopwords and short tokens
/// removed. Hyphenated tokens stay fused.
pub fn content_tokens(phrase: &str, stopwords: &Stopwords) -> Vec<String> {
    phrase
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| is_content(t, stopwords))
        .collect()
}

/// Build the keyword set of a risk from the selected decomposition fields.
pub fn build_keywords(
    decomposition: &RiskDecomposition,
    stopwords: &Stopwords,
    fields: &BTreeSet<KeywordField>,
) -> Result<KeywordSet, KeywordError> {
    let mut keywords = BTreeSet::new();
    for field in fields {
        let phrases: Vec<&str> = match field {
            KeywordField::Trigger => vec![decomposition.trigger.as_str()],
            KeywordField::Outcome => decomposition.outcomes.iter().map(|p| p.as_str()).collect(),
            KeywordField::Vessel => decomposition.exposure_vessels.iter().map(|p| p.as_str()).collect(),
        };
        for phrase in phrases {
            keywords.extend(content_tokens(phrase, stopwords));
        }
    }
    if keywords.is_empty() {
        return Err(KeywordError::Empty(decomposition.risk_id.clone()));
    }
    let mut match_terms = keywords.clone();
    for k in &keywords {
        if k.contains('-') {
            match_terms.extend(k.split('-').filter(|p| is_content(p, stopwords)).map(str::to_string));
        }
    }
    Ok(KeywordSet { risk_id: decomposition.risk_id.clone(), keywords, source_fields: fields.clone(), match_terms })
}

fn item_terms(item: &NewsItem) -> BTreeSet<String> {
    let mut terms = BTreeSet::new();
    let headline = item.headline.to_lowercase();
    for token in headline.split(|c: char| !(c.is_alphanumeric() || c == '-')) {
        let token = token.trim_matches('-');
        if token.is_empty() {
            continue;
        }
        terms.insert(token.to_string());
        if token.contains('-') {
            terms.extend(token.split('-').filter(|p| !p.is_empty()).map(str::to_string));
        }
    }
    for theme in &item.themes {
        terms.extend(
            theme
                .to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .filter(|p| !p.is_empty())
                .map(str::to_string),
        );
    }
    terms
}

/// Whether the item's headline tokens or theme tokens hit the keyword set.
pub fn matches_keywords(item: &NewsItem, keys: &KeywordSet) -> bool {
    item_terms(item).iter().any(|t| keys.match_terms.contains(t))
}

/// Keep the items that share at least one term with `keys`, in order.
pub fn keyword_filter(items: &[NewsItem], keys: &KeywordSet) -> Vec<NewsItem> {
    items.iter().filter(|i| matches_keywords(i, keys)).cloned().collect()
}
