//! News ingestion: GDELT GKG 2.1 files, RSS 2.0 / Atom feeds, keyword
//! candidate filtering and source fetching.

mod feed;
mod fetch;
mod gkg;
mod keywords;

pub use feed::parse_feed;
pub use fetch::{fetch_source, FetchError, HostLimiter, SourceDescriptor, SourceKind};
pub use gkg::{headline_from_url, parse_gkg, parse_gkg_line, GkgField, GkgSchema, GkgParse};
pub use keywords::{
    build_keywords, content_tokens, default_stopwords, keyword_filter, matches_keywords, KeywordError, KeywordField,
    KeywordSet, Stopwords,
};

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::embedding::fnv1a64;

/// One news headline from any source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub headline: String,
    pub url: String,
    pub source: String,
    /// `None` when the source carried no parseable timestamp.
    pub published_at: Option<DateTime<Utc>>,
    pub language: String,
    #[serde(default)]
    pub themes: Vec<String>,
    /// GKG average tone, when the record carried one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tone: Option<f64>,
}

impl NewsItem {
    pub fn new(
        headline: impl Into<String>,
        url: impl Into<String>,
        source: impl Into<String>,
        published_at: Option<DateTime<Utc>>,
    ) -> Self {
        let headline = headline.into();
        let url = url.into();
        NewsItem {
            id: news_id(&url, &headline),
            headline,
            url,
            source: source.into(),
            published_at,
            language: "und".to_string(),
            themes: Vec::new(),
            tone: None,
        }
    }

    /// The numeric form of [`NewsItem::id`].
    pub fn id_hash(&self) -> u64 {
        u64::from_str_radix(&self.id, 16).unwrap_or_else(|_| fnv1a64(self.id.as_bytes()))
    }
}

/// Lowercase hex FNV-1a-64 of `url + "\n" + headline`.
pub fn news_id(url: &str, headline: &str) -> String {
    let mut bytes = Vec::with_capacity(url.len() + headline.len() + 1);
    bytes.extend_from_slice(url.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(headline.as_bytes());
    format!("{:016x}", fnv1a64(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    WrongFieldCount,
    BadTimestamp,
    EmptyUrl,
    MissingTitle,
    MalformedXml,
    NotAFeed,
}

/// A recoverable defect in one record (or, for XML, the whole document).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    /// 1-based line number; 0 for document-level errors.
    pub line: usize,
    pub kind: ParseErrorKind,
    pub reason: String,
}

impl ParseError {
    pub fn new(line: usize, kind: ParseErrorKind, reason: impl Into<String>) -> Self {
        ParseError { line, kind, reason: reason.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?}: {}", self.line, self.kind, self.reason)
    }
}

impl std::error::Error for ParseError {}
