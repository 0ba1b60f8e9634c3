//! Risk sentence decomposition.
//!
//! A risk sentence such as
//! `Cyber-attacks targeting the retail banking business causing a loss of customer data`
//! is split into a *trigger* (root cause), an *exposure vessel* (the business
//! area hit) and one or more *outcomes* (the impact). The split is driven by a
//! small lexicon of connector words ("targeting", "in", ...) and causal
//! markers ("causing", "leading to", ...):
//!
//! ```text
//! <trigger> <connector> <vessel> <causal marker> <outcome> [and/or <outcome>]
//! ```
//!
//! Everything is deterministic and allocation-light. The [`Extractor`] trait
//! is the seam where a learned sequence model could replace the grammar.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("extraction failed for risk {risk_id}: {reason}")]
    ExtractionFailed { risk_id: String, reason: String },
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
}

/// Opaque risk identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RiskId(pub String);

impl RiskId {
    pub fn new(id: impl Into<String>) -> Self {
        RiskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RiskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RiskId {
    fn from(s: &str) -> Self {
        RiskId(s.to_string())
    }
}

/// One risk description as supplied by domain experts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub id: RiskId,
    pub raw_text: String,
    #[serde(default)]
    pub source_tag: String,
}

impl RiskRecord {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        source_tag: impl Into<String>,
    ) -> Result<Self, ExtractError> {
        let raw_text = raw_text.into();
        if raw_text.trim().is_empty() {
            return Err(ExtractError::InvalidInput("risk text is empty".into()));
        }
        Ok(RiskRecord {
            id: RiskId(id.into()),
            raw_text,
            source_tag: source_tag.into(),
        })
    }
}

/// A normalized phrase; always a fixed point of [`normalize_phrase`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalPhrase(String);

impl CanonicalPhrase {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for CanonicalPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CanonicalPhrase {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

fn normalize_once(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let mut tokens: Vec<String> = Vec::new();
    let mut iter = lower.split_whitespace().peekable();
    while let Some(tok) = iter.next() {
        // "<w> - <w>" fuses to "<w>-<w>"
        if tok == "-" && !tokens.is_empty() {
            if let Some(next) = iter.peek() {
                if *next != "-" {
                    let next = iter.next().unwrap_or_default();
                    let last = tokens.last_mut().expect("non-empty");
                    last.push('-');
                    last.push_str(next);
                    continue;
                }
            }
        }
        tokens.push(tok.to_string());
    }
    let joined = tokens.join(" ");
    let mut phrase = joined.trim_matches(|c: char| !c.is_alphanumeric()).to_string();
    loop {
        let first = phrase.split(' ').next().unwrap_or("");
        if ARTICLES.contains(&first) {
            phrase = phrase[first.len()..]
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string();
        } else {
            break;
        }
    }
    phrase
}

/// Canonicalize a phrase for node identity.
///
/// Lowercases, collapses whitespace, fuses spaced hyphens, strips
/// surrounding punctuation and leading articles. Every step can only shorten
/// the text once the input is lowercase, so iterating to a fixed point
/// terminates and makes the function idempotent.
pub fn normalize_phrase(raw: &str) -> CanonicalPhrase {
    let mut current = normalize_once(raw);
    loop {
        let next = normalize_once(&current);
        if next == current {
            return CanonicalPhrase(current);
        }
        current = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Full,
    Partial,
    TriggerOnly,
}

impl Confidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::Full => "full",
            Confidence::Partial => "partial",
            Confidence::TriggerOnly => "trigger_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    pub risk_id: RiskId,
    pub trigger: CanonicalPhrase,
    pub exposure_vessels: Vec<CanonicalPhrase>,
    pub outcomes: Vec<CanonicalPhrase>,
    pub connector: Option<String>,
    pub causal_marker: Option<String>,
    pub confidence: Confidence,
}

/// Connector words, causal markers and outcome splitters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionLexicon {
    connectors: Vec<String>,
    causal_markers: Vec<String>,
    outcome_splitters: Vec<String>,
    // token-split forms, derived
    #[serde(skip)]
    marker_tokens: Vec<Vec<String>>,
    #[serde(skip)]
    splitter_tokens: Vec<Vec<String>>,
}

impl Default for ExtractionLexicon {
    fn default() -> Self {
        ExtractionLexicon::new(
            ["targeting", "affecting", "impacting", "disrupting", "hitting", "in"],
            ["causing", "resulting in", "leading to"],
            ["and/or", "or"],
        )
        .expect("default lexicon is valid")
    }
}

impl ExtractionLexicon {
    pub fn new<C, M, S>(connectors: C, causal_markers: M, outcome_splitters: S) -> Result<Self, ExtractError>
    where
        C: IntoIterator,
        C::Item: Into<String>,
        M: IntoIterator,
        M::Item: Into<String>,
        S: IntoIterator,
        S::Item: Into<String>,
    {
        let lexicon = ExtractionLexicon {
            connectors: connectors.into_iter().map(Into::into).collect(),
            causal_markers: causal_markers.into_iter().map(Into::into).collect(),
            outcome_splitters: outcome_splitters.into_iter().map(Into::into).collect(),
            marker_tokens: Vec::new(),
            splitter_tokens: Vec::new(),
        };
        lexicon.validated()
    }

    fn validated(mut self) -> Result<Self, ExtractError> {
        let all = self
            .connectors
            .iter()
            .chain(&self.causal_markers)
            .chain(&self.outcome_splitters);
        for entry in all {
            if entry.trim().is_empty() {
                return Err(ExtractError::InvalidLexicon("empty entry".into()));
            }
            if entry.to_lowercase() != *entry {
                return Err(ExtractError::InvalidLexicon(format!("entry {entry:?} is not lowercase")));
            }
        }
        for connector in &self.connectors {
            if connector.split_whitespace().count() != 1 {
                return Err(ExtractError::InvalidLexicon(format!(
                    "connector {connector:?} must be a single token"
                )));
            }
            if self.causal_markers.contains(connector) {
                return Err(ExtractError::InvalidLexicon(format!(
                    "connector {connector:?} is also a causal marker"
                )));
            }
        }
        self.marker_tokens = self
            .causal_markers
            .iter()
            .map(|m| m.split_whitespace().map(str::to_string).collect())
            .collect();
        self.splitter_tokens = self
            .outcome_splitters
            .iter()
            .map(|m| m.split_whitespace().map(str::to_string).collect())
            .collect();
        Ok(self)
    }

    /// Load a lexicon from a TOML file with `connectors`, `causal_markers`
    /// and `outcome_splitters` string arrays.
    pub fn from_toml_str(text: &str) -> Result<Self, ExtractError> {
        let lexicon: ExtractionLexicon =
            toml::from_str(text).map_err(|e| ExtractError::InvalidLexicon(e.to_string()))?;
        lexicon.validated()
    }

    pub fn load(path: &Path) -> Result<Self, ExtractError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractError::InvalidLexicon(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn connectors(&self) -> &[String] {
        &self.connectors
    }

    pub fn causal_markers(&self) -> &[String] {
        &self.causal_markers
    }

    pub fn outcome_splitters(&self) -> &[String] {
        &self.outcome_splitters
    }
}

/// Token as compared against lexicon entries.
fn match_key(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '/')
        .to_lowercase()
}

/// Longest phrase that matches `keys` starting at `start`, as (token length, phrase index).
fn match_at(keys: &[String], start: usize, phrases: &[Vec<String>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (idx, phrase) in phrases.iter().enumerate() {
        let len = phrase.len();
        if len == 0 || start + len > keys.len() {
            continue;
        }
        if keys[start..start + len].iter().zip(phrase).all(|(k, p)| k == p)
            && best.is_none_or(|(best_len, _)| len > best_len)
        {
            best = Some((len, idx));
        }
    }
    best
}

/// Leftmost phrase match over `keys`; the longer phrase wins at equal start.
/// Returns (start, token length, phrase index).
fn find_phrase(keys: &[String], phrases: &[Vec<String>]) -> Option<(usize, usize, usize)> {
    (0..keys.len()).find_map(|start| match_at(keys, start, phrases).map(|(len, idx)| (start, len, idx)))
}

/// Raw token spans of a risk sentence, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskSegments<'a> {
    pub trigger: Vec<&'a str>,
    pub connector: Vec<&'a str>,
    pub vessel: Vec<&'a str>,
    pub marker: Vec<&'a str>,
    pub outcome: Vec<&'a str>,
    pub connector_entry: Option<String>,
    pub marker_entry: Option<String>,
}

/// Split a sentence into its grammar segments. Tokens are whitespace
/// delimited and every token lands in exactly one segment.
pub fn segment_risk<'a>(text: &'a str, lexicon: &ExtractionLexicon) -> RiskSegments<'a> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let keys: Vec<String> = tokens.iter().map(|t| match_key(t)).collect();

    let Some((m_start, m_len, m_idx)) = find_phrase(&keys, &lexicon.marker_tokens) else {
        return RiskSegments {
            trigger: tokens,
            connector: Vec::new(),
            vessel: Vec::new(),
            marker: Vec::new(),
            outcome: Vec::new(),
            connector_entry: None,
            marker_entry: None,
        };
    };
    let pre = &tokens[..m_start];
    let marker = tokens[m_start..m_start + m_len].to_vec();
    let outcome = tokens[m_start + m_len..].to_vec();
    let marker_entry = Some(lexicon.causal_markers[m_idx].clone());

    let connector_pos = keys[..m_start]
        .iter()
        .position(|k| lexicon.connectors.iter().any(|c| c == k));
    match connector_pos {
        Some(c) => RiskSegments {
            trigger: pre[..c].to_vec(),
            connector: vec![pre[c]],
            vessel: pre[c + 1..].to_vec(),
            marker,
            outcome,
            connector_entry: Some(keys[c].clone()),
            marker_entry,
        },
        None => RiskSegments {
            trigger: pre.to_vec(),
            connector: Vec::new(),
            vessel: Vec::new(),
            marker,
            outcome,
            connector_entry: None,
            marker_entry,
        },
    }
}

/// Split an outcome segment on whole-word outcome splitters.
///
/// Bare "and" is deliberately absent from the default splitters since it
/// occurs inside vessel names such as "corporate and investment banking".
pub fn split_outcomes(segment: &str, lexicon: &ExtractionLexicon) -> Vec<CanonicalPhrase> {
    let tokens: Vec<&str> = segment.split_whitespace().collect();
    let keys: Vec<String> = tokens.iter().map(|t| match_key(t)).collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        if let Some((len, _)) = match_at(&keys, i, &lexicon.splitter_tokens) {
            pieces.push(tokens[start..i].join(" "));
            i += len;
            start = i;
        } else {
            i += 1;
        }
    }
    pieces.push(tokens[start..].join(" "));
    pieces
        .iter()
        .map(|p| normalize_phrase(p))
        .filter(|p| !p.is_empty())
        .collect()
}

/// Decompose one risk sentence with the lexicon grammar.
pub fn decompose_risk(
    record: &RiskRecord,
    lexicon: &ExtractionLexicon,
) -> Result<RiskDecomposition, ExtractError> {
    if record.raw_text.trim().is_empty() {
        return Err(ExtractError::InvalidInput(format!(
            "risk {} has empty text",
            record.id
        )));
    }
    let segments = segment_risk(&record.raw_text, lexicon);
    let trigger = normalize_phrase(&segments.trigger.join(" "));
    if trigger.is_empty() {
        return Err(ExtractError::ExtractionFailed {
            risk_id: record.id.to_string(),
            reason: "trigger is empty".into(),
        });
    }
    if segments.marker_entry.is_none() {
        return Ok(RiskDecomposition {
            risk_id: record.id.clone(),
            trigger,
            exposure_vessels: Vec::new(),
            outcomes: Vec::new(),
            connector: None,
            causal_marker: None,
            confidence: Confidence::TriggerOnly,
        });
    }

    let vessel = normalize_phrase(&segments.vessel.join(" "));
    let exposure_vessels = if vessel.is_empty() { Vec::new() } else { vec![vessel] };
    let outcomes = split_outcomes(&segments.outcome.join(" "), lexicon);
    let confidence = if !exposure_vessels.is_empty() && !outcomes.is_empty() {
        Confidence::Full
    } else {
        Confidence::Partial
    };
    Ok(RiskDecomposition {
        risk_id: record.id.clone(),
        trigger,
        exposure_vessels,
        outcomes,
        connector: segments.connector_entry,
        causal_marker: segments.marker_entry,
        confidence,
    })
}

/// Anything that can turn a risk record into a decomposition.
pub trait Extractor: Send + Sync {
    fn decompose(&self, record: &RiskRecord) -> Result<RiskDecomposition, ExtractError>;
}

#[derive(Debug, Clone, Default)]
pub struct LexiconExtractor {
    pub lexicon: ExtractionLexicon,
}

impl LexiconExtractor {
    pub fn new(lexicon: ExtractionLexicon) -> Self {
        LexiconExtractor { lexicon }
    }
}

impl Extractor for LexiconExtractor {
    fn decompose(&self, record: &RiskRecord) -> Result<RiskDecomposition, ExtractError> {
        decompose_risk(record, &self.lexicon)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RiskLine {
    id: String,
    raw_text: String,
    #[serde(default)]
    source_tag: String,
}

/// Parse a risk repository.
///
/// Two layouts are accepted: plain text with one sentence per line (ids are
/// assigned `R0001`, `R0002`, ... in order of non-blank lines) or
/// line-delimited JSON objects with `id`, `raw_text` and `source_tag`.
/// The JSON layout is chosen when the first non-blank line starts with `{`.
pub fn parse_risk_repository(text: &str, default_tag: &str) -> Result<Vec<RiskRecord>, ExtractError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let is_jsonl = lines.peek().is_some_and(|(_, l)| l.trim_start().starts_with('{'));
    let mut out = Vec::new();
    for (n, (lineno, line)) in lines.enumerate() {
        let record = if is_jsonl {
            let parsed: RiskLine = serde_json::from_str(line).map_err(|e| {
                ExtractError::InvalidInput(format!("line {}: {e}", lineno + 1))
            })?;
            RiskRecord::new(parsed.id, parsed.raw_text.trim(), parsed.source_tag)
        } else {
            RiskRecord::new(format!("R{:04}", n + 1), line.trim(), default_tag)
        };
        out.push(record.map_err(|e| ExtractError::InvalidInput(format!("line {}: {e}", lineno + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(text: &str) -> RiskRecord {
        RiskRecord::new("R1", text, "test").unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_phrase("the Retail Banking business").as_str(), "retail banking business");
        assert_eq!(normalize_phrase("retail banking business").as_str(), "retail banking business");
        assert_eq!(
            normalize_phrase("US - China trade war escalation").as_str(),
            "us-china trade war escalation"
        );
        assert_eq!(normalize_phrase("  A   loss of data. ").as_str(), "loss of data");
        assert_eq!(normalize_phrase("the a an").as_str(), "");
    }

    #[test]
    fn normalize_all_punctuation_is_empty() {
        assert!(normalize_phrase("?!... -- ,").is_empty());
        assert!(normalize_phrase("").is_empty());
    }

    #[test]
    fn normalize_keeps_inner_article_and_and() {
        assert_eq!(
            normalize_phrase("the corporate and investment banking business").as_str(),
            "corporate and investment banking business"
        );
        assert_eq!(normalize_phrase("theft of the data").as_str(), "theft of the data");
    }

    #[test]
    fn decompose_reference_example() {
        let d = decompose_risk(
            &rec("Cyber-attacks targeting the retail banking business causing a loss of customer data"),
            &ExtractionLexicon::default(),
        )
        .unwrap();
        assert_eq!(d.trigger.as_str(), "cyber-attacks");
        assert_eq!(d.exposure_vessels.len(), 1);
        assert_eq!(d.exposure_vessels[0].as_str(), "retail banking business");
        assert_eq!(d.outcomes.len(), 1);
        assert_eq!(d.outcomes[0].as_str(), "loss of customer data");
        assert_eq!(d.connector.as_deref(), Some("targeting"));
        assert_eq!(d.causal_marker.as_deref(), Some("causing"));
        assert_eq!(d.confidence, Confidence::Full);
    }

    #[test]
    fn decompose_employee_misconduct() {
        let d = decompose_risk(
            &rec("Employee misconduct in the investment banking business causing a reputational damage"),
            &ExtractionLexicon::default(),
        )
        .unwrap();
        assert_eq!(d.trigger.as_str(), "employee misconduct");
        assert_eq!(d.exposure_vessels[0].as_str(), "investment banking business");
        assert_eq!(d.outcomes[0].as_str(), "reputational damage");
        assert_eq!(d.confidence, Confidence::Full);
    }

    #[test]
    fn decompose_trigger_only() {
        let d = decompose_risk(&rec("Global pandemic"), &ExtractionLexicon::default()).unwrap();
        assert_eq!(d.trigger.as_str(), "global pandemic");
        assert!(d.exposure_vessels.is_empty());
        assert!(d.outcomes.is_empty());
        assert_eq!(d.confidence, Confidence::TriggerOnly);
        assert_eq!(d.causal_marker, None);
    }

    #[test]
    fn decompose_without_connector_is_partial() {
        let d = decompose_risk(&rec("Rising rates leading to lower margins"), &ExtractionLexicon::default())
            .unwrap();
        assert_eq!(d.trigger.as_str(), "rising rates");
        assert_eq!(d.causal_marker.as_deref(), Some("leading to"));
        assert!(d.exposure_vessels.is_empty());
        assert_eq!(d.outcomes[0].as_str(), "lower margins");
        assert_eq!(d.confidence, Confidence::Partial);
    }

    #[test]
    fn decompose_errors() {
        let lex = ExtractionLexicon::default();
        let empty = RiskRecord { id: RiskId::from("X"), raw_text: "   ".into(), source_tag: String::new() };
        assert!(matches!(decompose_risk(&empty, &lex), Err(ExtractError::InvalidInput(_))));
        assert!(matches!(
            decompose_risk(&rec("causing loss"), &lex),
            Err(ExtractError::ExtractionFailed { .. })
        ));
        assert!(matches!(
            decompose_risk(&rec("The in retail causing loss"), &lex),
            Err(ExtractError::ExtractionFailed { .. })
        ));
    }

    #[test]
    fn leftmost_connector_wins_inside_trigger() {
        let d = decompose_risk(
            &rec("phishing targeting campaign in retail causing loss"),
            &ExtractionLexicon::default(),
        )
        .unwrap();
        assert_eq!(d.trigger.as_str(), "phishing");
        assert_eq!(d.exposure_vessels[0].as_str(), "campaign in retail");
    }

    #[test]
    fn longer_marker_wins_at_equal_start() {
        let lex = ExtractionLexicon::new(["in"], ["resulting", "resulting in"], ["or"]).unwrap();
        let d = decompose_risk(&rec("outage in payments resulting in fines"), &lex).unwrap();
        assert_eq!(d.causal_marker.as_deref(), Some("resulting in"));
        assert_eq!(d.outcomes[0].as_str(), "fines");
    }

    #[test]
    fn marker_matches_through_punctuation() {
        let d = decompose_risk(
            &rec("Fraud in retail, causing losses"),
            &ExtractionLexicon::default(),
        )
        .unwrap();
        assert_eq!(d.exposure_vessels[0].as_str(), "retail");
        assert_eq!(d.outcomes[0].as_str(), "losses");
    }

    #[test]
    fn split_outcome_examples() {
        let lex = ExtractionLexicon::default();
        let got: Vec<String> = split_outcomes("a reputational damage and/or monetary loss", &lex)
            .into_iter()
            .map(CanonicalPhrase::into_string)
            .collect();
        assert_eq!(got, vec!["reputational damage", "monetary loss"]);
        let got = split_outcomes("a decrease in revenues", &lex);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].as_str(), "decrease in revenues");
        assert!(split_outcomes("", &lex).is_empty());
        assert!(split_outcomes("or and/or", &lex).is_empty());
        let got = split_outcomes("fines or losses and delays", &lex);
        assert_eq!(got.len(), 2);
        assert_eq!(got[1].as_str(), "losses and delays");
    }

    #[test]
    fn lexicon_validation() {
        assert!(ExtractionLexicon::new(["In"], ["causing"], ["or"]).is_err());
        assert!(ExtractionLexicon::new(["causing"], ["causing"], ["or"]).is_err());
        assert!(ExtractionLexicon::new(["in"], [""], ["or"]).is_err());
        let lex = ExtractionLexicon::from_toml_str(
            "connectors = [\"in\"]\ncausal_markers = [\"causing\"]\noutcome_splitters = [\"or\"]\n",
        )
        .unwrap();
        assert_eq!(lex.connectors(), &["in".to_string()]);
        assert!(ExtractionLexicon::from_toml_str("connectors = []\nbogus = 1\n").is_err());
    }

    #[test]
    fn repository_plain_and_jsonl() {
        let plain = "First risk causing loss\n\n  Second risk  \n";
        let recs = parse_risk_repository(plain, "risks.txt").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id.as_str(), "R0001");
        assert_eq!(recs[1].id.as_str(), "R0002");
        assert_eq!(recs[1].raw_text, "Second risk");

        let jsonl = "{\"id\":\"a\",\"raw_text\":\"x causing y\",\"source_tag\":\"ops\"}\n{\"id\":\"b\",\"raw_text\":\"z\",\"source_tag\":\"\"}\n";
        let recs = parse_risk_repository(jsonl, "ignored").unwrap();
        assert_eq!(recs[0].id.as_str(), "a");
        assert_eq!(recs[0].source_tag, "ops");

        let bad = "{\"id\":\"a\",\"raw_text\":\"  \"}\n";
        assert!(parse_risk_repository(bad, "").is_err());
    }
}
