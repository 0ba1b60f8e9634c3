//! GDELT Global Knowledge Graph (GKG 2.1) records.
//!
//! A GKG file is tab-delimited, one record per line, 27 columns. Only a
//! handful of columns matter here; their positions live in [`GkgSchema`] so
//! codebook drift can be handled in configuration.

use chrono::{NaiveDateTime, TimeZone, Utc};
use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};

use super::{NewsItem, ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkgField {
    RecordId,
    Date,
    SourceName,
    DocumentUrl,
    Themes,
    Tone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GkgIndices {
    pub record_id: usize,
    pub date: usize,
    pub source_name: usize,
    pub document_url: usize,
    pub themes: usize,
    pub tone: usize,
}

/// Column layout of a GKG file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GkgSchema {
    pub field_count: usize,
    pub index_of: GkgIndices,
}

impl Default for GkgSchema {
    /// GKG 2.1 codebook: GKGRECORDID (0), V2.1DATE (1),
    /// V2SOURCECOMMONNAME (3), V2DOCUMENTIDENTIFIER (4), V1THEMES (7),
    /// V1.5TONE (15), 27 columns in total.
    fn default() -> Self {
        GkgSchema {
            field_count: 27,
            index_of: GkgIndices {
                record_id: 0,
                date: 1,
                source_name: 3,
                document_url: 4,
                themes: 7,
                tone: 15,
            },
        }
    }
}

impl GkgSchema {
    pub fn index_of(&self, field: GkgField) -> usize {
        let i = &self.index_of;
        match field {
            GkgField::RecordId => i.record_id,
            GkgField::Date => i.date,
            GkgField::SourceName => i.source_name,
            GkgField::DocumentUrl => i.document_url,
            GkgField::Themes => i.themes,
            GkgField::Tone => i.tone,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let i = &self.index_of;
        let all = [i.record_id, i.date, i.source_name, i.document_url, i.themes, i.tone];
        if let Some(bad) = all.iter().find(|&&x| x >= self.field_count) {
            return Err(format!("index {bad} out of range for {} fields", self.field_count));
        }
        let mut sorted = all.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err("schema indices must be distinct".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let schema: GkgSchema = toml::from_str(text).map_err(|e| e.to_string())?;
        schema.validate()?;
        Ok(schema)
    }
}

/// Parse one GKG record (no trailing newline). `line_no` is 1-based and
/// only used for error reporting.
pub fn parse_gkg_line(line: &str, line_no: usize, schema: &GkgSchema) -> Result<NewsItem, ParseError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != schema.field_count {
        return Err(ParseError::new(
            line_no,
            ParseErrorKind::WrongFieldCount,
            format!("expected {} fields, found {}", schema.field_count, fields.len()),
        ));
    }
    let field = |f: GkgField| fields[schema.index_of(f)].trim();

    let raw_date = field(GkgField::Date);
    let published_at = parse_gkg_date(raw_date).ok_or_else(|| {
        ParseError::new(line_no, ParseErrorKind::BadTimestamp, format!("unparseable date {raw_date:?}"))
    })?;

    let url = field(GkgField::DocumentUrl);
    if url.is_empty() {
        return Err(ParseError::new(line_no, ParseErrorKind::EmptyUrl, "document url is empty"));
    }
    let headline = headline_from_url(url);
    if headline.is_empty() {
        return Err(ParseError::new(line_no, ParseErrorKind::EmptyUrl, "no headline derivable from url"));
    }

    let mut source = field(GkgField::SourceName).to_string();
    if source.is_empty() {
        source = url_host(url).unwrap_or_default();
    }
    let mut themes: Vec<String> = Vec::new();
    for theme in field(GkgField::Themes).split(';').map(str::trim).filter(|t| !t.is_empty()) {
        if !themes.iter().any(|t| t == theme) {
            themes.push(theme.to_string());
        }
    }
    let tone = field(GkgField::Tone)
        .split(',')
        .next()
        .and_then(|t| t.trim().parse::<f64>().ok())
        .filter(|t| t.is_finite());

    let mut item = NewsItem::new(headline, url, source, Some(published_at));
    item.themes = themes;
    item.tone = tone;
    Ok(item)
}

fn parse_gkg_date(raw: &str) -> Option<chrono::DateTime<Utc>> {
    if raw.len() != 14 || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let naive = NaiveDateTime::parse_from_str(raw, "%Y%m%d%H%M%S").ok()?;
    Some(Utc.from_utc_datetime(&naive))
}

/// Result of parsing a whole GKG payload.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GkgParse {
    pub items: Vec<NewsItem>,
    pub errors: Vec<ParseError>,
    pub lines: usize,
}

/// Parse a GKG payload. Never fails: every line becomes either an item or
/// an error, so `items.len() + errors.len() == lines`. Invalid UTF-8 is
/// replaced rather than rejected.
pub fn parse_gkg(bytes: &[u8], schema: &GkgSchema) -> GkgParse {
    let mut out = GkgParse::default();
    if bytes.is_empty() {
        return out;
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    for (i, raw) in body.split(|b| *b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = String::from_utf8_lossy(raw);
        out.lines += 1;
        match parse_gkg_line(&line, i + 1, schema) {
            Ok(item) => out.items.push(item),
            Err(e) => out.errors.push(e),
        }
    }
    out
}

const WEB_EXTENSIONS: [&str; 12] =
    ["html", "htm", "shtml", "php", "asp", "aspx", "jsp", "cms", "cfm", "ece", "xml", "amp"];

fn url_host(url: &str) -> Option<String> {
    url::Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_string))
}

fn final_segment(url: &str) -> String {
    let path = match url::Url::parse(url) {
        Ok(u) => u.path().to_string(),
        Err(_) => url.split(['?', '#']).next().unwrap_or("").to_string(),
    };
    let segment = path.split('/').rev().find(|s| !s.is_empty()).unwrap_or("");
    percent_decode_str(segment).decode_utf8_lossy().into_owned()
}

fn slug_pass(segment: &str) -> String {
    let mut s = segment.to_lowercase();
    while let Some((stem, ext)) = s.rsplit_once('.') {
        if WEB_EXTENSIONS.contains(&ext) {
            s = stem.to_string();
        } else {
            break;
        }
    }
    s.split(|c: char| c == '-' || c == '_' || c.is_whitespace())
        .filter(|t| !t.is_empty() && !t.chars().all(|c| c.is_ascii_digit()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Derive a headline from an article URL slug.
///
/// Takes the last non-empty path segment, strips web file extensions, turns
/// hyphens and underscores into spaces, drops numeric-only tokens and
/// lowercases. Falls back to the host when nothing is left. The slug rules
/// are applied until stable, so feeding the result back in as a slug
/// reproduces it.
pub fn headline_from_url(url: &str) -> String {
    let mut headline = slug_pass(&final_segment(url));
    loop {
        let again = slug_pass(&headline.replace(' ', "-"));
        if again == headline {
            break;
        }
        headline = again;
    }
    if headline.is_empty() {
        url_host(url).unwrap_or_else(|| url.trim().to_string())
    } else {
        headline
    }
}
