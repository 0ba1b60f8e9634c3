//! Flat match reports for export.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::MatchReport;
use crate::extraction::RiskId;
use crate::newsfeed::NewsItem;

/// One exported match. `score` is rounded to four decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub risk_id: RiskId,
    pub rank: usize,
    pub score: f64,
    pub news_id: String,
    pub headline: String,
    pub url: String,
    pub source: String,
    pub published_at: Option<String>,
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Rows in report order (risks in input order, then rank). Results whose
/// news id is not in `news` are skipped.
pub fn report_rows(report: &MatchReport, news: &[NewsItem]) -> Vec<ReportRow> {
    let by_id: HashMap<&str, &NewsItem> = news.iter().map(|n| (n.id.as_str(), n)).collect();
    report
        .all_results()
        .filter_map(|r| {
            let item = by_id.get(r.news_id.as_str())?;
            Some(ReportRow {
                risk_id: r.risk_id.clone(),
                rank: r.rank,
                score: round4(r.score),
                news_id: r.news_id.clone(),
                headline: item.headline.clone(),
                url: item.url.clone(),
                source: item.source.clone(),
                published_at: item.published_at.map(|d| d.to_rfc3339()),
            })
        })
        .collect()
}

pub fn write_jsonl<W: Write>(rows: &[ReportRow], mut out: W) -> io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace(['\n', '\r'], " ")
}

pub fn write_markdown<W: Write>(rows: &[ReportRow], mut out: W) -> io::Result<()> {
    writeln!(out, "| risk | rank | score | headline | source | published | url |")?;
    writeln!(out, "|---|---:|---:|---|---|---|---|")?;
    for r in rows {
        writeln!(
            out,
            "| {} | {} | {:.4} | {} | {} | {} | {} |",
            cell(&r.risk_id.0),
            r.rank,
            r.score,
            cell(&r.headline),
            cell(&r.source),
            r.published_at.as_deref().unwrap_or(""),
            cell(&r.url),
        )?;
    }
    Ok(())
}
