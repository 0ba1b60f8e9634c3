//! RSS 2.0 / RSS 1.0 / Atom parsing.

use chrono::{DateTime, Utc};
use roxmltree::{Document, Node, ParsingOptions};

use super::{NewsItem, ParseError, ParseErrorKind};

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text(node: Node<'_, '_>, name: &str) -> Option<String> {
    child(node, name)
        .map(|c| c.descendants().filter(|d| d.is_text()).filter_map(|d| d.text()).collect::<String>())
        .map(|t| t.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|t| !t.is_empty())
}

fn parse_date(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    DateTime::parse_from_rfc2822(raw)
        .or_else(|_| DateTime::parse_from_rfc3339(raw))
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

fn language_of(node: Node<'_, '_>) -> Option<String> {
    node.attributes()
        .find(|a| a.name() == "lang")
        .map(|a| a.value().trim().to_string())
        .filter(|l| !l.is_empty())
}

fn host_of(url: &str) -> String {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_string))
        .unwrap_or_default()
}

struct Context {
    feed_title: Option<String>,
    language: String,
}

/// Parse an RSS or Atom document into news items.
///
/// Malformed XML yields no items and exactly one error. Items without a
/// title or link are skipped and reported; the rest keep document order.
pub fn parse_feed(xml: &str) -> (Vec<NewsItem>, Vec<ParseError>) {
    let options = ParsingOptions { allow_dtd: true, ..ParsingOptions::default() };
    let doc = match Document::parse_with_options(xml, options) {
        Ok(doc) => doc,
        Err(e) => {
            return (
                Vec::new(),
                vec![ParseError::new(e.pos().row as usize, ParseErrorKind::MalformedXml, e.to_string())],
            )
        }
    };
    let root = doc.root_element();
    let line_of = |n: Node<'_, '_>| doc.text_pos_at(n.range().start).row as usize;
    let mut items = Vec::new();
    let mut errors = Vec::new();

    match root.tag_name().name() {
        "rss" | "RDF" => {
            let channel = child(root, "channel");
            let ctx = Context {
                feed_title: channel.and_then(|c| child_text(c, "title")),
                language: channel
                    .and_then(|c| child_text(c, "language"))
                    .unwrap_or_else(|| "und".to_string()),
            };
            // RSS 2.0 nests items in <channel>; RSS 1.0 puts them under the root.
            let parent = if root.tag_name().name() == "rss" { channel } else { Some(root) };
            for item in parent.into_iter().flat_map(|p| p.children()).filter(|c| c.is_element() && c.tag_name().name() == "item") {
                match rss_item(item, &ctx) {
                    Ok(news) => items.push(news),
                    Err((kind, reason)) => errors.push(ParseError::new(line_of(item), kind, reason)),
                }
            }
        }
        "feed" => {
            let ctx = Context {
                feed_title: child_text(root, "title"),
                language: language_of(root).unwrap_or_else(|| "und".to_string()),
            };
            for entry in root.children().filter(|c| c.is_element() && c.tag_name().name() == "entry") {
                match atom_entry(entry, &ctx) {
                    Ok(news) => items.push(news),
                    Err((kind, reason)) => errors.push(ParseError::new(line_of(entry), kind, reason)),
                }
            }
        }
        other => errors.push(ParseError::new(
            line_of(root),
            ParseErrorKind::NotAFeed,
            format!("unexpected root element <{other}>"),
        )),
    }
    (items, errors)
}

type ItemResult = Result<NewsItem, (ParseErrorKind, String)>;

fn rss_item(item: Node<'_, '_>, ctx: &Context) -> ItemResult {
    let title = child_text(item, "title").ok_or((ParseErrorKind::MissingTitle, "item has no title".to_string()))?;
    let link = child_text(item, "link")
        .or_else(|| {
            child(item, "guid")
                .filter(|g| g.attribute("isPermaLink") != Some("false"))
                .and_then(|_| child_text(item, "guid"))
        })
        .ok_or((ParseErrorKind::EmptyUrl, format!("item {title:?} has no link")))?;
    let published_at = child_text(item, "pubDate")
        .or_else(|| child_text(item, "date"))
        .and_then(|d| parse_date(&d));
    let source = child_text(item, "source")
        .or_else(|| ctx.feed_title.clone())
        .unwrap_or_else(|| host_of(&link));
    let mut news = NewsItem::new(title, link, source, published_at);
    news.language = ctx.language.clone();
    news.themes = item
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "category")
        .filter_map(|c| c.text().map(|t| t.trim().to_string()))
        .filter(|t| !t.is_empty())
        .collect();
    Ok(news)
}

fn atom_entry(entry: Node<'_, '_>, ctx: &Context) -> ItemResult {
    let title = child_text(entry, "title").ok_or((ParseErrorKind::MissingTitle, "entry has no title".to_string()))?;
    let links: Vec<Node> = entry
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "link")
        .collect();
    let link = links
        .iter()
        .find(|l| matches!(l.attribute("rel"), None | Some("alternate")))
        .or(links.first())
        .and_then(|l| l.attribute("href"))
        .map(|h| h.trim().to_string())
        .filter(|h| !h.is_empty())
        .ok_or((ParseErrorKind::EmptyUrl, format!("entry {title:?} has no link")))?;
    let published_at = child_text(entry, "updated")
        .or_else(|| child_text(entry, "published"))
        .and_then(|d| parse_date(&d));
    let source = child(entry, "source")
        .and_then(|s| child_text(s, "title"))
        .or_else(|| ctx.feed_title.clone())
        .unwrap_or_else(|| host_of(&link));
    let mut news = NewsItem::new(title, link, source, published_at);
    news.language = language_of(entry).unwrap_or_else(|| ctx.language.clone());
    news.themes = entry
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "category")
        .filter_map(|c| c.attribute("term").map(|t| t.trim().to_string()))
        .filter(|t| !t.is_empty())
        .collect();
    Ok(news)
}
