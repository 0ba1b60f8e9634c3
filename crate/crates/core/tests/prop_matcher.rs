mod common;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;

use riskradar::embedding::{
    cosine, EmbedError, EmbeddingCache, EmbeddingProvider, EmbeddingVector, EncoderConfig, HashingEncoder,
};
use riskradar::matcher::{
    match_all, match_risk, report_rows, write_jsonl, write_markdown, MatchConfig, MatchReport, QueryMode, RiskEntry,
};
use riskradar::newsfeed::{build_keywords, default_stopwords, matches_keywords, NewsItem};

const VOCAB: &[&str] = &[
    "cyber", "attacks", "cyber-attacks", "retail", "banking", "customer", "data", "trade", "war", "china",
    "escalation", "employee", "misconduct", "technology", "infrastructure", "failure", "reputational", "revenues",
    "garden", "festival", "weather", "harvest", "museum", "river", "loss",
];

fn item() -> impl Strategy<Value = NewsItem> {
    (prop::collection::vec(prop::sample::select(VOCAB), 1..6), 0u32..40, prop::option::of(0i64..5)).prop_map(
        |(words, n, day)| {
            let at: Option<DateTime<Utc>> = day.map(|d| Utc.timestamp_opt(1_572_000_000 + d * 86_400, 0).unwrap());
            NewsItem::new(words.join(" "), format!("https://n.example/{n}"), "n", at)
        },
    )
}

fn mode() -> impl Strategy<Value = QueryMode> {
    prop::sample::select(vec![QueryMode::FullText, QueryMode::TriggerOnly, QueryMode::TriggerPlusOutcome])
}

fn encoder() -> HashingEncoder {
    HashingEncoder::new(EncoderConfig::default()).unwrap()
}

/// Brute force: score every distinct item, keep those at or above the
/// threshold, sort by an explicit key and take the first `top_k`.
fn oracle(entry: &RiskEntry, corpus: &[NewsItem], config: &MatchConfig, allowed: impl Fn(&NewsItem) -> bool) -> Vec<(String, f64)> {
    let enc = encoder();
    let query = riskradar::matcher::build_query(entry, config.mode).unwrap();
    let q = enc.embed_one(&query).unwrap();
    let mut seen = HashSet::new();
    let mut scored: Vec<(f64, i64, String)> = Vec::new();
    for item in corpus {
        if !seen.insert(item.id.clone()) || !allowed(item) {
            continue;
        }
        let s = cosine(&q, &enc.embed_one(&item.headline).unwrap()).unwrap();
        if s >= config.threshold {
            let ts = item.published_at.map_or(i64::MIN, |t| t.timestamp());
            scored.push((s, ts, item.id.clone()));
        }
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    scored.into_iter().take(config.top_k).map(|(s, _, id)| (id, s)).collect()
}

fn ids(results: &[riskradar::matcher::MatchResult]) -> Vec<String> {
    results.iter().map(|r| r.news_id.clone()).collect()
}

struct Counting {
    inner: HashingEncoder,
    texts: AtomicUsize,
}

impl EmbeddingProvider for Counting {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        self.texts.fetch_add(texts.len(), Ordering::SeqCst);
        self.inner.embed_batch(texts)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranking_matches_brute_force(
        risk in 0usize..4,
        corpus in prop::collection::vec(item(), 0..60),
        threshold in -1.0f64..0.6,
        top_k in 1usize..15,
        mode in mode(),
    ) {
        let entry = &common::sample_entries()[risk];
        let config = MatchConfig { mode, threshold, top_k, keyword_prefilter: false, ..Default::default() };
        let got = match_risk(entry, &corpus, &encoder(), &config, &default_stopwords()).unwrap();
        let want = oracle(entry, &corpus, &config, |_| true);
        prop_assert_eq!(ids(&got), want.iter().map(|w| w.0.clone()).collect::<Vec<_>>());
        for (i, (r, w)) in got.iter().zip(&want).enumerate() {
            prop_assert_eq!(r.rank, i + 1);
            prop_assert!((r.score - w.1).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_threshold_gives_a_subset(
        risk in 0usize..4,
        corpus in prop::collection::vec(item(), 0..60),
        t1 in -1.0f64..0.8,
        delta in 0.0f64..0.5,
    ) {
        let entry = &common::sample_entries()[risk];
        let run = |threshold| {
            let config = MatchConfig { threshold, top_k: 1000, keyword_prefilter: false, ..Default::default() };
            ids(&match_risk(entry, &corpus, &encoder(), &config, &default_stopwords()).unwrap())
        };
        let (low, high) = (run(t1), run(t1 + delta));
        let low_set: HashSet<_> = low.iter().collect();
        prop_assert!(high.iter().all(|id| low_set.contains(id)));
        // the survivors keep their relative order
        let filtered: Vec<_> = low.iter().filter(|id| high.contains(id)).cloned().collect();
        prop_assert_eq!(filtered, high);
    }

    #[test]
    fn smaller_top_k_is_a_prefix(
        risk in 0usize..4,
        corpus in prop::collection::vec(item(), 0..60),
        k1 in 1usize..20,
        k2 in 1usize..20,
    ) {
        let entry = &common::sample_entries()[risk];
        let run = |top_k| {
            let config = MatchConfig { threshold: -1.0, top_k, keyword_prefilter: false, ..Default::default() };
            ids(&match_risk(entry, &corpus, &encoder(), &config, &default_stopwords()).unwrap())
        };
        let (small, large) = (run(k1.min(k2)), run(k1.max(k2)));
        prop_assert_eq!(&large[..small.len()], &small[..]);
    }

    #[test]
    fn prefilter_only_admits_keyword_hits(
        risk in 0usize..4,
        corpus in prop::collection::vec(item(), 0..60),
        mode in mode(),
    ) {
        let entry = &common::sample_entries()[risk];
        let stopwords = default_stopwords();
        let config = MatchConfig { mode, threshold: -1.0, top_k: 1000, ..Default::default() };
        let keys = build_keywords(entry.decomposition.as_ref().unwrap(), &stopwords, &config.keyword_fields).unwrap();
        let got = match_risk(entry, &corpus, &encoder(), &config, &stopwords).unwrap();
        let want = oracle(entry, &corpus, &config, |i| matches_keywords(i, &keys));
        prop_assert_eq!(ids(&got), want.into_iter().map(|w| w.0).collect::<Vec<_>>());
    }

    #[test]
    fn reports_ignore_corpus_order(
        corpus in prop::collection::vec(item(), 0..60),
        shuffle in Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()),
        prefilter in any::<bool>(),
    ) {
        let entries = common::sample_entries();
        let config = MatchConfig { threshold: 0.0, keyword_prefilter: prefilter, ..Default::default() };
        let render = |corpus: &[NewsItem]| {
            let cache = EmbeddingCache::new(384);
            let (report, _) = match_all(&entries, corpus, &encoder(), &config, &default_stopwords(), &cache).unwrap();
            let rows = report_rows(&report, corpus);
            let (mut a, mut b) = (Vec::new(), Vec::new());
            write_jsonl(&rows, &mut a).unwrap();
            write_markdown(&rows, &mut b).unwrap();
            (a, b)
        };
        // items sharing an id may differ in date; keep one so order cannot matter
        let mut seen = HashSet::new();
        let corpus: Vec<NewsItem> = corpus.into_iter().filter(|i| seen.insert(i.id.clone())).collect();
        let mut permuted = corpus.clone();
        // deterministic Fisher-Yates from the drawn seed
        let mut state = shuffle;
        for i in (1..permuted.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            permuted.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(render(&corpus), render(&permuted));
    }

    #[test]
    fn match_all_embeds_each_headline_once(
        corpus in prop::collection::vec(item(), 0..60),
        prefilter in any::<bool>(),
        mode in mode(),
    ) {
        let entries = common::sample_entries();
        let stopwords = default_stopwords();
        let config = MatchConfig { mode, threshold: -1.0, top_k: 1000, keyword_prefilter: prefilter, ..Default::default() };
        let provider = Counting { inner: encoder(), texts: AtomicUsize::new(0) };
        let cache = EmbeddingCache::new(384);
        let (report, stats) = match_all(&entries, &corpus, &provider, &config, &stopwords, &cache).unwrap();

        let hit: HashSet<&str> = report.all_results().map(|r| r.news_id.as_str()).collect();
        prop_assert_eq!(stats.newly_embedded, hit.len());
        prop_assert_eq!(cache.len(), hit.len());
        prop_assert_eq!(provider.texts.load(Ordering::SeqCst), hit.len() + entries.len());

        // same results as ranking each risk on its own
        for entry in &entries {
            let alone = match_risk(entry, &corpus, &encoder(), &config, &stopwords).unwrap();
            prop_assert_eq!(&report.get(&entry.record.id).unwrap().results, &alone);
        }

        // a warm cache embeds only the queries
        provider.texts.store(0, Ordering::SeqCst);
        let (again, stats) = match_all(&entries, &corpus, &provider, &config, &stopwords, &cache).unwrap();
        prop_assert_eq!(stats.newly_embedded, 0);
        prop_assert_eq!(provider.texts.load(Ordering::SeqCst), entries.len());
        prop_assert_eq!(again, report);
    }
}

#[test]
fn empty_report_renders_header_only() {
    let mut md = Vec::new();
    write_markdown(&report_rows(&MatchReport::default(), &[]), &mut md).unwrap();
    assert_eq!(String::from_utf8(md).unwrap().lines().count(), 2);
}
