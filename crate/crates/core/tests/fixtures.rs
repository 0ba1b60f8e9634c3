mod common;

use riskradar::newsfeed::{parse_gkg, GkgSchema};

/// Set RISKRADAR_REGEN_FIXTURES=1 to rewrite the GKG fixture.
#[test]
fn gkg_fixture_matches_generator() {
    let generated = common::generate_gkg_fixture();
    let path = common::fixtures().join("gkg_sample.csv");
    if std::env::var_os("RISKRADAR_REGEN_FIXTURES").is_some() {
        std::fs::write(&path, &generated).unwrap();
    }
    let shipped = std::fs::read_to_string(&path).unwrap();
    assert_eq!(shipped, generated, "fixture drifted from its generator");
}

#[test]
fn gkg_fixture_parses_cleanly() {
    let bytes = std::fs::read(common::fixtures().join("gkg_sample.csv")).unwrap();
    let parsed = parse_gkg(&bytes, &GkgSchema::default());
    assert_eq!(parsed.lines, 1000);
    assert_eq!(parsed.items.len(), 1000);
    assert!(parsed.errors.is_empty());
    let ids: std::collections::HashSet<_> = parsed.items.iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids.len(), 1000);
}

#[test]
fn sample_risks_fixture() {
    let records = common::sample_records();
    let texts: Vec<&str> = records.iter().map(|r| r.raw_text.as_str()).collect();
    assert_eq!(texts, common::SAMPLE_RISKS);
    assert_eq!(records[0].id.as_str(), "R0001");
}
