#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskradar::extraction::{decompose_risk, parse_risk_repository, ExtractionLexicon, RiskRecord};
use riskradar::matcher::RiskEntry;

pub const SAMPLE_RISKS: [&str; 4] = [
    "Cyber-attacks targeting the retail banking business causing a loss of customer data",
    "US - China trade war escalation affecting the corporate and investment banking business causing a decrease in revenues",
    "Employee misconduct in the investment banking business causing a reputational damage",
    "Technology infrastructure failure in the corporate and investment banking business causing a reputational damage and/or monetary loss",
];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn sample_records() -> Vec<RiskRecord> {
    let text = std::fs::read_to_string(fixtures().join("sample_risks.txt")).unwrap();
    parse_risk_repository(&text, "sample").unwrap()
}

pub fn sample_entries() -> Vec<RiskEntry> {
    let lexicon = ExtractionLexicon::default();
    sample_records()
        .into_iter()
        .map(|record| {
            let decomposition = decompose_risk(&record, &lexicon).ok();
            RiskEntry { record, decomposition }
        })
        .collect()
}

const BANKS: &[&str] = &["acme-bank", "northbank", "globex-financial", "union-trust", "harbor-capital"];
const DOMAINS: &[(&str, &str)] = &[
    ("reuters.com", "https://www.reuters.com/article/"),
    ("bbc.co.uk", "https://www.bbc.co.uk/news/"),
    ("ft.com", "https://www.ft.com/content/"),
    ("lemonde.fr", "https://www.lemonde.fr/economie/article/"),
    ("spiegel.de", "https://www.spiegel.de/wirtschaft/"),
    ("example-times.com", "https://example-times.com/"),
];
const RELEVANT: &[&[&str]] = &[
    &["hackers-launch-cyber-attacks-on-{bank}", "cyber-attack-exposes-customer-data-at-{bank}", "{bank}-retail-customers-hit-by-cyber-attacks", "wave-of-cyber-attacks-targets-retail-banks"],
    &["us-china-trade-war-escalates-as-tariffs-rise", "trade-war-escalation-weighs-on-{bank}-revenues", "china-retaliates-in-trade-war-with-us", "investment-banks-brace-for-trade-war-escalation"],
    &["employee-misconduct-probe-widens-at-{bank}", "{bank}-fires-traders-over-misconduct", "regulator-fines-{bank}-for-employee-misconduct", "misconduct-scandal-damages-{bank}-reputation"],
    &["technology-infrastructure-failure-causes-outage-at-{bank}", "{bank}-systems-failure-locks-out-customers", "it-infrastructure-failure-halts-trading-at-{bank}", "payments-outage-blamed-on-technology-failure"],
];
const SUBJECTS: &[&str] = &["city-council", "local-farmers", "national-team", "film-festival", "weather-service", "school-board", "museum", "startup", "orchestra", "olympic-committee", "health-ministry", "rail-operator"];
const VERBS: &[&str] = &["announces", "celebrates", "delays", "unveils", "wins", "postpones", "reviews", "opens", "plans", "launches"];
const OBJECTS: &[&str] = &["new-stadium", "summer-program", "record-harvest", "charity-gala", "flood-defences", "art-exhibition", "season-opener", "youth-scheme", "bridge-repairs", "heatwave-warning", "marathon-route", "library-expansion"];
const THEMES: &[&str] = &["ECON_TRADE", "TAX_FNCACT", "CYBER_ATTACK", "WB_1920_FINANCIAL_SECTOR", "SOC_GENERALCRIME", "EPU_ECONOMY", "MANMADE_DISASTER", "SPORTS", "ENV_WEATHER", "CULTURE"];

/// The 1,000-line GKG 2.1 fixture: 100 risk-related articles (25 per risk)
/// among 900 unrelated ones, all with distinct URLs.
pub fn generate_gkg_fixture() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(20191104);
    let mut out = String::new();
    for n in 0..1000usize {
        let (source, prefix) = *DOMAINS.choose(&mut rng).unwrap();
        let slug = if n % 10 == 0 {
            let risk = (n / 10) % 4;
            let template = *RELEVANT[risk].choose(&mut rng).unwrap();
            template.replace("{bank}", BANKS.choose(&mut rng).unwrap())
        } else {
            format!(
                "{}-{}-{}",
                SUBJECTS.choose(&mut rng).unwrap(),
                VERBS.choose(&mut rng).unwrap(),
                OBJECTS.choose(&mut rng).unwrap()
            )
        };
        let tail = match rng.random_range(0..3) {
            0 => format!("{slug}-{}", 100_000 + n),
            1 => format!("{slug}-{}.html", 100_000 + n),
            _ => format!("{}/{slug}", 2019_0000 + n),
        };
        let url = format!("{prefix}{tail}");
        let seconds = n * 60;
        let date = format!("20191104{:02}{:02}{:02}", seconds / 3600, (seconds / 60) % 60, seconds % 60);
        let count = rng.random_range(1..=3);
        let themes: Vec<&str> = THEMES.choose_multiple(&mut rng, count).copied().collect();
        let tone = rng.random_range(-800..800) as f64 / 100.0;
        let mut fields = vec![String::new(); 27];
        fields[0] = format!("{date}-{n}");
        fields[1] = date;
        fields[2] = "1".to_string();
        fields[3] = source.to_string();
        fields[4] = url;
        fields[7] = themes.join(";");
        fields[15] = format!("{tone:.2},{:.2},{:.2},0,0,0,{}", tone.abs(), tone.abs() / 2.0, 200 + n % 400);
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

/// Write a pipeline config into `dir` that points at the shipped fixtures
/// and keeps its store inside `dir`.
pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let fx = fixtures();
    let text = format!(
        "[paths]\nstore = \"store\"\nfixtures = \"{}\"\nrisks = \"{}\"\nlexicon = \"{}\"\n\n\
         [[source]]\nname = \"gkg\"\nkind = \"local_fixture\"\nlocator = \"gkg_sample.csv\"\n{extra}",
        fx.display(),
        fx.join("sample_risks.txt").display(),
        fx.join("lexicon.toml").display(),
    );
    let path = dir.join("riskradar.toml");
    std::fs::write(&path, text).unwrap();
    path
}
