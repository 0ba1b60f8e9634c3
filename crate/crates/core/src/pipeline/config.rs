//! TOML pipeline configuration.
//!
//! ```toml
//! [paths]
//! store = "store"                # created if absent
//! fixtures = "fixtures"          # base for relative source locators
//! risks = "risks.txt"            # optional; ingested by `run`
//! lexicon = "lexicon.toml"       # optional
//! stopwords = "stopwords.txt"    # optional
//! gkg_schema = "gkg.toml"        # optional
//!
//! [encoder]
//! dim = 384
//!
//! [match]
//! threshold = 0.35
//!
//! [[source]]
//! name = "gkg"
//! kind = "local_fixture"
//! locator = "gkg_sample.csv"
//!
//! [serve]
//! addr = "127.0.0.1:8080"
//! poll_interval_secs = 900
//!
//! [provider]                     # optional remote embedder
//! endpoint = "http://localhost:9000/embed"
//! model = "all-minilm"
//! dim = 384
//! ```
//!
//! Relative paths resolve against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::sha256_hex;
use crate::embedding::{EncoderConfig, RemoteConfig};
use crate::matcher::MatchConfig;
use crate::newsfeed::SourceDescriptor;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("config {path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub store: PathBuf,
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    #[serde(default)]
    pub risks: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub gkg_schema: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub addr: String,
    pub poll_interval_secs: Option<u64>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { addr: "127.0.0.1:8080".to_string(), poll_interval_secs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default, rename = "match")]
    pub matching: MatchConfig,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceDescriptor>,
    #[serde(default)]
    pub serve: ServeConfig,
    #[serde(default)]
    pub provider: Option<RemoteConfig>,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    digest: String,
}

impl PipelineConfig {
    /// Parse without touching the filesystem; relative paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let invalid = |reason: String| ConfigError::Invalid { path: base_dir.to_path_buf(), reason };
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.digest = sha256_hex(serde_json::to_string(&config).expect("config serializes").as_bytes());
        config.encoder.validate().map_err(|e| invalid(e.to_string()))?;
        config.matching.validate().map_err(|e| invalid(e.to_string()))?;
        let mut names = std::collections::HashSet::new();
        for s in &config.sources {
            if !names.insert(s.name.as_str()) {
                return Err(invalid(format!("duplicate source name {:?}", s.name)));
            }
        }
        if let Some(p) = &config.provider {
            if p.dim == 0 {
                return Err(invalid("provider dim must be positive".into()));
            }
        }
        Ok(config)
    }

    /// Load and check that every referenced local file exists.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let config = Self::from_toml_str(&text, base).map_err(|e| match e {
            ConfigError::Invalid { reason, .. } => ConfigError::Invalid { path: path.to_path_buf(), reason },
            other => other,
        })?;
        config.check_files().map_err(|reason| ConfigError::Invalid { path: path.to_path_buf(), reason })?;
        Ok(config)
    }

    fn check_files(&self) -> Result<(), String> {
        let optional = [
            ("paths.risks", &self.paths.risks),
            ("paths.lexicon", &self.paths.lexicon),
            ("paths.stopwords", &self.paths.stopwords),
            ("paths.gkg_schema", &self.paths.gkg_schema),
        ];
        for (key, p) in optional {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(format!("{key}: {} does not exist", full.display()));
                }
            }
        }
        let fixtures = self.fixtures_dir();
        if !fixtures.is_dir() {
            return Err(format!("paths.fixtures: {} is not a directory", fixtures.display()));
        }
        for s in self.sources.iter().filter(|s| !s.is_remote()) {
            let full = s.local_path(Some(&fixtures));
            if !full.is_file() {
                return Err(format!("source {:?}: {} does not exist", s.name, full.display()));
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn store_dir(&self) -> PathBuf {
        self.resolve(&self.paths.store)
    }

    /// Base directory for relative source locators: `paths.fixtures`, else
    /// the config directory.
    pub fn fixtures_dir(&self) -> PathBuf {
        self.paths.fixtures.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| self.base_dir.clone())
    }

    pub fn source(&self, name: &str) -> Option<&SourceDescriptor> {
        self.sources.iter().find(|s| s.name == name)
    }

    /// sha256 of the parsed configuration.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Identifies the embedding function; the embedding cache is discarded
    /// when it changes.
    pub fn embedder_digest(&self) -> String {
        let text = match &self.provider {
            Some(p) => format!("remote|{}|{}|{}", p.endpoint, p.model, p.dim),
            None => serde_json::to_string(&self.encoder).expect("encoder config serializes"),
        };
        sha256_hex(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_and_defaults() {
        let c = PipelineConfig::from_toml_str("[paths]\nstore = \"s\"\n", Path::new("/base")).unwrap();
        assert_eq!(c.store_dir(), PathBuf::from("/base/s"));
        assert_eq!(c.matching.threshold, 0.35);
        assert_eq!(c.encoder.dim, 384);
        assert!(c.sources.is_empty());
        assert_eq!(c.digest().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "[paths]\nstore = \"s\"\nbogus = 1\n",
            "[paths]\nstore = \"s\"\n[match]\nthreshhold = 0.3\n",
            "[paths]\nstore = \"s\"\n[encoder]\nsize = 3\n",
            "[paths]\nstore = \"s\"\n[extra]\n",
        ] {
            assert!(PipelineConfig::from_toml_str(text, Path::new(".")).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::from_toml_str("[paths]\nstore = \"s\"\n[match]\ntop_k = 0\n", Path::new(".")).is_err());
        let dup = "[paths]\nstore = \"s\"\n[[source]]\nname = \"a\"\nkind = \"rss_url\"\nlocator = \"http://x\"\n[[source]]\nname = \"a\"\nkind = \"rss_url\"\nlocator = \"http://y\"\n";
        assert!(PipelineConfig::from_toml_str(dup, Path::new(".")).is_err());
    }

    #[test]
    fn missing_files_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[paths]\nstore = \"s\"\nlexicon = \"nope.toml\"\n").unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(ConfigError::Invalid { .. })));
        std::fs::write(&path, "[paths]\nstore = \"s\"\n[[source]]\nname = \"g\"\nkind = \"local_fixture\"\nlocator = \"g.csv\"\n").unwrap();
        assert!(PipelineConfig::load(&path).is_err());
        std::fs::write(dir.path().join("g.csv"), "").unwrap();
        assert!(PipelineConfig::load(&path).is_ok());
    }

    #[test]
    fn digest_tracks_content() {
        let a = PipelineConfig::from_toml_str("[paths]\nstore = \"s\"\n", Path::new(".")).unwrap();
        let b = PipelineConfig::from_toml_str("[paths]\nstore = \"s\"\n[match]\ntop_k = 5\n", Path::new(".")).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.embedder_digest(), b.embedder_digest());
    }
}
