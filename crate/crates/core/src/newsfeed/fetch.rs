//! Source fetching with size caps, retries and a per-host concurrency limit.

use std::collections::HashMap;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, OnceLock};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{locator}: {source}")]
    Io { locator: String, source: std::io::Error },
    #[error("network failure for {locator} after {attempts} attempt(s): {reason}")]
    Network { locator: String, attempts: u32, reason: String },
    #[error("{locator}: payload exceeds the {limit} byte cap")]
    SizeCap { locator: String, limit: u64 },
    #[error("{locator}: zip archive: {reason}")]
    Zip { locator: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// GKG file from a path or an http(s) URL; zip payloads are unwrapped.
    GdeltFile,
    RssUrl,
    /// Local file returned verbatim.
    LocalFixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDescriptor {
    pub name: String,
    pub kind: SourceKind,
    pub locator: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_bytes")]
    pub max_bytes: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> u64 {
    30
}
fn default_max_bytes() -> u64 {
    64 * 1024 * 1024
}
fn default_retries() -> u32 {
    3
}

impl SourceDescriptor {
    pub fn new(name: impl Into<String>, kind: SourceKind, locator: impl Into<String>) -> Self {
        SourceDescriptor {
            name: name.into(),
            kind,
            locator: locator.into(),
            timeout_secs: default_timeout(),
            max_bytes: default_max_bytes(),
            retries: default_retries(),
        }
    }

    pub fn is_remote(&self) -> bool {
        is_http(&self.locator)
    }

    /// Resolve a relative local locator against `base`.
    pub fn local_path(&self, base: Option<&Path>) -> PathBuf {
        let p = PathBuf::from(&self.locator);
        match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        }
    }
}

fn is_http(locator: &str) -> bool {
    locator.starts_with("http://") || locator.starts_with("https://")
}

/// Caps in-flight requests per host.
#[derive(Debug)]
pub struct HostLimiter {
    limit: usize,
    in_flight: Mutex<HashMap<String, usize>>,
    released: Condvar,
}

pub struct HostPermit<'a> {
    limiter: &'a HostLimiter,
    host: String,
}

impl Drop for HostPermit<'_> {
    fn drop(&mut self) {
        let mut map = self.limiter.in_flight.lock().expect("host limiter poisoned");
        if let Some(n) = map.get_mut(&self.host) {
            *n -= 1;
            if *n == 0 {
                map.remove(&self.host);
            }
        }
        self.limiter.released.notify_all();
    }
}

impl HostLimiter {
    pub fn new(limit: usize) -> Self {
        HostLimiter { limit: limit.max(1), in_flight: Mutex::new(HashMap::new()), released: Condvar::new() }
    }

    /// Process-wide limiter allowing two requests per host.
    pub fn global() -> &'static HostLimiter {
        static GLOBAL: OnceLock<HostLimiter> = OnceLock::new();
        GLOBAL.get_or_init(|| HostLimiter::new(2))
    }

    pub fn acquire(&self, host: &str) -> HostPermit<'_> {
        let mut map = self.in_flight.lock().expect("host limiter poisoned");
        while map.get(host).copied().unwrap_or(0) >= self.limit {
            map = self.released.wait(map).expect("host limiter poisoned");
        }
        *map.entry(host.to_string()).or_default() += 1;
        HostPermit { limiter: self, host: host.to_string() }
    }

    pub fn in_flight(&self, host: &str) -> usize {
        self.in_flight.lock().expect("host limiter poisoned").get(host).copied().unwrap_or(0)
    }
}

fn read_capped(mut reader: impl Read, locator: &str, limit: u64) -> Result<Vec<u8>, FetchError> {
    let mut buf = Vec::new();
    (&mut reader)
        .take(limit + 1)
        .read_to_end(&mut buf)
        .map_err(|source| FetchError::Io { locator: locator.to_string(), source })?;
    if buf.len() as u64 > limit {
        return Err(FetchError::SizeCap { locator: locator.to_string(), limit });
    }
    Ok(buf)
}

enum HttpAttempt {
    Retry(String),
    Fatal(FetchError),
}

fn http_get(desc: &SourceDescriptor, limiter: &HostLimiter) -> Result<Vec<u8>, FetchError> {
    let host = url::Url::parse(&desc.locator)
        .ok()
        .and_then(|u| u.host_str().map(str::to_string))
        .unwrap_or_default();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(desc.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let once = || -> Result<Vec<u8>, HttpAttempt> {
        let _permit = limiter.acquire(&host);
        let mut response = agent.get(&desc.locator).call().map_err(|e| HttpAttempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(HttpAttempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(HttpAttempt::Fatal(FetchError::Network {
                locator: desc.locator.clone(),
                attempts: 1,
                reason: format!("HTTP {status}"),
            }));
        }
        read_capped(response.body_mut().as_reader(), &desc.locator, desc.max_bytes).map_err(|e| match e {
            FetchError::Io { source, .. } => HttpAttempt::Retry(source.to_string()),
            other => HttpAttempt::Fatal(other),
        })
    };
    let mut attempt = 0;
    loop {
        match once() {
            Ok(bytes) => return Ok(bytes),
            Err(HttpAttempt::Fatal(e)) => return Err(e),
            Err(HttpAttempt::Retry(reason)) if attempt >= desc.retries => {
                return Err(FetchError::Network { locator: desc.locator.clone(), attempts: attempt + 1, reason })
            }
            Err(HttpAttempt::Retry(reason)) => {
                log::warn!("{}: attempt {} failed ({reason}), retrying", desc.locator, attempt + 1);
                thread::sleep(Duration::from_millis(200u64 << attempt.min(6)));
                attempt += 1;
            }
        }
    }
}

fn read_local(path: &Path, locator: &str, limit: u64) -> Result<Vec<u8>, FetchError> {
    let io = |source| FetchError::Io { locator: locator.to_string(), source };
    let file = std::fs::File::open(path).map_err(io)?;
    if file.metadata().map_err(io)?.len() > limit {
        return Err(FetchError::SizeCap { locator: locator.to_string(), limit });
    }
    read_capped(file, locator, limit)
}

fn unzip_single(bytes: Vec<u8>, locator: &str, limit: u64) -> Result<Vec<u8>, FetchError> {
    if !bytes.starts_with(b"PK\x03\x04") {
        return Ok(bytes);
    }
    let zip_err = |reason: String| FetchError::Zip { locator: locator.to_string(), reason };
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| zip_err(e.to_string()))?;
    if archive.len() != 1 {
        return Err(zip_err(format!("expected exactly one member, found {}", archive.len())));
    }
    let member = archive.by_index(0).map_err(|e| zip_err(e.to_string()))?;
    read_capped(member, locator, limit)
}

/// Fetch the raw payload of a source. Relative local paths resolve against
/// `base`.
pub fn fetch_source(
    desc: &SourceDescriptor,
    base: Option<&Path>,
    limiter: &HostLimiter,
) -> Result<Vec<u8>, FetchError> {
    let raw = if desc.is_remote() {
        http_get(desc, limiter)?
    } else {
        read_local(&desc.local_path(base), &desc.locator, desc.max_bytes)?
    };
    match desc.kind {
        SourceKind::GdeltFile => unzip_single(raw, &desc.locator, desc.max_bytes),
        SourceKind::RssUrl | SourceKind::LocalFixture => Ok(raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn zip_bytes(members: &[(&str, &[u8])]) -> Vec<u8> {
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = zip::ZipWriter::new(&mut cursor);
            for (name, data) in members {
                w.start_file(*name, zip::write::SimpleFileOptions::default()).unwrap();
                w.write_all(data).unwrap();
            }
            w.finish().unwrap();
        }
        cursor.into_inner()
    }

    #[test]
    fn local_fixture_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        std::fs::write(&path, b"a\tb\nc").unwrap();
        let desc = SourceDescriptor::new("f", SourceKind::LocalFixture, "f.txt");
        assert_eq!(fetch_source(&desc, Some(dir.path()), HostLimiter::global()).unwrap(), b"a\tb\nc");
    }

    #[test]
    fn zip_is_unwrapped_for_gdelt_files() {
        let dir = tempfile::tempdir().unwrap();
        let inner = b"line one\nline two\n".to_vec();
        std::fs::write(dir.path().join("g.zip"), zip_bytes(&[("g.csv", &inner)])).unwrap();
        let desc = SourceDescriptor::new("g", SourceKind::GdeltFile, "g.zip");
        assert_eq!(fetch_source(&desc, Some(dir.path()), HostLimiter::global()).unwrap(), inner);

        std::fs::write(dir.path().join("two.zip"), zip_bytes(&[("a", b"1"), ("b", b"2")])).unwrap();
        let desc = SourceDescriptor::new("g", SourceKind::GdeltFile, "two.zip");
        assert!(matches!(
            fetch_source(&desc, Some(dir.path()), HostLimiter::global()),
            Err(FetchError::Zip { .. })
        ));
    }

    #[test]
    fn size_cap() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("big"), vec![b'x'; 100]).unwrap();
        let mut desc = SourceDescriptor::new("b", SourceKind::LocalFixture, "big");
        desc.max_bytes = 99;
        assert!(matches!(
            fetch_source(&desc, Some(dir.path()), HostLimiter::global()),
            Err(FetchError::SizeCap { limit: 99, .. })
        ));
        desc.max_bytes = 100;
        assert_eq!(fetch_source(&desc, Some(dir.path()), HostLimiter::global()).unwrap().len(), 100);

        // the cap also applies to the decompressed member
        std::fs::write(dir.path().join("z.zip"), zip_bytes(&[("m", &[b'y'; 500])])).unwrap();
        let mut desc = SourceDescriptor::new("z", SourceKind::GdeltFile, "z.zip");
        desc.max_bytes = 400;
        assert!(matches!(
            fetch_source(&desc, Some(dir.path()), HostLimiter::global()),
            Err(FetchError::SizeCap { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let desc = SourceDescriptor::new("m", SourceKind::LocalFixture, "/nonexistent/riskradar/file");
        assert!(matches!(fetch_source(&desc, None, HostLimiter::global()), Err(FetchError::Io { .. })));
    }

    #[test]
    fn host_limiter_caps_concurrency() {
        let limiter = Arc::new(HostLimiter::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let current = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limiter, peak, current) = (limiter.clone(), peak.clone(), current.clone());
                thread::spawn(move || {
                    let _p = limiter.acquire("ex.com");
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(20));
                    current.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        let _other = limiter.acquire("other.com");
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(peak.load(Ordering::SeqCst), 2);
        assert_eq!(limiter.in_flight("ex.com"), 0);
        assert_eq!(limiter.in_flight("other.com"), 1);
    }
}
