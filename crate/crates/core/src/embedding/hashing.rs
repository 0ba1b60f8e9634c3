use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

pub const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
pub const FNV_PRIME: u64 = 1_099_511_628_211;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_continue(FNV_OFFSET_BASIS, bytes)
}

fn fnv1a64_continue(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Map a feature to a signed slot.
///
/// The hash is FNV-1a-64 over the 8 little-endian bytes of `seed` followed by
/// the UTF-8 bytes of `feature`. Bit 63 selects the sign.
pub fn hash_feature(feature: &str, seed: u64, dim: usize) -> (usize, f64) {
    let h = fnv1a64_continue(fnv1a64(&seed.to_le_bytes()), feature.as_bytes());
    let index = (h % dim as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfWeighting {
    Raw,
    Sublinear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub dim: usize,
    pub use_word_tokens: bool,
    pub use_char_trigrams: bool,
    pub tf_weighting: TfWeighting,
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 384,
            use_word_tokens: true,
            use_char_trigrams: true,
            tf_weighting: TfWeighting::Sublinear,
            hash_seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim < 8 {
            return Err(EmbedError::InvalidConfig(format!("dim must be >= 8, got {}", self.dim)));
        }
        if !self.use_word_tokens && !self.use_char_trigrams {
            return Err(EmbedError::InvalidConfig("no feature family enabled".into()));
        }
        Ok(())
    }
}

/// Features of `text` in text order: word runs (`w:`) first, then character
/// trigrams (`c:`) of the whitespace-collapsed lowercase text.
pub fn tokenize(text: &str, config: &EncoderConfig) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut features = Vec::new();
    if config.use_word_tokens {
        let is_word = |c: char| c.is_alphanumeric() || c == '-';
        features.extend(
            lower
                .split(|c: char| !is_word(c))
                .filter(|w| !w.is_empty())
                .map(|w| format!("w:{w}")),
        );
    }
    if config.use_char_trigrams {
        let collapsed: Vec<char> = lower.split_whitespace().collect::<Vec<_>>().join(" ").chars().collect();
        features.extend(collapsed.windows(3).map(|w| {
            let mut f = String::with_capacity(2 + 12);
            f.push_str("c:");
            f.extend(w);
            f
        }));
    }
    features
}

/// Natural log of `x >= 1` using only IEEE basic operations, so the result
/// is identical on every platform (libm `ln` is not guaranteed to be).
pub fn deterministic_ln(x: f64) -> f64 {
    assert!(x >= 1.0 && x.is_finite(), "deterministic_ln needs a finite x >= 1");
    let bits = x.to_bits();
    let mut exponent = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mut mantissa = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | 0x3ff0_0000_0000_0000);
    if mantissa > std::f64::consts::SQRT_2 {
        mantissa /= 2.0;
        exponent += 1;
    }
    // ln(m) = 2 * atanh(s), s = (m - 1) / (m + 1), |s| < 0.1716
    let s = (mantissa - 1.0) / (mantissa + 1.0);
    let s2 = s * s;
    let mut term = s;
    let mut sum = 0.0;
    for k in 0..16 {
        sum += term / f64::from(2 * k + 1);
        term *= s2;
    }
    exponent as f64 * std::f64::consts::LN_2 + 2.0 * sum
}

/// Embed one text with the hashing encoder.
///
/// Term frequencies are accumulated in first-occurrence order of each
/// feature, so the floating-point summation order is fixed.
pub fn embed(text: &str, config: &EncoderConfig) -> EmbeddingVector {
    let features = tokenize(text, config);
    let mut order: Vec<(&str, u32)> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(features.len());
    for f in &features {
        match seen.get(f.as_str()) {
            Some(&i) => order[i].1 += 1,
            None => {
                seen.insert(f.as_str(), order.len());
                order.push((f.as_str(), 1));
            }
        }
    }
    let mut acc = vec![0.0f64; config.dim];
    for (feature, tf) in order {
        let weight = match config.tf_weighting {
            TfWeighting::Raw => f64::from(tf),
            TfWeighting::Sublinear => 1.0 + deterministic_ln(f64::from(tf)),
        };
        let (index, sign) = hash_feature(feature, config.hash_seed, config.dim);
        acc[index] += sign * weight;
    }
    EmbeddingVector::normalized(&acc)
}

/// The built-in embedding provider.
#[derive(Debug, Clone, Default)]
pub struct HashingEncoder {
    config: EncoderConfig,
}

impl HashingEncoder {
    pub fn new(config: EncoderConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        Ok(HashingEncoder { config })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }
}

impl EmbeddingProvider for HashingEncoder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.par_iter().map(|t| embed(t, &self.config)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"w:trade"), 0xa9b48032_52e46382);
    }

    #[test]
    fn hash_feature_golden() {
        // seed 0 still prefixes eight zero bytes
        assert_eq!(hash_feature("w:trade", 0, 384), (162, -1.0));
        assert_eq!(hash_feature("w:war", 0, 384), (190, -1.0));
        assert_eq!(hash_feature("c:tra", 0, 384), (281, 1.0));
        assert_eq!(hash_feature("w:trade", 7, 384), (323, -1.0));
        assert_eq!(hash_feature("w:war", 7, 384), (251, 1.0));
    }

    #[test]
    fn tokenize_trade_war() {
        let f = tokenize("Trade war", &EncoderConfig::default());
        assert_eq!(
            f,
            vec!["w:trade", "w:war", "c:tra", "c:rad", "c:ade", "c:de ", "c:e w", "c: wa", "c:war"]
        );
        assert!(tokenize("", &EncoderConfig::default()).is_empty());
        assert_eq!(tokenize("Cyber", &EncoderConfig::default()), tokenize("cyber", &EncoderConfig::default()));
    }

    #[test]
    fn tokenize_families_and_hyphens() {
        let words_only = EncoderConfig { use_char_trigrams: false, ..Default::default() };
        assert_eq!(tokenize("US-China, trade!", &words_only), vec!["w:us-china", "w:trade"]);
        let grams_only = EncoderConfig { use_word_tokens: false, ..Default::default() };
        assert_eq!(tokenize("  ab   c ", &grams_only), vec!["c:ab ", "c:b c"]);
    }

    #[test]
    fn ln_matches_std_closely() {
        for n in 1..5000u32 {
            let x = f64::from(n);
            assert!((deterministic_ln(x) - x.ln()).abs() < 1e-13, "{n}");
        }
        assert_eq!(deterministic_ln(1.0), 0.0);
    }

    #[test]
    fn embed_unit_norm_and_sentinel() {
        let cfg = EncoderConfig::default();
        let v = embed("trade war escalation", &cfg);
        assert!((v.norm() - 1.0).abs() < 1e-4);
        assert_eq!(v, embed("trade war escalation", &cfg));
        let z = embed("", &cfg);
        assert!(z.is_sentinel());
        assert_eq!(z.dim(), 384);
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig { dim: 7, ..Default::default() }.validate().is_err());
        assert!(EncoderConfig { use_word_tokens: false, use_char_trigrams: false, ..Default::default() }
            .validate()
            .is_err());
        assert!(EncoderConfig::default().validate().is_ok());
    }
}
