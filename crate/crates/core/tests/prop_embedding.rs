use std::collections::HashSet;
use std::hash::Hasher;

use proptest::prelude::*;

use riskradar::embedding::{
    cosine, deterministic_ln, embed, hash_feature, tokenize, EmbeddingVector, EncoderConfig, TfWeighting,
};

/// Independent slot oracle built on the `fnv` crate.
fn oracle_slot(feature: &str, seed: u64, dim: usize) -> usize {
    let mut h = fnv::FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(feature.as_bytes());
    (h.finish() % dim as u64) as usize
}

fn words_only() -> EncoderConfig {
    EncoderConfig { use_char_trigrams: false, ..Default::default() }
}

proptest! {
    #[test]
    fn unit_norm_or_sentinel(text in "\\PC{0,80}", seed in 0u64..4, dim in 8usize..600) {
        let cfg = EncoderConfig { dim, hash_seed: seed, ..Default::default() };
        let v = embed(&text, &cfg);
        prop_assert_eq!(v.dim(), dim);
        if v.is_sentinel() {
            prop_assert!(tokenize(&text, &cfg).is_empty() || v.values().iter().all(|x| *x == 0.0));
        } else {
            prop_assert!((v.norm() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn cosine_symmetric_and_bounded(a in "\\PC{0,50}", b in "\\PC{0,50}") {
        let cfg = EncoderConfig::default();
        let (va, vb) = (embed(&a, &cfg), embed(&b, &cfg));
        let ab = cosine(&va, &vb).unwrap();
        prop_assert_eq!(ab, cosine(&vb, &va).unwrap());
        prop_assert!(ab.abs() <= 1.0 + 1e-6);
    }

    #[test]
    fn slots_match_oracle(feature in "\\PC{0,20}", seed in any::<u64>(), dim in 1usize..5000) {
        prop_assert_eq!(hash_feature(&feature, seed, dim).0, oracle_slot(&feature, seed, dim));
    }

    #[test]
    fn accumulation_order_does_not_matter(text in "[a-z ]{0,60}") {
        let cfg = EncoderConfig { tf_weighting: TfWeighting::Sublinear, ..Default::default() };
        let features = tokenize(&text, &cfg);
        let mut counts: Vec<(String, u32)> = Vec::new();
        for f in &features {
            match counts.iter_mut().find(|(g, _)| g == f) {
                Some((_, n)) => *n += 1,
                None => counts.push((f.clone(), 1)),
            }
        }
        counts.reverse();
        let mut acc = vec![0.0f64; cfg.dim];
        for (f, tf) in counts {
            let (i, sign) = hash_feature(&f, cfg.hash_seed, cfg.dim);
            acc[i] += sign * (1.0 + deterministic_ln(f64::from(tf)));
        }
        let reversed = EmbeddingVector::normalized(&acc);
        let forward = embed(&text, &cfg);
        for (x, y) in forward.values().iter().zip(reversed.values()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    /// B and C have the same number of distinct words and B shares strictly
    /// more of them with A. Equal lengths keep the norms comparable.
    #[test]
    fn more_shared_words_score_higher(
        pool in prop::collection::hash_set("[a-z]{3,9}", 24),
        len in 3usize..8,
        shared_c in 0usize..3,
        extra in 1usize..3,
    ) {
        let pool: Vec<String> = pool.into_iter().collect();
        let shared_b = shared_c + extra;
        prop_assume!(shared_b <= len);
        let a: Vec<&str> = pool[..len].iter().map(String::as_str).collect();
        let fresh = &pool[len..];
        let b: Vec<&str> = a[..shared_b].iter().copied().chain(fresh[..len - shared_b].iter().map(String::as_str)).collect();
        let c: Vec<&str> = a[..shared_c].iter().copied().chain(fresh[8..8 + len - shared_c].iter().map(String::as_str)).collect();

        let cfg = words_only();
        let involved: HashSet<&str> = a.iter().chain(&b).chain(&c).copied().collect();
        let slots: HashSet<usize> = involved.iter().map(|w| oracle_slot(&format!("w:{w}"), cfg.hash_seed, cfg.dim)).collect();
        prop_assume!(slots.len() == involved.len());

        let (va, vb, vc) = (embed(&a.join(" "), &cfg), embed(&b.join(" "), &cfg), embed(&c.join(" "), &cfg));
        prop_assert!(cosine(&va, &vb).unwrap() > cosine(&va, &vc).unwrap());
    }
}
