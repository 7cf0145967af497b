//! Seeded sampling of distinct column values.

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::frame::Value;

/// Default cap on sampled values.
pub const DEFAULT_SAMPLE_CAP: usize = 50;

/// FNV-1a, used to give each column its own stream under one session seed.
pub fn stream_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

/// Distinct non-null values in first-occurrence order.
pub fn distinct_values(values: &[Value]) -> Vec<&Value> {
    let mut seen = HashSet::new();
    values.iter().filter(|v| !v.is_null() && seen.insert(*v)).collect()
}

/// Picks at most `cap` items, keeping their relative order. Deterministic for a seed.
pub fn sample_ordered<T: Clone>(items: &[T], cap: usize, seed: u64) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, items.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// Distinct values whose rendering starts with `prefix`, at most `cap` of them.
pub fn sample_values(values: &[Value], prefix: &str, cap: usize, seed: u64) -> Vec<Value> {
    let cap = cap.max(1);
    let matching: Vec<Value> = distinct_values(values)
        .into_iter()
        .filter(|v| v.render().starts_with(prefix))
        .cloned()
        .collect();
    sample_ordered(&matching, cap, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<Value> {
        v.iter().map(|s| Value::str(*s)).collect()
    }

    #[test]
    fn prefix_filter() {
        let col = strs(&["United States", "US", "Unified", "US"]);
        let got = sample_values(&col, "Uni", 50, 1);
        assert_eq!(got, strs(&["United States", "Unified"]));
        assert!(sample_values(&col, "zz", 50, 1).is_empty());
    }

    #[test]
    fn cap_applies_to_distinct_values() {
        let col: Vec<Value> = (0..200).map(|i| Value::Int(i)).collect();
        let got = sample_values(&col, "", 50, 9);
        assert_eq!(got.len(), 50);
        assert!(got.iter().all(|v| col.contains(v)));
        assert_eq!(got, sample_values(&col, "", 50, 9));
    }

    #[test]
    fn nulls_are_never_sampled() {
        assert!(sample_values(&[Value::Null, Value::Null], "", 5, 0).is_empty());
    }
}
