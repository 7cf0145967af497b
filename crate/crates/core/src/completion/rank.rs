use std::collections::HashSet;

use super::item::{CompletionItem, Provenance};

/// Rule items in their own order, then verified then unverified model items.
///
/// Duplicate texts keep the first item, so rule items win over model ones.
pub fn rank(items: Vec<CompletionItem>) -> Vec<CompletionItem> {
    let bucket = |i: &CompletionItem| match (i.provenance, i.verified) {
        (Provenance::Rule, _) => 0,
        (Provenance::Model, true) => 1,
        (Provenance::Model, false) => 2,
    };
    let mut ordered = items;
    ordered.sort_by_key(bucket);
    let mut seen = HashSet::new();
    ordered.retain(|i| seen.insert(i.text.clone()));
    let n = ordered.len();
    for (pos, item) in ordered.iter_mut().enumerate() {
        item.score = (n - pos) as f64;
    }
    ordered
}
