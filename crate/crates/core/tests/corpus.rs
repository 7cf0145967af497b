//! Hand-labeled partial statements against the detector.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use datawise_core::frame::OpKind;
use datawise_core::script::{detect_with, RuleSet};

#[test]
fn corpus_is_broad_enough() {
    let corpus = common::corpus();
    assert!(corpus.len() >= 40);
    let kinds: BTreeSet<&str> = corpus.iter().filter_map(|s| s.operator.as_deref()).collect();
    for kind in OpKind::ALL {
        assert!(kinds.contains(kind.as_str()), "no snippet for {kind}");
    }
    let modes: BTreeSet<&str> = corpus.iter().map(|s| s.mode.as_str()).collect();
    assert_eq!(modes, BTreeSet::from(["in_signature", "pattern"]));
    for tag in ["nested", "chained", "multiline"] {
        assert!(corpus.iter().any(|s| s.tags.iter().any(|t| t == tag)), "no {tag} snippet");
    }
}

#[test]
fn labels_agree_with_detector() {
    let rules = RuleSet::builtin();
    let mut slowest = Duration::ZERO;
    for s in common::corpus() {
        let start = Instant::now();
        let ctx = detect_with(&s.code, rules);
        slowest = slowest.max(start.elapsed());
        assert_eq!(ctx.operator.map(|o| o.as_str()), s.operator.as_deref(), "operator of {:?}", s.code);
        assert_eq!(serde_json::to_value(ctx.mode).unwrap(), s.mode.as_str(), "mode of {:?}", s.code);
        assert_eq!(ctx.missing_slots, s.missing, "missing slots of {:?}", s.code);
    }
    assert!(slowest < Duration::from_millis(10), "slowest snippet took {slowest:?}");
}
