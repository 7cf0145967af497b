//! Invariants checked over generated inputs.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use datawise_core::completion::{build_prompt, rank, CompletionItem, Provenance, Target};
use datawise_core::config::EngineConfig;
use datawise_core::context::sample_values;
use datawise_core::frame::Value;
use datawise_core::preview::preview_statement;
use datawise_core::script::{char_to_byte, detect_with, Cursor, RuleSet};
use datawise_core::session::Session;
use proptest::prelude::*;

const TABLES: [&str; 4] = ["df", "movies", "ratings", "joined"];

fn session_with_tables(seed: u64) -> Session {
    let mut r = common::rng(seed);
    let mut s = Session::with_model("prop", EngineConfig::default(), None);
    for name in TABLES {
        let rows = 1 + (seed as usize + name.len()) % 12;
        s.bind_table(name, common::random_table(&mut r, name, rows));
    }
    s
}

fn at_end(text: &str) -> (Vec<String>, Cursor) {
    let cells = vec![text.to_string()];
    let offset = text.chars().count();
    (cells, Cursor { cell: 0, offset })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn column_candidates_are_the_prefixed_columns(seed in any::<u64>(), pick in 0usize..16, cut in 0usize..4, template in 0usize..4) {
        let s = session_with_tables(seed);
        let table = s.env().get("df").unwrap();
        let names = table.column_names();
        let prefix: String = names[pick % names.len()].chars().take(cut).collect();
        let partial = ["df.sort_values(by=\"", "df[df[\"", "df[[\"", "df.groupby(\""][template].to_string() + &prefix;
        let (cells, cursor) = at_end(&partial);
        let got: BTreeSet<String> = s.complete(&cells, cursor, false).items.into_iter().map(|i| i.label).collect();
        let want: BTreeSet<String> = names.iter().filter(|n| n.starts_with(&prefix)).map(|n| n.to_string()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn ranking_drops_duplicates_and_orders_by_source(items in prop::collection::vec((0usize..6, any::<bool>(), any::<bool>()), 0..20)) {
        let items: Vec<CompletionItem> = items
            .into_iter()
            .map(|(t, model, verified)| {
                let mut i = CompletionItem::rule(format!("t{t}"), format!("t{t}"), Target::Code, 0);
                if model {
                    i.provenance = Provenance::Model;
                    i.verified = verified;
                }
                i
            })
            .collect();
        let distinct: HashSet<&str> = items.iter().map(|i| i.text.as_str()).collect();
        let ranked = rank(items.clone());
        let texts: HashSet<&str> = ranked.iter().map(|i| i.text.as_str()).collect();
        prop_assert_eq!(texts.len(), ranked.len());
        prop_assert_eq!(&texts, &distinct);
        let bucket = |i: &CompletionItem| match (i.provenance, i.verified) {
            (Provenance::Rule, _) => 0,
            (Provenance::Model, true) => 1,
            (Provenance::Model, false) => 2,
        };
        prop_assert!(ranked.windows(2).all(|w| bucket(&w[0]) <= bucket(&w[1])));
        prop_assert!(ranked.windows(2).all(|w| w[0].score > w[1].score));
    }

    #[test]
    fn prompts_depend_only_on_their_inputs(seed in any::<u64>(), pick in 0usize..57, budget in 200usize..8000) {
        let corpus = common::corpus();
        let snippet = &corpus[pick % corpus.len()].code;
        let s = session_with_tables(seed);
        let (cells, cursor) = at_end(snippet);
        let done = s.complete(&cells, cursor, false);
        let a = build_prompt("x = 1\n", &done.context, &done.bundle, budget, 2);
        let again = session_with_tables(seed).complete(&cells, cursor, false);
        let b = build_prompt("x = 1\n", &again.context, &again.bundle, budget, 2);
        prop_assert_eq!(a.render(), b.render());
        prop_assert!(a.code_context.contains(snippet.as_str()));
    }

    #[test]
    fn highlights_name_only_live_columns(seed in any::<u64>(), pick in 0usize..57, focus in 0usize..4) {
        let corpus = common::corpus();
        let snippet = &corpus[pick % corpus.len()].code;
        let s = session_with_tables(seed);
        let (cells, cursor) = at_end(snippet);
        let done = s.complete(&cells, cursor, false);
        let spec = done.highlight(Some(focus), s.env(), 3);
        for c in &spec.highlight_columns {
            let t = s.env().get(&c.table);
            prop_assert!(t.is_some_and(|t| t.column(&c.column).is_some()), "{c:?} is not live");
        }
        for t in &spec.expand_tables {
            prop_assert!(s.env().contains(t));
        }
        for a in &spec.anchored_columns {
            prop_assert!(spec.highlight_columns.contains(a));
        }
    }

    #[test]
    fn previews_leave_the_environment_alone(seed in any::<u64>(), pick in 0usize..8) {
        let s = session_with_tables(seed);
        let df = s.env().get("df").unwrap();
        let c = df.column_names()[0].to_string();
        let q = datawise_core::frame::quote(&c);
        let stmt = [
            format!("df[{q}] = df[{q}].fillna(0)"),
            format!("df[df[{q}] == 1]"),
            format!("df.sort_values(by={q})"),
            format!("df.merge(movies, on={q})"),
            format!("df[{q}] = df[{q}].str.replace(\"a\", \"b\")"),
            "pd.concat([df, joined])".to_string(),
            format!("x = df.rename(columns={{{q}: \"z\"}})"),
            "df.head(".to_string(),
        ][pick].clone();
        let version = s.env().version();
        let before: Vec<(String, Arc<_>)> = s.env().names().map(|n| (n.to_string(), s.env().get(n).unwrap().clone())).collect();
        let _ = preview_statement(&stmt, s.env(), 5);
        prop_assert_eq!(s.env().version(), version);
        for (name, table) in before {
            prop_assert_eq!(s.env().get(&name).unwrap(), &table);
        }
    }

    #[test]
    fn sampling_is_capped_filtered_and_seeded(
        values in prop::collection::vec(prop_oneof![Just(None), (0u8..40).prop_map(Some)], 0..300),
        prefix in "[a-c]{0,2}",
        cap in 1usize..60,
        seed in any::<u64>(),
    ) {
        let col: Vec<Value> = values
            .iter()
            .map(|v| v.map_or(Value::Null, |n| Value::str(format!("{}{}", ["a", "ab", "b", "ca"][n as usize % 4], n))))
            .collect();
        let got = sample_values(&col, &prefix, cap, seed);
        let mut oracle: Vec<&Value> = Vec::new();
        for v in &col {
            if v.as_str().is_some_and(|s| s.starts_with(&prefix)) && !oracle.contains(&v) {
                oracle.push(v);
            }
        }
        prop_assert!(got.len() <= cap);
        prop_assert_eq!(got.len(), oracle.len().min(cap));
        // Sampled values keep first-occurrence order.
        let positions: Vec<usize> = got.iter().map(|v| oracle.iter().position(|o| *o == v).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(sample_values(&col, &prefix, cap, seed), got);
    }

    #[test]
    fn detection_is_total_on_every_prefix(pick in 0usize..57, cut in 0usize..200) {
        let corpus = common::corpus();
        let code = &corpus[pick % corpus.len()].code;
        let prefix = &code[..char_to_byte(code, cut)];
        let rules = RuleSet::builtin();
        let ctx = detect_with(prefix, rules);
        if let Some(op) = ctx.operator {
            let slots = rules.slot_names(op);
            prop_assert!(ctx.missing_slots.iter().all(|m| slots.contains(&m.as_str())));
            prop_assert!(ctx.active_slot.iter().all(|a| slots.contains(&a.as_str())));
            prop_assert!(ctx.filled_slots.0.iter().all(|(k, _)| !ctx.missing_slots.contains(k)));
        } else {
            prop_assert!(ctx.missing_slots.is_empty());
        }
    }
}
