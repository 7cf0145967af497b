//! Replays the movie walkthrough through the protocol and compares the
//! transcript with the recorded golden file. `UPDATE_GOLDEN=1` rewrites it.

use std::path::PathBuf;

use datawise_core::config::EngineConfig;
use datawise_core::session::Session;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run() -> Vec<String> {
    let cfg = EngineConfig::load(data("walkthrough.toml")).unwrap();
    // The server names its first session `s1`; the stdio replay relies on it.
    let mut session = Session::new("s1", cfg).unwrap();
    let script = std::fs::read_to_string(data("walkthrough_session.ndjson")).unwrap();
    // Array lines are batches; a newer request in a batch supersedes older ones.
    script.lines().flat_map(|line| session.handle_line(line)).collect()
}

fn frames(lines: &[String]) -> Vec<Value> {
    lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn transcript_matches_golden() {
    let transcript = run().join("\n") + "\n";
    let golden = data("walkthrough_golden.ndjson");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &transcript).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).expect("golden transcript recorded");
    assert!(transcript == expected, "transcript differs from {}", golden.display());
}

#[test]
fn replay_is_deterministic() {
    assert_eq!(run(), run());
}

#[test]
fn walkthrough_milestones() {
    let out = frames(&run());
    let of = |seq: u64, kind: &str| -> Vec<&Value> {
        out.iter().filter(|f| f["seq"] == seq && f["type"] == kind).collect()
    };

    let merge = of(2, "completion_response")[0];
    let texts: Vec<&str> = merge["payload"]["items"].as_array().unwrap().iter().map(|i| i["text"].as_str().unwrap()).collect();
    assert!(texts.contains(&", left_on=\"netflixTitle\", right_on=\"title\")"));

    let joined = of(5, "state_snapshot")[0];
    assert_eq!(joined["payload"]["report"]["bound"][0], "joined");
    let shape = &joined["payload"]["profiles"]["profiles"]["joined"]["table"]["shape"];
    assert_eq!(shape[1], 14);

    assert_eq!(of(6, "completion_response")[0]["superseded"], true);
    assert_eq!(of(7, "completion_response")[0]["superseded"], false);

    let anchored = &of(8, "highlight_update")[0]["payload"]["highlight"];
    assert_eq!(anchored["highlight_columns"][1]["column"], "durationOfTime");
    assert_eq!(anchored["anchored_columns"][0]["column"], "durationOfTime");
    let swapped = &of(9, "highlight_update")[0]["payload"]["highlight"];
    assert_eq!(swapped["highlight_columns"][1]["column"], "nf_type");
    assert_eq!(swapped["anchored_columns"].as_array().unwrap().len(), 0);
    // Refocusing the same item repeats the update byte for byte.
    assert_eq!(
        of(9, "highlight_update")[0]["payload"].to_string(),
        of(10, "highlight_update")[0]["payload"].to_string()
    );

    let preview = &of(14, "preview_update")[0]["payload"]["preview"];
    assert_eq!(preview["form"], "column_diff");
    let original = preview["original"].as_array().unwrap();
    let new = preview["new"].as_array().unwrap();
    let changed = preview["changed"].as_array().unwrap();
    for ((o, n), c) in original.iter().zip(new).zip(changed) {
        let o = o.as_str().unwrap();
        assert_eq!(n.as_str().unwrap(), o.replace(" minutes", ""));
        assert_eq!(c.as_bool().unwrap(), o.contains(" minutes"));
    }
    let identity = &of(13, "preview_update")[0]["payload"]["preview"];
    assert!(identity["changed"].as_array().unwrap().iter().all(|c| c == false));

    let done = of(16, "state_snapshot")[0];
    assert_eq!(done["payload"]["report"]["updated"][0], "joined2");
    assert_eq!(of(17, "error")[0]["payload"]["tag"], "stale_list");
    let last = of(18, "state_snapshot")[0];
    assert_eq!(last["payload"]["env_version"], last["payload"]["profiles_version"]);
}
