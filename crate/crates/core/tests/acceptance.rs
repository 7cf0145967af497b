//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines print under a plain `cargo test`.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use datawise_core::config::EngineConfig;
use datawise_core::context::{profile_table, sample_values, ContextLevel, ProfileOptions, Sortedness};
use datawise_core::frame::{DataTable, Dtype, OpKind, Value};
use datawise_core::preview::{preview_statement, PreviewBody, PreviewForm, PreviewResult};
use datawise_core::script::{detect_with, Cursor, OpClass, RuleSet};
use datawise_core::session::Session;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::{random_table, rng, Gen};

type Check = Result<String, String>;

fn session() -> Session {
    Session::with_model("acceptance", EngineConfig::default(), None)
}

fn cursor_at_end(cells: &[String]) -> Cursor {
    let last = cells.len() - 1;
    Cursor {
        cell: last,
        offset: cells[last].chars().count(),
    }
}

// ---------------------------------------------------------------- corpus

fn labeling_corpus() -> Check {
    let corpus = common::corpus();
    let rules = RuleSet::builtin();
    let kinds: BTreeSet<&str> = corpus.iter().filter_map(|s| s.operator.as_deref()).collect();
    if kinds.len() != OpKind::ALL.len() {
        return Err(format!("{} of {} operator kinds covered", kinds.len(), OpKind::ALL.len()));
    }
    let mut slowest = Duration::ZERO;
    let mut wrong = Vec::new();
    for s in &corpus {
        let start = Instant::now();
        let ctx = detect_with(&s.code, rules);
        slowest = slowest.max(start.elapsed());
        let mode = serde_json::to_value(ctx.mode).unwrap();
        if ctx.operator.map(|o| o.as_str()) != s.operator.as_deref() || ctx.missing_slots != s.missing || mode != s.mode.as_str() {
            wrong.push(s.code.clone());
        }
    }
    if !wrong.is_empty() {
        return Err(format!("disagreements: {wrong:?}"));
    }
    if slowest >= Duration::from_millis(10) {
        return Err(format!("slowest snippet {slowest:?}"));
    }
    Ok(format!("{} snippets, 100% agreement, slowest {slowest:?} (< 10 ms)", corpus.len()))
}

// ---------------------------------------------------------- single token

/// Column labels offered at the end of `partial`, by the full pipeline.
fn offered_columns(s: &Session, partial: &str) -> BTreeSet<String> {
    let cells = vec![partial.to_string()];
    s.complete(&cells, cursor_at_end(&cells), false)
        .items
        .iter()
        .map(|i| i.label.clone())
        .collect()
}

fn prefix_scan(table: &DataTable, prefix: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for name in table.column_names() {
        if name.len() >= prefix.len() && name.as_bytes()[..prefix.len()] == *prefix.as_bytes() {
            out.insert(name.to_string());
        }
    }
    out
}

fn single_token_exactness() -> Check {
    let mut s = session();
    let df = DataTable::from_columns(
        "df",
        [("A", vec![Value::Int(1)]), ("Country", vec!["x".into()]), ("Cases", vec![Value::Int(2)]), ("cost", vec![Value::Int(3)]), ("B", vec![Value::Int(4)])],
    )
    .unwrap();
    s.bind_table("df", df.clone());
    let got = offered_columns(&s, "df.sort_values(by=\"C");
    let want = prefix_scan(&df, "C");
    if got != want {
        return Err(format!("fixture: got {got:?}, want {want:?}"));
    }
    let templates = [
        "df.sort_values(by=\"{p}",
        "df[df[\"{p}",
        "df[[\"{p}",
        "df.groupby(\"{p}",
        "df.drop_duplicates(subset=[\"{p}",
        "df.sort_values(by=[\"Rank\", \"{p}",
    ];
    let mut r = rng(42);
    let mut mismatches = Vec::new();
    for case in 0..50 {
        let mut s = session();
        let rows = r.random_range(1..6);
        let table = random_table(&mut r, "df", rows);
        s.bind_table("df", table.clone());
        let names = table.column_names();
        let base = names.choose(&mut r).unwrap();
        let cut = r.random_range(0..=base.chars().count().min(4));
        let mut prefix: String = base.chars().take(cut).collect();
        if r.random_bool(0.15) {
            prefix.push('Q');
        }
        let t = templates[case % templates.len()].replace("{p}", &prefix);
        let got = offered_columns(&s, &t);
        let want = prefix_scan(&table, &prefix);
        if got != want {
            mismatches.push(format!("{t}: got {got:?}, want {want:?}"));
        }
    }
    if mismatches.is_empty() {
        Ok("fixture exact; 50 randomized cases, 0 mismatches".into())
    } else {
        Err(format!("{} mismatches: {:?}", mismatches.len(), mismatches))
    }
}

// ----------------------------------------------------- context selection

fn context_selection() -> Check {
    let mut r = rng(3);
    let mut violations = Vec::new();
    let mut counts = [0usize; 3];
    let dataframe = [
        "{t}[",
        "{t}[{t}[\"{c}\"] == ",
        "{t}[{t}[\"{c}\"]",
        "{t}.sort_values(by=\"",
        "{t}.merge(",
        "{t}.groupby(\"",
        "{t}.head(",
        "{t}.rename(columns={\"",
        "{t}[[\"",
        "{t}.drop_duplicates(subset=[\"",
        "{t}[\"new\"] = ",
    ];
    let series = [
        "{t}[\"{c}\"].str.replace(",
        "{t}[\"{c}\"].str.replace(\"a\", ",
        "{t}[\"{c}\"].astype(",
        "{t}[\"{c}\"].fillna(",
        "{t}[\"{c}\"] = {t}[\"{c}\"].astype(\"",
    ];
    let unknown = ["x = ", "print(", "{t}.plot(", "foo = bar(", "{t}.describe(", "", "{t}.", "y = {t}"];
    for (class, templates) in [(OpClass::DataFrame, &dataframe[..]), (OpClass::Series, &series[..]), (OpClass::Others, &unknown[..])] {
        for i in 0..20 {
            let mut s = session();
            for name in ["sales", "stock"] {
                s.bind_table(name, random_table(&mut r, name, 12));
            }
            let t = *["sales", "stock"].choose(&mut r).unwrap();
            let cols: Vec<String> = s.env().get(t).unwrap().column_names().into_iter().map(String::from).collect();
            let c = cols.choose(&mut r).unwrap();
            let partial = templates[i % templates.len()].replace("{t}", t).replace("{c}", c);
            let cells = vec![partial.clone()];
            let done = s.complete(&cells, cursor_at_end(&cells), false);
            let ctx = &done.context;
            let levels = done.bundle.levels();
            let ok = match class {
                OpClass::Series => ctx.operator_class == OpClass::Series && !levels.is_empty() && levels.iter().all(|l| *l == ContextLevel::Column),
                OpClass::Others => ctx.operator.is_none() && levels == BTreeSet::from([ContextLevel::Table]),
                OpClass::DataFrame => ctx.operator_class == OpClass::DataFrame && levels.contains(&ContextLevel::Table),
            };
            counts[class as usize] += 1;
            if !ok {
                violations.push(format!("{class:?} {partial:?}: {:?} {levels:?}", ctx.operator));
            }
        }
    }
    if violations.is_empty() {
        Ok(format!("{}/{}/{} DataFrame/Series/unknown contexts, 0 violations", counts[0], counts[1], counts[2]))
    } else {
        Err(format!("{} violations: {violations:?}", violations.len()))
    }
}

// -------------------------------------------------------------- sampling

fn sampling_contract() -> Check {
    let mut r = rng(11);
    let opts = ProfileOptions::default();
    let mut over_cap = 0;
    let mut prefix_bad = Vec::new();
    let mut large_categorical = 0;
    for case in 0..60 {
        let rows = r.random_range(50..400);
        // Many distinct words, each repeated, so categorical columns exceed the cap.
        let words = r.random_range(5..150);
        let col: Vec<Value> = (0..rows)
            .map(|_| match r.random_range(0..10) {
                0 => Value::Null,
                _ => Value::str(format!("{}{}", ["Un", "Ug", "Th", "In"][r.random_range(0..4)], r.random_range(0..words))),
            })
            .collect();
        // Inference stops at the categorical threshold; a declared dtype does not.
        let dtype = if case % 2 == 0 { Dtype::Categorical } else { datawise_core::frame::classify_strings(&col, 50) };
        let column = datawise_core::frame::Column::new("v", dtype, col.clone()).unwrap();
        let table = DataTable::new("t", vec![column]).unwrap();
        let p = profile_table(&table, &opts);
        if p.columns[0].dtype == Dtype::Categorical && p.columns[0].cardinality > 50 {
            large_categorical += 1;
        }
        if p.columns[0].unique_values.len() > 50 || p.columns[0].value_frequency.len() > 50 {
            over_cap += 1;
        }
        let prefix = ["", "U", "Un", "Un1", "Th3", "Zz"][case % 6];
        let got = sample_values(&col, prefix, 50, 5);
        let mut oracle: Vec<Value> = Vec::new();
        for v in &col {
            if let Value::Str(s) = v {
                if s.starts_with(prefix) && !oracle.contains(v) {
                    oracle.push(v.clone());
                }
            }
        }
        let set: HashSet<&Value> = got.iter().collect();
        let exact = if oracle.len() <= 50 {
            got == oracle
        } else {
            got.len() == 50 && set.len() == 50 && got.iter().all(|v| oracle.contains(v))
        };
        if got.len() > 50 {
            over_cap += 1;
        }
        if !exact {
            prefix_bad.push(format!("case {case} prefix {prefix:?}"));
        }
    }
    let mut r = rng(12);
    let table = random_table(&mut r, "t", 300);
    let first = profile_table(&table, &opts);
    let values = table.columns()[0].values().to_vec();
    let sample = sample_values(&values, "", 50, 99);
    let stable = (0..10).all(|_| profile_table(&table, &opts) == first && sample_values(&values, "", 50, 99) == sample);
    if over_cap > 0 || !prefix_bad.is_empty() || !stable || large_categorical == 0 {
        return Err(format!(
            "over cap {over_cap}, prefix mismatches {prefix_bad:?}, stable {stable}, categorical columns above the cap {large_categorical}"
        ));
    }
    Ok(format!("60 columns ({large_categorical} categorical with > 50 distinct): cap held, prefix sets exact; 10 same-seed runs identical"))
}

// -------------------------------------------------------------- profiler

struct Oracle {
    nulls: usize,
    distinct: usize,
    min: Option<Value>,
    max: Option<Value>,
    sortedness: Sortedness,
}

/// One pass over the cells, written without the engine's helpers.
fn one_pass(values: &[Value], numeric: bool) -> Oracle {
    let mut nulls = 0;
    let mut seen: HashSet<String> = HashSet::new();
    let mut min: Option<Value> = None;
    let mut max: Option<Value> = None;
    let mut prev: Option<&Value> = None;
    let (mut up, mut down, mut comparable, mut present) = (true, true, true, 0);
    for v in values {
        if v.is_null() {
            nulls += 1;
            continue;
        }
        present += 1;
        seen.insert(format!("{}:{}", v.kind_name(), v.render()));
        if numeric {
            let x = v.as_f64().unwrap();
            if min.as_ref().is_none_or(|m| x < m.as_f64().unwrap()) {
                min = Some(v.clone());
            }
            if max.as_ref().is_none_or(|m| x > m.as_f64().unwrap()) {
                max = Some(v.clone());
            }
        }
        if let Some(p) = prev {
            let order = match (p, v) {
                (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
                (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
                (Value::Str(a), Value::Str(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
                (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
                _ => None,
            };
            match order {
                Some(std::cmp::Ordering::Less) => down = false,
                Some(std::cmp::Ordering::Greater) => up = false,
                Some(std::cmp::Ordering::Equal) => {}
                None => comparable = false,
            }
        }
        prev = Some(v);
    }
    let sortedness = if present < 2 || !comparable {
        Sortedness::None
    } else if up {
        Sortedness::Ascending
    } else if down {
        Sortedness::Descending
    } else {
        Sortedness::None
    };
    Oracle {
        nulls,
        distinct: seen.len(),
        min,
        max,
        sortedness,
    }
}

fn profiler_oracle() -> Check {
    let mut r = rng(5);
    let opts = ProfileOptions::default();
    let mut columns = 0;
    let mut bad = Vec::new();
    for t in 0..200 {
        let rows = r.random_range(0..30);
        let table = random_table(&mut r, "t", rows);
        let p = profile_table(&table, &opts);
        for (col, prof) in table.columns().iter().zip(&p.columns) {
            columns += 1;
            let numeric = col.dtype().is_numeric();
            let o = one_pass(col.values(), numeric);
            let range = prof.value_range.as_ref().map(|r| (r.min.clone(), r.max.clone()));
            let want_range = o.min.clone().zip(o.max.clone());
            if prof.null_count != o.nulls || prof.cardinality != o.distinct || prof.sortedness != o.sortedness || range != want_range {
                bad.push(format!("table {t} column {}", col.name()));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("200 tables, {columns} columns, all fields exact"))
    } else {
        Err(format!("{} mismatches: {bad:?}", bad.len()))
    }
}

// --------------------------------------------------------------- preview

const PREVIEW_ROWS: usize = 200;

fn fixture_tables() -> Vec<DataTable> {
    let movies = datawise_core::frame::load_csv(common::data("movies.csv"), "movies", &Default::default()).unwrap();
    let ratings = datawise_core::frame::load_csv(common::data("ratings.csv"), "ratings", &Default::default()).unwrap();
    let mut r = rng(21);
    let wide = |r: &mut ChaCha8Rng, name: &str, rows: usize| {
        let cols = [
            ("id", Gen::Unique, 0.0),
            ("Country", Gen::Word, 0.1),
            ("Deaths", Gen::Int, 0.1),
            ("rate", Gen::Float, 0.1),
            ("durationOfTime", Gen::Minutes, 0.05),
        ];
        let columns = cols
            .iter()
            .map(|(n, g, nr)| datawise_core::frame::Column::from_values(*n, common::gen_values(r, *g, rows, *nr)).unwrap())
            .collect();
        DataTable::with_rows(name, columns, rows).unwrap()
    };
    vec![movies, ratings, wide(&mut r, "big", 260), wide(&mut r, "small", 30)]
}

fn quote(s: &str) -> String {
    datawise_core::frame::quote(s)
}

fn some_value(r: &mut ChaCha8Rng, values: &[Value]) -> Value {
    let present: Vec<&Value> = values.iter().filter(|v| !v.is_null()).collect();
    (*present.choose(r).expect("column has values")).clone()
}

/// A fully filled statement of the requested form over the fixture tables.
fn gen_statement(r: &mut ChaCha8Rng, tables: &[DataTable], form: PreviewForm) -> String {
    let t = tables.choose(r).unwrap();
    let n = t.name();
    let text: Vec<&str> = t.columns().iter().filter(|c| c.dtype().is_text()).map(|c| c.name()).collect();
    let numeric: Vec<&str> = t.columns().iter().filter(|c| c.dtype().is_numeric()).map(|c| c.name()).collect();
    let all = t.column_names();
    let col = |name: &str| format!("{n}[{}]", quote(name));
    match form {
        PreviewForm::ColumnDiff => match r.random_range(0..4) {
            0 => {
                let c = *text.choose(r).unwrap();
                let v = some_value(r, t.column(c).unwrap().values()).render();
                let chars: Vec<char> = v.chars().collect();
                let start = r.random_range(0..chars.len());
                let len = r.random_range(1..=3.min(chars.len() - start));
                let pattern: String = if r.random_bool(0.3) { " minutes".into() } else { chars[start..start + len].iter().collect() };
                let repl = *["", "X", " min"].choose(r).unwrap();
                format!("{} = {}.str.replace({}, {})", col(c), col(c), quote(&pattern), quote(repl))
            }
            1 => {
                let c = *all.choose(r).unwrap();
                let fill = match t.column(c).unwrap().dtype() {
                    Dtype::Integer => "0".to_string(),
                    Dtype::Float => "0.5".to_string(),
                    Dtype::Boolean => "False".to_string(),
                    _ => quote("none"),
                };
                format!("{} = {}.fillna({fill})", col(c), col(c))
            }
            2 => match numeric.choose(r) {
                Some(c) => format!("{} = {}.astype({})", col(c), col(c), quote(["float", "str"].choose(r).unwrap())),
                None => {
                    let c = text.choose(r).unwrap();
                    format!("{} = {}.astype(\"str\")", col(c), col(c))
                }
            },
            _ => match numeric.choose(r) {
                Some(c) => {
                    let d = numeric.choose(r).unwrap();
                    let op = ["+", "-", "*"].choose(r).unwrap();
                    format!("{} = {} {op} {}", col(c), col(c), col(d))
                }
                None => {
                    let c = text.choose(r).unwrap();
                    format!("{} = {}.str.replace(\"a\", \"A\")", col(c), col(c))
                }
            },
        },
        PreviewForm::RowFilter => {
            let cond = |r: &mut ChaCha8Rng| -> String {
                let c = *all.choose(r).unwrap();
                let values = t.column(c).unwrap().values();
                let dtype = t.column(c).unwrap().dtype();
                if dtype.is_numeric() {
                    let v = some_value(r, values);
                    let cmp = ["==", "!=", ">", ">=", "<", "<="].choose(r).unwrap();
                    format!("{} {cmp} {}", col(c), v.literal())
                } else if dtype.is_text() {
                    match r.random_range(0..3) {
                        0 => format!("{} == {}", col(c), some_value(r, values).literal()),
                        1 => format!("{}.isin([{}, {}])", col(c), some_value(r, values).literal(), some_value(r, values).literal()),
                        _ => {
                            let v = some_value(r, values).render();
                            let sub: String = v.chars().take(2).collect();
                            format!("{}.str.contains({})", col(c), quote(&sub))
                        }
                    }
                } else {
                    format!("{} == True", col(c))
                }
            };
            let pred = match r.random_range(0..4) {
                0 => format!("({}) & ({})", cond(r), cond(r)),
                1 => format!("({}) | ({})", cond(r), cond(r)),
                2 => format!("~({})", cond(r)),
                _ => cond(r),
            };
            format!("{n}[{pred}]")
        }
        PreviewForm::TablePair => {
            let c = *all.choose(r).unwrap();
            match r.random_range(0..9) {
                0 => format!("{n}.sort_values(by={}, ascending={})", quote(c), ["True", "False"].choose(r).unwrap()),
                1 => format!("{n}.head({})", r.random_range(0..25)),
                2 => format!("{n}.drop_duplicates(subset=[{}])", quote(c)),
                3 => format!("{n}.rename(columns={{{}: \"renamed\"}})", quote(c)),
                4 => {
                    let picked: Vec<String> = all.choose_multiple(r, 2.min(all.len())).map(|c| quote(c)).collect();
                    format!("{n}[[{}]]", picked.join(", "))
                }
                5 => match (text.choose(r), numeric.choose(r)) {
                    (Some(k), Some(v)) => format!("{n}.groupby({})[[{}]].{}()", quote(k), quote(v), ["sum", "mean", "count", "max"].choose(r).unwrap()),
                    _ => format!("{n}.groupby({}).count()", quote(c)),
                },
                6 => match r.random_range(0..3) {
                    0 => "movies.merge(ratings, left_on=\"netflixTitle\", right_on=\"title\")".into(),
                    1 => "big.merge(small, on=\"id\")".into(),
                    _ => "small.merge(big, on=\"Country\", how=\"left\")".into(),
                },
                7 => ["pd.concat([big, small])", "pd.concat([small, big])", "pd.concat([movies, ratings])"].choose(r).unwrap().to_string(),
                _ => match numeric.choose(r) {
                    Some(v) => format!("{n}.assign(fresh={} * 2)", col(v)),
                    None => format!("{n}.assign(fresh={})", col(c)),
                },
            }
        }
    }
}

fn rows_of(t: &DataTable, limit: usize) -> Vec<Vec<Value>> {
    (0..t.n_rows().min(limit)).map(|i| t.row(i)).collect()
}

/// Compares a preview with executing its statement on the computation sample.
fn check_preview(stmt: &str, tables: &[DataTable], form: PreviewForm) -> Result<(), String> {
    let mut env_session = session();
    let mut sample_session = session();
    for t in tables {
        env_session.bind_table(t.name(), t.clone());
        sample_session.bind_table(t.name(), t.head(PREVIEW_ROWS));
    }
    let before = env_session.env().clone();
    let p: PreviewResult = preview_statement(stmt, env_session.env(), PREVIEW_ROWS);
    if env_session.env().version() != before.version() {
        return Err("preview changed the environment".into());
    }
    if p.form() != Some(form) {
        return Err(format!("form {:?}, want {form:?}: {p:?}", p.form()));
    }
    let column_statement = form == PreviewForm::ColumnDiff;
    let run = if column_statement { stmt.to_string() } else { format!("oracle_result = {stmt}") };
    let source_name = stmt.split(['[', '.']).next().unwrap().trim().to_string();
    let source = sample_session.env().get(&source_name).cloned();
    sample_session.execute_cell(0, &run).map_err(|e| format!("full execution failed: {}", e.message))?;
    let result = if column_statement {
        sample_session.env().get(&source_name).unwrap().clone()
    } else {
        sample_session.env().get("oracle_result").unwrap().clone()
    };
    let truncated = tables.iter().any(|t| stmt.contains(t.name()) && t.n_rows() > PREVIEW_ROWS);
    match &p.body {
        PreviewBody::ColumnDiff { column, original, new, changed, rows } => {
            let source = source.unwrap();
            let want_original = source.column(column).unwrap().values();
            let want_new = result.column(column).unwrap().values();
            if original != want_original || new != want_new {
                return Err("column values differ from execution".into());
            }
            let want_changed: Vec<bool> = want_original
                .iter()
                .zip(want_new)
                .map(|(a, b)| a.kind_name() != b.kind_name() || a.render() != b.render())
                .collect();
            if *changed != want_changed {
                return Err("changed mask differs".into());
            }
            if rows.rows != rows_of(&source, PREVIEW_ROWS) {
                return Err("context rows differ".into());
            }
        }
        PreviewBody::RowFilter { deleted, rows, kept, .. } => {
            let source = source.unwrap();
            let deleted: HashSet<usize> = deleted.iter().copied().collect();
            let survivors: Vec<Vec<Value>> = (0..source.n_rows()).filter(|i| !deleted.contains(i)).map(|i| source.row(i)).collect();
            if survivors != rows_of(&result, usize::MAX) || *kept != result.n_rows() {
                return Err("surviving rows differ from execution".into());
            }
            if rows.rows != rows_of(&source, PREVIEW_ROWS) {
                return Err("source rows differ".into());
            }
        }
        PreviewBody::TablePair { result: shown, result_rows, .. } => {
            if shown.rows != rows_of(&result, PREVIEW_ROWS) || *result_rows != result.n_rows() {
                return Err("result rows differ from execution".into());
            }
            let cols: Vec<&str> = shown.columns.iter().map(String::as_str).collect();
            if cols != result.column_names() {
                return Err("result columns differ".into());
            }
        }
        PreviewBody::Diagnostic { message, .. } => return Err(format!("diagnostic: {message}")),
    }
    let whole = matches!(stmt, s if s.contains("merge") || s.contains("concat") || s.contains("sort_values") || s.contains("groupby") || s.contains("drop_duplicates"));
    if p.sample_based != (truncated && whole) {
        return Err(format!("sample_based {} with truncated input {truncated}", p.sample_based));
    }
    Ok(())
}

fn preview_oracle() -> Check {
    let start = Instant::now();
    let tables = fixture_tables();
    let mut r = rng(8);
    let forms = [PreviewForm::ColumnDiff, PreviewForm::RowFilter, PreviewForm::TablePair];
    let mut failures = Vec::new();
    let cases = 150;
    for i in 0..cases {
        let form = forms[i % 3];
        let stmt = gen_statement(&mut r, &tables, form);
        if let Err(e) = check_preview(&stmt, &tables, form) {
            failures.push(format!("{stmt}: {e}"));
        }
    }
    let elapsed = start.elapsed();
    if !failures.is_empty() {
        return Err(format!("{} of {cases} failed: {failures:?}", failures.len()));
    }
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{cases} cases, 50 per form, all equal to full execution on the sample, {elapsed:.2?} (< 60 s)"))
}

// ---------------------------------------------------------------- replay

fn walkthrough_replay() -> Check {
    let cfg = EngineConfig::load(common::data("walkthrough.toml")).map_err(|e| e.to_string())?;
    let mut session = Session::new("s1", cfg).map_err(|e| e.to_string())?;
    let script = std::fs::read_to_string(common::data("walkthrough_session.ndjson")).unwrap();
    let lines: Vec<String> = script.lines().flat_map(|l| session.handle_line(l)).collect();
    let transcript = lines.join("\n") + "\n";
    let golden = std::fs::read_to_string(common::data("walkthrough_golden.ndjson")).unwrap();
    if transcript != golden {
        return Err("transcript differs from the golden file".into());
    }
    let frames: Vec<serde_json::Value> = lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    let anchored = frames
        .iter()
        .any(|f| f["type"] == "highlight_update" && f["payload"]["highlight"]["anchored_columns"][0]["column"] == "durationOfTime");
    let mask = frames.iter().any(|f| {
        f["type"] == "preview_update"
            && f["payload"]["preview"]["form"] == "column_diff"
            && f["payload"]["preview"]["changed"].as_array().is_some_and(|c| c.iter().any(|b| b == true))
    });
    if !anchored || !mask {
        return Err(format!("anchored column {anchored}, changed mask {mask}"));
    }
    Ok(format!("{} frames byte-identical; anchored column and changed-cell mask present", frames.len()))
}

// ------------------------------------------------------------ end to end

const TASK: &str = r#"import pandas as pd
movies = pd.read_csv("movies.csv")
ratings = pd.read_csv("ratings.csv")
# %%
joined = movies.merge(ratings, left_on="netflixTitle", right_on="title")
joined = joined[["netflixTitle", "nf_type", "durationOfTime", "imdbScore", "votes"]]
# %%
films = joined[joined["nf_type"] == "Movie"]
films["durationOfTime"] = films["durationOfTime"].str.replace(" minutes", "")
films["durationOfTime"] = films["durationOfTime"].astype("int")
# %%
films = films.sort_values(by="imdbScore", ascending=False)
top = films.head(5)
"#;

fn end_to_end() -> Check {
    let cfg = EngineConfig {
        data_dir: common::data(""),
        ..EngineConfig::default()
    };
    let mut s = Session::with_model("task", cfg, None);
    let cells = Session::split_cells(TASK);
    let mut statements = 0;
    for (i, cell) in cells.iter().enumerate() {
        let report = s.execute_cell(i, cell).map_err(|e| format!("cell {i}: {}", e.message))?;
        statements += report.statements;
        if s.profiles().version() != s.env().version() || report.profiles_version != report.env_version {
            return Err(format!("cell {i}: profiles at {} but env at {}", s.profiles().version(), s.env().version()));
        }
        for name in s.env().names() {
            let table = s.env().get(name).unwrap();
            let profile = s.profiles().get(name).ok_or(format!("no profile for {name}"))?;
            if profile.table.shape != [table.n_rows(), table.n_cols()] {
                return Err(format!("stale profile for {name}"));
            }
        }
    }
    let films = s.env().get("films").unwrap();
    if films.column("durationOfTime").unwrap().dtype() != Dtype::Integer || s.env().get("top").unwrap().n_rows() == 0 {
        return Err("unexpected final tables".into());
    }
    Ok(format!("{} cells, {statements} statements, 0 errors; versions equal after every cell", cells.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 8] = [
        ("labeling corpus", labeling_corpus),
        ("single-token exactness", single_token_exactness),
        ("context selection", context_selection),
        ("sampling contract", sampling_contract),
        ("profiler oracle", profiler_oracle),
        ("preview oracle equivalence", preview_oracle),
        ("walkthrough replay", walkthrough_replay),
        ("end-to-end task", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
