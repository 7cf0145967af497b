//! Table, column and row level profiles of a table.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::frame::{Column, DataTable, Dtype, Value};

use super::sample::{distinct_values, sample_ordered, stream_seed, DEFAULT_SAMPLE_CAP};

/// Numeric columns carry this many sampled points.
pub const SAMPLE_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sortedness {
    Ascending,
    Descending,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableProfile {
    pub name: String,
    /// `[n_rows, n_cols]`.
    pub shape: [usize; 2],
    pub column_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueRange {
    pub min: Value,
    pub max: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frequency {
    pub value: Value,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnProfile {
    pub table: String,
    pub name: String,
    pub dtype: Dtype,
    pub null_count: usize,
    pub sortedness: Sortedness,
    /// Distinct non-null values.
    pub cardinality: usize,
    /// Categorical columns only.
    pub unique_values: Vec<Value>,
    /// Categorical columns only; most frequent first.
    pub value_frequency: Vec<Frequency>,
    /// Text columns only.
    pub value_format: Option<String>,
    /// Numeric columns only.
    pub value_range: Option<ValueRange>,
    /// Numeric columns only.
    pub sample_points: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSample {
    pub table: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// All three context levels of one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableContexts {
    pub table: TableProfile,
    pub columns: Vec<ColumnProfile>,
    pub rows: RowSample,
}

impl TableContexts {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileOptions {
    pub seed: u64,
    pub cap: usize,
    pub display_rows: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            cap: DEFAULT_SAMPLE_CAP,
            display_rows: 15,
        }
    }
}

impl From<&crate::config::EngineConfig> for ProfileOptions {
    fn from(c: &crate::config::EngineConfig) -> Self {
        Self {
            seed: c.seed,
            cap: c.sample_cap,
            display_rows: c.display_rows,
        }
    }
}

pub fn profile_table(table: &DataTable, opts: &ProfileOptions) -> TableContexts {
    let names: Vec<String> = table.column_names().into_iter().map(str::to_string).collect();
    let n = opts.display_rows.min(table.n_rows());
    TableContexts {
        table: TableProfile {
            name: table.name().to_string(),
            shape: [table.n_rows(), table.n_cols()],
            column_names: names.clone(),
        },
        columns: table
            .columns()
            .iter()
            .map(|c| profile_column(table.name(), c, opts))
            .collect(),
        rows: RowSample {
            table: table.name().to_string(),
            columns: names,
            rows: (0..n).map(|i| table.row(i)).collect(),
        },
    }
}

pub fn profile_column(table: &str, column: &Column, opts: &ProfileOptions) -> ColumnProfile {
    let values = column.values();
    let seed = stream_seed(opts.seed, &format!("{table}\u{1f}{}", column.name()));
    let distinct = distinct_values(values);
    let dtype = column.dtype();
    let mut profile = ColumnProfile {
        table: table.to_string(),
        name: column.name().to_string(),
        dtype,
        null_count: column.null_count(),
        sortedness: sortedness(values),
        cardinality: distinct.len(),
        unique_values: Vec::new(),
        value_frequency: Vec::new(),
        value_format: None,
        value_range: None,
        sample_points: Vec::new(),
    };
    if dtype == Dtype::Categorical {
        let owned: Vec<Value> = distinct.iter().map(|v| (*v).clone()).collect();
        profile.unique_values = sample_ordered(&owned, opts.cap, seed);
        profile.value_frequency = frequencies(values, opts.cap);
    }
    if dtype.is_text() {
        let texts: Vec<&str> = distinct.iter().filter_map(|v| v.as_str()).collect();
        let sampled = sample_ordered(&texts, opts.cap, seed);
        profile.value_format = value_format(&sampled);
    }
    if dtype.is_numeric() {
        profile.value_range = range(values);
        let owned: Vec<Value> = distinct.iter().map(|v| (*v).clone()).collect();
        profile.sample_points = sample_ordered(&owned, SAMPLE_POINTS, seed);
    }
    profile
}

/// Direction of the non-null values. Fewer than two of them is `None`.
pub fn sortedness(values: &[Value]) -> Sortedness {
    let present: Vec<&Value> = values.iter().filter(|v| !v.is_null()).collect();
    if values.len() < 2 || present.len() < 2 {
        return Sortedness::None;
    }
    let mut asc = true;
    let mut desc = true;
    for w in present.windows(2) {
        match w[0].compare(w[1]) {
            Some(Ordering::Less) => desc = false,
            Some(Ordering::Greater) => asc = false,
            Some(Ordering::Equal) => {}
            None => return Sortedness::None,
        }
    }
    if asc {
        Sortedness::Ascending
    } else if desc {
        Sortedness::Descending
    } else {
        Sortedness::None
    }
}

fn range(values: &[Value]) -> Option<ValueRange> {
    let mut it = values.iter().filter(|v| !v.is_null());
    let first = it.next()?;
    let (mut min, mut max) = (first, first);
    for v in it {
        if v.compare(min) == Some(Ordering::Less) {
            min = v;
        }
        if v.compare(max) == Some(Ordering::Greater) {
            max = v;
        }
    }
    Some(ValueRange {
        min: min.clone(),
        max: max.clone(),
    })
}

/// Top `cap` values by count; ties keep first-occurrence order.
fn frequencies(values: &[Value], cap: usize) -> Vec<Frequency> {
    let mut counts: HashMap<&Value, (usize, usize)> = HashMap::new();
    for (i, v) in values.iter().enumerate().filter(|(_, v)| !v.is_null()) {
        counts.entry(v).or_insert((0, i)).0 += 1;
    }
    let mut entries: Vec<(&Value, (usize, usize))> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    entries
        .into_iter()
        .take(cap)
        .map(|(v, (count, _))| Frequency { value: v.clone(), count })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Piece<'a> {
    Digits,
    Word(&'a str),
    Lit(char),
}

fn pieces(s: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut chars = s.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_ascii_digit() {
            while chars.peek().is_some_and(|(_, c)| c.is_ascii_digit()) {
                chars.next();
            }
            out.push(Piece::Digits);
        } else if c.is_alphabetic() {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = chars.peek() {
                if !d.is_alphabetic() {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            out.push(Piece::Word(&s[i..end]));
        } else {
            out.push(Piece::Lit(c));
        }
    }
    out
}

fn skeleton(p: &[Piece<'_>]) -> String {
    p.iter()
        .map(|x| match x {
            Piece::Digits => "D+".to_string(),
            Piece::Word(_) => "L+".to_string(),
            Piece::Lit(c) => c.to_string(),
        })
        .collect()
}

/// Character-class template shared by most values, e.g. `D+ 'minutes'`.
///
/// Digit runs become `D+`, letter runs `L+`, other characters stay literal.
/// A letter run that is the same word in every value of the winning
/// template (of at least two values) is written as that quoted word.
pub fn value_format(values: &[&str]) -> Option<String> {
    let mut groups: BTreeMap<String, Vec<Vec<Piece<'_>>>> = BTreeMap::new();
    for v in values {
        let p = pieces(v);
        groups.entry(skeleton(&p)).or_default().push(p);
    }
    // Strictly-greater keeps the lexicographically first of equal-sized groups.
    let mut best: Option<(&String, &Vec<Vec<Piece<'_>>>)> = None;
    for (k, g) in &groups {
        if best.is_none_or(|(_, b)| g.len() > b.len()) {
            best = Some((k, g));
        }
    }
    let (_, group) = best?;
    let first = &group[0];
    let rendered = first
        .iter()
        .enumerate()
        .map(|(i, piece)| match piece {
            Piece::Digits => "D+".to_string(),
            Piece::Lit(c) => c.to_string(),
            Piece::Word(w) => {
                let constant = group.len() >= 2 && group.iter().all(|p| p[i] == Piece::Word(w));
                if constant {
                    format!("'{w}'")
                } else {
                    "L+".to_string()
                }
            }
        })
        .collect();
    Some(rendered)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(name: &str, v: Vec<Value>) -> Column {
        Column::from_values(name, v).unwrap()
    }

    #[test]
    fn minutes_format() {
        assert_eq!(value_format(&["90 minutes", "85 minutes"]).as_deref(), Some("D+ 'minutes'"));
        assert_eq!(value_format(&["United States", "New Zealand"]).as_deref(), Some("L+ L+"));
        assert_eq!(value_format(&["2020-01-02", "x", "2021-03-04"]).as_deref(), Some("D+-D+-D+"));
        assert_eq!(value_format(&[]), None);
    }

    #[test]
    fn format_ties_break_lexicographically() {
        assert_eq!(value_format(&["a1", "1a"]).as_deref(), Some("D+L+"));
    }

    #[test]
    fn sortedness_rules() {
        let ints = |v: &[i64]| v.iter().map(|i| Value::Int(*i)).collect::<Vec<_>>();
        assert_eq!(sortedness(&ints(&[1, 2, 2, 3])), Sortedness::Ascending);
        assert_eq!(sortedness(&ints(&[3, 1])), Sortedness::Descending);
        assert_eq!(sortedness(&ints(&[1, 3, 2])), Sortedness::None);
        assert_eq!(sortedness(&ints(&[1])), Sortedness::None);
        assert_eq!(sortedness(&[Value::Null, Value::Int(1), Value::Null]), Sortedness::None);
        assert_eq!(sortedness(&[Value::Int(1), Value::Null, Value::Int(4)]), Sortedness::Ascending);
    }

    #[test]
    fn string_column_profile() {
        let t = DataTable::new("t", vec![col("A", vec!["b".into(), "a".into(), "c".into()])]).unwrap();
        let p = profile_table(&t, &ProfileOptions::default());
        let a = &p.columns[0];
        assert_eq!(a.cardinality, 3);
        assert_eq!(a.sortedness, Sortedness::None);
        assert_eq!(p.table.shape, [3, 1]);
        assert_eq!(p.rows.rows.len(), 3);
    }

    #[test]
    fn categorical_extras() {
        let v: Vec<Value> = ["x", "y", "x", "z", "x", "y"].iter().map(|s| Value::str(*s)).collect();
        let c = col("k", v);
        assert_eq!(c.dtype(), Dtype::Categorical);
        let p = profile_column("t", &c, &ProfileOptions::default());
        assert_eq!(p.unique_values.len(), 3);
        assert_eq!(p.value_frequency[0], Frequency { value: "x".into(), count: 3 });
        assert_eq!(p.value_frequency[1].count, 2);
    }

    #[test]
    fn numeric_extras() {
        let c = col("n", vec![Value::Int(5), Value::Null, Value::Int(-2)]);
        let p = profile_column("t", &c, &ProfileOptions::default());
        assert_eq!(p.value_range, Some(ValueRange { min: Value::Int(-2), max: Value::Int(5) }));
        assert_eq!(p.null_count, 1);
        assert!(p.value_format.is_none());
    }

    #[test]
    fn empty_table() {
        let t = DataTable::with_rows("e", vec![Column::new("a", Dtype::String, vec![]).unwrap()], 0).unwrap();
        let p = profile_table(&t, &ProfileOptions::default());
        assert_eq!(p.columns[0].null_count, 0);
        assert_eq!(p.columns[0].cardinality, 0);
        assert_eq!(p.columns[0].sortedness, Sortedness::None);
    }
}
