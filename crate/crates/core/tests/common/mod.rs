//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use datawise_core::frame::{Column, DataTable, Value};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[derive(Debug, Deserialize)]
pub struct Snippet {
    pub code: String,
    pub operator: Option<String>,
    pub mode: String,
    pub missing: Vec<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct Corpus {
    snippet: Vec<Snippet>,
}

pub fn corpus() -> Vec<Snippet> {
    let text = std::fs::read_to_string(data("corpus.toml")).unwrap();
    toml::from_str::<Corpus>(&text).unwrap().snippet
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column names with shared prefixes, so prefix filtering has work to do.
pub const NAMES: [&str; 16] = [
    "Country", "ConfirmedCases", "City", "Cases", "country_code", "Deaths", "Date", "date_added", "Region", "Rank",
    "Recovered", "score", "Score2", "title", "Type", "votes",
];

const WORDS: [&str; 10] = [
    "United States", "United Kingdom", "Thailand", "India", "New Zealand", "Brazil", "Uganda", "Unknown", "Peru", "Chad",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gen {
    Int,
    Float,
    Bool,
    Word,
    Minutes,
    Unique,
}

pub const GENS: [Gen; 6] = [Gen::Int, Gen::Float, Gen::Bool, Gen::Word, Gen::Minutes, Gen::Unique];

pub fn gen_values(rng: &mut ChaCha8Rng, g: Gen, rows: usize, null_rate: f64) -> Vec<Value> {
    let sorted = rng.random_bool(0.2);
    let mut out: Vec<Value> = (0..rows)
        .map(|i| {
            if rng.random_bool(null_rate) {
                return Value::Null;
            }
            match g {
                Gen::Int => Value::Int(rng.random_range(-20..60)),
                Gen::Float => Value::float(f64::from(rng.random_range(-400..400)) / 8.0),
                Gen::Bool => Value::Bool(rng.random_bool(0.5)),
                Gen::Word => Value::str(*WORDS.choose(rng).unwrap()),
                Gen::Minutes => Value::str(format!("{} minutes", rng.random_range(40..180))),
                Gen::Unique => Value::str(format!("id{i:04}")),
            }
        })
        .collect();
    if sorted && g != Gen::Bool {
        let mut present: Vec<Value> = out.iter().filter(|v| !v.is_null()).cloned().collect();
        present.sort_by(|a, b| a.compare(b).unwrap());
        let mut it = present.into_iter();
        for v in out.iter_mut().filter(|v| !v.is_null()) {
            *v = it.next().unwrap();
        }
    }
    out
}

/// A random table with distinct column names drawn from [`NAMES`].
pub fn random_table(rng: &mut ChaCha8Rng, name: &str, rows: usize) -> DataTable {
    let n_cols = rng.random_range(1..=8);
    let names: Vec<&str> = NAMES.choose_multiple(rng, n_cols).copied().collect();
    let columns = names
        .iter()
        .map(|n| {
            let g = *GENS.choose(rng).unwrap();
            let null_rate = if rng.random_bool(0.5) { 0.0 } else { 0.2 };
            Column::from_values(*n, gen_values(rng, g, rows, null_rate)).unwrap()
        })
        .collect();
    DataTable::with_rows(name, columns, rows).unwrap()
}
