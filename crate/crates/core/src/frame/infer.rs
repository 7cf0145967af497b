use std::collections::HashSet;

use super::value::{Dtype, Value};

/// Distinct-value cap below which a repeating string column is categorical.
pub const DEFAULT_CATEGORICAL_THRESHOLD: usize = 50;

/// Infers the dtype of a raw CSV column. Empty strings are nulls.
///
/// The cascade is integer, float, boolean, then string; a string column is
/// categorical when it has at most `threshold` distinct values and at least
/// one value repeats. A column with no non-null cells is a string column.
pub fn infer_column_type<S: AsRef<str>>(raw: &[S], threshold: usize) -> Dtype {
    let cells: Vec<&str> = raw.iter().map(AsRef::as_ref).filter(|s| !s.is_empty()).collect();
    if cells.is_empty() {
        return Dtype::String;
    }
    if cells.iter().all(|s| parse_int(s).is_some()) {
        return Dtype::Integer;
    }
    if cells.iter().all(|s| parse_float(s).is_some()) {
        return Dtype::Float;
    }
    if cells.iter().all(|s| parse_bool(s).is_some()) {
        return Dtype::Boolean;
    }
    let distinct: HashSet<&str> = cells.iter().copied().collect();
    string_kind(distinct.len(), cells.len(), threshold)
}

/// Converts raw cells to values of an already-inferred dtype.
pub(crate) fn parse_cells<S: AsRef<str>>(raw: &[S], dtype: Dtype) -> Vec<Value> {
    raw.iter()
        .map(|s| {
            let s = s.as_ref();
            if s.is_empty() {
                return Value::Null;
            }
            match dtype {
                Dtype::Integer => parse_int(s).map_or(Value::Null, Value::Int),
                Dtype::Float => parse_float(s).map_or(Value::Null, Value::float),
                Dtype::Boolean => parse_bool(s).map_or(Value::Null, Value::Bool),
                Dtype::String | Dtype::Categorical => Value::str(s),
            }
        })
        .collect()
}

fn string_kind(cardinality: usize, non_null: usize, threshold: usize) -> Dtype {
    if non_null > 0 && cardinality <= threshold && cardinality < non_null {
        Dtype::Categorical
    } else {
        Dtype::String
    }
}

/// String or categorical for a column of text values.
pub fn classify_strings(values: &[Value], threshold: usize) -> Dtype {
    let mut distinct = HashSet::new();
    let mut non_null = 0;
    for v in values.iter().filter(|v| !v.is_null()) {
        non_null += 1;
        distinct.insert(v);
    }
    string_kind(distinct.len(), non_null, threshold)
}

/// Dtype for already-typed values; `None` when families are mixed.
pub fn infer_values(values: &[Value], threshold: usize) -> Option<Dtype> {
    let (mut ints, mut floats, mut bools, mut strs) = (false, false, false, false);
    for v in values {
        match v {
            Value::Null => {}
            Value::Int(_) => ints = true,
            Value::Float(_) => floats = true,
            Value::Bool(_) => bools = true,
            Value::Str(_) => strs = true,
        }
    }
    let numeric = ints || floats;
    if [numeric, bools, strs].iter().filter(|b| **b).count() > 1 {
        return None;
    }
    Some(if floats {
        Dtype::Float
    } else if ints {
        Dtype::Integer
    } else if bools {
        Dtype::Boolean
    } else if strs {
        classify_strings(values, threshold)
    } else {
        Dtype::String
    })
}

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

pub(crate) fn parse_float(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    if let Some(exp) = exponent {
        let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if exp.is_empty() || !all_digits(exp) {
            return None;
        }
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    if s.eq_ignore_ascii_case("true") {
        Some(true)
    } else if s.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}
