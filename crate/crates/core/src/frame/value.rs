use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    Integer,
    Float,
    Boolean,
    String,
    Categorical,
}

impl Dtype {
    pub fn is_numeric(self) -> bool {
        matches!(self, Dtype::Integer | Dtype::Float)
    }

    pub fn is_text(self) -> bool {
        matches!(self, Dtype::String | Dtype::Categorical)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::Integer => "integer",
            Dtype::Float => "float",
            Dtype::Boolean => "boolean",
            Dtype::String => "string",
            Dtype::Categorical => "categorical",
        }
    }

    /// Parses the names accepted by `astype`.
    pub fn from_type_name(name: &str) -> Option<Self> {
        Some(match name {
            "int" | "int64" | "int32" | "integer" => Dtype::Integer,
            "float" | "float64" | "float32" => Dtype::Float,
            "bool" | "boolean" => Dtype::Boolean,
            "str" | "string" | "object" => Dtype::String,
            "category" | "categorical" => Dtype::Categorical,
            _ => return None,
        })
    }

    /// Canonical `astype` spelling.
    pub fn type_name(self) -> &'static str {
        match self {
            Dtype::Integer => "int",
            Dtype::Float => "float",
            Dtype::Boolean => "bool",
            Dtype::String => "str",
            Dtype::Categorical => "category",
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One nullable cell.
///
/// Floats are always finite; arithmetic that would produce NaN or an
/// infinity yields [`Value::Null`] instead, which keeps equality and hashing
/// total.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    /// Wraps a float, mapping non-finite results to null.
    pub fn float(x: f64) -> Self {
        if x.is_finite() {
            Value::Float(if x == 0.0 { 0.0 } else { x })
        } else {
            Value::Null
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn conforms_to(&self, dtype: Dtype) -> bool {
        match self {
            Value::Null => true,
            Value::Int(_) => dtype == Dtype::Integer,
            Value::Float(_) => dtype == Dtype::Float,
            Value::Bool(_) => dtype == Dtype::Boolean,
            Value::Str(_) => dtype.is_text(),
        }
    }

    pub(crate) fn into_float(self) -> Value {
        match self {
            Value::Int(i) => Value::float(i as f64),
            other => other,
        }
    }

    /// Orders two values when they are comparable (same family, non-null).
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x.partial_cmp(&y),
                _ => None,
            },
        }
    }

    /// Text shown in tables and used by string conversion.
    pub fn render(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(i) => i.to_string(),
            Value::Float(x) => render_float(*x),
            Value::Bool(b) => if *b { "True" } else { "False" }.to_string(),
            Value::Str(s) => s.clone(),
        }
    }

    /// The value written as a dialect literal.
    pub fn literal(&self) -> String {
        match self {
            Value::Null => "None".to_string(),
            Value::Str(s) => quote(s),
            other => other.render(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
        }
    }
}

fn render_float(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e16 {
        format!("{x:.1}")
    } else {
        // Debug keeps exponents, so the text reparses as a float.
        format!("{x:?}")
    }
}

/// Double-quoted string literal with the escapes the tokenizer understands.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Null => {}
            Value::Int(i) => i.hash(state),
            Value::Float(x) => x.to_bits().hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Str(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Str(s) => write!(f, "{s:?}"),
            other => f.write_str(&other.render()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_none(),
            Value::Int(i) => serializer.serialize_i64(*i),
            Value::Float(x) => serializer.serialize_f64(*x),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Str(s) => serializer.serialize_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::float(x)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}
