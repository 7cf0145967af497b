//! Minimal columnar table engine.
//!
//! Tables are immutable once built; every transform returns a new
//! [`DataTable`]. Columns store nullable [`Value`]s tagged with a [`Dtype`].

mod csv;
mod env;
mod infer;
mod ops;
mod value;

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

pub use self::csv::{load_csv, read_csv_str, CsvOptions};
pub use env::{Binding, Environment};
pub use infer::{classify_strings, infer_column_type, infer_values, DEFAULT_CATEGORICAL_THRESHOLD};
pub use ops::{
    apply_transform, eval_predicate, AggFunc, AggSpec, ArithOp, CmpOp, Expr, JoinHow, OpKind, Operand,
    Predicate, Source, TransformOp,
};
pub use value::{quote, Dtype, Value};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{table}` has no column `{column}`")]
    UnknownColumn { table: String, column: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("join key dtype mismatch: `{left}` is {left_dtype}, `{right}` is {right_dtype}")]
    JoinKeyMismatch {
        left: String,
        right: String,
        left_dtype: Dtype,
        right_dtype: Dtype,
    },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("column `{column}` has {found} values, table has {expected} rows")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid operation: {0}")]
    Invalid(String),
}

impl FrameError {
    /// True for failures caused by the data (names, types) rather than I/O.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, FrameError::Io { .. } | FrameError::Csv { .. } | FrameError::RaggedRow { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    name: String,
    dtype: Dtype,
    values: Vec<Value>,
}

impl Column {
    /// Builds a column, checking that every non-null value conforms to `dtype`.
    pub fn new(name: impl Into<String>, dtype: Dtype, values: Vec<Value>) -> Result<Self, FrameError> {
        let name = name.into();
        if let Some(bad) = values.iter().find(|v| !v.conforms_to(dtype)) {
            return Err(FrameError::TypeMismatch(format!(
                "value {bad} in column `{name}` is not {dtype}"
            )));
        }
        Ok(Self { name, dtype, values })
    }

    /// Builds a column and picks its dtype from the values themselves.
    ///
    /// Mixed int/float promote to float; string columns are split into
    /// string/categorical by cardinality.
    pub fn from_values(name: impl Into<String>, values: Vec<Value>) -> Result<Self, FrameError> {
        let name = name.into();
        let dtype = infer_values(&values, DEFAULT_CATEGORICAL_THRESHOLD).ok_or_else(|| {
            FrameError::TypeMismatch(format!("column `{name}` mixes incompatible value types"))
        })?;
        let values = if dtype == Dtype::Float {
            values.into_iter().map(Value::into_float).collect()
        } else {
            values
        };
        Self::new(name, dtype, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn null_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_null()).count()
    }

    pub(crate) fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            dtype: self.dtype,
            values: self.values.clone(),
        }
    }

    pub(crate) fn take(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            dtype: self.dtype,
            values: rows.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }

    /// Like [`Column::take`] but `None` produces a null cell.
    pub(crate) fn take_opt(&self, rows: &[Option<usize>]) -> Self {
        Self {
            name: self.name.clone(),
            dtype: self.dtype,
            values: rows
                .iter()
                .map(|i| i.map_or(Value::Null, |i| self.values[i].clone()))
                .collect(),
        }
    }
}

/// A named, column-oriented table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataTable {
    name: String,
    columns: Vec<Column>,
    n_rows: usize,
}

impl DataTable {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self, FrameError> {
        let n_rows = columns.first().map_or(0, Column::len);
        Self::with_rows(name, columns, n_rows)
    }

    /// Like [`DataTable::new`] but with an explicit row count, needed for
    /// tables with rows and no columns.
    pub fn with_rows(name: impl Into<String>, columns: Vec<Column>, n_rows: usize) -> Result<Self, FrameError> {
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(FrameError::DuplicateColumn(col.name.clone()));
            }
            if col.len() != n_rows {
                return Err(FrameError::LengthMismatch {
                    column: col.name.clone(),
                    expected: n_rows,
                    found: col.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            n_rows,
        })
    }

    /// Convenience constructor used heavily by tests and fixtures.
    pub fn from_columns<N, I>(name: &str, columns: I) -> Result<Self, FrameError>
    where
        N: Into<String>,
        I: IntoIterator<Item = (N, Vec<Value>)>,
    {
        let cols = columns
            .into_iter()
            .map(|(n, v)| Column::from_values(n, v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, cols)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(Column::name).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Looks a column up or reports the data error used across the engine.
    pub fn require(&self, name: &str) -> Result<&Column, FrameError> {
        self.column(name).ok_or_else(|| FrameError::UnknownColumn {
            table: self.name.clone(),
            column: name.to_string(),
        })
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.values[i].clone()).collect()
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    /// First `n` rows (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let rows: Vec<usize> = (0..n.min(self.n_rows)).collect();
        self.take_rows(&rows)
    }

    pub(crate) fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Replaces a column in place, or appends it when the name is new.
    pub(crate) fn set_column(&self, column: Column) -> Result<Self, FrameError> {
        if column.len() != self.n_rows {
            return Err(FrameError::LengthMismatch {
                column: column.name.clone(),
                expected: self.n_rows,
                found: column.len(),
            });
        }
        let mut columns = self.columns.clone();
        match columns.iter().position(|c| c.name == column.name) {
            Some(i) => columns[i] = column,
            None => columns.push(column),
        }
        Ok(Self {
            name: self.name.clone(),
            columns,
            n_rows: self.n_rows,
        })
    }

    /// Checks the structural invariants; used by property tests.
    pub fn check_invariants(&self, categorical_threshold: usize) -> Result<(), String> {
        let mut seen = HashSet::new();
        for col in &self.columns {
            if col.len() != self.n_rows {
                return Err(format!("column {} has length {}", col.name, col.len()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(format!("duplicate column {}", col.name));
            }
            if let Some(v) = col.values.iter().find(|v| !v.conforms_to(col.dtype)) {
                return Err(format!("value {v} does not conform to {}", col.dtype));
            }
            if col.dtype == Dtype::Categorical {
                let distinct: HashSet<_> = col.values.iter().filter(|v| !v.is_null()).collect();
                if distinct.len() > categorical_threshold {
                    return Err(format!("categorical column {} has {} values", col.name, distinct.len()));
                }
            }
        }
        Ok(())
    }
}
