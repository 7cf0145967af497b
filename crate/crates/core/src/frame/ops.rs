use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::infer::{classify_strings, parse_bool, parse_float, parse_int, DEFAULT_CATEGORICAL_THRESHOLD};
use super::{Column, DataTable, Dtype, Environment, FrameError, Value};

/// The thirteen operator kinds the engine recognizes and executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Merge,
    Concat,
    Filter,
    SelectColumns,
    AssignColumn,
    SortValues,
    GroupbyAgg,
    Fillna,
    StrReplace,
    Rename,
    DropDuplicates,
    Head,
    Astype,
}

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        OpKind::Merge,
        OpKind::Concat,
        OpKind::Filter,
        OpKind::SelectColumns,
        OpKind::AssignColumn,
        OpKind::SortValues,
        OpKind::GroupbyAgg,
        OpKind::Fillna,
        OpKind::StrReplace,
        OpKind::Rename,
        OpKind::DropDuplicates,
        OpKind::Head,
        OpKind::Astype,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Merge => "merge",
            OpKind::Concat => "concat",
            OpKind::Filter => "filter",
            OpKind::SelectColumns => "select_columns",
            OpKind::AssignColumn => "assign_column",
            OpKind::SortValues => "sort_values",
            OpKind::GroupbyAgg => "groupby_agg",
            OpKind::Fillna => "fillna",
            OpKind::StrReplace => "str_replace",
            OpKind::Rename => "rename",
            OpKind::DropDuplicates => "drop_duplicates",
            OpKind::Head => "head",
            OpKind::Astype => "astype",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where an operator reads its input table from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Table(String),
    Op(Box<TransformOp>),
}

impl Source {
    pub fn table(name: impl Into<String>) -> Self {
        Source::Table(name.into())
    }

    /// The named table at the bottom of a chain.
    pub fn root(&self) -> &str {
        match self {
            Source::Table(n) => n,
            Source::Op(op) => op.primary_source().root(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinHow {
    Inner,
    Left,
    Right,
    Outer,
}

impl JoinHow {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "inner" => JoinHow::Inner,
            "left" => JoinHow::Left,
            "right" => JoinHow::Right,
            "outer" => JoinHow::Outer,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JoinHow::Inner => "inner",
            JoinHow::Left => "left",
            JoinHow::Right => "right",
            JoinHow::Outer => "outer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunc {
    Sum,
    Mean,
    Min,
    Max,
    Count,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [AggFunc::Sum, AggFunc::Mean, AggFunc::Min, AggFunc::Max, AggFunc::Count];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggFunc::Sum => "sum",
            AggFunc::Mean => "mean",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Count => "count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggSpec {
    /// `groupby(..).sum()`: every applicable non-key column.
    All(AggFunc),
    /// `groupby(..)[cols].sum()`.
    Columns(Vec<String>, AggFunc),
    /// `groupby(..).agg({col: func})`.
    PerColumn(Vec<(String, AggFunc)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArithOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl ArithOp {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "+" => ArithOp::Add,
            "-" => ArithOp::Sub,
            "*" => ArithOp::Mul,
            "/" => ArithOp::Div,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Column(String),
    Literal(Value),
}

/// Boolean row predicate over the columns of one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Compare { lhs: Operand, op: CmpOp, rhs: Operand },
    IsIn { column: String, values: Vec<Value> },
    StrContains { column: String, pattern: String },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Column names in order of first mention.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        let mut seen = HashSet::new();
        out.retain(|c| seen.insert(*c));
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Compare { lhs, rhs, .. } => {
                for operand in [lhs, rhs] {
                    if let Operand::Column(c) = operand {
                        out.push(c);
                    }
                }
            }
            Predicate::IsIn { column, .. } | Predicate::StrContains { column, .. } => out.push(column),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
            Predicate::Not(p) => p.collect_columns(out),
        }
    }

    /// Literal values mentioned anywhere in the predicate.
    pub fn literals(&self) -> Vec<Value> {
        match self {
            Predicate::Compare { lhs, rhs, .. } => [lhs, rhs]
                .into_iter()
                .filter_map(|o| match o {
                    Operand::Literal(v) if !v.is_null() => Some(v.clone()),
                    _ => None,
                })
                .collect(),
            Predicate::IsIn { values, .. } => values.iter().filter(|v| !v.is_null()).cloned().collect(),
            Predicate::StrContains { pattern, .. } => vec![Value::str(pattern.clone())],
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                let mut v = a.literals();
                v.extend(b.literals());
                v
            }
            Predicate::Not(p) => p.literals(),
        }
    }
}

/// Column-valued expression over one table, used by column assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Column(String),
    Literal(Value),
    Arith {
        op: ArithOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    StrReplace {
        input: Box<Expr>,
        pattern: String,
        replacement: String,
    },
    Fillna {
        input: Box<Expr>,
        value: Value,
    },
    Astype {
        input: Box<Expr>,
        dtype: Dtype,
    },
}

impl Expr {
    pub fn columns(&self) -> Vec<&str> {
        match self {
            Expr::Column(c) => vec![c.as_str()],
            Expr::Literal(_) => vec![],
            Expr::Arith { lhs, rhs, .. } => {
                let mut v = lhs.columns();
                for c in rhs.columns() {
                    if !v.contains(&c) {
                        v.push(c);
                    }
                }
                v
            }
            Expr::StrReplace { input, .. } | Expr::Fillna { input, .. } | Expr::Astype { input, .. } => {
                input.columns()
            }
        }
    }
}

/// A fully specified, executable transformation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformOp {
    Merge {
        left: Source,
        right: Source,
        left_on: String,
        right_on: String,
        how: JoinHow,
    },
    Concat {
        tables: Vec<Source>,
    },
    Filter {
        source: Source,
        predicate: Predicate,
    },
    SelectColumns {
        source: Source,
        columns: Vec<String>,
    },
    AssignColumn {
        source: Source,
        column: String,
        expr: Expr,
    },
    SortValues {
        source: Source,
        by: Vec<String>,
        /// One flag for all keys, or one per key.
        ascending: Vec<bool>,
    },
    GroupbyAgg {
        source: Source,
        by: Vec<String>,
        aggs: AggSpec,
    },
    Fillna {
        source: Source,
        /// `None` fills every compatible column.
        column: Option<String>,
        value: Value,
    },
    StrReplace {
        source: Source,
        column: String,
        pattern: String,
        replacement: String,
    },
    Rename {
        source: Source,
        columns: Vec<(String, String)>,
    },
    DropDuplicates {
        source: Source,
        subset: Option<Vec<String>>,
    },
    Head {
        source: Source,
        n: usize,
    },
    Astype {
        source: Source,
        column: String,
        dtype: Dtype,
    },
}

impl TransformOp {
    pub fn kind(&self) -> OpKind {
        match self {
            TransformOp::Merge { .. } => OpKind::Merge,
            TransformOp::Concat { .. } => OpKind::Concat,
            TransformOp::Filter { .. } => OpKind::Filter,
            TransformOp::SelectColumns { .. } => OpKind::SelectColumns,
            TransformOp::AssignColumn { .. } => OpKind::AssignColumn,
            TransformOp::SortValues { .. } => OpKind::SortValues,
            TransformOp::GroupbyAgg { .. } => OpKind::GroupbyAgg,
            TransformOp::Fillna { .. } => OpKind::Fillna,
            TransformOp::StrReplace { .. } => OpKind::StrReplace,
            TransformOp::Rename { .. } => OpKind::Rename,
            TransformOp::DropDuplicates { .. } => OpKind::DropDuplicates,
            TransformOp::Head { .. } => OpKind::Head,
            TransformOp::Astype { .. } => OpKind::Astype,
        }
    }

    /// The first input; for merges the left side, for concat the first table.
    pub fn primary_source(&self) -> &Source {
        match self {
            TransformOp::Merge { left, .. } => left,
            TransformOp::Concat { tables } => &tables[0],
            TransformOp::Filter { source, .. }
            | TransformOp::SelectColumns { source, .. }
            | TransformOp::AssignColumn { source, .. }
            | TransformOp::SortValues { source, .. }
            | TransformOp::GroupbyAgg { source, .. }
            | TransformOp::Fillna { source, .. }
            | TransformOp::StrReplace { source, .. }
            | TransformOp::Rename { source, .. }
            | TransformOp::DropDuplicates { source, .. }
            | TransformOp::Head { source, .. }
            | TransformOp::Astype { source, .. } => source,
        }
    }

    pub fn sources(&self) -> Vec<&Source> {
        match self {
            TransformOp::Merge { left, right, .. } => vec![left, right],
            TransformOp::Concat { tables } => tables.iter().collect(),
            _ => vec![self.primary_source()],
        }
    }

    /// Every named table the op reads, in order of first appearance.
    pub fn referenced_tables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in self.sources() {
            let names = match s {
                Source::Table(n) => vec![n.clone()],
                Source::Op(op) => op.referenced_tables(),
            };
            for n in names {
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }
}

fn eval_source(source: &Source, env: &Environment) -> Result<Arc<DataTable>, FrameError> {
    match source {
        Source::Table(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| FrameError::UnknownTable(name.clone())),
        Source::Op(op) => apply_transform(op, env).map(Arc::new),
    }
}

/// Executes `op` against `env`. The environment is never modified.
pub fn apply_transform(op: &TransformOp, env: &Environment) -> Result<DataTable, FrameError> {
    match op {
        TransformOp::Merge {
            left,
            right,
            left_on,
            right_on,
            how,
        } => {
            let l = eval_source(left, env)?;
            let r = eval_source(right, env)?;
            merge(&l, &r, left_on, right_on, *how)
        }
        TransformOp::Concat { tables } => {
            if tables.is_empty() {
                return Err(FrameError::Invalid("concat needs at least one table".into()));
            }
            let tables = tables
                .iter()
                .map(|s| eval_source(s, env))
                .collect::<Result<Vec<_>, _>>()?;
            concat(&tables)
        }
        TransformOp::Filter { source, predicate } => {
            let t = eval_source(source, env)?;
            let mask = eval_predicate(predicate, &t)?;
            let rows: Vec<usize> = mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect();
            Ok(t.take_rows(&rows))
        }
        TransformOp::SelectColumns { source, columns } => {
            let t = eval_source(source, env)?;
            let cols = columns
                .iter()
                .map(|c| t.require(c).cloned())
                .collect::<Result<Vec<_>, _>>()?;
            DataTable::with_rows(t.name(), cols, t.n_rows())
        }
        TransformOp::AssignColumn { source, column, expr } => {
            let t = eval_source(source, env)?;
            let series = eval_expr(expr, &t)?;
            t.set_column(series.into_column(column)?)
        }
        TransformOp::SortValues { source, by, ascending } => {
            let t = eval_source(source, env)?;
            sort_values(&t, by, ascending)
        }
        TransformOp::GroupbyAgg { source, by, aggs } => {
            let t = eval_source(source, env)?;
            groupby_agg(&t, by, aggs)
        }
        TransformOp::Fillna { source, column, value } => {
            let t = eval_source(source, env)?;
            match column {
                Some(c) => {
                    let col = t.require(c)?;
                    let filled = fill_series(Series::of(col), value)?;
                    t.set_column(filled.into_column(c)?)
                }
                None => {
                    let mut out = (*t).clone();
                    for col in t.columns() {
                        if let Ok(filled) = fill_series(Series::of(col), value) {
                            out = out.set_column(filled.into_column(col.name())?)?;
                        }
                    }
                    Ok(out)
                }
            }
        }
        TransformOp::StrReplace {
            source,
            column,
            pattern,
            replacement,
        } => {
            let t = eval_source(source, env)?;
            let col = t.require(column)?;
            let replaced = replace_series(Series::of(col), pattern, replacement)?;
            t.set_column(replaced.into_column(column)?)
        }
        TransformOp::Rename { source, columns } => {
            let t = eval_source(source, env)?;
            for (from, _) in columns {
                t.require(from)?;
            }
            let renamed = t
                .columns()
                .iter()
                .map(|c| match columns.iter().find(|(from, _)| from == c.name()) {
                    Some((_, to)) => c.renamed(to.clone()),
                    None => c.clone(),
                })
                .collect();
            DataTable::with_rows(t.name(), renamed, t.n_rows())
        }
        TransformOp::DropDuplicates { source, subset } => {
            let t = eval_source(source, env)?;
            let keys: Vec<&Column> = match subset {
                Some(cols) => cols.iter().map(|c| t.require(c)).collect::<Result<_, _>>()?,
                None => t.columns().iter().collect(),
            };
            let mut seen = HashSet::new();
            let rows: Vec<usize> = (0..t.n_rows())
                .filter(|&i| seen.insert(keys.iter().map(|c| &c.values()[i]).collect::<Vec<_>>()))
                .collect();
            Ok(t.take_rows(&rows))
        }
        TransformOp::Head { source, n } => Ok(eval_source(source, env)?.head(*n)),
        TransformOp::Astype { source, column, dtype } => {
            let t = eval_source(source, env)?;
            let col = t.require(column)?;
            let cast = cast_series(Series::of(col), *dtype)?;
            t.set_column(cast.into_column(column)?)
        }
    }
}

/// A column without a name, the intermediate of expression evaluation.
#[derive(Debug, Clone)]
struct Series {
    dtype: Dtype,
    values: Vec<Value>,
}

impl Series {
    fn of(col: &Column) -> Self {
        Self {
            dtype: col.dtype(),
            values: col.values().to_vec(),
        }
    }

    fn into_column(self, name: &str) -> Result<Column, FrameError> {
        Column::new(name, self.dtype, self.values)
    }
}

fn text_dtype(values: &[Value]) -> Dtype {
    classify_strings(values, DEFAULT_CATEGORICAL_THRESHOLD)
}

fn eval_expr(expr: &Expr, table: &DataTable) -> Result<Series, FrameError> {
    let n = table.n_rows();
    match expr {
        Expr::Column(c) => Ok(Series::of(table.require(c)?)),
        Expr::Literal(v) => {
            let dtype = match v {
                Value::Null | Value::Str(_) => Dtype::String,
                Value::Int(_) => Dtype::Integer,
                Value::Float(_) => Dtype::Float,
                Value::Bool(_) => Dtype::Boolean,
            };
            let values = vec![v.clone(); n];
            let dtype = if dtype == Dtype::String { text_dtype(&values) } else { dtype };
            Ok(Series { dtype, values })
        }
        Expr::Arith { op, lhs, rhs } => {
            let a = eval_expr(lhs, table)?;
            let b = eval_expr(rhs, table)?;
            arith(*op, a, b)
        }
        Expr::StrReplace {
            input,
            pattern,
            replacement,
        } => replace_series(eval_expr(input, table)?, pattern, replacement),
        Expr::Fillna { input, value } => fill_series(eval_expr(input, table)?, value),
        Expr::Astype { input, dtype } => cast_series(eval_expr(input, table)?, *dtype),
    }
}

fn arith(op: ArithOp, a: Series, b: Series) -> Result<Series, FrameError> {
    let both_text = a.dtype.is_text() && b.dtype.is_text();
    let both_numeric = a.dtype.is_numeric() && b.dtype.is_numeric();
    if !(both_numeric || both_text && op == ArithOp::Add) {
        return Err(FrameError::TypeMismatch(format!(
            "cannot apply `{}` to {} and {}",
            op.as_str(),
            a.dtype,
            b.dtype
        )));
    }
    if both_text {
        let values: Vec<Value> = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| match (x, y) {
                (Value::Str(x), Value::Str(y)) => Value::Str(format!("{x}{y}")),
                _ => Value::Null,
            })
            .collect();
        return Ok(Series {
            dtype: text_dtype(&values),
            values,
        });
    }
    let int_result = a.dtype == Dtype::Integer && b.dtype == Dtype::Integer && op != ArithOp::Div;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            if x.is_null() || y.is_null() {
                return Value::Null;
            }
            if int_result {
                let (Value::Int(x), Value::Int(y)) = (x, y) else {
                    return Value::Null;
                };
                let r = match op {
                    ArithOp::Add => x.checked_add(*y),
                    ArithOp::Sub => x.checked_sub(*y),
                    ArithOp::Mul => x.checked_mul(*y),
                    ArithOp::Div => None,
                };
                return r.map_or(Value::Null, Value::Int);
            }
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            Value::float(match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
                ArithOp::Mul => x * y,
                ArithOp::Div => x / y,
            })
        })
        .collect();
    Ok(Series {
        dtype: if int_result { Dtype::Integer } else { Dtype::Float },
        values,
    })
}

fn replace_series(input: Series, pattern: &str, replacement: &str) -> Result<Series, FrameError> {
    if !input.dtype.is_text() {
        return Err(FrameError::TypeMismatch(format!(
            "str.replace needs a string column, got {}",
            input.dtype
        )));
    }
    if pattern.is_empty() || pattern == replacement {
        return Ok(input);
    }
    let values: Vec<Value> = input
        .values
        .iter()
        .map(|v| match v {
            Value::Str(s) => Value::Str(s.replace(pattern, replacement)),
            other => other.clone(),
        })
        .collect();
    Ok(Series {
        dtype: text_dtype(&values),
        values,
    })
}

fn fill_series(input: Series, value: &Value) -> Result<Series, FrameError> {
    let dtype = match (input.dtype, value) {
        (_, Value::Null) => return Ok(input),
        (Dtype::Integer, Value::Int(_)) => Dtype::Integer,
        (Dtype::Integer | Dtype::Float, Value::Int(_) | Value::Float(_)) => Dtype::Float,
        (Dtype::Boolean, Value::Bool(_)) => Dtype::Boolean,
        (Dtype::String | Dtype::Categorical, Value::Str(_)) => Dtype::String,
        (d, v) => {
            return Err(FrameError::TypeMismatch(format!(
                "cannot fill {d} column with {} value",
                v.kind_name()
            )))
        }
    };
    let values: Vec<Value> = input
        .values
        .into_iter()
        .map(|v| {
            let v = if v.is_null() { value.clone() } else { v };
            if dtype == Dtype::Float {
                v.into_float()
            } else {
                v
            }
        })
        .collect();
    let dtype = if dtype.is_text() { text_dtype(&values) } else { dtype };
    Ok(Series { dtype, values })
}

fn cast_series(input: Series, to: Dtype) -> Result<Series, FrameError> {
    let fail = |v: &Value| FrameError::TypeMismatch(format!("cannot convert {v} to {to}"));
    let mut values = Vec::with_capacity(input.values.len());
    for v in &input.values {
        let out = match (v, to) {
            (Value::Null, _) => Value::Null,
            (_, Dtype::String | Dtype::Categorical) => Value::Str(v.render()),
            (Value::Int(i), Dtype::Integer) => Value::Int(*i),
            (Value::Float(x), Dtype::Integer) => Value::Int(x.trunc() as i64),
            (Value::Bool(b), Dtype::Integer) => Value::Int(*b as i64),
            (Value::Str(s), Dtype::Integer) => Value::Int(parse_int(s.trim()).ok_or_else(|| fail(v))?),
            (Value::Int(i), Dtype::Float) => Value::float(*i as f64),
            (Value::Float(x), Dtype::Float) => Value::Float(*x),
            (Value::Bool(b), Dtype::Float) => Value::Float(*b as i64 as f64),
            (Value::Str(s), Dtype::Float) => Value::float(parse_float(s.trim()).ok_or_else(|| fail(v))?),
            (Value::Bool(b), Dtype::Boolean) => Value::Bool(*b),
            (Value::Int(i), Dtype::Boolean) => Value::Bool(*i != 0),
            (Value::Float(x), Dtype::Boolean) => Value::Bool(*x != 0.0),
            (Value::Str(s), Dtype::Boolean) => Value::Bool(parse_bool(s.trim()).ok_or_else(|| fail(v))?),
        };
        values.push(out);
    }
    let dtype = match to {
        Dtype::String => Dtype::String,
        Dtype::Categorical => {
            let distinct: HashSet<&Value> = values.iter().filter(|v| !v.is_null()).collect();
            if distinct.len() > DEFAULT_CATEGORICAL_THRESHOLD {
                return Err(FrameError::TypeMismatch(format!(
                    "{} distinct values exceed the categorical limit of {DEFAULT_CATEGORICAL_THRESHOLD}",
                    distinct.len()
                )));
            }
            Dtype::Categorical
        }
        other => other,
    };
    Ok(Series { dtype, values })
}

/// Evaluates a predicate to one flag per row. Comparisons with null are false.
pub fn eval_predicate(pred: &Predicate, table: &DataTable) -> Result<Vec<bool>, FrameError> {
    let n = table.n_rows();
    match pred {
        Predicate::Compare { lhs, op, rhs } => {
            let a = operand_values(lhs, table)?;
            let b = operand_values(rhs, table)?;
            check_comparable(&a, &b)?;
            Ok((0..n)
                .map(|i| match a.get(i).compare(b.get(i)) {
                    Some(ord) => op.holds(ord),
                    None => false,
                })
                .collect())
        }
        Predicate::IsIn { column, values } => {
            let col = table.require(column)?;
            for v in values.iter().filter(|v| !v.is_null()) {
                if family(col.dtype()) != value_family(v) {
                    return Err(FrameError::TypeMismatch(format!(
                        "isin value {v} does not match {} column `{column}`",
                        col.dtype()
                    )));
                }
            }
            Ok(col
                .values()
                .iter()
                .map(|cell| {
                    !cell.is_null()
                        && values
                            .iter()
                            .any(|v| cell.compare(v) == Some(Ordering::Equal))
                })
                .collect())
        }
        Predicate::StrContains { column, pattern } => {
            let col = table.require(column)?;
            if !col.dtype().is_text() {
                return Err(FrameError::TypeMismatch(format!(
                    "str.contains needs a string column, `{column}` is {}",
                    col.dtype()
                )));
            }
            Ok(col
                .values()
                .iter()
                .map(|v| v.as_str().is_some_and(|s| s.contains(pattern.as_str())))
                .collect())
        }
        Predicate::And(a, b) => {
            let (a, b) = (eval_predicate(a, table)?, eval_predicate(b, table)?);
            Ok(a.iter().zip(&b).map(|(x, y)| *x && *y).collect())
        }
        Predicate::Or(a, b) => {
            let (a, b) = (eval_predicate(a, table)?, eval_predicate(b, table)?);
            Ok(a.iter().zip(&b).map(|(x, y)| *x || *y).collect())
        }
        Predicate::Not(p) => Ok(eval_predicate(p, table)?.into_iter().map(|m| !m).collect()),
    }
}

enum OperandValues<'a> {
    Column(&'a Column),
    Literal(&'a Value),
}

impl OperandValues<'_> {
    fn get(&self, i: usize) -> &Value {
        match self {
            OperandValues::Column(c) => &c.values()[i],
            OperandValues::Literal(v) => v,
        }
    }

    fn family(&self) -> Option<u8> {
        match self {
            OperandValues::Column(c) => Some(family(c.dtype())),
            OperandValues::Literal(Value::Null) => None,
            OperandValues::Literal(v) => Some(value_family(v)),
        }
    }

    fn describe(&self) -> String {
        match self {
            OperandValues::Column(c) => format!("{} column `{}`", c.dtype(), c.name()),
            OperandValues::Literal(v) => format!("{} literal {v}", v.kind_name()),
        }
    }
}

fn operand_values<'a>(op: &'a Operand, table: &'a DataTable) -> Result<OperandValues<'a>, FrameError> {
    Ok(match op {
        Operand::Column(c) => OperandValues::Column(table.require(c)?),
        Operand::Literal(v) => OperandValues::Literal(v),
    })
}

fn check_comparable(a: &OperandValues<'_>, b: &OperandValues<'_>) -> Result<(), FrameError> {
    match (a.family(), b.family()) {
        (Some(x), Some(y)) if x != y => Err(FrameError::TypeMismatch(format!(
            "cannot compare {} with {}",
            a.describe(),
            b.describe()
        ))),
        _ => Ok(()),
    }
}

fn family(d: Dtype) -> u8 {
    match d {
        Dtype::Integer | Dtype::Float => 0,
        Dtype::Boolean => 1,
        Dtype::String | Dtype::Categorical => 2,
    }
}

fn value_family(v: &Value) -> u8 {
    match v {
        Value::Int(_) | Value::Float(_) | Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Str(_) => 2,
    }
}

/// Hashable join key; numeric keys compare by value across int/float.
#[derive(PartialEq, Eq, Hash)]
enum JoinKey {
    Num(u64),
    Other(Value),
}

fn join_key(v: &Value) -> Option<JoinKey> {
    match v {
        Value::Null => None,
        Value::Int(_) | Value::Float(_) => {
            let x = v.as_f64()?;
            Some(JoinKey::Num(if x == 0.0 { 0f64.to_bits() } else { x.to_bits() }))
        }
        other => Some(JoinKey::Other(other.clone())),
    }
}

fn merge(l: &DataTable, r: &DataTable, left_on: &str, right_on: &str, how: JoinHow) -> Result<DataTable, FrameError> {
    let lk = l.require(left_on)?;
    let rk = r.require(right_on)?;
    if family(lk.dtype()) != family(rk.dtype()) {
        return Err(FrameError::JoinKeyMismatch {
            left: left_on.to_string(),
            right: right_on.to_string(),
            left_dtype: lk.dtype(),
            right_dtype: rk.dtype(),
        });
    }

    let mut index: HashMap<JoinKey, Vec<usize>> = HashMap::new();
    for (j, v) in rk.values().iter().enumerate() {
        if let Some(k) = join_key(v) {
            index.entry(k).or_default().push(j);
        }
    }
    let mut pairs: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    let mut right_matched = vec![false; r.n_rows()];
    match how {
        JoinHow::Right => {
            let mut lindex: HashMap<JoinKey, Vec<usize>> = HashMap::new();
            for (i, v) in lk.values().iter().enumerate() {
                if let Some(k) = join_key(v) {
                    lindex.entry(k).or_default().push(i);
                }
            }
            for (j, v) in rk.values().iter().enumerate() {
                match join_key(v).and_then(|k| lindex.get(&k)) {
                    Some(is) => pairs.extend(is.iter().map(|&i| (Some(i), Some(j)))),
                    None => pairs.push((None, Some(j))),
                }
            }
        }
        _ => {
            for (i, v) in lk.values().iter().enumerate() {
                match join_key(v).and_then(|k| index.get(&k)) {
                    Some(js) => {
                        for &j in js {
                            right_matched[j] = true;
                            pairs.push((Some(i), Some(j)));
                        }
                    }
                    None if matches!(how, JoinHow::Left | JoinHow::Outer) => pairs.push((Some(i), None)),
                    None => {}
                }
            }
            if how == JoinHow::Outer {
                pairs.extend((0..r.n_rows()).filter(|&j| !right_matched[j]).map(|j| (None, Some(j))));
            }
        }
    }

    let li: Vec<Option<usize>> = pairs.iter().map(|p| p.0).collect();
    let ri: Vec<Option<usize>> = pairs.iter().map(|p| p.1).collect();
    let shared_key = left_on == right_on;
    let left_names: BTreeSet<&str> = l.column_names().into_iter().collect();
    let right_names: BTreeSet<&str> = r
        .column_names()
        .into_iter()
        .filter(|n| !(shared_key && *n == right_on))
        .collect();

    let mut columns = Vec::new();
    for col in l.columns() {
        let mut out = col.take_opt(&li);
        if shared_key && col.name() == left_on {
            // Rows that only exist on the right still carry their key.
            let values: Vec<Value> = pairs
                .iter()
                .map(|(i, j)| match (i, j) {
                    (Some(i), _) => lk.values()[*i].clone(),
                    (None, Some(j)) => rk.values()[*j].clone(),
                    (None, None) => Value::Null,
                })
                .collect();
            out = Column::from_values(left_on, values)?;
        } else if right_names.contains(col.name()) {
            out = out.renamed(format!("{}_x", col.name()));
        }
        columns.push(out);
    }
    for col in r.columns() {
        if shared_key && col.name() == right_on {
            continue;
        }
        let mut out = col.take_opt(&ri);
        if left_names.contains(col.name()) {
            out = out.renamed(format!("{}_y", col.name()));
        }
        columns.push(out);
    }
    DataTable::with_rows(l.name(), columns, pairs.len())
}

fn concat(tables: &[Arc<DataTable>]) -> Result<DataTable, FrameError> {
    let mut names: Vec<&str> = Vec::new();
    for t in tables {
        for n in t.column_names() {
            if !names.contains(&n) {
                names.push(n);
            }
        }
    }
    let total: usize = tables.iter().map(|t| t.n_rows()).sum();
    let mut columns = Vec::with_capacity(names.len());
    for name in names {
        let mut values = Vec::with_capacity(total);
        let mut dtypes = Vec::new();
        for t in tables {
            match t.column(name) {
                Some(c) => {
                    values.extend_from_slice(c.values());
                    dtypes.push(c.dtype());
                }
                None => values.extend(std::iter::repeat_n(Value::Null, t.n_rows())),
            }
        }
        if dtypes.iter().any(|d| family(*d) != family(dtypes[0])) {
            return Err(FrameError::TypeMismatch(format!(
                "column `{name}` has incompatible dtypes across concatenated tables"
            )));
        }
        let col = if dtypes.iter().all(|d| *d == dtypes[0]) && !dtypes[0].is_text() {
            Column::new(name, dtypes[0], values)?
        } else if dtypes.iter().all(|d| d.is_text()) {
            let dtype = text_dtype(&values);
            Column::new(name, dtype, values)?
        } else {
            Column::from_values(name, values)?
        };
        columns.push(col);
    }
    DataTable::with_rows(tables[0].name(), columns, total)
}

/// Stable multi-key sort; nulls go last whatever the direction.
fn sort_values(t: &DataTable, by: &[String], ascending: &[bool]) -> Result<DataTable, FrameError> {
    if by.is_empty() {
        return Err(FrameError::Invalid("sort_values needs at least one key".into()));
    }
    if ascending.len() != 1 && ascending.len() != by.len() {
        return Err(FrameError::Invalid(format!(
            "ascending has {} flags for {} keys",
            ascending.len(),
            by.len()
        )));
    }
    let keys: Vec<&Column> = by.iter().map(|c| t.require(c)).collect::<Result<_, _>>()?;
    let mut rows: Vec<usize> = (0..t.n_rows()).collect();
    rows.sort_by(|&a, &b| {
        for (k, col) in keys.iter().enumerate() {
            let asc = ascending.get(k).copied().unwrap_or(ascending[0]);
            let (x, y) = (&col.values()[a], &col.values()[b]);
            let ord = match (x.is_null(), y.is_null()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                (false, false) => {
                    let o = x.compare(y).unwrap_or(Ordering::Equal);
                    if asc {
                        o
                    } else {
                        o.reverse()
                    }
                }
            };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    });
    Ok(t.take_rows(&rows))
}

fn groupby_agg(t: &DataTable, by: &[String], aggs: &AggSpec) -> Result<DataTable, FrameError> {
    if by.is_empty() {
        return Err(FrameError::Invalid("groupby needs at least one key".into()));
    }
    let keys: Vec<&Column> = by.iter().map(|c| t.require(c)).collect::<Result<_, _>>()?;
    let targets: Vec<(&Column, AggFunc)> = match aggs {
        AggSpec::All(f) => t
            .columns()
            .iter()
            .filter(|c| !by.iter().any(|b| b == c.name()))
            .filter(|c| agg_applies(*f, c.dtype()))
            .map(|c| (c, *f))
            .collect(),
        AggSpec::Columns(cols, f) => cols
            .iter()
            .map(|c| t.require(c).map(|col| (col, *f)))
            .collect::<Result<_, _>>()?,
        AggSpec::PerColumn(pairs) => pairs
            .iter()
            .map(|(c, f)| t.require(c).map(|col| (col, *f)))
            .collect::<Result<_, _>>()?,
    };
    for (col, f) in &targets {
        if !agg_applies(*f, col.dtype()) {
            return Err(FrameError::TypeMismatch(format!(
                "cannot {} {} column `{}`",
                f.as_str(),
                col.dtype(),
                col.name()
            )));
        }
    }

    let mut groups: HashMap<Vec<&Value>, Vec<usize>> = HashMap::new();
    let mut order: Vec<Vec<&Value>> = Vec::new();
    for i in 0..t.n_rows() {
        let key: Vec<&Value> = keys.iter().map(|c| &c.values()[i]).collect();
        if key.iter().any(|v| v.is_null()) {
            continue;
        }
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }
    order.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.compare(y).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });

    let mut columns = Vec::new();
    for (k, col) in keys.iter().enumerate() {
        let values: Vec<Value> = order.iter().map(|key| key[k].clone()).collect();
        columns.push(Column::new(col.name(), col.dtype(), values)?);
    }
    for (col, f) in targets {
        let values: Vec<Value> = order
            .iter()
            .map(|key| aggregate(col, &groups[key], f))
            .collect();
        let dtype = match f {
            AggFunc::Count => Dtype::Integer,
            AggFunc::Mean => Dtype::Float,
            AggFunc::Sum => col.dtype(),
            AggFunc::Min | AggFunc::Max if col.dtype().is_text() => text_dtype(&values),
            AggFunc::Min | AggFunc::Max => col.dtype(),
        };
        columns.push(Column::new(col.name(), dtype, values)?);
    }
    DataTable::with_rows(t.name(), columns, order.len())
}

fn agg_applies(f: AggFunc, d: Dtype) -> bool {
    match f {
        AggFunc::Sum | AggFunc::Mean => d.is_numeric(),
        AggFunc::Min | AggFunc::Max => d != Dtype::Boolean,
        AggFunc::Count => true,
    }
}

fn aggregate(col: &Column, rows: &[usize], f: AggFunc) -> Value {
    let cells = rows.iter().map(|&i| &col.values()[i]).filter(|v| !v.is_null());
    match f {
        AggFunc::Count => Value::Int(cells.count() as i64),
        AggFunc::Sum if col.dtype() == Dtype::Integer => {
            let total: i128 = cells.filter_map(|v| match v {
                Value::Int(i) => Some(*i as i128),
                _ => None,
            }).sum();
            i64::try_from(total).map_or(Value::Null, Value::Int)
        }
        AggFunc::Sum => Value::float(cells.filter_map(Value::as_f64).sum()),
        AggFunc::Mean => {
            let xs: Vec<f64> = cells.filter_map(Value::as_f64).collect();
            if xs.is_empty() {
                Value::Null
            } else {
                Value::float(xs.iter().sum::<f64>() / xs.len() as f64)
            }
        }
        AggFunc::Min => cells
            .min_by(|a, b| a.compare(b).unwrap_or(Ordering::Equal))
            .cloned()
            .unwrap_or(Value::Null),
        AggFunc::Max => cells
            .max_by(|a, b| a.compare(b).unwrap_or(Ordering::Equal))
            .cloned()
            .unwrap_or(Value::Null),
    }
}
