//! Lowering of complete statements into executable operations.

use crate::frame::{
    AggFunc, AggSpec, ArithOp, CmpOp, Dtype, Expr, JoinHow, Operand, Predicate, Source, TransformOp, Value,
};

use super::ast::{parse_partial, Arg, Node, NodeKind, Stmt};
use super::ScriptError;

/// Module aliases the dialect accepts for the table library.
pub const MODULE_ALIASES: [&str; 2] = ["pd", "pandas"];

pub fn is_module(name: &str) -> bool {
    MODULE_ALIASES.contains(&name)
}

/// One complete statement of the dialect.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Import { module: String, alias: Option<String> },
    /// `target = pd.read_csv("path")`
    Load { target: String, path: String },
    /// `target = <op>`, or `target["c"] = ...` which lowers to an op on `target`.
    Assign { target: String, op: TransformOp },
    /// `target = source`
    Alias { target: String, source: String },
    Delete(Vec<String>),
    /// A bare expression; evaluated but never bound.
    Expr(TransformOp),
}

impl Statement {
    pub fn op(&self) -> Option<&TransformOp> {
        match self {
            Statement::Assign { op, .. } | Statement::Expr(op) => Some(op),
            _ => None,
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            Statement::Load { target, .. } | Statement::Assign { target, .. } | Statement::Alias { target, .. } => {
                Some(target)
            }
            _ => None,
        }
    }
}

/// Parses one complete statement.
pub fn parse_statement(source: &str) -> Result<Statement, ScriptError> {
    let stmt = parse_partial(source)?;
    if !stmt.is_complete() {
        return Err(ScriptError::Syntax {
            offset: source.len(),
            message: "statement is incomplete".into(),
        });
    }
    lower_stmt(&stmt)
}

/// Parses a complete expression into an operation.
pub fn parse_op(source: &str) -> Result<TransformOp, ScriptError> {
    match parse_statement(source)? {
        Statement::Expr(op) => Ok(op),
        _ => Err(ScriptError::Unsupported("expected an expression, found a statement".into())),
    }
}

pub(crate) fn lower_stmt(stmt: &Stmt) -> Result<Statement, ScriptError> {
    match stmt {
        Stmt::Import { module, alias } => {
            if module != "pandas" {
                return Err(ScriptError::Unsupported(format!("import of `{module}`")));
            }
            Ok(Statement::Import {
                module: module.clone(),
                alias: alias.clone(),
            })
        }
        Stmt::Del(names) => Ok(Statement::Delete(names.clone())),
        Stmt::Expr(node) => Ok(Statement::Expr(lower_op(node)?)),
        Stmt::Assign { target, value } => match &target.kind {
            NodeKind::Name(name) => {
                if let Some(path) = read_csv_path(value)? {
                    return Ok(Statement::Load {
                        target: name.clone(),
                        path,
                    });
                }
                if let NodeKind::Name(src) = &value.unparen().kind {
                    if is_module(src) {
                        return Err(ScriptError::Unsupported("binding the module".into()));
                    }
                    return Ok(Statement::Alias {
                        target: name.clone(),
                        source: src.clone(),
                    });
                }
                Ok(Statement::Assign {
                    target: name.clone(),
                    op: lower_op(value)?,
                })
            }
            NodeKind::Subscript {
                value: table,
                index: Some(index),
                ..
            } => {
                let table_name = table.name().unwrap_or_default().to_string();
                let column = index
                    .str_value()
                    .ok_or_else(|| ScriptError::Unsupported("column assignment needs a string column name".into()))?;
                let source = Source::table(table_name.clone());
                let expr = lower_expr(value, &source)?;
                Ok(Statement::Assign {
                    target: table_name,
                    op: normalize_assign(source, column.to_string(), expr),
                })
            }
            _ => Err(ScriptError::Unsupported("assignment target".into())),
        },
    }
}

fn read_csv_path(value: &Node) -> Result<Option<String>, ScriptError> {
    let NodeKind::Call { func, args, .. } = &value.kind else {
        return Ok(None);
    };
    let NodeKind::Attr { value: m, attr: Some(attr) } = &func.kind else {
        return Ok(None);
    };
    if attr != "read_csv" || !m.name().is_some_and(is_module) {
        return Ok(None);
    }
    match args.as_slice() {
        [Arg { keyword: None, value }] => value
            .str_value()
            .map(|p| Some(p.to_string()))
            .ok_or_else(|| ScriptError::Unsupported("read_csv path must be a string literal".into())),
        _ => Err(ScriptError::Unsupported("read_csv takes exactly one path argument".into())),
    }
}

/// Column assignments whose value rewrites the same column become the
/// dedicated column operators.
fn normalize_assign(source: Source, column: String, expr: Expr) -> TransformOp {
    let same = |input: &Expr| matches!(input, Expr::Column(c) if *c == column);
    match expr {
        Expr::StrReplace {
            input,
            pattern,
            replacement,
        } if same(&input) => TransformOp::StrReplace {
            source,
            column,
            pattern,
            replacement,
        },
        Expr::Fillna { input, value } if same(&input) => TransformOp::Fillna {
            source,
            column: Some(column),
            value,
        },
        Expr::Astype { input, dtype } if same(&input) => TransformOp::Astype { source, column, dtype },
        expr => TransformOp::AssignColumn { source, column, expr },
    }
}

fn unsupported<T>(what: impl Into<String>) -> Result<T, ScriptError> {
    Err(ScriptError::Unsupported(what.into()))
}

/// A table-valued expression as an op input.
pub(crate) fn lower_source(node: &Node) -> Result<Source, ScriptError> {
    match &node.unparen().kind {
        NodeKind::Name(n) if is_module(n) => unsupported("the module is not a table"),
        NodeKind::Name(n) if is_keyword_literal(n) => unsupported(format!("`{n}` is not a table")),
        NodeKind::Name(n) => Ok(Source::table(n.clone())),
        _ => Ok(Source::Op(Box::new(lower_op(node)?))),
    }
}

fn is_keyword_literal(n: &str) -> bool {
    matches!(n, "True" | "False" | "None")
}

struct CallArgs<'a> {
    positional: Vec<&'a Node>,
    keywords: Vec<(&'a str, &'a Node)>,
}

impl<'a> CallArgs<'a> {
    fn new(args: &'a [Arg], allowed: &[&str]) -> Result<Self, ScriptError> {
        let mut positional = Vec::new();
        let mut keywords: Vec<(&str, &Node)> = Vec::new();
        for a in args {
            match &a.keyword {
                None if !keywords.is_empty() => return unsupported("positional argument after keyword"),
                None => positional.push(&a.value),
                Some(k) => {
                    if !allowed.contains(&k.as_str()) {
                        return unsupported(format!("keyword argument `{k}`"));
                    }
                    if keywords.iter().any(|(x, _)| x == k) {
                        return unsupported(format!("repeated keyword `{k}`"));
                    }
                    keywords.push((k, &a.value));
                }
            }
        }
        Ok(Self { positional, keywords })
    }

    /// The argument bound to the `i`-th parameter `name`, given by
    /// position or by keyword.
    fn get(&self, i: usize, name: &str) -> Result<Option<&'a Node>, ScriptError> {
        let by_kw = self.keywords.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
        match (self.positional.get(i), by_kw) {
            (Some(_), Some(_)) => unsupported(format!("`{name}` given twice")),
            (Some(p), None) => Ok(Some(*p)),
            (None, kw) => Ok(kw),
        }
    }

    fn max_positional(&self, n: usize, method: &str) -> Result<(), ScriptError> {
        if self.positional.len() > n {
            return unsupported(format!("too many positional arguments to `{method}`"));
        }
        Ok(())
    }
}

fn string_arg(node: &Node, what: &str) -> Result<String, ScriptError> {
    node.str_value()
        .map(str::to_string)
        .ok_or_else(|| ScriptError::Unsupported(format!("{what} must be a string literal")))
}

/// A string or a list of strings.
fn names_arg(node: &Node, what: &str) -> Result<Vec<String>, ScriptError> {
    match &node.kind {
        NodeKind::Str { value, .. } => Ok(vec![value.clone()]),
        NodeKind::List { items, .. } => items.iter().map(|i| string_arg(i, what)).collect(),
        _ => unsupported(format!("{what} must be a string or a list of strings")),
    }
}

pub(crate) fn literal(node: &Node) -> Option<Value> {
    match &node.unparen().kind {
        NodeKind::Str { value, .. } => Some(Value::Str(value.clone())),
        NodeKind::Number(text) => number(text),
        NodeKind::Name(n) => match n.as_str() {
            "True" => Some(Value::Bool(true)),
            "False" => Some(Value::Bool(false)),
            "None" => Some(Value::Null),
            _ => None,
        },
        NodeKind::Unary { op, operand } if op == "-" || op == "+" => {
            let v = literal(operand)?;
            let neg = op == "-";
            match v {
                Value::Int(i) if neg => i.checked_neg().map(Value::Int),
                Value::Float(x) if neg => Some(Value::float(-x)),
                v @ (Value::Int(_) | Value::Float(_)) => Some(v),
                _ => None,
            }
        }
        _ => None,
    }
}

fn number(text: &str) -> Option<Value> {
    if text.bytes().all(|b| b.is_ascii_digit()) {
        if let Ok(i) = text.parse::<i64>() {
            return Some(Value::Int(i));
        }
    }
    text.parse::<f64>().ok().map(Value::float).filter(|v| !v.is_null())
}

fn literal_arg(node: &Node, what: &str) -> Result<Value, ScriptError> {
    literal(node).ok_or_else(|| ScriptError::Unsupported(format!("{what} must be a literal")))
}

fn dtype_arg(node: &Node) -> Result<Dtype, ScriptError> {
    let name = match &node.kind {
        NodeKind::Str { value, .. } => value.as_str(),
        NodeKind::Name(n) => n.as_str(),
        _ => return unsupported("astype needs a type name"),
    };
    Dtype::from_type_name(name).ok_or_else(|| ScriptError::Unsupported(format!("dtype `{name}`")))
}

/// `T["c"]` on a table expression: returns (table, column).
fn column_access(node: &Node) -> Option<(&Node, &str)> {
    match &node.unparen().kind {
        NodeKind::Subscript {
            value,
            index: Some(index),
            closed: true,
        } => index.str_value().map(|c| (value.as_ref(), c)),
        _ => None,
    }
}

fn method_call(node: &Node) -> Option<(&Node, &str, &[Arg])> {
    match &node.kind {
        NodeKind::Call {
            func,
            args,
            closed: true,
        } => match &func.kind {
            NodeKind::Attr {
                value,
                attr: Some(method),
            } => Some((value.as_ref(), method.as_str(), args.as_slice())),
            _ => None,
        },
        _ => None,
    }
}

pub(crate) fn lower_op(node: &Node) -> Result<TransformOp, ScriptError> {
    let node = node.unparen();
    if !node.is_complete() {
        return Err(ScriptError::Syntax {
            offset: node.end,
            message: "expression is incomplete".into(),
        });
    }
    match &node.kind {
        NodeKind::Subscript {
            value,
            index: Some(index),
            ..
        } => {
            if value.name().is_some_and(is_module) {
                return unsupported("subscript of the module");
            }
            if let Some((inner_value, method, _)) = method_call(value) {
                if method == "groupby" && lower_source(inner_value).is_ok() {
                    return unsupported("groupby selection needs an aggregation");
                }
            }
            let source = lower_source(value)?;
            match &index.kind {
                NodeKind::Str { value, .. } => Ok(TransformOp::SelectColumns {
                    source,
                    columns: vec![value.clone()],
                }),
                NodeKind::List { items, .. } => Ok(TransformOp::SelectColumns {
                    source,
                    columns: items
                        .iter()
                        .map(|i| string_arg(i, "selected column"))
                        .collect::<Result<_, _>>()?,
                }),
                _ => {
                    let predicate = lower_predicate(index, &source)?;
                    Ok(TransformOp::Filter { source, predicate })
                }
            }
        }
        NodeKind::Call { .. } => {
            let Some((recv, method, args)) = method_call(node) else {
                return unsupported("call of a non-method");
            };
            if recv.name().is_some_and(is_module) {
                return lower_module_call(method, args);
            }
            if let Some(op) = lower_groupby(recv, method, args)? {
                return Ok(op);
            }
            if column_access(recv).is_some() || is_str_accessor(recv) {
                return unsupported(format!("series method `{method}` outside a column assignment"));
            }
            lower_table_method(recv, method, args)
        }
        NodeKind::Name(n) => unsupported(format!("bare name `{n}` is not an operation")),
        _ => unsupported("expression is not a table operation"),
    }
}

fn is_str_accessor(node: &Node) -> bool {
    matches!(&node.kind, NodeKind::Attr { attr: Some(a), .. } if a == "str")
}

fn lower_module_call(method: &str, args: &[Arg]) -> Result<TransformOp, ScriptError> {
    match method {
        "merge" => {
            let a = CallArgs::new(args, &["left", "right", "how", "on", "left_on", "right_on"])?;
            a.max_positional(2, "merge")?;
            let left = a.get(0, "left")?.ok_or_else(|| ScriptError::Unsupported("merge needs a left table".into()))?;
            let right = a.get(1, "right")?.ok_or_else(|| ScriptError::Unsupported("merge needs a right table".into()))?;
            merge_op(lower_source(left)?, lower_source(right)?, &a)
        }
        "concat" => {
            let a = CallArgs::new(args, &["objs"])?;
            a.max_positional(1, "concat")?;
            let objs = a.get(0, "objs")?.ok_or_else(|| ScriptError::Unsupported("concat needs a list".into()))?;
            let NodeKind::List { items, .. } = &objs.kind else {
                return unsupported("concat needs a list of tables");
            };
            if items.is_empty() {
                return unsupported("concat of an empty list");
            }
            Ok(TransformOp::Concat {
                tables: items.iter().map(lower_source).collect::<Result<_, _>>()?,
            })
        }
        "read_csv" => unsupported("read_csv must be assigned to a name"),
        other => unsupported(format!("pd.{other}")),
    }
}

fn merge_op(left: Source, right: Source, a: &CallArgs<'_>) -> Result<TransformOp, ScriptError> {
    let on = a.keywords.iter().find(|(k, _)| *k == "on").map(|(_, v)| *v);
    let lo = a.keywords.iter().find(|(k, _)| *k == "left_on").map(|(_, v)| *v);
    let ro = a.keywords.iter().find(|(k, _)| *k == "right_on").map(|(_, v)| *v);
    let (left_on, right_on) = match (on, lo, ro) {
        (Some(on), None, None) => {
            let k = string_arg(on, "on")?;
            (k.clone(), k)
        }
        (None, Some(l), Some(r)) => (string_arg(l, "left_on")?, string_arg(r, "right_on")?),
        _ => return unsupported("merge needs either on= or both left_on= and right_on="),
    };
    let how = match a.keywords.iter().find(|(k, _)| *k == "how") {
        Some((_, v)) => {
            let s = string_arg(v, "how")?;
            JoinHow::parse(&s).ok_or_else(|| ScriptError::Unsupported(format!("join how=\"{s}\"")))?
        }
        None => JoinHow::Inner,
    };
    Ok(TransformOp::Merge {
        left,
        right,
        left_on,
        right_on,
        how,
    })
}

fn lower_table_method(recv: &Node, method: &str, args: &[Arg]) -> Result<TransformOp, ScriptError> {
    let source = || lower_source(recv);
    match method {
        "merge" => {
            let a = CallArgs::new(args, &["right", "how", "on", "left_on", "right_on"])?;
            a.max_positional(1, "merge")?;
            let right = a.get(0, "right")?.ok_or_else(|| ScriptError::Unsupported("merge needs a right table".into()))?;
            merge_op(source()?, lower_source(right)?, &a)
        }
        "sort_values" => {
            let a = CallArgs::new(args, &["by", "ascending"])?;
            a.max_positional(1, "sort_values")?;
            let by = a.get(0, "by")?.ok_or_else(|| ScriptError::Unsupported("sort_values needs by=".into()))?;
            let by = names_arg(by, "by")?;
            let ascending = match a.get(1, "ascending")? {
                None => vec![true],
                Some(n) => match &n.kind {
                    NodeKind::List { items, .. } => items.iter().map(bool_arg).collect::<Result<_, _>>()?,
                    _ => vec![bool_arg(n)?],
                },
            };
            if ascending.len() != 1 && ascending.len() != by.len() {
                return unsupported("ascending must be one flag or one per key");
            }
            Ok(TransformOp::SortValues {
                source: source()?,
                by,
                ascending,
            })
        }
        "fillna" => {
            let a = CallArgs::new(args, &["value"])?;
            a.max_positional(1, "fillna")?;
            let v = a.get(0, "value")?.ok_or_else(|| ScriptError::Unsupported("fillna needs a value".into()))?;
            Ok(TransformOp::Fillna {
                source: source()?,
                column: None,
                value: literal_arg(v, "fillna value")?,
            })
        }
        "rename" => {
            let a = CallArgs::new(args, &["columns"])?;
            a.max_positional(0, "rename")?;
            let m = a.get(usize::MAX, "columns")?.ok_or_else(|| ScriptError::Unsupported("rename needs columns=".into()))?;
            let NodeKind::Dict { entries, .. } = &m.kind else {
                return unsupported("rename columns= must be a dict");
            };
            let columns = entries
                .iter()
                .map(|(k, v)| {
                    let v = v.as_ref().ok_or_else(|| ScriptError::Unsupported("dict entry without value".into()))?;
                    Ok((string_arg(k, "renamed column")?, string_arg(v, "new column name")?))
                })
                .collect::<Result<_, ScriptError>>()?;
            Ok(TransformOp::Rename {
                source: source()?,
                columns,
            })
        }
        "drop_duplicates" => {
            let a = CallArgs::new(args, &["subset"])?;
            a.max_positional(1, "drop_duplicates")?;
            let subset = a.get(0, "subset")?.map(|n| names_arg(n, "subset")).transpose()?;
            Ok(TransformOp::DropDuplicates {
                source: source()?,
                subset,
            })
        }
        "head" => {
            let a = CallArgs::new(args, &["n"])?;
            a.max_positional(1, "head")?;
            let n = match a.get(0, "n")? {
                None => 5,
                Some(n) => match literal(n) {
                    Some(Value::Int(i)) if i >= 0 => i as usize,
                    _ => return unsupported("head needs a non-negative integer"),
                },
            };
            Ok(TransformOp::Head { source: source()?, n })
        }
        "assign" => {
            if args.len() != 1 || args[0].keyword.is_none() {
                return unsupported("assign takes exactly one keyword argument");
            }
            let column = args[0].keyword.clone().unwrap_or_default();
            let src = source()?;
            let expr = lower_expr(&args[0].value, &src)?;
            Ok(normalize_assign(src, column, expr))
        }
        "groupby" => unsupported("groupby needs an aggregation"),
        other => unsupported(format!("method `{other}`")),
    }
}

fn bool_arg(node: &Node) -> Result<bool, ScriptError> {
    match literal(node) {
        Some(Value::Bool(b)) => Ok(b),
        _ => unsupported("expected True or False"),
    }
}

/// `T.groupby(by)[cols].f()` / `T.groupby(by).agg({...})`.
fn lower_groupby(recv: &Node, method: &str, args: &[Arg]) -> Result<Option<TransformOp>, ScriptError> {
    let (grouped, selection) = match &recv.kind {
        NodeKind::Subscript {
            value,
            index: Some(index),
            closed: true,
        } => (value.as_ref(), Some(index.as_ref())),
        _ => (recv, None),
    };
    let Some((table, "groupby", gargs)) = method_call(grouped) else {
        return Ok(None);
    };
    let ga = CallArgs::new(gargs, &["by"])?;
    ga.max_positional(1, "groupby")?;
    let by = ga.get(0, "by")?.ok_or_else(|| ScriptError::Unsupported("groupby needs by".into()))?;
    let by = names_arg(by, "groupby key")?;
    let source = lower_source(table)?;
    let columns = selection.map(|s| names_arg(s, "grouped column")).transpose()?;

    let aggs = if let Some(f) = AggFunc::parse(method) {
        if !args.is_empty() {
            return unsupported(format!("arguments to `{method}`"));
        }
        match columns {
            Some(cols) => AggSpec::Columns(cols, f),
            None => AggSpec::All(f),
        }
    } else if method == "agg" {
        let a = CallArgs::new(args, &["func"])?;
        a.max_positional(1, "agg")?;
        let spec = a.get(0, "func")?.ok_or_else(|| ScriptError::Unsupported("agg needs a function".into()))?;
        match (&spec.kind, columns) {
            (NodeKind::Str { value, .. }, cols) => {
                let f = AggFunc::parse(value).ok_or_else(|| ScriptError::Unsupported(format!("aggregation `{value}`")))?;
                match cols {
                    Some(cols) => AggSpec::Columns(cols, f),
                    None => AggSpec::All(f),
                }
            }
            (NodeKind::Dict { entries, .. }, None) => AggSpec::PerColumn(
                entries
                    .iter()
                    .map(|(k, v)| {
                        let v = v.as_ref().ok_or_else(|| ScriptError::Unsupported("dict entry without value".into()))?;
                        let f = string_arg(v, "aggregation")?;
                        let f = AggFunc::parse(&f).ok_or_else(|| ScriptError::Unsupported(format!("aggregation `{f}`")))?;
                        Ok((string_arg(k, "aggregated column")?, f))
                    })
                    .collect::<Result<_, ScriptError>>()?,
            ),
            (NodeKind::Dict { .. }, Some(_)) => return unsupported("agg dict after a column selection"),
            _ => return unsupported("agg needs a function name or a dict"),
        }
    } else {
        return unsupported(format!("groupby method `{method}`"));
    };
    Ok(Some(TransformOp::GroupbyAgg { source, by, aggs }))
}

fn same_table(node: &Node, source: &Source) -> Result<(), ScriptError> {
    match lower_source(node) {
        Ok(s) if s == *source => Ok(()),
        _ => unsupported("column taken from a different table"),
    }
}

fn operand(node: &Node, source: &Source) -> Result<Operand, ScriptError> {
    if let Some((table, col)) = column_access(node) {
        same_table(table, source)?;
        return Ok(Operand::Column(col.to_string()));
    }
    literal(node)
        .map(Operand::Literal)
        .ok_or_else(|| ScriptError::Unsupported("comparison operand must be a column or a literal".into()))
}

pub(crate) fn lower_predicate(node: &Node, source: &Source) -> Result<Predicate, ScriptError> {
    let node = node.unparen();
    match &node.kind {
        NodeKind::Binary { op, lhs, rhs } => {
            if let Some(cmp) = CmpOp::parse(op) {
                return Ok(Predicate::Compare {
                    lhs: operand(lhs, source)?,
                    op: cmp,
                    rhs: operand(rhs, source)?,
                });
            }
            let (a, b) = (lower_predicate(lhs, source)?, lower_predicate(rhs, source)?);
            match op.as_str() {
                "&" => Ok(Predicate::And(Box::new(a), Box::new(b))),
                "|" => Ok(Predicate::Or(Box::new(a), Box::new(b))),
                other => unsupported(format!("`{other}` in a filter condition")),
            }
        }
        NodeKind::Unary { op, operand } if op == "~" => Ok(Predicate::Not(Box::new(lower_predicate(operand, source)?))),
        NodeKind::Call { .. } => {
            let Some((recv, method, args)) = method_call(node) else {
                return unsupported("filter condition");
            };
            match method {
                "isin" => {
                    let (table, col) = column_access(recv).ok_or_else(|| ScriptError::Unsupported("isin on a non-column".into()))?;
                    same_table(table, source)?;
                    let [Arg { keyword: None, value }] = args else {
                        return unsupported("isin takes one list");
                    };
                    let NodeKind::List { items, .. } = &value.kind else {
                        return unsupported("isin takes a list");
                    };
                    Ok(Predicate::IsIn {
                        column: col.to_string(),
                        values: items.iter().map(|i| literal_arg(i, "isin value")).collect::<Result<_, _>>()?,
                    })
                }
                "contains" => {
                    let NodeKind::Attr { value: col_node, attr: Some(acc) } = &recv.kind else {
                        return unsupported("contains outside the str accessor");
                    };
                    if acc != "str" {
                        return unsupported("contains outside the str accessor");
                    }
                    let (table, col) = column_access(col_node).ok_or_else(|| ScriptError::Unsupported("str on a non-column".into()))?;
                    same_table(table, source)?;
                    let [Arg { keyword: None, value }] = args else {
                        return unsupported("str.contains takes one pattern");
                    };
                    Ok(Predicate::StrContains {
                        column: col.to_string(),
                        pattern: string_arg(value, "pattern")?,
                    })
                }
                other => unsupported(format!("`{other}` in a filter condition")),
            }
        }
        _ => unsupported("filter condition must be a comparison, isin, str.contains or a combination"),
    }
}

pub(crate) fn lower_expr(node: &Node, source: &Source) -> Result<Expr, ScriptError> {
    let node = node.unparen();
    if let Some(v) = literal(node) {
        return Ok(Expr::Literal(v));
    }
    if let Some((table, col)) = column_access(node) {
        same_table(table, source)?;
        return Ok(Expr::Column(col.to_string()));
    }
    match &node.kind {
        NodeKind::Binary { op, lhs, rhs } => {
            let op = ArithOp::parse(op).ok_or_else(|| ScriptError::Unsupported(format!("`{op}` in a column expression")))?;
            Ok(Expr::Arith {
                op,
                lhs: Box::new(lower_expr(lhs, source)?),
                rhs: Box::new(lower_expr(rhs, source)?),
            })
        }
        NodeKind::Call { .. } => {
            let Some((recv, method, args)) = method_call(node) else {
                return unsupported("call in a column expression");
            };
            match method {
                "replace" if is_str_accessor(recv) => {
                    let NodeKind::Attr { value, .. } = &recv.kind else { unreachable!() };
                    let a = CallArgs::new(args, &["pat", "repl"])?;
                    a.max_positional(2, "str.replace")?;
                    let pat = a.get(0, "pat")?.ok_or_else(|| ScriptError::Unsupported("str.replace needs a pattern".into()))?;
                    let repl = a.get(1, "repl")?.ok_or_else(|| ScriptError::Unsupported("str.replace needs a replacement".into()))?;
                    Ok(Expr::StrReplace {
                        input: Box::new(lower_expr(value, source)?),
                        pattern: string_arg(pat, "pattern")?,
                        replacement: string_arg(repl, "replacement")?,
                    })
                }
                "fillna" => {
                    let a = CallArgs::new(args, &["value"])?;
                    a.max_positional(1, "fillna")?;
                    let v = a.get(0, "value")?.ok_or_else(|| ScriptError::Unsupported("fillna needs a value".into()))?;
                    Ok(Expr::Fillna {
                        input: Box::new(lower_expr(recv, source)?),
                        value: literal_arg(v, "fillna value")?,
                    })
                }
                "astype" => {
                    let a = CallArgs::new(args, &["dtype"])?;
                    a.max_positional(1, "astype")?;
                    let d = a.get(0, "dtype")?.ok_or_else(|| ScriptError::Unsupported("astype needs a dtype".into()))?;
                    Ok(Expr::Astype {
                        input: Box::new(lower_expr(recv, source)?),
                        dtype: dtype_arg(d)?,
                    })
                }
                other => unsupported(format!("`{other}` in a column expression")),
            }
        }
        _ => unsupported("column expression"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_three_columns_bound() {
        let s = parse_statement("joined2 = joined[[\"netflixTitle\",\"durationOfTime\",\"nf_type\"]]").unwrap();
        let Statement::Assign { target, op } = s else { panic!() };
        assert_eq!(target, "joined2");
        assert_eq!(
            op,
            TransformOp::SelectColumns {
                source: Source::table("joined"),
                columns: vec!["netflixTitle".into(), "durationOfTime".into(), "nf_type".into()],
            }
        );
    }

    #[test]
    fn head_default() {
        let s = parse_statement("x = df.head()").unwrap();
        assert_eq!(s.op(), Some(&TransformOp::Head { source: Source::table("df"), n: 5 }));
    }

    #[test]
    fn arithmetic_column_assignment() {
        let s = parse_statement("df[\"casesPer\"] = df[\"ConfirmedCases\"] / df[\"pop_20\"]").unwrap();
        let Statement::Assign { target, op } = s else { panic!() };
        assert_eq!(target, "df");
        assert_eq!(
            op,
            TransformOp::AssignColumn {
                source: Source::table("df"),
                column: "casesPer".into(),
                expr: Expr::Arith {
                    op: ArithOp::Div,
                    lhs: Box::new(Expr::Column("ConfirmedCases".into())),
                    rhs: Box::new(Expr::Column("pop_20".into())),
                },
            }
        );
    }

    #[test]
    fn str_replace_in_place() {
        let s = parse_statement("j[\"d\"] = j[\"d\"].str.replace(\" minutes\", \"\")").unwrap();
        assert_eq!(s.op().unwrap().kind(), crate::frame::OpKind::StrReplace);
    }

    #[test]
    fn merge_forms() {
        let a = parse_op("movies.merge(ratings, left_on=\"netflixTitle\", right_on=\"title\")").unwrap();
        let b = parse_op("pd.merge(movies, ratings, left_on=\"netflixTitle\", right_on=\"title\")").unwrap();
        assert_eq!(a, b);
        assert!(matches!(parse_op("pd.merge(a, b)"), Err(ScriptError::Unsupported(_))));
    }

    #[test]
    fn filter_with_combined_predicate() {
        let op = parse_op("df[(df[\"a\"] > 1) & ~df[\"b\"].isin([\"x\"])]").unwrap();
        let TransformOp::Filter { predicate, .. } = op else { panic!() };
        assert!(matches!(predicate, Predicate::And(_, _)));
    }

    #[test]
    fn groupby_forms() {
        let op = parse_op("c.groupby(\"country\")[\"cases\"].sum()").unwrap();
        assert!(matches!(op, TransformOp::GroupbyAgg { aggs: AggSpec::Columns(_, AggFunc::Sum), .. }));
        let op = parse_op("c.groupby([\"a\", \"b\"]).agg({\"cases\": \"mean\"})").unwrap();
        assert!(matches!(op, TransformOp::GroupbyAgg { aggs: AggSpec::PerColumn(_), .. }));
    }

    #[test]
    fn errors_are_explicit() {
        assert!(matches!(parse_statement("df[\"a\"] ="), Err(ScriptError::Syntax { .. })));
        assert!(matches!(parse_statement("x = df.pivot()"), Err(ScriptError::Unsupported(_))));
        assert!(matches!(parse_statement("x = df[other[\"a\"] > 1]"), Err(ScriptError::Unsupported(_))));
    }

    #[test]
    fn load_alias_delete() {
        assert_eq!(
            parse_statement("m = pd.read_csv(\"movies.csv\")").unwrap(),
            Statement::Load {
                target: "m".into(),
                path: "movies.csv".into()
            }
        );
        assert!(matches!(parse_statement("b = a").unwrap(), Statement::Alias { .. }));
        assert!(matches!(parse_statement("del a").unwrap(), Statement::Delete(_)));
    }
}
