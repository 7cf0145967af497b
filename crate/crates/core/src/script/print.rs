//! Canonical dialect rendering of operations and statements.
//!
//! Printing then reparsing any lowered statement gives back an equal value.

use std::fmt::{self, Display, Formatter, Write};

use crate::frame::{quote, AggSpec, Expr, JoinHow, Operand, Predicate, Source, TransformOp};

use super::lower::Statement;

/// Renders a table-valued source as an expression.
pub fn render_source(source: &Source) -> String {
    match source {
        Source::Table(n) => n.clone(),
        Source::Op(op) => render_op(op),
    }
}

pub fn render_op(op: &TransformOp) -> String {
    let mut out = String::new();
    write_op(&mut out, op).expect("writing to a String");
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c == '_' || c.is_alphabetic())
        && chars.all(|c| c == '_' || c.is_alphanumeric())
}

fn names(cols: &[String]) -> String {
    if cols.len() == 1 {
        quote(&cols[0])
    } else {
        list(cols)
    }
}

fn list(cols: &[String]) -> String {
    let items: Vec<String> = cols.iter().map(|c| quote(c)).collect();
    format!("[{}]", items.join(", "))
}

fn col(src: &str, c: &str) -> String {
    format!("{src}[{}]", quote(c))
}

fn assign_kw(column: &str) -> String {
    if is_identifier(column) {
        column.to_string()
    } else {
        // Not expressible as a keyword; the parser rejects it with a clear error.
        format!("**{}", quote(column))
    }
}

fn write_op(out: &mut String, op: &TransformOp) -> fmt::Result {
    match op {
        TransformOp::Merge {
            left,
            right,
            left_on,
            right_on,
            how,
        } => {
            write!(out, "{}.merge({}, ", render_source(left), render_source(right))?;
            if left_on == right_on {
                write!(out, "on={}", quote(left_on))?;
            } else {
                write!(out, "left_on={}, right_on={}", quote(left_on), quote(right_on))?;
            }
            if *how != JoinHow::Inner {
                write!(out, ", how={}", quote(how.as_str()))?;
            }
            out.push(')');
        }
        TransformOp::Concat { tables } => {
            let items: Vec<String> = tables.iter().map(render_source).collect();
            write!(out, "pd.concat([{}])", items.join(", "))?;
        }
        TransformOp::Filter { source, predicate } => {
            let src = render_source(source);
            write!(out, "{src}[{}]", render_predicate(predicate, &src))?;
        }
        TransformOp::SelectColumns { source, columns } => {
            write!(out, "{}[{}]", render_source(source), list(columns))?;
        }
        TransformOp::AssignColumn { source, column, expr } => {
            let src = render_source(source);
            write!(out, "{src}.assign({}={})", assign_kw(column), render_expr(expr, &src))?;
        }
        TransformOp::SortValues { source, by, ascending } => {
            write!(out, "{}.sort_values(by={}", render_source(source), names(by))?;
            match ascending.as_slice() {
                [true] => {}
                [flag] => write!(out, ", ascending={}", py_bool(*flag))?,
                flags => {
                    let f: Vec<&str> = flags.iter().map(|b| py_bool(*b)).collect();
                    write!(out, ", ascending=[{}]", f.join(", "))?;
                }
            }
            out.push(')');
        }
        TransformOp::GroupbyAgg { source, by, aggs } => {
            write!(out, "{}.groupby({})", render_source(source), names(by))?;
            match aggs {
                AggSpec::All(f) => write!(out, ".{}()", f.as_str())?,
                AggSpec::Columns(cols, f) => write!(out, "[{}].{}()", list(cols), f.as_str())?,
                AggSpec::PerColumn(pairs) => {
                    let items: Vec<String> = pairs
                        .iter()
                        .map(|(c, f)| format!("{}: {}", quote(c), quote(f.as_str())))
                        .collect();
                    write!(out, ".agg({{{}}})", items.join(", "))?;
                }
            }
        }
        TransformOp::Fillna { source, column, value } => {
            let src = render_source(source);
            match column {
                None => write!(out, "{src}.fillna({})", value.literal())?,
                Some(c) => write!(out, "{src}.assign({}={}.fillna({}))", assign_kw(c), col(&src, c), value.literal())?,
            }
        }
        TransformOp::StrReplace {
            source,
            column,
            pattern,
            replacement,
        } => {
            let src = render_source(source);
            write!(
                out,
                "{src}.assign({}={}.str.replace({}, {}))",
                assign_kw(column),
                col(&src, column),
                quote(pattern),
                quote(replacement)
            )?;
        }
        TransformOp::Rename { source, columns } => {
            let items: Vec<String> = columns
                .iter()
                .map(|(a, b)| format!("{}: {}", quote(a), quote(b)))
                .collect();
            write!(out, "{}.rename(columns={{{}}})", render_source(source), items.join(", "))?;
        }
        TransformOp::DropDuplicates { source, subset } => match subset {
            None => write!(out, "{}.drop_duplicates()", render_source(source))?,
            Some(s) => write!(out, "{}.drop_duplicates(subset={})", render_source(source), list(s))?,
        },
        TransformOp::Head { source, n } => {
            if *n == 5 {
                write!(out, "{}.head()", render_source(source))?;
            } else {
                write!(out, "{}.head({n})", render_source(source))?;
            }
        }
        TransformOp::Astype { source, column, dtype } => {
            let src = render_source(source);
            write!(
                out,
                "{src}.assign({}={}.astype({}))",
                assign_kw(column),
                col(&src, column),
                quote(dtype.type_name())
            )?;
        }
    }
    Ok(())
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn operand(o: &Operand, src: &str) -> String {
    match o {
        Operand::Column(c) => col(src, c),
        Operand::Literal(v) => v.literal(),
    }
}

/// Condition text; `src` is the rendered table the columns belong to.
pub fn render_predicate(p: &Predicate, src: &str) -> String {
    let wrap = |p: &Predicate| match p {
        Predicate::IsIn { .. } | Predicate::StrContains { .. } => render_predicate(p, src),
        _ => format!("({})", render_predicate(p, src)),
    };
    match p {
        Predicate::Compare { lhs, op, rhs } => {
            format!("{} {} {}", operand(lhs, src), op.as_str(), operand(rhs, src))
        }
        Predicate::IsIn { column, values } => {
            let items: Vec<String> = values.iter().map(|v| v.literal()).collect();
            format!("{}.isin([{}])", col(src, column), items.join(", "))
        }
        Predicate::StrContains { column, pattern } => {
            format!("{}.str.contains({})", col(src, column), quote(pattern))
        }
        Predicate::And(a, b) => format!("{} & {}", wrap(a), wrap(b)),
        Predicate::Or(a, b) => format!("{} | {}", wrap(a), wrap(b)),
        Predicate::Not(inner) => format!("~{}", wrap(inner)),
    }
}

pub fn render_expr(e: &Expr, src: &str) -> String {
    let wrap = |e: &Expr| match e {
        Expr::Arith { .. } => format!("({})", render_expr(e, src)),
        Expr::Literal(v) if v.literal().starts_with('-') => format!("({})", v.literal()),
        _ => render_expr(e, src),
    };
    match e {
        Expr::Column(c) => col(src, c),
        Expr::Literal(v) => v.literal(),
        Expr::Arith { op, lhs, rhs } => format!("{} {} {}", wrap(lhs), op.as_str(), wrap(rhs)),
        Expr::StrReplace {
            input,
            pattern,
            replacement,
        } => format!("{}.str.replace({}, {})", postfix(input, src), quote(pattern), quote(replacement)),
        Expr::Fillna { input, value } => format!("{}.fillna({})", postfix(input, src), value.literal()),
        Expr::Astype { input, dtype } => format!("{}.astype({})", postfix(input, src), quote(dtype.type_name())),
    }
}

fn postfix(e: &Expr, src: &str) -> String {
    match e {
        Expr::Arith { .. } | Expr::Literal(_) => format!("({})", render_expr(e, src)),
        _ => render_expr(e, src),
    }
}

impl Display for TransformOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&render_op(self))
    }
}

impl Display for Statement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Import { module, alias } => match alias {
                Some(a) => write!(f, "import {module} as {a}"),
                None => write!(f, "import {module}"),
            },
            Statement::Load { target, path } => write!(f, "{target} = pd.read_csv({})", quote(path)),
            Statement::Alias { target, source } => write!(f, "{target} = {source}"),
            Statement::Delete(names) => write!(f, "del {}", names.join(", ")),
            Statement::Expr(op) => write!(f, "{op}"),
            Statement::Assign { target, op } => {
                if let Some(text) = column_statement(target, op) {
                    return f.write_str(&text);
                }
                write!(f, "{target} = {op}")
            }
        }
    }
}

/// `t["c"] = ...` form for column ops applied to the bound table itself.
fn column_statement(target: &str, op: &TransformOp) -> Option<String> {
    let own = |s: &Source| matches!(s, Source::Table(n) if n == target);
    let mut out = String::new();
    match op {
        TransformOp::AssignColumn { source, column, expr } if own(source) => {
            write!(out, "{} = {}", col(target, column), render_expr(expr, target)).ok()?
        }
        TransformOp::StrReplace {
            source,
            column,
            pattern,
            replacement,
        } if own(source) => write!(
            out,
            "{c} = {c}.str.replace({}, {})",
            quote(pattern),
            quote(replacement),
            c = col(target, column)
        )
        .ok()?,
        TransformOp::Fillna {
            source,
            column: Some(column),
            value,
        } if own(source) => write!(out, "{c} = {c}.fillna({})", value.literal(), c = col(target, column)).ok()?,
        TransformOp::Astype { source, column, dtype } if own(source) => write!(
            out,
            "{c} = {c}.astype({})",
            quote(dtype.type_name()),
            c = col(target, column)
        )
        .ok()?,
        _ => return None,
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::super::lower::{parse_op, parse_statement};

    #[test]
    fn round_trips() {
        for src in [
            "movies.merge(ratings, left_on=\"netflixTitle\", right_on=\"title\")",
            "a.merge(b, on=\"k\", how=\"outer\")",
            "pd.concat([a, b])",
            "df[(df[\"a\"] > 1) & (df[\"b\"] == \"x\")]",
            "df[~(df[\"a\"].isin([1, 2]))]",
            "df.sort_values(by=[\"a\", \"b\"], ascending=[True, False])",
            "df.groupby(\"k\")[[\"v\"]].sum()",
            "df.groupby([\"k\", \"j\"]).agg({\"v\": \"mean\"})",
            "df.assign(z=(df[\"a\"] + 1) * df[\"b\"])",
            "df.assign(z=df[\"a\"] - (-2))",
            "df.rename(columns={\"a\": \"b\"})",
            "df.drop_duplicates(subset=[\"a\"])",
            "df.head(3)",
            "df.fillna(0)",
            "df[df[\"a\"] > 1].head()",
        ] {
            let op = parse_op(src).unwrap();
            let printed = op.to_string();
            assert_eq!(parse_op(&printed).unwrap(), op, "{src} -> {printed}");
        }
    }

    #[test]
    fn statements_round_trip() {
        for src in [
            "j[\"d\"] = j[\"d\"].str.replace(\" minutes\", \"\")",
            "df[\"c\"] = df[\"a\"] / df[\"b\"]",
            "df[\"a\"] = df[\"a\"].fillna(\"U\")",
            "df[\"a\"] = df[\"a\"].astype(\"float\")",
            "x = pd.read_csv(\"data/x.csv\")",
            "import pandas as pd",
            "del x",
            "y = x",
        ] {
            let s = parse_statement(src).unwrap();
            assert_eq!(s.to_string(), src);
            assert_eq!(parse_statement(&s.to_string()).unwrap(), s);
        }
    }
}
