//! Tolerant expression parser.
//!
//! Running out of tokens is never an error: the tree records where input
//! stopped (open calls, open subscripts, unterminated strings, [`NodeKind::Missing`]
//! operands). Any other unexpected token is a syntax error.

use super::token::{tokenize, Token, TokenKind};
use super::ScriptError;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub keyword: Option<String>,
    pub value: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Name(String),
    Number(String),
    Str {
        value: String,
        quote: char,
        terminated: bool,
    },
    /// An expression was expected but the input ended.
    Missing,
    /// `value.attr`; `attr` is `None` right after the dot.
    Attr {
        value: Box<Node>,
        attr: Option<String>,
    },
    Call {
        func: Box<Node>,
        args: Vec<Arg>,
        closed: bool,
    },
    Subscript {
        value: Box<Node>,
        index: Option<Box<Node>>,
        closed: bool,
    },
    List {
        items: Vec<Node>,
        closed: bool,
    },
    Dict {
        entries: Vec<(Node, Option<Node>)>,
        closed: bool,
    },
    Binary {
        op: String,
        lhs: Box<Node>,
        rhs: Box<Node>,
    },
    Unary {
        op: String,
        operand: Box<Node>,
    },
    Paren {
        inner: Box<Node>,
        closed: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Expr(Node),
    Assign { target: Node, value: Node },
    Import { module: String, alias: Option<String> },
    Del(Vec<String>),
}

impl Node {
    fn new(kind: NodeKind, start: usize, end: usize) -> Self {
        Self { kind, start, end }
    }

    pub fn name(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Name(n) => Some(n),
            _ => None,
        }
    }

    pub fn str_value(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Str { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self.kind, NodeKind::Missing)
    }

    /// True when nothing inside the node is waiting for more input.
    pub fn is_complete(&self) -> bool {
        match &self.kind {
            NodeKind::Name(_) | NodeKind::Number(_) => true,
            NodeKind::Str { terminated, .. } => *terminated,
            NodeKind::Missing => false,
            NodeKind::Attr { value, attr } => attr.is_some() && value.is_complete(),
            NodeKind::Call { closed, .. }
            | NodeKind::Subscript { closed, .. }
            | NodeKind::List { closed, .. }
            | NodeKind::Dict { closed, .. }
            | NodeKind::Paren { closed, .. } => *closed,
            NodeKind::Binary { rhs, .. } => rhs.is_complete(),
            NodeKind::Unary { operand, .. } => operand.is_complete(),
        }
    }

    /// The child that input stopped inside, if any.
    pub fn open_child(&self) -> Option<&Node> {
        if self.is_complete() {
            return None;
        }
        let child = match &self.kind {
            NodeKind::Attr { value, .. } => Some(value.as_ref()),
            NodeKind::Call { args, .. } => args.last().map(|a| &a.value),
            NodeKind::Subscript { index, .. } => index.as_deref(),
            NodeKind::List { items, .. } => items.last(),
            NodeKind::Dict { entries, .. } => entries.last().map(|(k, v)| v.as_ref().unwrap_or(k)),
            NodeKind::Binary { rhs, .. } => Some(rhs.as_ref()),
            NodeKind::Unary { operand, .. } => Some(operand.as_ref()),
            NodeKind::Paren { inner, .. } => Some(inner.as_ref()),
            _ => None,
        };
        child.filter(|c| !c.is_complete())
    }

    /// Direct children in source order.
    pub fn children(&self) -> Vec<&Node> {
        match &self.kind {
            NodeKind::Attr { value, .. } => vec![value],
            NodeKind::Call { func, args, .. } => {
                let mut v = vec![func.as_ref()];
                v.extend(args.iter().map(|a| &a.value));
                v
            }
            NodeKind::Subscript { value, index, .. } => {
                let mut v = vec![value.as_ref()];
                v.extend(index.as_deref());
                v
            }
            NodeKind::List { items, .. } => items.iter().collect(),
            NodeKind::Dict { entries, .. } => entries
                .iter()
                .flat_map(|(k, v)| std::iter::once(k).chain(v.iter()))
                .collect(),
            NodeKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            NodeKind::Unary { operand, .. } => vec![operand],
            NodeKind::Paren { inner, .. } => vec![inner],
            _ => vec![],
        }
    }

    /// Strips redundant parentheses.
    pub fn unparen(&self) -> &Node {
        match &self.kind {
            NodeKind::Paren { inner, closed: true } => inner.unparen(),
            _ => self,
        }
    }
}

impl Stmt {
    pub fn is_complete(&self) -> bool {
        match self {
            Stmt::Expr(n) => n.is_complete(),
            Stmt::Assign { target, value } => target.is_complete() && value.is_complete(),
            Stmt::Import { .. } | Stmt::Del(_) => true,
        }
    }
}

/// Parses one statement, tolerating input that stops early.
pub fn parse_partial(source: &str) -> Result<Stmt, ScriptError> {
    let tokens: Vec<Token> = tokenize(source)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Newline)
        .collect();
    let mut p = Parser {
        tokens,
        pos: 0,
        len: source.len(),
    };
    let stmt = p.statement()?;
    if let Some(t) = p.peek() {
        return Err(ScriptError::Syntax {
            offset: t.start,
            message: format!("unexpected `{}`", t.text),
        });
    }
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

const BINARY_LEVELS: [&[&str]; 5] = [
    &["==", "!=", "<", "<=", ">", ">="],
    &["|"],
    &["&"],
    &["+", "-"],
    &["*", "/"],
];

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.tokens.get(self.pos + k)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn eof_offset(&self) -> usize {
        self.len
    }

    fn unexpected<T>(&self) -> Result<T, ScriptError> {
        match self.peek() {
            Some(t) => Err(ScriptError::Syntax {
                offset: t.start,
                message: format!("unexpected `{}`", t.text),
            }),
            None => Err(ScriptError::Syntax {
                offset: self.len,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn missing(&self) -> Node {
        Node::new(NodeKind::Missing, self.eof_offset(), self.eof_offset())
    }

    fn statement(&mut self) -> Result<Stmt, ScriptError> {
        if let Some(t) = self.peek() {
            if t.is(TokenKind::Identifier, "import") {
                return self.import();
            }
            if t.is(TokenKind::Identifier, "del") {
                self.bump();
                let mut names = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.kind == TokenKind::Identifier => names.push(self.bump().text),
                        _ => return self.unexpected(),
                    }
                    match self.peek() {
                        Some(t) if t.kind == TokenKind::Comma => {
                            self.bump();
                        }
                        _ => break,
                    }
                }
                return Ok(Stmt::Del(names));
            }
        }
        let first = self.expr()?;
        if self.peek().is_some_and(|t| t.is_op("=")) {
            let assignable = match &first.kind {
                NodeKind::Name(_) => true,
                NodeKind::Subscript { value, index: Some(_), closed: true } => value.name().is_some(),
                _ => false,
            };
            if !assignable {
                return self.unexpected();
            }
            self.bump();
            let value = self.expr()?;
            return Ok(Stmt::Assign { target: first, value });
        }
        Ok(Stmt::Expr(first))
    }

    fn import(&mut self) -> Result<Stmt, ScriptError> {
        self.bump();
        let module = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => self.bump().text,
            _ => return self.unexpected(),
        };
        let mut alias = None;
        if self.peek().is_some_and(|t| t.is(TokenKind::Identifier, "as")) {
            self.bump();
            match self.peek() {
                Some(t) if t.kind == TokenKind::Identifier => alias = Some(self.bump().text),
                _ => return self.unexpected(),
            }
        }
        Ok(Stmt::Import { module, alias })
    }

    fn expr(&mut self) -> Result<Node, ScriptError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Node, ScriptError> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while lhs.is_complete() {
            let Some(op) = self
                .peek()
                .filter(|t| t.kind == TokenKind::Operator && BINARY_LEVELS[level].contains(&t.text.as_str()))
                .map(|t| t.text.clone())
            else {
                break;
            };
            self.bump();
            let rhs = self.binary(level + 1)?;
            let (start, end) = (lhs.start, rhs.end);
            lhs = Node::new(
                NodeKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                start,
                end,
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ScriptError> {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "-" | "~" | "+") {
                let t = self.bump();
                let operand = self.unary()?;
                let end = operand.end;
                return Ok(Node::new(
                    NodeKind::Unary {
                        op: t.text,
                        operand: Box::new(operand),
                    },
                    t.start,
                    end,
                ));
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Node, ScriptError> {
        let mut node = self.atom()?;
        while node.is_complete() {
            let Some(t) = self.peek() else { break };
            if t.kind == TokenKind::Dot {
                let dot = self.bump();
                let attr = match self.peek() {
                    Some(t) if t.kind == TokenKind::Identifier => Some(self.bump()),
                    None => None,
                    Some(_) => return self.unexpected(),
                };
                let end = attr.as_ref().map_or(dot.end, |a| a.end);
                let start = node.start;
                node = Node::new(
                    NodeKind::Attr {
                        value: Box::new(node),
                        attr: attr.map(|a| a.text),
                    },
                    start,
                    end,
                );
            } else if t.is_bracket("(") {
                self.bump();
                node = self.call(node)?;
            } else if t.is_bracket("[") {
                self.bump();
                node = self.subscript(node)?;
            } else {
                break;
            }
        }
        Ok(node)
    }

    fn call(&mut self, func: Node) -> Result<Node, ScriptError> {
        let start = func.start;
        let mut args = Vec::new();
        let mut after_comma = false;
        loop {
            match self.peek() {
                None => {
                    if after_comma {
                        args.push(Arg {
                            keyword: None,
                            value: self.missing(),
                        });
                    }
                    return Ok(Node::new(
                        NodeKind::Call {
                            func: Box::new(func),
                            args,
                            closed: false,
                        },
                        start,
                        self.eof_offset(),
                    ));
                }
                Some(t) if t.is_bracket(")") => {
                    let end = self.bump().end;
                    return Ok(Node::new(
                        NodeKind::Call {
                            func: Box::new(func),
                            args,
                            closed: true,
                        },
                        start,
                        end,
                    ));
                }
                Some(_) if !args.is_empty() && !after_comma => return self.unexpected(),
                Some(_) => {}
            }
            let keyword = match (self.peek(), self.peek_at(1)) {
                (Some(a), Some(b)) if a.kind == TokenKind::Identifier && b.is_op("=") => {
                    let kw = self.bump().text;
                    self.bump();
                    Some(kw)
                }
                (Some(t), _) if t.is_op("**") => return self.unexpected(),
                _ => None,
            };
            let value = self.expr()?;
            let complete = value.is_complete();
            args.push(Arg { keyword, value });
            after_comma = false;
            if !complete {
                continue;
            }
            if self.peek().is_some_and(|t| t.kind == TokenKind::Comma) {
                self.bump();
                after_comma = true;
            }
        }
    }

    fn subscript(&mut self, value: Node) -> Result<Node, ScriptError> {
        let start = value.start;
        if self.at_end() {
            return Ok(Node::new(
                NodeKind::Subscript {
                    value: Box::new(value),
                    index: None,
                    closed: false,
                },
                start,
                self.eof_offset(),
            ));
        }
        let index = self.expr()?;
        let (closed, end) = self.close(&index, "]")?;
        Ok(Node::new(
            NodeKind::Subscript {
                value: Box::new(value),
                index: Some(Box::new(index)),
                closed,
            },
            start,
            end,
        ))
    }

    /// After an inner expression, consume the closing bracket if present.
    fn close(&mut self, inner: &Node, bracket: &str) -> Result<(bool, usize), ScriptError> {
        if !inner.is_complete() {
            return Ok((false, self.eof_offset()));
        }
        match self.peek() {
            None => Ok((false, self.eof_offset())),
            Some(t) if t.is_bracket(bracket) => Ok((true, self.bump().end)),
            Some(_) => self.unexpected(),
        }
    }

    fn sequence<T>(
        &mut self,
        closer: &str,
        mut item: impl FnMut(&mut Self) -> Result<(T, bool), ScriptError>,
    ) -> Result<(Vec<T>, bool, usize), ScriptError> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                None => return Ok((items, false, self.eof_offset())),
                Some(t) if t.is_bracket(closer) => return Ok((items, true, self.bump().end)),
                _ => {}
            }
            let (it, complete) = item(self)?;
            items.push(it);
            if !complete {
                return Ok((items, false, self.eof_offset()));
            }
            match self.peek() {
                None => return Ok((items, false, self.eof_offset())),
                Some(t) if t.kind == TokenKind::Comma => {
                    self.bump();
                }
                Some(t) if t.is_bracket(closer) => return Ok((items, true, self.bump().end)),
                Some(_) => return self.unexpected(),
            }
        }
    }

    fn atom(&mut self) -> Result<Node, ScriptError> {
        let Some(t) = self.peek().cloned() else {
            return Ok(self.missing());
        };
        match t.kind {
            TokenKind::Identifier => {
                self.bump();
                Ok(Node::new(NodeKind::Name(t.text), t.start, t.end))
            }
            TokenKind::Number => {
                self.bump();
                Ok(Node::new(NodeKind::Number(t.text), t.start, t.end))
            }
            TokenKind::String => {
                self.bump();
                Ok(Node::new(
                    NodeKind::Str {
                        value: t.value.unwrap_or_default(),
                        quote: t.quote.unwrap_or('"'),
                        terminated: t.terminated,
                    },
                    t.start,
                    t.end,
                ))
            }
            TokenKind::Bracket if t.text == "(" => {
                self.bump();
                if self.at_end() {
                    let m = self.missing();
                    return Ok(Node::new(
                        NodeKind::Paren {
                            inner: Box::new(m),
                            closed: false,
                        },
                        t.start,
                        self.eof_offset(),
                    ));
                }
                let inner = self.expr()?;
                let (closed, end) = self.close(&inner, ")")?;
                Ok(Node::new(
                    NodeKind::Paren {
                        inner: Box::new(inner),
                        closed,
                    },
                    t.start,
                    end,
                ))
            }
            TokenKind::Bracket if t.text == "[" => {
                self.bump();
                let (items, closed, end) = self.sequence("]", |p| {
                    let n = p.expr()?;
                    let c = n.is_complete();
                    Ok((n, c))
                })?;
                Ok(Node::new(NodeKind::List { items, closed }, t.start, end))
            }
            TokenKind::Bracket if t.text == "{" => {
                self.bump();
                let (entries, closed, end) = self.sequence("}", |p| {
                    let key = p.expr()?;
                    if !key.is_complete() {
                        return Ok(((key, None), false));
                    }
                    match p.peek() {
                        None => return Ok(((key, None), false)),
                        Some(t) if t.is_op(":") => {
                            p.bump();
                        }
                        Some(_) => return p.unexpected(),
                    }
                    let value = p.expr()?;
                    let c = value.is_complete();
                    Ok(((key, Some(value)), c))
                })?;
                Ok(Node::new(NodeKind::Dict { entries, closed }, t.start, end))
            }
            _ => self.unexpected(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(src: &str) -> Node {
        match parse_partial(src).unwrap() {
            Stmt::Expr(n) => n,
            other => panic!("not an expression: {other:?}"),
        }
    }

    #[test]
    fn open_call_with_keyword_string() {
        let n = expr("df.sort_values(by=\"C");
        let NodeKind::Call { args, closed, .. } = &n.kind else { panic!() };
        assert!(!closed);
        assert_eq!(args[0].keyword.as_deref(), Some("by"));
        assert!(!args[0].value.is_complete());
    }

    #[test]
    fn trailing_comma_yields_missing_arg() {
        let n = expr("pd.merge(df1, ");
        let NodeKind::Call { args, .. } = &n.kind else { panic!() };
        assert_eq!(args.len(), 2);
        assert!(args[1].value.is_missing());
    }

    #[test]
    fn precedence_comparison_below_bitwise() {
        let n = expr("(a == 1) & (b > 2) | c");
        let NodeKind::Binary { op, lhs, .. } = &n.kind else { panic!() };
        assert_eq!(op, "|");
        assert!(matches!(&lhs.kind, NodeKind::Binary { op, .. } if op == "&"));
    }

    #[test]
    fn nested_open_subscripts() {
        let n = expr("pd.merge(df1, df2[df2[\"A\"]");
        let NodeKind::Call { args, .. } = &n.kind else { panic!() };
        let sub = &args[1].value;
        assert!(matches!(&sub.kind, NodeKind::Subscript { closed: false, index: Some(_), .. }));
        assert!(sub.open_child().is_none());
    }

    #[test]
    fn assignment_and_statements() {
        assert!(matches!(parse_partial("x = df.head()").unwrap(), Stmt::Assign { .. }));
        assert!(matches!(parse_partial("df[\"c\"] = 1").unwrap(), Stmt::Assign { .. }));
        assert_eq!(
            parse_partial("import pandas as pd").unwrap(),
            Stmt::Import {
                module: "pandas".into(),
                alias: Some("pd".into())
            }
        );
        assert_eq!(parse_partial("del a, b").unwrap(), Stmt::Del(vec!["a".into(), "b".into()]));
    }

    #[test]
    fn syntax_error_has_offset() {
        let err = parse_partial("df[[1 2").unwrap_err();
        assert!(matches!(err, ScriptError::Syntax { offset: 6, .. }), "{err:?}");
        assert!(parse_partial("f(x) = 1").is_err());
    }

    #[test]
    fn attr_after_dot() {
        let n = expr("df.groupby(\"a\").");
        assert!(matches!(&n.kind, NodeKind::Attr { attr: None, .. }));
        assert!(!n.is_complete());
    }

    #[test]
    fn dict_key_being_typed() {
        let n = expr("g.agg({\"ca");
        let NodeKind::Call { args, .. } = &n.kind else { panic!() };
        let NodeKind::Dict { entries, closed } = &args[0].value.kind else { panic!() };
        assert!(!closed);
        assert!(entries[0].1.is_none());
    }
}
