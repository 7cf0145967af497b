//! Classification of the statement at the cursor into a [`CodeContext`].

use std::collections::HashSet;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::frame::{OpKind, TransformOp};

use super::ast::{parse_partial, Arg, Node, NodeKind, Stmt};
use super::lower::{is_module, lower_stmt, Statement};
use super::rules::{OpClass, ParamDecl, ReceiverKind, RuleSet, Shape, Signature, SlotKind};
use super::split::SplitResult;
use super::token::{tokenize, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    InSignature,
    Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }
}

/// Filled slots in declaration order, serialized as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotMap(pub Vec<(String, String)>);

impl SlotMap {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == slot).map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, slot: &str) -> bool {
        self.get(slot).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for SlotMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

fn serialize_operator<S: Serializer>(op: &Option<OpKind>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(op.map_or("unknown", OpKind::as_str))
}

/// What the engine knows about the statement being typed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeContext {
    pub mode: Mode,
    #[serde(serialize_with = "serialize_operator")]
    pub operator: Option<OpKind>,
    pub operator_class: OpClass,
    /// Signature name in signature mode, rule name in pattern mode.
    pub rule: Option<String>,
    pub filled_slots: SlotMap,
    pub missing_slots: Vec<String>,
    /// The slot the cursor is filling, if one can be told.
    pub active_slot: Option<String>,
    pub active_kind: Option<SlotKind>,
    /// Table whose columns feed the active slot.
    pub slot_table: Option<String>,
    /// Column whose values feed the active slot.
    pub slot_column: Option<String>,
    /// Keyword parameters still open in the signature being typed.
    pub keyword_candidates: Vec<String>,
    pub mentioned_tables: Vec<String>,
    pub mentioned_columns: Vec<ColumnRef>,
    pub prefix: String,
    pub inside_string_literal: bool,
    pub quote: Option<char>,
    /// Text that closes the literal or bracket around the cursor.
    pub close_with: String,
    pub after_dot: bool,
    /// True when the cursor can start or is inside a fresh operand.
    pub expects_value: bool,
    pub partial_statement: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl CodeContext {
    fn unknown(partial: &str) -> Self {
        Self {
            mode: Mode::Pattern,
            operator: None,
            operator_class: OpClass::Others,
            rule: None,
            filled_slots: SlotMap::default(),
            missing_slots: Vec::new(),
            active_slot: None,
            active_kind: None,
            slot_table: None,
            slot_column: None,
            keyword_candidates: Vec::new(),
            mentioned_tables: Vec::new(),
            mentioned_columns: Vec::new(),
            prefix: String::new(),
            inside_string_literal: false,
            quote: None,
            close_with: String::new(),
            after_dot: false,
            expects_value: false,
            partial_statement: partial.to_string(),
            diagnostic: None,
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.operator.is_none()
    }
}

pub fn detect_code_context(split: &SplitResult) -> CodeContext {
    detect_with(&split.partial_statement, RuleSet::builtin())
}

/// Detects the context of a partial statement against a rule set.
pub fn detect_with(partial: &str, rules: &RuleSet) -> CodeContext {
    let mut ctx = CodeContext::unknown(partial);
    lexical_state(partial, &mut ctx);
    let stmt = match parse_partial(partial) {
        Ok(s) => s,
        Err(e) => {
            ctx.diagnostic = Some(e.to_string());
            return ctx;
        }
    };
    let (root, target) = match &stmt {
        Stmt::Expr(n) => (n, None),
        Stmt::Assign { target, value } => (value, Some(target)),
        Stmt::Import { .. } | Stmt::Del(_) => return ctx,
    };
    let d = Detector {
        rules,
        len: partial.len(),
        src: partial,
        assign_column_target: target.is_some_and(|t| matches!(t.kind, NodeKind::Subscript { .. })),
    };
    mentions(root, target, &d, &mut ctx);

    let spine = spine(root);
    let mut found = None;
    for i in (0..spine.len()).rev() {
        if let Some(m) = d.match_node(spine[i], &spine[..i]) {
            found = Some(m);
            break;
        }
    }
    if found.is_none() {
        if let Some(t) = target {
            found = d.match_assignment(t, root);
        }
    }
    if found.is_none() && stmt.is_complete() {
        found = d.complete_statement(&stmt, root);
    }
    if let Some(m) = found {
        d.apply(m, &mut ctx);
    }
    ctx
}

/// Prefix, quoting and closing text from the last token.
fn lexical_state(partial: &str, ctx: &mut CodeContext) {
    let tokens = tokenize(partial);
    let at_end = |end: usize| end == partial.len();
    let Some(last) = tokens.last() else {
        ctx.expects_value = true;
        return;
    };
    let before = tokens.len().checked_sub(2).map(|i| &tokens[i]);
    match last.kind {
        TokenKind::String if !last.terminated && at_end(last.end) => {
            ctx.prefix = last.value.clone().unwrap_or_default();
            ctx.inside_string_literal = true;
            ctx.quote = last.quote;
            ctx.expects_value = true;
        }
        TokenKind::Identifier if at_end(last.end) => {
            ctx.prefix = last.text.clone();
            ctx.after_dot = before.is_some_and(|t| t.kind == TokenKind::Dot);
            ctx.expects_value = true;
        }
        TokenKind::Dot => ctx.after_dot = true,
        TokenKind::Operator | TokenKind::Comma | TokenKind::Newline => ctx.expects_value = true,
        TokenKind::Bracket if last.is_open_bracket() => ctx.expects_value = true,
        _ => {}
    }
}

/// Path from the root to the innermost node the input stopped in.
fn spine(root: &Node) -> Vec<&Node> {
    let mut out = vec![root];
    let mut cur = root;
    while let Some(next) = last_open_position(cur) {
        out.push(next);
        cur = next;
    }
    out
}

fn last_open_position(node: &Node) -> Option<&Node> {
    if node.is_complete() {
        return None;
    }
    match &node.kind {
        // `x.` is open at the dot; the receiver itself is complete.
        NodeKind::Attr { .. } => None,
        NodeKind::Call { args, .. } => args.last().map(|a| &a.value),
        NodeKind::Subscript { index, .. } => index.as_deref(),
        NodeKind::List { items, .. } => items.last(),
        NodeKind::Dict { entries, .. } => entries.last().map(|(k, v)| v.as_ref().unwrap_or(k)),
        NodeKind::Binary { rhs, .. } => Some(rhs),
        NodeKind::Unary { operand, .. } => Some(operand),
        NodeKind::Paren { inner, .. } => Some(inner),
        _ => None,
    }
}

/// What kind of object an expression evaluates to.
pub(crate) fn receiver_kind(node: &Node) -> Option<ReceiverKind> {
    match &node.kind {
        NodeKind::Name(n) if is_module(n) => Some(ReceiverKind::Module),
        NodeKind::Name(n) if matches!(n.as_str(), "True" | "False" | "None") => None,
        NodeKind::Name(_) => Some(ReceiverKind::Table),
        NodeKind::Paren { inner, closed: true } => receiver_kind(inner),
        NodeKind::Subscript {
            value,
            index: Some(index),
            ..
        } => match receiver_kind(value)? {
            ReceiverKind::Table => match &index.kind {
                NodeKind::Str { .. } => Some(ReceiverKind::Column),
                _ => Some(ReceiverKind::Table),
            },
            ReceiverKind::Groupby => Some(ReceiverKind::Groupby),
            _ => None,
        },
        NodeKind::Attr {
            value,
            attr: Some(attr),
        } if attr == "str" => (receiver_kind(value)? == ReceiverKind::Column).then_some(ReceiverKind::Str),
        NodeKind::Call { func, closed: true, .. } => {
            let NodeKind::Attr {
                value,
                attr: Some(method),
            } = &func.kind
            else {
                return None;
            };
            let recv = receiver_kind(value)?;
            match (recv, method.as_str()) {
                (ReceiverKind::Module, "merge" | "concat" | "read_csv") => Some(ReceiverKind::Table),
                (ReceiverKind::Table, "groupby") => Some(ReceiverKind::Groupby),
                (ReceiverKind::Table, "merge" | "sort_values" | "fillna" | "rename" | "drop_duplicates" | "head" | "assign") => {
                    Some(ReceiverKind::Table)
                }
                (ReceiverKind::Groupby, _) => Some(ReceiverKind::Table),
                (ReceiverKind::Column, "fillna" | "astype") => Some(ReceiverKind::Column),
                (ReceiverKind::Str, "replace") => Some(ReceiverKind::Column),
                _ => None,
            }
        }
        _ => None,
    }
}

fn is_table(node: &Node) -> bool {
    receiver_kind(node) == Some(ReceiverKind::Table)
}

/// The named table an expression is computed from.
pub(crate) fn root_table(node: &Node) -> Option<String> {
    match &node.kind {
        NodeKind::Name(n) if is_module(n) || matches!(n.as_str(), "True" | "False" | "None") => None,
        NodeKind::Name(n) => Some(n.clone()),
        NodeKind::Paren { inner, .. } => root_table(inner),
        NodeKind::Subscript { value, .. } | NodeKind::Attr { value, .. } => root_table(value),
        NodeKind::Call { func, args, .. } => {
            if let NodeKind::Attr { value, .. } = &func.kind {
                if value.name().is_some_and(is_module) {
                    return args.first().and_then(|a| match &a.value.kind {
                        NodeKind::List { items, .. } => items.first().and_then(root_table),
                        _ => root_table(&a.value),
                    });
                }
            }
            root_table(func)
        }
        _ => None,
    }
}

/// `T["c"]` with a complete column name.
fn column_access(node: &Node) -> Option<(&Node, &str)> {
    match &node.unparen().kind {
        NodeKind::Subscript {
            value,
            index: Some(index),
            closed: true,
        } if is_table(value) => match &index.kind {
            NodeKind::Str {
                value: c,
                terminated: true,
                ..
            } => Some((value, c)),
            _ => None,
        },
        _ => None,
    }
}

const COMPARATORS: [&str; 6] = ["==", "!=", "<", "<=", ">", ">="];

fn is_condition(node: &Node) -> bool {
    let node = node.unparen();
    match &node.kind {
        NodeKind::Binary { op, .. } => COMPARATORS.contains(&op.as_str()) || op == "&" || op == "|",
        NodeKind::Unary { op, .. } => op == "~",
        NodeKind::Call { func, .. } => matches!(&func.kind, NodeKind::Attr { attr: Some(a), .. } if a == "isin" || a == "contains"),
        _ => false,
    }
}

/// First comparison-like leaf of a condition: (table, column, comparator, value).
fn first_comparison(node: &Node) -> Option<(&Node, &str, String, Option<&Node>)> {
    let node = node.unparen();
    match &node.kind {
        NodeKind::Binary { op, lhs, rhs } if COMPARATORS.contains(&op.as_str()) => {
            let (t, c) = column_access(lhs)?;
            Some((t, c, op.clone(), Some(rhs)))
        }
        NodeKind::Binary { lhs, .. } => first_comparison(lhs),
        NodeKind::Unary { operand, .. } => first_comparison(operand),
        NodeKind::Call { func, args, .. } => {
            let NodeKind::Attr { value, attr: Some(m) } = &func.kind else {
                return None;
            };
            let (recv, name) = if m == "contains" {
                match &value.kind {
                    NodeKind::Attr { value: inner, .. } => (inner.as_ref(), "str.contains"),
                    _ => return None,
                }
            } else {
                (value.as_ref(), "isin")
            };
            let (t, c) = column_access(recv)?;
            Some((t, c, name.to_string(), args.first().map(|a| &a.value)))
        }
        _ => None,
    }
}

/// (table, by, selection) of a grouped receiver.
fn groupby_parts(node: &Node) -> Option<(&Node, Option<&Node>, Option<&Node>)> {
    match &node.kind {
        NodeKind::Subscript {
            value,
            index,
            closed: true,
        } => {
            let (t, by, _) = groupby_parts(value)?;
            Some((t, by, index.as_deref()))
        }
        NodeKind::Call {
            func,
            args,
            closed: true,
        } => match &func.kind {
            NodeKind::Attr {
                value,
                attr: Some(m),
            } if m == "groupby" && is_table(value) => Some((value.as_ref(), args.first().map(|a| &a.value), None)),
            _ => None,
        },
        _ => None,
    }
}

/// A slot filled from the source.
#[derive(Debug, Clone)]
struct Fill<'a> {
    slot: String,
    text: String,
    node: Option<&'a Node>,
}

struct Match<'a> {
    mode: Mode,
    operator: OpKind,
    class: Option<OpClass>,
    rule: String,
    fills: Vec<Fill<'a>>,
    /// Slots the rule always reports missing, beyond the unfilled ones.
    active: Option<String>,
    active_kind: Option<SlotKind>,
    /// Node that determines `slot_table` when no `of` slot is filled.
    keyword_candidates: Vec<String>,
    close_bracket: bool,
    /// The active slot stays active even when partly filled (open lists).
    keep_active: bool,
}

struct Detector<'r, 's> {
    rules: &'r RuleSet,
    len: usize,
    src: &'s str,
    assign_column_target: bool,
}

impl<'r, 's> Detector<'r, 's> {
    fn text(&self, node: &Node) -> String {
        self.src[node.start.min(self.src.len())..node.end.min(self.src.len())].trim().to_string()
    }

    fn fill<'a>(&self, slot: &str, node: &'a Node) -> Fill<'a> {
        Fill {
            slot: slot.to_string(),
            text: self.text(node),
            node: Some(node),
        }
    }

    /// A node the user is still typing: incomplete, or a bare token at the cursor.
    fn being_typed(&self, node: &Node) -> bool {
        !node.is_complete()
            || (node.end == self.len && matches!(node.kind, NodeKind::Name(_) | NodeKind::Number(_)))
    }

    fn match_node<'a>(&self, node: &'a Node, ancestors: &[&'a Node]) -> Option<Match<'a>> {
        if let NodeKind::Call {
            func,
            args,
            closed: false,
        } = &node.kind
        {
            if let Some((sig, recv)) = self.signature_of(func) {
                return Some(self.signature_match(sig, recv, args, true));
            }
        }
        for rule in &self.rules.patterns {
            if let Some(fills) = self.match_shape(rule.shape, node, ancestors) {
                return Some(Match {
                    mode: Mode::Pattern,
                    operator: rule.operator,
                    class: rule.class,
                    rule: rule.name.clone(),
                    fills,
                    active: rule.active.clone(),
                    active_kind: None,
                    keyword_candidates: Vec::new(),
                    close_bracket: false,
                    keep_active: open_list(node),
                });
            }
        }
        None
    }

    fn signature_of<'a>(&self, func: &'a Node) -> Option<(&'r Signature, &'a Node)> {
        let NodeKind::Attr {
            value,
            attr: Some(method),
        } = &func.kind
        else {
            return None;
        };
        let kind = receiver_kind(value)?;
        self.rules.signature(kind, method).map(|s| (s, value.as_ref()))
    }

    fn receiver_fills<'a>(&self, sig: &Signature, recv: &'a Node) -> Vec<Fill<'a>> {
        let mut parts: Vec<Option<&'a Node>> = Vec::new();
        match sig.receiver {
            ReceiverKind::Module => {}
            ReceiverKind::Table => parts.push(Some(recv)),
            ReceiverKind::Column | ReceiverKind::Str => {
                let col = match (&recv.kind, sig.receiver) {
                    (NodeKind::Attr { value, .. }, ReceiverKind::Str) => value.as_ref(),
                    _ => recv,
                };
                // Column receivers may be chains such as `T["c"].fillna(..)`.
                let mut base = col;
                while let NodeKind::Call { func, .. } = &base.kind {
                    match &func.kind {
                        NodeKind::Attr { value, .. } => {
                            base = match &value.kind {
                                NodeKind::Attr { value: v, attr: Some(a) } if a == "str" => v,
                                _ => value,
                            }
                        }
                        _ => break,
                    }
                }
                if let NodeKind::Subscript {
                    value,
                    index: Some(index),
                    ..
                } = &base.kind
                {
                    parts.push(Some(value));
                    parts.push(Some(index));
                }
            }
            ReceiverKind::Groupby => {
                if let Some((t, by, sel)) = groupby_parts(recv) {
                    parts.push(Some(t));
                    parts.push(by);
                    parts.push(sel);
                }
            }
        }
        sig.receiver_slots
            .iter()
            .zip(parts)
            .filter_map(|(slot, part)| part.map(|n| self.fill(slot, n)))
            .collect()
    }

    fn signature_match<'a>(&self, sig: &'r Signature, recv: &'a Node, args: &'a [Arg], open: bool) -> Match<'a> {
        let mut fills = self.receiver_fills(sig, recv);
        for (slot, text) in &sig.prefill {
            fills.push(Fill {
                slot: slot.clone(),
                text: text.clone(),
                node: None,
            });
        }
        let mut active = None;
        let mut active_kind = None;
        let mut close_bracket = false;
        let mut positional_open: Option<usize> = None;
        let mut positional_index = 0;
        for (i, arg) in args.iter().enumerate() {
            let last = i + 1 == args.len();
            let param: Option<&ParamDecl> = match &arg.keyword {
                Some(k) => sig.param(k),
                None => {
                    let p = sig.positional_param(positional_index);
                    positional_index += 1;
                    p
                }
            };
            let typing = open && last && self.being_typed(&arg.value);
            if typing {
                if arg.keyword.is_none() {
                    positional_open = Some(positional_index - 1);
                }
                if let Some(p) = param {
                    let (slot, kind) = self.active_in_param(sig, p, &arg.value);
                    active = slot;
                    active_kind = kind;
                    close_bracket = false;
                }
                // Completed entries of a list or dict being typed still count.
                if let Some(p) = param {
                    self.partial_fills(sig, p, arg, &mut fills);
                }
                continue;
            }
            let Some(p) = param else { continue };
            if p.is_wildcard() {
                if let Some(k) = &arg.keyword {
                    fills.push(Fill {
                        slot: p.slots[0].clone(),
                        text: k.clone(),
                        node: None,
                    });
                    for s in &p.slots[1..] {
                        fills.push(self.fill(s, &arg.value));
                    }
                }
                continue;
            }
            for s in &p.slots {
                fills.push(self.fill(s, &arg.value));
            }
        }
        if open && args.is_empty() {
            if let Some(p) = sig.positional_param(0).or_else(|| sig.params.iter().find(|p| p.is_wildcard())) {
                let slot = &p.slots[0];
                active = Some(slot.clone());
                active_kind = self.rules.slot(sig.operator, slot).map(|d| d.kind);
            }
        }
        let filled: HashSet<&str> = fills.iter().map(|f| f.slot.as_str()).collect();
        let keyword_position = open
            && match args.last() {
                None => true,
                Some(a) => a.keyword.is_none() && self.being_typed(&a.value) && matches!(a.value.kind, NodeKind::Missing | NodeKind::Name(_)),
            };
        let keyword_candidates = if keyword_position {
            sig.params
                .iter()
                .enumerate()
                .filter(|(i, p)| {
                    !p.is_wildcard()
                        && positional_open.is_none_or(|o| *i >= o)
                        && p.slots.iter().all(|s| !filled.contains(s.as_str()))
                })
                .map(|(_, p)| p.name.clone())
                .collect()
        } else {
            Vec::new()
        };
        Match {
            mode: if open { Mode::InSignature } else { Mode::Pattern },
            operator: sig.operator,
            class: sig.class,
            rule: sig.name.clone(),
            fills,
            active,
            active_kind,
            keyword_candidates,
            close_bracket,
            keep_active: false,
        }
    }

    /// Which slot is being typed inside an argument value.
    fn active_in_param(&self, sig: &Signature, p: &ParamDecl, value: &Node) -> (Option<String>, Option<SlotKind>) {
        let decl_kind = |slot: &str| self.rules.slot(sig.operator, slot).map(|d| d.kind);
        if let NodeKind::Dict { entries, .. } = &value.kind {
            let in_value = entries.last().is_some_and(|(_, v)| v.is_some());
            let slot = if in_value { p.value_slot.as_ref() } else { p.key_slot.as_ref() };
            if let Some(slot) = slot {
                let kind = match decl_kind(slot) {
                    Some(SlotKind::Mapping) if in_value => Some(SlotKind::Text),
                    Some(SlotKind::Mapping) => Some(SlotKind::Column),
                    k => k,
                };
                return (Some(slot.clone()), kind);
            }
        }
        if p.is_wildcard() {
            let slot = p.slots.last().cloned();
            let kind = slot.as_deref().and_then(decl_kind);
            return (slot, kind);
        }
        let slot = p.slots.first().cloned();
        let kind = slot.as_deref().and_then(decl_kind);
        (slot, kind)
    }

    /// Slots of a dict argument whose other half is already complete.
    fn partial_fills<'a>(&self, sig: &Signature, p: &ParamDecl, arg: &'a Arg, fills: &mut Vec<Fill<'a>>) {
        if let NodeKind::Dict { entries, .. } = &arg.value.kind {
            let in_value = entries.last().is_some_and(|(_, v)| v.is_some());
            if in_value {
                if let (Some(k), Some((key, _))) = (&p.key_slot, entries.last()) {
                    if p.value_slot.as_ref() != Some(k) {
                        fills.push(self.fill(k, key));
                    }
                }
            }
        }
        if p.is_wildcard() {
            if let Some(k) = &arg.keyword {
                fills.push(Fill {
                    slot: p.slots[0].clone(),
                    text: k.clone(),
                    node: None,
                });
            }
        }
        let _ = sig;
    }

    fn in_mask(&self, ancestors: &[&Node], node: &Node) -> Option<String> {
        let mut child = node;
        for anc in ancestors.iter().rev() {
            match &anc.kind {
                NodeKind::Subscript {
                    value,
                    index: Some(index),
                    ..
                } => {
                    if std::ptr::eq(index.as_ref(), child) && is_table(value) && !matches!(child.kind, NodeKind::Str { .. } | NodeKind::List { .. }) {
                        return root_table(value).or_else(|| Some(String::new()));
                    }
                    return None;
                }
                NodeKind::Call { .. } | NodeKind::List { .. } | NodeKind::Dict { .. } => return None,
                _ => {}
            }
            child = anc;
        }
        None
    }

    fn strings_of<'a>(&self, node: &'a Node) -> Vec<&'a Node> {
        match &node.kind {
            NodeKind::Str { terminated: true, .. } => vec![node],
            NodeKind::List { items, .. } => items
                .iter()
                .filter(|i| matches!(i.kind, NodeKind::Str { terminated: true, .. }))
                .collect(),
            _ => vec![],
        }
    }

    fn columns_fill<'a>(&self, slot: &str, node: &'a Node) -> Option<Fill<'a>> {
        let strings = self.strings_of(node);
        if strings.is_empty() {
            return None;
        }
        let text = if matches!(node.kind, NodeKind::List { .. }) {
            let items: Vec<String> = strings.iter().map(|s| self.text(s)).collect();
            format!("[{}]", items.join(", "))
        } else {
            self.text(node)
        };
        Some(Fill {
            slot: slot.to_string(),
            text,
            node: Some(node),
        })
    }

    fn match_shape<'a>(&self, shape: Shape, node: &'a Node, ancestors: &[&'a Node]) -> Option<Vec<Fill<'a>>> {
        match (shape, &node.kind) {
            (
                Shape::OpenSubscript,
                NodeKind::Subscript {
                    value,
                    index: None,
                    closed: false,
                },
            ) if is_table(value) => Some(vec![self.fill("table", value)]),
            (
                Shape::SubscriptWithColumn,
                NodeKind::Subscript {
                    value,
                    index: Some(index),
                    closed: false,
                },
            ) if is_table(value) => {
                let (_, _) = column_access(index)?;
                let NodeKind::Subscript { index: Some(col), .. } = &index.unparen().kind else {
                    return None;
                };
                Some(vec![self.fill("table", value), self.fill("column", col)])
            }
            (Shape::ParenWithColumn, NodeKind::Paren { inner, closed: false }) => {
                let (t, _) = column_access(inner)?;
                let NodeKind::Subscript { index: Some(col), .. } = &inner.unparen().kind else {
                    return None;
                };
                Some(vec![self.fill("table", t), self.fill("column", col)])
            }
            (Shape::ComparisonMissingRhs, NodeKind::Binary { op, lhs, rhs }) if COMPARATORS.contains(&op.as_str()) && !rhs.is_complete() => {
                let (t, _) = column_access(lhs)?;
                let NodeKind::Subscript { index: Some(col), .. } = &lhs.unparen().kind else {
                    return None;
                };
                Some(vec![
                    self.fill("table", t),
                    self.fill("column", col),
                    Fill {
                        slot: "comparator".into(),
                        text: op.clone(),
                        node: None,
                    },
                ])
            }
            (Shape::BooleanMissingOperand, NodeKind::Binary { op, lhs, rhs }) if (op == "&" || op == "|") && !rhs.is_complete() => {
                let table = self
                    .mask_table(ancestors, node)
                    .or_else(|| first_comparison(lhs).map(|(t, ..)| t));
                Some(table.map(|t| vec![self.fill("table", t)]).unwrap_or_default())
            }
            (Shape::BooleanMissingOperand, NodeKind::Unary { op, operand }) if op == "~" && !operand.is_complete() => {
                Some(self.mask_table(ancestors, node).map(|t| vec![self.fill("table", t)]).unwrap_or_default())
            }
            (
                Shape::SubscriptWithCondition,
                NodeKind::Subscript {
                    value,
                    index: Some(index),
                    closed: false,
                },
            ) if is_table(value) && index.is_complete() && is_condition(index) => {
                let mut fills = vec![self.fill("table", value)];
                if let Some((_, _, cmp, rhs)) = first_comparison(index) {
                    if let Some(col) = first_column_node(index) {
                        fills.push(self.fill("column", col));
                    }
                    fills.push(Fill {
                        slot: "comparator".into(),
                        text: cmp,
                        node: None,
                    });
                    if let Some(r) = rhs {
                        fills.push(self.fill("value", r));
                    }
                }
                Some(fills)
            }
            (
                Shape::ColumnNameInMask,
                NodeKind::Subscript {
                    value,
                    index: Some(index),
                    closed: false,
                },
            ) if is_table(value) && matches!(index.kind, NodeKind::Str { .. }) => {
                self.in_mask(ancestors, node)?;
                let mut fills = vec![self.fill("table", value)];
                if index.is_complete() {
                    fills.push(self.fill("column", index));
                }
                Some(fills)
            }
            (
                Shape::ColumnNameSubscript,
                NodeKind::Subscript {
                    value,
                    index: Some(index),
                    closed: false,
                },
            ) if is_table(value) && matches!(index.kind, NodeKind::Str { .. }) => {
                if self.in_mask(ancestors, node).is_some()
                    || self.in_assignment_value(ancestors)
                    || self.inside_signature(ancestors)
                {
                    return None;
                }
                let mut fills = vec![self.fill("table", value)];
                fills.extend(self.columns_fill("columns", index));
                Some(fills)
            }
            (
                Shape::ColumnListSubscript,
                NodeKind::Subscript {
                    value,
                    index: Some(index),
                    closed: false,
                },
            ) if is_table(value) && matches!(index.kind, NodeKind::List { .. }) => {
                let mut fills = vec![self.fill("table", value)];
                fills.extend(self.columns_fill("columns", index));
                Some(fills)
            }
            (Shape::GroupbySubscript, NodeKind::Subscript { value, index, closed: false }) => {
                let (t, by, _) = groupby_parts(value)?;
                let mut fills = vec![self.fill("table", t)];
                if let Some(by) = by {
                    fills.extend(self.columns_fill("by", by));
                }
                if let Some(ix) = index {
                    fills.extend(self.columns_fill("columns", ix));
                }
                Some(fills)
            }
            (Shape::GroupbyAttribute, NodeKind::Attr { value, attr }) => {
                if attr.is_some() && node.end != self.len {
                    return None;
                }
                let (t, by, sel) = groupby_parts(value)?;
                let mut fills = vec![self.fill("table", t)];
                if let Some(by) = by {
                    fills.extend(self.columns_fill("by", by));
                }
                if let Some(sel) = sel {
                    fills.extend(self.columns_fill("columns", sel));
                }
                Some(fills)
            }
            _ => None,
        }
    }

    fn inside_signature(&self, ancestors: &[&Node]) -> bool {
        ancestors.iter().any(|a| match &a.kind {
            NodeKind::Call { func, closed: false, .. } => self.signature_of(func).is_some(),
            _ => false,
        })
    }

    fn mask_table<'a>(&self, ancestors: &[&'a Node], node: &'a Node) -> Option<&'a Node> {
        let mut child = node;
        for anc in ancestors.iter().rev() {
            if let NodeKind::Subscript {
                value,
                index: Some(index),
                ..
            } = &anc.kind
            {
                if std::ptr::eq(index.as_ref(), child) && is_table(value) {
                    return Some(value);
                }
                return None;
            }
            child = anc;
        }
        None
    }

    /// True when no subscript or call sits between the node and the root,
    /// which is the value of a column assignment when the statement is one.
    fn in_assignment_value(&self, ancestors: &[&Node]) -> bool {
        ancestors
            .iter()
            .all(|a| matches!(a.kind, NodeKind::Binary { .. } | NodeKind::Unary { .. } | NodeKind::Paren { .. }))
            && self.assign_column_target
    }

    fn match_assignment<'a>(&self, target: &'a Node, value: &'a Node) -> Option<Match<'a>> {
        let NodeKind::Subscript {
            value: table,
            index: Some(col),
            closed: true,
        } = &target.kind
        else {
            return None;
        };
        if value.is_complete() && !self.being_typed(value) {
            return None;
        }
        let rule = self.rules.pattern(Shape::ColumnAssignmentValue)?;
        Some(Match {
            mode: Mode::Pattern,
            operator: rule.operator,
            class: rule.class,
            rule: rule.name.clone(),
            fills: vec![self.fill("table", table), self.fill("target", col)],
            active: rule.active.clone(),
            active_kind: None,
            keyword_candidates: Vec::new(),
            close_bracket: false,
            keep_active: false,
        })
    }

    /// A statement with nothing left open: report its outermost operation.
    fn complete_statement<'a>(&self, stmt: &'a Stmt, root: &'a Node) -> Option<Match<'a>> {
        let node = root.unparen();
        if let NodeKind::Call { func, args, closed: true } = &node.kind {
            if let Some((sig, recv)) = self.signature_of(func) {
                let mut m = self.signature_match(sig, recv, args, false);
                m.rule = format!("{} (complete)", sig.name);
                return Some(m);
            }
        }
        let op = match lower_stmt(stmt).ok()? {
            Statement::Assign { op, .. } | Statement::Expr(op) => op,
            _ => return None,
        };
        let fills = op_fills(&op, node, stmt, self);
        Some(Match {
            mode: Mode::Pattern,
            operator: op.kind(),
            class: None,
            rule: "complete_statement".into(),
            fills,
            active: None,
            active_kind: None,
            keyword_candidates: Vec::new(),
            close_bracket: false,
            keep_active: false,
        })
    }

    fn apply(&self, m: Match<'_>, ctx: &mut CodeContext) {
        let decl = self.rules.operator(m.operator);
        ctx.mode = m.mode;
        ctx.operator = Some(m.operator);
        ctx.operator_class = m.class.unwrap_or(decl.class);
        ctx.rule = Some(m.rule);

        let mut seen = HashSet::new();
        let fills: Vec<Fill<'_>> = m.fills.into_iter().filter(|f| seen.insert(f.slot.clone())).collect();
        let mut ordered = Vec::new();
        for s in &decl.slots {
            if let Some(f) = fills.iter().find(|f| f.slot == s.name) {
                ordered.push((s.name.clone(), f.text.clone()));
            }
        }
        ctx.filled_slots = SlotMap(ordered);
        ctx.missing_slots = decl
            .slots
            .iter()
            .filter(|s| !ctx.filled_slots.contains(&s.name))
            .map(|s| s.name.clone())
            .collect();

        let active = m.active.filter(|a| m.keep_active || !ctx.filled_slots.contains(a));
        ctx.active_kind = m
            .active_kind
            .or_else(|| active.as_deref().and_then(|a| self.rules.slot(m.operator, a)).map(|d| d.kind));
        if let Some(a) = &active {
            if let Some(d) = self.rules.slot(m.operator, a) {
                let table_of = |slot: &str| {
                    fills
                        .iter()
                        .find(|f| f.slot == slot)
                        .and_then(|f| f.node)
                        .and_then(root_table)
                };
                ctx.slot_table = d.of.as_deref().and_then(table_of);
                if d.kind == SlotKind::Table || d.kind == SlotKind::Tables {
                    ctx.slot_table = None;
                }
                ctx.slot_column = d
                    .values_of
                    .as_deref()
                    .and_then(|c| fills.iter().find(|f| f.slot == c))
                    .and_then(|f| f.node)
                    .and_then(|n| n.str_value().map(str::to_string));
            }
        }
        ctx.active_slot = active;
        ctx.keyword_candidates = m.keyword_candidates;
        if ctx.inside_string_literal {
            let q = ctx.quote.unwrap_or('"');
            ctx.close_with = if m.close_bracket || self.string_is_subscript_index() {
                format!("{q}]")
            } else {
                q.to_string()
            };
        }
    }

    fn string_is_subscript_index(&self) -> bool {
        let Ok(stmt) = parse_partial(self.src) else {
            return false;
        };
        let root = match &stmt {
            Stmt::Expr(n) => n,
            Stmt::Assign { value, .. } => value,
            _ => return false,
        };
        let sp = spine(root);
        match sp.as_slice() {
            [.., parent, last] => {
                matches!(last.kind, NodeKind::Str { terminated: false, .. })
                    && matches!(&parent.kind, NodeKind::Subscript { value, .. } if is_table(value) || groupby_parts(value).is_some())
            }
            _ => false,
        }
    }
}

/// A subscript whose index is a list still being typed.
fn open_list(node: &Node) -> bool {
    matches!(&node.kind, NodeKind::Subscript { index: Some(ix), .. } if matches!(ix.kind, NodeKind::List { closed: false, .. }))
}

fn first_column_node(cond: &Node) -> Option<&Node> {
    let (t, col, ..) = first_comparison(cond)?;
    let _ = (t, col);
    fn find(n: &Node) -> Option<&Node> {
        let n = n.unparen();
        match &n.kind {
            NodeKind::Subscript { index: Some(ix), closed: true, value } if is_table(value) && matches!(ix.kind, NodeKind::Str { .. }) => Some(ix),
            _ => n.children().into_iter().find_map(find),
        }
    }
    find(cond)
}

/// Filled slots of a completely lowered operation, as source text.
fn op_fills<'a>(op: &TransformOp, node: &'a Node, stmt: &'a Stmt, d: &Detector<'_, '_>) -> Vec<Fill<'a>> {
    let text = |slot: &str, t: String| Fill {
        slot: slot.to_string(),
        text: t,
        node: None,
    };
    let table_fill = |slot: &str, src: &crate::frame::Source| {
        let name = crate::script::print::render_source(src);
        Fill {
            slot: slot.to_string(),
            node: find_table_node(node, src.root()),
            text: name,
        }
    };
    let mut fills = Vec::new();
    match op {
        TransformOp::Filter { source, predicate } => {
            fills.push(table_fill("table", source));
            if let Some(c) = predicate.columns().first() {
                fills.push(text("column", crate::frame::quote(c)));
            }
            fills.push(text("comparator", comparator_name(predicate)));
            if let Some(v) = predicate.literals().first() {
                fills.push(text("value", v.literal()));
            } else {
                fills.push(text("value", "column".into()));
            }
        }
        TransformOp::SelectColumns { source, columns } => {
            fills.push(table_fill("table", source));
            let items: Vec<String> = columns.iter().map(|c| crate::frame::quote(c)).collect();
            fills.push(text("columns", format!("[{}]", items.join(", "))));
        }
        TransformOp::AssignColumn { source, column, expr } => {
            fills.push(table_fill("table", source));
            fills.push(text("target", crate::frame::quote(column)));
            let value = match stmt {
                Stmt::Assign { value, .. } => d.text(value),
                Stmt::Expr(_) => crate::script::print::render_expr(expr, &crate::script::print::render_source(source)),
                _ => String::new(),
            };
            fills.push(text("expr", value));
        }
        _ => {
            if let Some(s) = op.sources().first() {
                let slot = match op.kind() {
                    OpKind::Merge => "left",
                    OpKind::Concat => "tables",
                    _ => "table",
                };
                fills.push(table_fill(slot, s));
            }
            let printed = op.to_string();
            for slot in RuleSet::builtin().slot_names(op.kind()) {
                if !fills.iter().any(|f| f.slot == slot) {
                    let optional = RuleSet::builtin().slot(op.kind(), slot).is_some_and(|s| s.optional);
                    if !optional {
                        fills.push(text(slot, printed.clone()));
                    }
                }
            }
        }
    }
    fills
}

fn comparator_name(p: &crate::frame::Predicate) -> String {
    use crate::frame::Predicate;
    match p {
        Predicate::Compare { op, .. } => op.as_str().to_string(),
        Predicate::IsIn { .. } => "isin".into(),
        Predicate::StrContains { .. } => "str.contains".into(),
        Predicate::And(a, _) | Predicate::Or(a, _) | Predicate::Not(a) => comparator_name(a),
    }
}

fn find_table_node<'a>(node: &'a Node, name: &str) -> Option<&'a Node> {
    if node.name() == Some(name) {
        return Some(node);
    }
    node.children().into_iter().find_map(|c| find_table_node(c, name))
}

/// Tables and columns named in the statement.
fn mentions(root: &Node, target: Option<&Node>, d: &Detector<'_, '_>, ctx: &mut CodeContext) {
    let mut tables: Vec<String> = Vec::new();
    let mut columns: Vec<ColumnRef> = Vec::new();
    let mut push_table = |n: &str, tables: &mut Vec<String>| {
        if !tables.iter().any(|t| t == n) {
            tables.push(n.to_string());
        }
    };
    if let Some(t) = target {
        if let NodeKind::Subscript { value, .. } = &t.kind {
            if let Some(n) = value.name() {
                push_table(n, &mut tables);
            }
        }
        collect(t, d, &mut tables, &mut columns, &mut push_table, true);
    }
    collect(root, d, &mut tables, &mut columns, &mut push_table, false);
    let mut seen = HashSet::new();
    columns.retain(|c| seen.insert(c.clone()));
    ctx.mentioned_tables = tables;
    ctx.mentioned_columns = columns;
}

fn collect(
    node: &Node,
    d: &Detector<'_, '_>,
    tables: &mut Vec<String>,
    columns: &mut Vec<ColumnRef>,
    push_table: &mut impl FnMut(&str, &mut Vec<String>),
    is_target: bool,
) {
    match &node.kind {
        NodeKind::Name(n) if !is_module(n) && !matches!(n.as_str(), "True" | "False" | "None") => {
            if !is_target {
                push_table(n, tables);
            }
        }
        NodeKind::Subscript {
            value,
            index: Some(index),
            ..
        } => {
            let table = if is_table(value) {
                root_table(value)
            } else {
                groupby_parts(value).and_then(|(t, ..)| root_table(t))
            };
            if let Some(t) = table {
                for s in d.strings_of(index) {
                    if let Some(c) = s.str_value() {
                        columns.push(ColumnRef::new(&t, c));
                    }
                }
            }
        }
        NodeKind::Call { func, args, .. } => {
            if let Some((sig, recv)) = d.signature_of(func) {
                call_columns(sig, recv, args, d, columns);
            }
            // The function name itself is not a table.
            if let NodeKind::Name(_) = func.kind {
                for a in args {
                    collect(&a.value, d, tables, columns, push_table, false);
                }
                return;
            }
        }
        _ => {}
    }
    for c in node.children() {
        collect(c, d, tables, columns, push_table, false);
    }
}

/// Column names passed to column-valued parameters of a known call.
fn call_columns(sig: &Signature, recv: &Node, args: &[Arg], d: &Detector<'_, '_>, out: &mut Vec<ColumnRef>) {
    let rules = d.rules;
    let receiver = d.receiver_fills(sig, recv);
    let mut table_nodes: Vec<(String, &Node)> = receiver
        .iter()
        .filter_map(|f| f.node.map(|n| (f.slot.clone(), n)))
        .collect();
    let mut pos = 0;
    let mut bound: Vec<(&ParamDecl, &Arg)> = Vec::new();
    for a in args {
        let p = match &a.keyword {
            Some(k) => sig.param(k),
            None => {
                pos += 1;
                sig.positional_param(pos - 1)
            }
        };
        if let Some(p) = p {
            bound.push((p, a));
            for s in &p.slots {
                if rules.slot(sig.operator, s).is_some_and(|d| matches!(d.kind, SlotKind::Table)) {
                    table_nodes.push((s.clone(), &a.value));
                }
            }
        }
    }
    for (p, a) in bound {
        let columnar: Vec<&str> = p
            .slots
            .iter()
            .chain(&p.key_slot)
            .map(String::as_str)
            .filter(|s| {
                rules
                    .slot(sig.operator, s)
                    .is_some_and(|d| matches!(d.kind, SlotKind::Column | SlotKind::Columns | SlotKind::Mapping))
            })
            .collect();
        for slot in columnar {
            let Some(of) = rules.slot(sig.operator, slot).and_then(|d| d.of.as_deref()) else {
                continue;
            };
            let Some(table) = table_nodes.iter().find(|(s, _)| s == of).and_then(|(_, n)| root_table(n)) else {
                continue;
            };
            let names: Vec<&Node> = match &a.value.kind {
                NodeKind::Dict { entries, .. } => entries
                    .iter()
                    .map(|(k, _)| k)
                    .filter(|k| matches!(k.kind, NodeKind::Str { terminated: true, .. }))
                    .collect(),
                _ => d.strings_of(&a.value),
            };
            for n in names {
                if let Some(c) = n.str_value() {
                    out.push(ColumnRef::new(&table, c));
                }
            }
        }
    }
}

/// Operator kind of a complete statement, if it lowers.
pub fn classify_complete(source: &str) -> Option<OpKind> {
    match lower_stmt(&parse_partial(source).ok()?).ok()? {
        Statement::Assign { op, .. } | Statement::Expr(op) => Some(op.kind()),
        _ => None,
    }
}
