//! Declarative rule tables: operator slots, call signatures, pattern rules.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::frame::OpKind;

use super::ScriptError;

const EMBEDDED: &str = include_str!("../../rules/dialect.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpClass {
    DataFrame,
    Series,
    Others,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Table,
    Tables,
    Column,
    Columns,
    Comparator,
    Value,
    Text,
    Expr,
    Mapping,
    Number,
    Choice,
}

impl SlotKind {
    /// Slots filled with column names of some table.
    pub fn is_columnar(self) -> bool {
        matches!(self, SlotKind::Column | SlotKind::Columns | SlotKind::Mapping | SlotKind::Expr)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SlotDecl {
    pub name: String,
    pub kind: SlotKind,
    #[serde(default)]
    pub optional: bool,
    /// For column-valued slots: the table slot whose columns apply.
    #[serde(default)]
    pub of: Option<String>,
    /// For value slots: the column slot whose values apply.
    #[serde(default)]
    pub values_of: Option<String>,
    /// Literal spellings for choice slots.
    #[serde(default)]
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct OperatorDecl {
    pub kind: OpKind,
    pub class: OpClass,
    pub slots: Vec<SlotDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    Module,
    Table,
    Column,
    Str,
    Groupby,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ParamDecl {
    pub name: String,
    pub slots: Vec<String>,
    /// When the argument is a dict: slot being typed in a key position.
    #[serde(default)]
    pub key_slot: Option<String>,
    /// When the argument is a dict: slot being typed in a value position.
    #[serde(default)]
    pub value_slot: Option<String>,
}

impl ParamDecl {
    pub fn is_wildcard(&self) -> bool {
        self.name == "*"
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Signature {
    pub name: String,
    pub receiver: ReceiverKind,
    pub method: String,
    pub operator: OpKind,
    #[serde(default)]
    pub class: Option<OpClass>,
    #[serde(default)]
    pub receiver_slots: Vec<String>,
    #[serde(default)]
    pub prefill: BTreeMap<String, String>,
    #[serde(default)]
    pub positional: usize,
    pub params: Vec<ParamDecl>,
}

impl Signature {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .or_else(|| self.params.iter().find(|p| p.is_wildcard()))
    }

    pub fn positional_param(&self, i: usize) -> Option<&ParamDecl> {
        if i < self.positional {
            self.params.get(i)
        } else {
            None
        }
    }
}

/// Partial-AST shapes known to the detector. Rules bind them to operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    OpenSubscript,
    SubscriptWithColumn,
    ParenWithColumn,
    ComparisonMissingRhs,
    BooleanMissingOperand,
    SubscriptWithCondition,
    ColumnNameInMask,
    ColumnNameSubscript,
    ColumnListSubscript,
    ColumnAssignmentValue,
    GroupbySubscript,
    GroupbyAttribute,
}

impl Shape {
    /// Slots this shape can fill from the source.
    pub fn captures(self) -> &'static [&'static str] {
        match self {
            Shape::OpenSubscript | Shape::BooleanMissingOperand => &["table"],
            Shape::SubscriptWithColumn | Shape::ParenWithColumn | Shape::ColumnNameInMask => &["table", "column"],
            Shape::ComparisonMissingRhs => &["table", "column", "comparator"],
            Shape::SubscriptWithCondition => &["table", "column", "comparator", "value"],
            Shape::ColumnNameSubscript | Shape::ColumnListSubscript => &["table", "columns"],
            Shape::ColumnAssignmentValue => &["table", "target"],
            Shape::GroupbySubscript | Shape::GroupbyAttribute => &["table", "by", "columns"],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct PatternRule {
    pub name: String,
    pub shape: Shape,
    pub operator: OpKind,
    #[serde(default)]
    pub class: Option<OpClass>,
    pub missing: Vec<String>,
    #[serde(default)]
    pub active: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RuleSet {
    pub version: u32,
    #[serde(rename = "operator")]
    pub operators: Vec<OperatorDecl>,
    #[serde(rename = "signature")]
    pub signatures: Vec<Signature>,
    #[serde(rename = "pattern")]
    pub patterns: Vec<PatternRule>,
}

impl RuleSet {
    /// The rules shipped with the crate.
    pub fn builtin() -> &'static RuleSet {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES.get_or_init(|| RuleSet::from_toml(EMBEDDED).expect("embedded rule file is valid"))
    }

    pub fn from_toml(text: &str) -> Result<Self, ScriptError> {
        let rules: RuleSet = toml::from_str(text).map_err(|e| ScriptError::Rules(e.to_string()))?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn operator(&self, kind: OpKind) -> &OperatorDecl {
        self.operators
            .iter()
            .find(|o| o.kind == kind)
            .expect("validated: every kind is declared")
    }

    pub fn slot(&self, kind: OpKind, slot: &str) -> Option<&SlotDecl> {
        self.operator(kind).slots.iter().find(|s| s.name == slot)
    }

    pub fn slot_names(&self, kind: OpKind) -> Vec<&str> {
        self.operator(kind).slots.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn signature(&self, receiver: ReceiverKind, method: &str) -> Option<&Signature> {
        self.signatures
            .iter()
            .find(|s| s.receiver == receiver && s.method == method)
    }

    pub fn pattern(&self, shape: Shape) -> Option<&PatternRule> {
        self.patterns.iter().find(|p| p.shape == shape)
    }

    fn validate(&self) -> Result<(), ScriptError> {
        let bad = |m: String| Err(ScriptError::Rules(m));
        for kind in OpKind::ALL {
            let n = self.operators.iter().filter(|o| o.kind == kind).count();
            if n != 1 {
                return bad(format!("operator {kind} declared {n} times"));
            }
        }
        for op in &self.operators {
            let names: HashSet<&str> = op.slots.iter().map(|s| s.name.as_str()).collect();
            if names.len() != op.slots.len() {
                return bad(format!("operator {} repeats a slot", op.kind));
            }
            for s in &op.slots {
                for r in s.of.iter().chain(&s.values_of) {
                    if !names.contains(r.as_str()) {
                        return bad(format!("{}.{} refers to unknown slot {r}", op.kind, s.name));
                    }
                }
                if (s.kind == SlotKind::Choice) == s.choices.is_empty() {
                    return bad(format!("{}.{}: choices go with choice slots only", op.kind, s.name));
                }
            }
        }
        let mut seen = HashSet::new();
        for sig in &self.signatures {
            if !seen.insert((sig.receiver, sig.method.as_str())) {
                return bad(format!("signature {} is ambiguous", sig.name));
            }
            let op = self.operator(sig.operator);
            let has = |s: &str| op.slots.iter().any(|d| d.name == s);
            let referenced = sig
                .receiver_slots
                .iter()
                .chain(sig.prefill.keys())
                .chain(sig.params.iter().flat_map(|p| p.slots.iter().chain(&p.key_slot).chain(&p.value_slot)));
            for s in referenced {
                if !has(s) {
                    return bad(format!("signature {} refers to unknown slot {s}", sig.name));
                }
            }
            if sig.positional > sig.params.len() {
                return bad(format!("signature {} has too many positional params", sig.name));
            }
        }
        let mut shapes = HashSet::new();
        for rule in &self.patterns {
            if !shapes.insert(rule.shape) {
                return bad(format!("shape of rule {} is bound twice", rule.name));
            }
            let slots: HashSet<&str> = self.slot_names(rule.operator).into_iter().collect();
            let captures: HashSet<&str> = rule.shape.captures().iter().copied().collect();
            let missing: HashSet<&str> = rule.missing.iter().map(String::as_str).collect();
            if !captures.is_disjoint(&missing) {
                return bad(format!("rule {} lists a captured slot as missing", rule.name));
            }
            let union: HashSet<&str> = captures.union(&missing).copied().collect();
            if union != slots {
                return bad(format!("rule {}: captures and missing do not cover the slots of {}", rule.name, rule.operator));
            }
            if let Some(a) = &rule.active {
                if !slots.contains(a.as_str()) {
                    return bad(format!("rule {} activates unknown slot {a}", rule.name));
                }
            }
        }
        Ok(())
    }
}
