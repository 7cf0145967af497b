//! Type matching and context selection for a code context.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::frame::Environment;
use crate::script::{CodeContext, ColumnRef, OpClass, SlotKind};

use super::profile::{ColumnProfile, RowSample, TableProfile};
use super::store::ProfileStore;
use super::ContextError;

const EMBEDDED: &str = include_str!("../../rules/contexts.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextLevel {
    Table,
    Column,
    Row,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Supplement {
    pub class: OpClass,
    pub slot_kind: SlotKind,
    pub add: Vec<ContextLevel>,
    #[serde(default)]
    pub join_candidates: bool,
    #[serde(default)]
    pub key_columns: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClassLevels {
    #[serde(rename = "DataFrame")]
    pub dataframe: Vec<ContextLevel>,
    #[serde(rename = "Series")]
    pub series: Vec<ContextLevel>,
    #[serde(rename = "Others")]
    pub others: Vec<ContextLevel>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ContextMatrix {
    pub version: u32,
    pub class: ClassLevels,
    #[serde(default, rename = "supplement")]
    pub supplements: Vec<Supplement>,
}

impl ContextMatrix {
    pub fn builtin() -> &'static ContextMatrix {
        static M: OnceLock<ContextMatrix> = OnceLock::new();
        M.get_or_init(|| ContextMatrix::from_toml(EMBEDDED).expect("embedded context matrix is valid"))
    }

    pub fn from_toml(text: &str) -> Result<Self, ContextError> {
        let m: ContextMatrix = toml::from_str(text).map_err(|e| ContextError::Matrix(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn levels(&self, class: OpClass) -> &[ContextLevel] {
        match class {
            OpClass::DataFrame => &self.class.dataframe,
            OpClass::Series => &self.class.series,
            OpClass::Others => &self.class.others,
        }
    }

    pub fn supplement(&self, class: OpClass, kind: SlotKind) -> Option<&Supplement> {
        self.supplements.iter().find(|s| s.class == class && s.slot_kind == kind)
    }

    fn validate(&self) -> Result<(), ContextError> {
        let bad = |m: &str| Err(ContextError::Matrix(m.to_string()));
        // Series operators act on one column; table and row levels never apply.
        let series_extra = self
            .supplements
            .iter()
            .filter(|s| s.class == OpClass::Series)
            .flat_map(|s| &s.add)
            .chain(&self.class.series);
        if series_extra.into_iter().any(|l| *l != ContextLevel::Column) {
            return bad("Series contexts are column-level only");
        }
        if !self.class.dataframe.contains(&ContextLevel::Table) || !self.class.others.contains(&ContextLevel::Table) {
            return bad("DataFrame and Others classes must include table-level contexts");
        }
        let mut seen = BTreeSet::new();
        for s in &self.supplements {
            if !seen.insert((format!("{:?}", s.class), format!("{:?}", s.slot_kind))) {
                return bad("a (class, slot_kind) pair is listed twice");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rationale {
    pub level: ContextLevel,
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataContextBundle {
    pub operator_class: OpClass,
    pub table_contexts: Vec<TableProfile>,
    pub column_contexts: Vec<ColumnProfile>,
    pub row_contexts: Vec<RowSample>,
    pub rationale: Vec<Rationale>,
}

impl DataContextBundle {
    pub fn is_empty(&self) -> bool {
        self.table_contexts.is_empty() && self.column_contexts.is_empty() && self.row_contexts.is_empty()
    }

    pub fn levels(&self) -> BTreeSet<ContextLevel> {
        let mut out = BTreeSet::new();
        if !self.table_contexts.is_empty() {
            out.insert(ContextLevel::Table);
        }
        if !self.column_contexts.is_empty() {
            out.insert(ContextLevel::Column);
        }
        if !self.row_contexts.is_empty() {
            out.insert(ContextLevel::Row);
        }
        out
    }
}

pub fn select_contexts(ctx: &CodeContext, store: &ProfileStore, env: &Environment) -> DataContextBundle {
    select_with(ctx, store, env, ContextMatrix::builtin())
}

pub fn select_with(ctx: &CodeContext, store: &ProfileStore, env: &Environment, matrix: &ContextMatrix) -> DataContextBundle {
    let class = if ctx.is_unknown() { OpClass::Others } else { ctx.operator_class };
    let mut levels: BTreeSet<ContextLevel> = matrix.levels(class).iter().copied().collect();
    let mut rationale = Vec::new();
    let supplement = match (ctx.is_unknown(), ctx.active_kind) {
        (false, Some(kind)) => matrix.supplement(class, kind),
        _ => None,
    };
    if let Some(s) = supplement {
        levels.extend(s.add.iter().copied());
    }
    let live = |t: &str| env.contains(t) && store.get(t).is_some();

    // Focal tables: the table behind the active slot, then mentioned ones.
    let mut focal: Vec<String> = Vec::new();
    let push = |t: &str, v: &mut Vec<String>| {
        if live(t) && !v.iter().any(|x| x == t) {
            v.push(t.to_string());
        }
    };
    if let Some(t) = &ctx.slot_table {
        push(t, &mut focal);
    }
    for t in &ctx.mentioned_tables {
        push(t, &mut focal);
    }
    let mut tables = focal.clone();
    let mut candidates = Vec::new();
    if supplement.is_some_and(|s| s.join_candidates) {
        for name in store.names() {
            let filled = ctx.filled_slots.0.iter().any(|(_, v)| v == name);
            if !filled && !tables.iter().any(|t| t == name) && live(name) {
                candidates.push(name.to_string());
                tables.push(name.to_string());
            }
        }
    }
    if tables.is_empty() && class != OpClass::Series {
        // Nothing named yet: every table is in scope.
        tables = store.names().filter(|t| live(t)).map(str::to_string).collect();
        for t in &tables {
            rationale.push(Rationale {
                level: ContextLevel::Table,
                target: t.clone(),
                slot: None,
                reason: "no table named; all tables in scope".into(),
            });
        }
    }

    let mut bundle = DataContextBundle {
        operator_class: class,
        table_contexts: Vec::new(),
        column_contexts: Vec::new(),
        row_contexts: Vec::new(),
        rationale: Vec::new(),
    };
    let active = ctx.active_slot.clone();
    if levels.contains(&ContextLevel::Table) {
        for t in &tables {
            let p = store.get(t).expect("live table has a profile");
            bundle.table_contexts.push(p.table.clone());
            let reason = if candidates.contains(t) { "join candidate" } else { "operator class" };
            rationale.push(Rationale {
                level: ContextLevel::Table,
                target: t.clone(),
                slot: active.clone().filter(|_| candidates.contains(t)),
                reason: reason.into(),
            });
        }
    }
    if levels.contains(&ContextLevel::Row) {
        for t in &tables {
            bundle.row_contexts.push(store.get(t).expect("live table has a profile").rows.clone());
            rationale.push(Rationale {
                level: ContextLevel::Row,
                target: t.clone(),
                slot: active.clone(),
                reason: "slot needs cell examples".into(),
            });
        }
    }
    if levels.contains(&ContextLevel::Column) {
        let mut cols: Vec<ColumnRef> = Vec::new();
        let add = |c: ColumnRef, cols: &mut Vec<ColumnRef>| {
            if store.has_column(&c.table, &c.column) && env.contains(&c.table) && !cols.contains(&c) {
                cols.push(c);
            }
        };
        if let (Some(t), Some(c)) = (&ctx.slot_table, &ctx.slot_column) {
            add(ColumnRef::new(t, c), &mut cols);
        }
        for c in &ctx.mentioned_columns {
            add(c.clone(), &mut cols);
        }
        let mentioned = cols.len();
        if supplement.is_some_and(|s| s.key_columns) {
            for key in shared_columns(&tables, store) {
                add(key, &mut cols);
            }
        }
        for (i, c) in cols.into_iter().enumerate() {
            let p = store.get(&c.table).and_then(|t| t.column(&c.column)).expect("checked above");
            bundle.column_contexts.push(p.clone());
            rationale.push(Rationale {
                level: ContextLevel::Column,
                target: format!("{}.{}", c.table, c.column),
                slot: active.clone(),
                reason: if i < mentioned { "column named in the statement" } else { "column shared by candidate tables" }.into(),
            });
        }
    }
    bundle.rationale = rationale;
    bundle
}

/// Columns whose name appears in at least two of `tables`, per table.
fn shared_columns(tables: &[String], store: &ProfileStore) -> Vec<ColumnRef> {
    let mut out = Vec::new();
    for t in tables {
        let Some(p) = store.get(t) else { continue };
        for c in &p.table.column_names {
            let elsewhere = tables
                .iter()
                .filter(|o| *o != t)
                .any(|o| store.has_column(o, c));
            if elsewhere {
                out.push(ColumnRef::new(t, c));
            }
        }
    }
    out
}
