use std::collections::BTreeMap;
use std::sync::Arc;

use super::DataTable;

#[derive(Debug, Clone)]
pub struct Binding {
    pub table: Arc<DataTable>,
    /// Environment version in which this binding was (re)bound.
    pub bound_at: u64,
}

/// Live variable set: identifier to table, versioned by runs.
///
/// Bindings made between two [`Environment::bump`] calls are tagged with the
/// version the next bump will produce, so a profile store at version `v`
/// can tell which bindings changed after it.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    bindings: BTreeMap<String, Binding>,
    version: u64,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn get(&self, name: &str) -> Option<&Arc<DataTable>> {
        self.bindings.get(name).map(|b| &b.table)
    }

    pub fn binding(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    /// Binds `table` under `name`; the stored table takes the binding name.
    pub fn bind(&mut self, name: &str, table: DataTable) {
        let table = if table.name() == name { table } else { table.with_name(name) };
        self.bindings.insert(
            name.to_string(),
            Binding {
                table: Arc::new(table),
                bound_at: self.version + 1,
            },
        );
    }

    pub fn unbind(&mut self, name: &str) -> bool {
        self.bindings.remove(name).is_some()
    }

    /// Marks the end of one successful run.
    pub fn bump(&mut self) {
        self.version += 1;
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&str, &Binding)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}
