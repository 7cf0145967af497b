//! Profiles of every bound table, refreshed incrementally after each run.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::frame::Environment;

use super::profile::{profile_table, ProfileOptions, TableContexts};

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProfileStore {
    version: u64,
    profiles: BTreeMap<String, Arc<TableContexts>>,
    /// Tables profiled by the refresh that produced this store.
    #[serde(skip)]
    last_work: usize,
}

impl ProfileStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn get(&self, table: &str) -> Option<&TableContexts> {
        self.profiles.get(table).map(Arc::as_ref)
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableContexts> {
        self.profiles.values().map(Arc::as_ref)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn last_work(&self) -> usize {
        self.last_work
    }

    /// True when `table` has a profile with a column named `column`.
    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.get(table).is_some_and(|t| t.column(column).is_some())
    }
}

/// Re-profiles only the bindings made after `store` was computed.
///
/// Unchanged profiles are shared with the old store, never recomputed.
pub fn refresh(env: &Environment, store: &ProfileStore, opts: &ProfileOptions) -> ProfileStore {
    debug_assert!(env.version() >= store.version, "environment older than its profiles");
    let mut profiles = BTreeMap::new();
    let mut work = 0;
    for (name, binding) in env.bindings() {
        let reuse = store
            .profiles
            .get(name)
            .filter(|_| binding.bound_at <= store.version)
            .cloned();
        let entry = match reuse {
            Some(p) => p,
            None => {
                work += 1;
                Arc::new(profile_table(&binding.table, opts))
            }
        };
        profiles.insert(name.to_string(), entry);
    }
    ProfileStore {
        version: env.version(),
        profiles,
        last_work: work,
    }
}
