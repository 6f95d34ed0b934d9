//! Name-keyed registries of interchangeable strategies.
//!
//! Optimizers, ratio-model families and design-search strategies are each
//! registered under a stable name so configuration files and the command
//! line can select them at run time.

use std::sync::Arc;

use crate::error::{Error, Result};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Arc<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: Vec::new() }
    }

    /// Adds an entry. Panics on duplicate names, which are programming errors.
    pub fn register(&mut self, name: &'static str, item: Arc<T>) {
        assert!(self.entries.iter().all(|(n, _)| *n != name), "duplicate {} '{name}'", self.kind);
        self.entries.push((name, item));
    }

    pub fn with(mut self, name: &'static str, item: Arc<T>) -> Self {
        self.register(name, item);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries.iter().find(|(n, _)| *n == name).map(|(_, item)| Arc::clone(item)).ok_or_else(|| {
            Error::UnknownName { kind: self.kind, name: name.to_owned(), known: self.names().join(", ") }
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }
}
