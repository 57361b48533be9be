//! Fact storage: one insertion-ordered set of tuples per predicate.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use indexmap::IndexSet;

use crate::error::DataError;
use crate::model::{NullId, Tuple, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    arity: usize,
    tuples: IndexSet<Tuple>,
}

impl Relation {
    pub fn new(arity: usize) -> Self {
        Relation {
            arity,
            tuples: IndexSet::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.tuples.contains(t)
    }

    /// Tuples in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.tuples.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Tuple> {
        self.tuples.get_index(i)
    }
}

/// A set of facts over named predicates. Tuples keep their load order, which fixes the
/// order in which the engines explore ground matches.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    relations: BTreeMap<Arc<str>, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a predicate with an empty extension; redeclaring with the same arity is a no-op.
    pub fn declare(&mut self, predicate: &str, arity: usize) -> Result<(), DataError> {
        match self.relations.get(predicate) {
            Some(r) if r.arity != arity => Err(DataError::ArityMismatch {
                predicate: predicate.to_string(),
                row: None,
                expected: r.arity,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.relations
                    .insert(Arc::from(predicate), Relation::new(arity));
                Ok(())
            }
        }
    }

    /// Inserts a fact into a declared predicate. Returns whether the fact was new.
    pub fn insert(&mut self, predicate: &str, tuple: Tuple) -> Result<bool, DataError> {
        let rel = self
            .relations
            .get_mut(predicate)
            .ok_or_else(|| DataError::UnknownPredicate(predicate.to_string()))?;
        if tuple.len() != rel.arity {
            return Err(DataError::ArityMismatch {
                predicate: predicate.to_string(),
                row: None,
                expected: rel.arity,
                found: tuple.len(),
            });
        }
        Ok(rel.tuples.insert(tuple))
    }

    /// Inserts a fact, declaring the predicate on first use.
    pub fn add(&mut self, predicate: &str, tuple: Tuple) -> Result<bool, DataError> {
        self.declare(predicate, tuple.len())?;
        self.insert(predicate, tuple)
    }

    pub fn contains(&self, predicate: &str, tuple: &Tuple) -> bool {
        self.relations
            .get(predicate)
            .is_some_and(|r| r.contains(tuple))
    }

    pub fn relation(&self, predicate: &str) -> Option<&Relation> {
        self.relations.get(predicate)
    }

    pub fn tuples<'a>(&'a self, predicate: &str) -> impl Iterator<Item = &'a Tuple> + 'a {
        self.relations
            .get(predicate)
            .into_iter()
            .flat_map(|r| r.tuples.iter())
    }

    pub fn relations(&self) -> impl Iterator<Item = (&Arc<str>, &Relation)> {
        self.relations.iter()
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(|k| &**k)
    }

    pub fn fact_count(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.fact_count() == 0
    }

    pub fn remove(&mut self, predicate: &str, tuple: &Tuple) -> bool {
        self.relations
            .get_mut(predicate)
            .is_some_and(|r| r.tuples.shift_remove(tuple))
    }

    /// Whether any stored value is a labeled null.
    pub fn has_nulls(&self) -> bool {
        self.relations
            .values()
            .any(|r| r.tuples.iter().any(|t| t.iter().any(Value::is_null)))
    }

    /// Replaces `null` by `value` in every fact, merging tuples that become equal.
    /// Returns the number of facts that changed.
    pub fn replace_null(&mut self, null: NullId, value: &Value) -> usize {
        let target = Value::Null(null);
        let mut changed = 0;
        for rel in self.relations.values_mut() {
            if !rel.tuples.iter().any(|t| t.contains(&target)) {
                continue;
            }
            let old = std::mem::take(&mut rel.tuples);
            for mut t in old {
                let mut hit = false;
                for v in t.iter_mut() {
                    if *v == target {
                        *v = value.clone();
                        hit = true;
                    }
                }
                changed += usize::from(hit);
                rel.tuples.insert(t);
            }
        }
        changed
    }

    /// Adds every fact of `other`, declaring missing predicates.
    pub fn extend_from(&mut self, other: &Database) -> Result<(), DataError> {
        for (p, r) in other.relations() {
            self.declare(p, r.arity)?;
            for t in r.iter() {
                self.insert(p, t.clone())?;
            }
        }
        Ok(())
    }

    /// Constants appearing anywhere in the database, sorted.
    pub fn active_domain(&self) -> Vec<Value> {
        let mut out: Vec<Value> = self
            .relations
            .values()
            .flat_map(|r| r.tuples.iter().flatten())
            .filter(|v| !v.is_null())
            .cloned()
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Positional hash index over a database snapshot: for each (predicate, position, value),
/// the tuple indices (ascending, i.e. load order) holding that value there.
#[derive(Debug, Default)]
pub struct FactIndex {
    by_value: HashMap<(Arc<str>, usize, Value), Vec<usize>>,
}

impl FactIndex {
    pub fn build(db: &Database) -> Self {
        let mut by_value: HashMap<(Arc<str>, usize, Value), Vec<usize>> = HashMap::new();
        for (p, rel) in db.relations() {
            for (i, t) in rel.iter().enumerate() {
                for (pos, v) in t.iter().enumerate() {
                    by_value
                        .entry((p.clone(), pos, v.clone()))
                        .or_default()
                        .push(i);
                }
            }
        }
        FactIndex { by_value }
    }

    /// Records a tuple appended to `predicate` at position `index` of its relation.
    pub fn insert(&mut self, predicate: &Arc<str>, index: usize, tuple: &Tuple) {
        for (pos, v) in tuple.iter().enumerate() {
            self.by_value
                .entry((predicate.clone(), pos, v.clone()))
                .or_default()
                .push(index);
        }
    }

    /// Candidate tuple indices for `predicate` given some bound positions; `None` means
    /// nothing is bound and the caller should scan the whole relation.
    pub fn candidates(
        &self,
        predicate: &Arc<str>,
        bound: &[(usize, Value)],
    ) -> Option<&[usize]> {
        let mut best: Option<&[usize]> = None;
        for (pos, v) in bound {
            let list = self
                .by_value
                .get(&(predicate.clone(), *pos, v.clone()))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            if best.is_none_or(|b| list.len() < b.len()) {
                best = Some(list);
            }
            if list.is_empty() {
                break;
            }
        }
        best
    }
}
