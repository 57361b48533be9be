//! The extended multidimensional model: dimensions as category DAGs with member roll-ups,
//! categorical relations linked to categories, and their structural/referential checks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::database::Database;
use crate::error::RollupError;
use crate::model::{Tuple, Value};

/// A parent-child predicate `predicate(parent, child)` linking two adjacent categories.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RollupEdge {
    pub predicate: Arc<str>,
    pub child: Arc<str>,
    pub parent: Arc<str>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DimensionSchema {
    pub name: Arc<str>,
    pub categories: Vec<Arc<str>>,
    pub edges: Vec<RollupEdge>,
}

impl DimensionSchema {
    pub fn has_category(&self, c: &str) -> bool {
        self.categories.iter().any(|x| &**x == c)
    }

    /// Whether `upper` is reachable from `lower` by following child→parent edges (reflexive).
    pub fn is_at_or_above(&self, upper: &str, lower: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([lower]);
        while let Some(c) = queue.pop_front() {
            if c == upper {
                return true;
            }
            if !seen.insert(c) {
                continue;
            }
            for e in self.edges.iter().filter(|e| &*e.child == c) {
                queue.push_back(&e.parent);
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AttributeKind {
    Categorical(Arc<str>),
    NonCategorical(Option<Arc<str>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Attribute {
    pub name: Arc<str>,
    pub kind: AttributeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CategoricalRelationSchema {
    pub name: Arc<str>,
    pub attributes: Vec<Attribute>,
}

impl CategoricalRelationSchema {
    pub fn category_at(&self, i: usize) -> Option<&Arc<str>> {
        match &self.attributes.get(i)?.kind {
            AttributeKind::Categorical(c) => Some(c),
            AttributeKind::NonCategorical(_) => None,
        }
    }

    pub fn categorical_count(&self) -> usize {
        self.attributes
            .iter()
            .filter(|a| matches!(a.kind, AttributeKind::Categorical(_)))
            .count()
    }
}

/// A plain (non-dimensional) predicate: contextual copies, quality predicates and the like.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredicateDecl {
    pub name: Arc<str>,
    pub attributes: Vec<Arc<str>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredicateKind<'a> {
    Category(&'a DimensionSchema),
    ParentChild(&'a RollupEdge),
    Categorical(&'a CategoricalRelationSchema),
    Contextual(&'a PredicateDecl),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MdSchema {
    pub dimensions: Vec<DimensionSchema>,
    pub relations: Vec<CategoricalRelationSchema>,
    pub predicates: Vec<PredicateDecl>,
}

impl MdSchema {
    pub fn dimension_of(&self, category: &str) -> Option<&DimensionSchema> {
        self.dimensions.iter().find(|d| d.has_category(category))
    }

    pub fn is_category(&self, name: &str) -> bool {
        self.dimension_of(name).is_some()
    }

    pub fn rollup_edge(&self, predicate: &str) -> Option<&RollupEdge> {
        self.dimensions
            .iter()
            .flat_map(|d| d.edges.iter())
            .find(|e| &*e.predicate == predicate)
    }

    pub fn relation(&self, name: &str) -> Option<&CategoricalRelationSchema> {
        self.relations.iter().find(|r| &*r.name == name)
    }

    pub fn predicate_kind(&self, name: &str) -> Option<PredicateKind<'_>> {
        if let Some(d) = self.dimension_of(name) {
            return Some(PredicateKind::Category(d));
        }
        if let Some(e) = self.rollup_edge(name) {
            return Some(PredicateKind::ParentChild(e));
        }
        if let Some(r) = self.relation(name) {
            return Some(PredicateKind::Categorical(r));
        }
        self.predicates
            .iter()
            .find(|p| &*p.name == name)
            .map(PredicateKind::Contextual)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        Some(match self.predicate_kind(name)? {
            PredicateKind::Category(_) => 1,
            PredicateKind::ParentChild(_) => 2,
            PredicateKind::Categorical(r) => r.attributes.len(),
            PredicateKind::Contextual(p) => p.attributes.len(),
        })
    }

    /// Category whose members populate position `index` of `predicate`, if that position is
    /// categorical. Parent-child predicates are `(parent, child)`.
    pub fn position_category(&self, predicate: &str, index: usize) -> Option<Arc<str>> {
        match self.predicate_kind(predicate)? {
            PredicateKind::Category(_) if index == 0 => Some(Arc::from(predicate)),
            PredicateKind::ParentChild(e) => match index {
                0 => Some(e.parent.clone()),
                1 => Some(e.child.clone()),
                _ => None,
            },
            PredicateKind::Categorical(r) => r.category_at(index).cloned(),
            _ => None,
        }
    }

    pub fn is_categorical_position(&self, predicate: &str, index: usize) -> bool {
        self.position_category(predicate, index).is_some()
    }

    /// Every declared predicate name with its arity, sorted by name.
    pub fn all_predicates(&self) -> BTreeMap<Arc<str>, usize> {
        let mut out = BTreeMap::new();
        for d in &self.dimensions {
            for c in &d.categories {
                out.insert(c.clone(), 1);
            }
            for e in &d.edges {
                out.insert(e.predicate.clone(), 2);
            }
        }
        for r in &self.relations {
            out.insert(r.name.clone(), r.attributes.len());
        }
        for p in &self.predicates {
            out.insert(p.name.clone(), p.attributes.len());
        }
        out
    }

    /// Builds the member-level instance of every dimension from the category and
    /// parent-child extensions in `db`.
    pub fn instances(&self, db: &Database) -> Vec<DimensionInstance> {
        self.dimensions
            .iter()
            .map(|d| DimensionInstance::from_database(d, db))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    CategoryCycle {
        dimension: Arc<str>,
        categories: Vec<Arc<str>>,
    },
    UndeclaredCategory {
        dimension: Arc<str>,
        edge: Arc<str>,
        category: Arc<str>,
    },
    DuplicateName {
        name: Arc<str>,
    },
    UnknownAttributeCategory {
        relation: Arc<str>,
        attribute: Arc<str>,
        category: Arc<str>,
    },
    DuplicateAttribute {
        relation: Arc<str>,
        attribute: Arc<str>,
    },
    DanglingRollup {
        edge: Arc<str>,
        child: Arc<str>,
        parent: Arc<str>,
    },
    MultiCategoryMember {
        member: Arc<str>,
        categories: Vec<Arc<str>>,
    },
    NonFunctionalRollup {
        edge: Arc<str>,
        child: Arc<str>,
        parents: Vec<Arc<str>>,
    },
    MemberCycle {
        dimension: Arc<str>,
        members: Vec<Arc<str>>,
    },
}

fn list(items: &[Arc<str>]) -> String {
    items.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CategoryCycle { dimension, categories } => {
                write!(f, "dimension {dimension}: category cycle through {}", list(categories))
            }
            Violation::UndeclaredCategory { dimension, edge, category } => {
                write!(f, "dimension {dimension}: edge {edge} uses undeclared category {category}")
            }
            Violation::DuplicateName { name } => write!(f, "name {name} declared twice"),
            Violation::UnknownAttributeCategory { relation, attribute, category } => {
                write!(f, "relation {relation}: attribute {attribute} refers to unknown category {category}")
            }
            Violation::DuplicateAttribute { relation, attribute } => {
                write!(f, "relation {relation}: attribute {attribute} appears twice")
            }
            Violation::DanglingRollup { edge, child, parent } => {
                write!(f, "{edge}({parent}, {child}) links a non-member")
            }
            Violation::MultiCategoryMember { member, categories } => {
                write!(f, "member {member} belongs to several categories: {}", list(categories))
            }
            Violation::NonFunctionalRollup { edge, child, parents } => {
                write!(f, "{edge}: {child} rolls up to several parents: {}", list(parents))
            }
            Violation::MemberCycle { dimension, members } => {
                write!(f, "dimension {dimension}: member cycle through {}", list(members))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural checks on dimension schemas and categorical relation schemas.
pub fn validate_schema(schema: &MdSchema) -> ValidationReport {
    let mut violations = Vec::new();

    let mut names = BTreeMap::<Arc<str>, usize>::new();
    for d in &schema.dimensions {
        for c in &d.categories {
            *names.entry(c.clone()).or_default() += 1;
        }
        for e in &d.edges {
            *names.entry(e.predicate.clone()).or_default() += 1;
        }
    }
    for r in &schema.relations {
        *names.entry(r.name.clone()).or_default() += 1;
    }
    for p in &schema.predicates {
        *names.entry(p.name.clone()).or_default() += 1;
    }
    for (name, n) in names {
        if n > 1 {
            violations.push(Violation::DuplicateName { name });
        }
    }

    for d in &schema.dimensions {
        for e in &d.edges {
            for c in [&e.child, &e.parent] {
                if !d.has_category(c) {
                    violations.push(Violation::UndeclaredCategory {
                        dimension: d.name.clone(),
                        edge: e.predicate.clone(),
                        category: c.clone(),
                    });
                }
            }
        }
        let mut g = DiGraph::<Arc<str>, ()>::new();
        let mut idx = BTreeMap::new();
        for c in d
            .categories
            .iter()
            .chain(d.edges.iter().flat_map(|e| [&e.child, &e.parent]))
        {
            idx.entry(c.clone()).or_insert_with(|| g.add_node(c.clone()));
        }
        for e in &d.edges {
            g.add_edge(idx[&e.child], idx[&e.parent], ());
        }
        for scc in tarjan_scc(&g) {
            let cyclic = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
            if cyclic {
                let mut categories: Vec<_> = scc.iter().map(|n| g[*n].clone()).collect();
                categories.sort();
                violations.push(Violation::CategoryCycle {
                    dimension: d.name.clone(),
                    categories,
                });
            }
        }
    }

    for r in &schema.relations {
        let mut seen = BTreeSet::new();
        for a in &r.attributes {
            if !seen.insert(a.name.clone()) {
                violations.push(Violation::DuplicateAttribute {
                    relation: r.name.clone(),
                    attribute: a.name.clone(),
                });
            }
            if let AttributeKind::Categorical(c) = &a.kind {
                if !schema.is_category(c) {
                    violations.push(Violation::UnknownAttributeCategory {
                        relation: r.name.clone(),
                        attribute: a.name.clone(),
                        category: c.clone(),
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Roll-up pair `child ↦ parent` along the schema edge at `edge`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RollupPair {
    pub child: Arc<str>,
    pub parent: Arc<str>,
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DimensionInstance {
    pub schema: DimensionSchema,
    pub membership: BTreeMap<Arc<str>, BTreeSet<Arc<str>>>,
    pub rollup: Vec<RollupPair>,
}

fn const_of(v: &Value) -> Option<Arc<str>> {
    match v {
        Value::Const(c) => Some(c.clone()),
        Value::Null(_) => None,
    }
}

impl DimensionInstance {
    pub fn new(schema: DimensionSchema) -> Self {
        let membership = schema
            .categories
            .iter()
            .map(|c| (c.clone(), BTreeSet::new()))
            .collect();
        DimensionInstance {
            schema,
            membership,
            rollup: Vec::new(),
        }
    }

    /// Reads category extensions and parent-child extensions; nulls are ignored.
    pub fn from_database(schema: &DimensionSchema, db: &Database) -> Self {
        let mut inst = DimensionInstance::new(schema.clone());
        for c in &schema.categories {
            let members = inst.membership.entry(c.clone()).or_default();
            members.extend(db.tuples(c).filter_map(|t| const_of(&t[0])));
        }
        for (i, e) in schema.edges.iter().enumerate() {
            for t in db.tuples(&e.predicate) {
                if let (Some(parent), Some(child)) = (const_of(&t[0]), const_of(&t[1])) {
                    inst.rollup.push(RollupPair {
                        child,
                        parent,
                        edge: i,
                    });
                }
            }
        }
        inst
    }

    pub fn add_member(&mut self, category: &str, member: &str) {
        self.membership
            .entry(Arc::from(category))
            .or_default()
            .insert(Arc::from(member));
    }

    /// Adds a roll-up pair on the schema edge `child_category → parent_category`.
    pub fn add_rollup(&mut self, child_category: &str, parent_category: &str, child: &str, parent: &str) {
        let edge = self
            .schema
            .edges
            .iter()
            .position(|e| &*e.child == child_category && &*e.parent == parent_category)
            .unwrap_or_else(|| {
                self.schema.edges.push(RollupEdge {
                    predicate: Arc::from(format!("{parent_category}{child_category}").as_str()),
                    child: Arc::from(child_category),
                    parent: Arc::from(parent_category),
                });
                self.schema.edges.len() - 1
            });
        self.rollup.push(RollupPair {
            child: Arc::from(child),
            parent: Arc::from(parent),
            edge,
        });
    }

    pub fn category_of(&self, member: &str) -> Option<&Arc<str>> {
        self.membership
            .iter()
            .find(|(_, ms)| ms.contains(member))
            .map(|(c, _)| c)
    }

    /// All members of `target` reachable from `member` in the reflexive-transitive closure of
    /// the roll-up relation. Unreachable targets give the empty set.
    pub fn rollup(&self, member: &str, target: &str) -> Result<BTreeSet<Arc<str>>, RollupError> {
        if self.category_of(member).is_none() {
            return Err(RollupError::UnknownMember(member.to_string()));
        }
        let target_members = self
            .membership
            .get(target)
            .filter(|_| self.schema.has_category(target))
            .ok_or_else(|| RollupError::UnknownCategory(target.to_string()))?;

        let mut seen = BTreeSet::<&str>::new();
        let mut queue = VecDeque::from([member]);
        let mut out = BTreeSet::new();
        while let Some(m) = queue.pop_front() {
            if !seen.insert(m) {
                continue;
            }
            if let Some(t) = target_members.get(m) {
                out.insert(t.clone());
            }
            for p in self.rollup.iter().filter(|p| &*p.child == m) {
                queue.push_back(&p.parent);
            }
        }
        Ok(out)
    }
}

/// Checks member-level invariants. With `strict`, each child must have at most one parent
/// per schema edge.
pub fn validate_instance(instance: &DimensionInstance, strict: bool) -> ValidationReport {
    let mut violations = Vec::new();
    let edges = &instance.schema.edges;

    let mut member_cats = BTreeMap::<&Arc<str>, Vec<Arc<str>>>::new();
    for (c, ms) in &instance.membership {
        for m in ms {
            member_cats.entry(m).or_default().push(c.clone());
        }
    }
    for (m, cats) in &member_cats {
        if cats.len() > 1 {
            violations.push(Violation::MultiCategoryMember {
                member: (*m).clone(),
                categories: cats.clone(),
            });
        }
    }

    let in_cat = |c: &str, m: &str| instance.membership.get(c).is_some_and(|s| s.contains(m));
    let mut parents = BTreeMap::<(usize, &Arc<str>), BTreeSet<Arc<str>>>::new();
    for p in &instance.rollup {
        let Some(e) = edges.get(p.edge) else {
            continue;
        };
        if !in_cat(&e.child, &p.child) || !in_cat(&e.parent, &p.parent) {
            violations.push(Violation::DanglingRollup {
                edge: e.predicate.clone(),
                child: p.child.clone(),
                parent: p.parent.clone(),
            });
        }
        parents
            .entry((p.edge, &p.child))
            .or_default()
            .insert(p.parent.clone());
    }
    if strict {
        for ((edge, child), ps) in &parents {
            if ps.len() > 1 {
                violations.push(Violation::NonFunctionalRollup {
                    edge: edges[*edge].predicate.clone(),
                    child: (*child).clone(),
                    parents: ps.iter().cloned().collect(),
                });
            }
        }
    }

    let mut g = DiGraph::<Arc<str>, ()>::new();
    let mut idx = BTreeMap::new();
    for p in &instance.rollup {
        for m in [&p.child, &p.parent] {
            idx.entry(m.clone()).or_insert_with(|| g.add_node(m.clone()));
        }
        g.add_edge(idx[&p.child], idx[&p.parent], ());
    }
    for scc in tarjan_scc(&g) {
        if scc.len() > 1 || g.contains_edge(scc[0], scc[0]) {
            let mut members: Vec<_> = scc.iter().map(|n| g[*n].clone()).collect();
            members.sort();
            violations.push(Violation::MemberCycle {
                dimension: instance.schema.name.clone(),
                members,
            });
        }
    }
    ValidationReport { violations }
}

/// A categorical attribute value that is not a member of its category (a violated
/// referential constraint `⊥ ← R(ē; ā), ¬K(e)`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReferentialViolation {
    pub relation: Arc<str>,
    pub tuple: Tuple,
    pub attribute: Arc<str>,
    pub category: Arc<str>,
    pub value: Value,
}

impl fmt::Display for ReferentialViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t: Vec<String> = self.tuple.iter().map(Value::to_string).collect();
        write!(
            f,
            "{}({}): {} = {} is not a member of {}",
            self.relation,
            t.join(", "),
            self.attribute,
            self.value,
            self.category
        )
    }
}

pub fn check_referential(db: &Database, schema: &MdSchema) -> Vec<ReferentialViolation> {
    let mut out = Vec::new();
    for r in &schema.relations {
        for t in db.tuples(&r.name) {
            out.extend(referential_violations_of(r, t, db));
        }
    }
    out
}

fn referential_violations_of<'a>(
    r: &'a CategoricalRelationSchema,
    t: &'a Tuple,
    db: &'a Database,
) -> impl Iterator<Item = ReferentialViolation> + 'a {
    r.attributes.iter().enumerate().filter_map(move |(i, a)| {
        let AttributeKind::Categorical(cat) = &a.kind else {
            return None;
        };
        let v = t.get(i)?;
        if v.is_null() || db.contains(cat, &vec![v.clone()]) {
            return None;
        }
        Some(ReferentialViolation {
            relation: r.name.clone(),
            tuple: t.clone(),
            attribute: a.name.clone(),
            category: cat.clone(),
            value: v.clone(),
        })
    })
}
