//! A resolved ontology: MD schema, dimensional rules and constraints, named queries, data
//! bindings, and optional context-mapping and quality statements.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::md::{AttributeKind, MdSchema};
use crate::model::{Atom, Body, ConjunctiveQuery, Rule, RuleKind, Term, Tuple};

/// `map Base(x̄) => Contextual(x̄, ȳ).`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingDecl {
    pub base: Atom,
    pub contextual: Atom,
}

/// `quality Base: BaseQ(x̄) <- body.`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QualityRuleDecl {
    pub base: Arc<str>,
    pub head: Atom,
    pub body: Body,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ontology {
    pub schema: MdSchema,
    /// Tuple-generating dependencies, in declaration order.
    pub rules: Vec<Rule>,
    /// EGDs and negative constraints, in declaration order.
    pub constraints: Vec<Rule>,
    pub queries: Vec<ConjunctiveQuery>,
    pub data_bindings: BTreeMap<Arc<str>, String>,
    pub facts: Vec<(Arc<str>, Tuple)>,
    pub mappings: Vec<MappingDecl>,
    pub quality_rules: Vec<QualityRuleDecl>,
}

impl Ontology {
    pub fn query(&self, name: &str) -> Option<&ConjunctiveQuery> {
        self.queries.iter().find(|q| &*q.name == name)
    }

    pub fn rule(&self, label: &str) -> Option<&Rule> {
        self.rules
            .iter()
            .chain(self.constraints.iter())
            .find(|r| &*r.label == label)
    }

    pub fn egds(&self) -> impl Iterator<Item = &Rule> {
        self.constraints
            .iter()
            .filter(|r| matches!(r.kind, RuleKind::Egd { .. }))
    }

    pub fn ncs(&self) -> impl Iterator<Item = &Rule> {
        self.constraints
            .iter()
            .filter(|r| matches!(r.kind, RuleKind::Nc))
    }

    /// A copy without the TGDs whose labels are listed.
    pub fn without_rules(&self, labels: &[&str]) -> Ontology {
        let mut o = self.clone();
        o.rules.retain(|r| !labels.contains(&&*r.label));
        o
    }

    pub fn is_empty(&self) -> bool {
        *self == Ontology::default()
    }
}

fn write_atom_with_semicolon(f: &mut fmt::Formatter<'_>, a: &Atom, split: Option<usize>) -> fmt::Result {
    write!(f, "{}(", a.predicate)?;
    for (i, t) in a.terms.iter().enumerate() {
        if i > 0 {
            f.write_str(if Some(i) == split { "; " } else { ", " })?;
        }
        write!(f, "{t}")?;
    }
    f.write_str(")")
}

/// Pretty-prints the ontology back into the DSL; parsing the output yields an equal ontology.
impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.schema.dimensions {
            writeln!(f, "dimension {} {{", d.name)?;
            if !d.categories.is_empty() {
                let cats: Vec<&str> = d.categories.iter().map(|c| &**c).collect();
                writeln!(f, "  category {}.", cats.join(", "))?;
            }
            for e in &d.edges {
                writeln!(f, "  rollup {}: {} -> {}.", e.predicate, e.child, e.parent)?;
            }
            writeln!(f, "}}")?;
        }
        for r in &self.schema.relations {
            write!(f, "relation {}(", r.name)?;
            let mut cat = Vec::new();
            let mut plain = Vec::new();
            for a in &r.attributes {
                match &a.kind {
                    AttributeKind::Categorical(c) => cat.push(format!("{}: {c}", a.name)),
                    AttributeKind::NonCategorical(Some(t)) => plain.push(format!("{}: {t}", a.name)),
                    AttributeKind::NonCategorical(None) => plain.push(a.name.to_string()),
                }
            }
            f.write_str(&cat.join(", "))?;
            if !plain.is_empty() {
                write!(f, "; {}", plain.join(", "))?;
            }
            writeln!(f, ").")?;
        }
        for p in &self.schema.predicates {
            let attrs: Vec<&str> = p.attributes.iter().map(|a| &**a).collect();
            writeln!(f, "predicate {}({}).", p.name, attrs.join(", "))?;
        }
        for (p, path) in &self.data_bindings {
            writeln!(f, "data {p} {}.", Term::Const(Arc::from(path.as_str())).quoted())?;
        }
        for (p, t) in &self.facts {
            let atom = Atom {
                predicate: p.clone(),
                terms: t
                    .iter()
                    .map(|v| Term::Const(Arc::from(v.to_string().as_str())))
                    .collect(),
            };
            writeln!(f, "fact {atom}.")?;
        }
        for r in self.rules.iter().chain(self.constraints.iter()) {
            writeln!(f, "{r}")?;
        }
        for q in &self.queries {
            writeln!(f, "{q}")?;
        }
        for m in &self.mappings {
            writeln!(f, "map {} => {}.", m.base, m.contextual)?;
        }
        for q in &self.quality_rules {
            write!(f, "quality {}: ", q.base)?;
            write_atom_with_semicolon(f, &q.head, None)?;
            writeln!(f, " <- {}.", q.body)?;
        }
        Ok(())
    }
}

impl Term {
    /// Constant rendered as a string literal, whatever its shape.
    fn quoted(&self) -> String {
        match self {
            Term::Const(c) | Term::Var(c) => {
                format!("\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\""))
            }
        }
    }
}
