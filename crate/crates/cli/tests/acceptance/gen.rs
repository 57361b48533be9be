//! Random dimensional rule sets over a fixed schema.
//!
//! Two shapes are produced. Dimensional rules join categorical relations and parent-child
//! atoms on categorical variables and may invent non-categorical values only. Downcast rules
//! invent a member one level below a body variable and link it with a parent-child head atom;
//! every body category sharing a dimension with a head category is at or above it.

use std::sync::Arc;

use mdq_core::md::{AttributeKind, CategoricalRelationSchema, MdSchema, RollupEdge};
use mdq_core::{Atom, Rule, Term};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct RuleGen<'a> {
    schema: &'a MdSchema,
    edges: Vec<&'a RollupEdge>,
    pub rng: StdRng,
    fresh: usize,
    /// Whether downcast heads may copy non-categorical body values.
    pub downcast_plain_frontier: bool,
}

/// Body variables collected while building a rule.
#[derive(Default)]
struct Pool {
    categorical: Vec<(String, Arc<str>)>,
    plain: Vec<String>,
}

impl Pool {
    fn of(&self, category: &str) -> Vec<&str> {
        self.categorical.iter().filter(|(_, c)| &**c == category).map(|(v, _)| v.as_str()).collect()
    }
}

impl<'a> RuleGen<'a> {
    pub fn new(schema: &'a MdSchema, rng: StdRng) -> Self {
        let edges = schema.dimensions.iter().flat_map(|d| d.edges.iter()).collect();
        RuleGen { schema, edges, rng, fresh: 0, downcast_plain_frontier: true }
    }

    fn var(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn relation(&mut self) -> &'a CategoricalRelationSchema {
        self.schema.relations.choose(&mut self.rng).unwrap()
    }

    fn body_atom(&mut self, rel: &CategoricalRelationSchema, pool: &mut Pool) -> Atom {
        let mut terms = Vec::new();
        for a in &rel.attributes {
            match &a.kind {
                AttributeKind::Categorical(c) => {
                    let existing = pool.of(c);
                    let v = if !existing.is_empty() && self.rng.gen_bool(0.5) {
                        existing.choose(&mut self.rng).unwrap().to_string()
                    } else {
                        let v = self.var("e");
                        pool.categorical.push((v.clone(), c.clone()));
                        v
                    };
                    terms.push(Term::var(&v));
                }
                AttributeKind::NonCategorical(_) => {
                    let v = self.var("a");
                    pool.plain.push(v.clone());
                    terms.push(Term::var(&v));
                }
            }
        }
        Atom::new(&rel.name, terms)
    }

    fn body(&mut self, pool: &mut Pool) -> Vec<Atom> {
        let n = self.rng.gen_range(1..=2);
        (0..n)
            .map(|_| {
                let rel = self.relation();
                self.body_atom(rel, pool)
            })
            .collect()
    }

    /// Fills the non-categorical head positions from the body or with existentials.
    fn plain_term(&mut self, pool: &Pool, existentials: &mut Vec<String>) -> Term {
        if !pool.plain.is_empty() && self.rng.gen_bool(0.7) {
            Term::var(pool.plain.choose(&mut self.rng).unwrap())
        } else {
            let z = self.var("z");
            existentials.push(z.clone());
            Term::var(&z)
        }
    }

    /// A rule that navigates the dimensions without inventing members.
    pub fn dimensional(&mut self, label: &str) -> Rule {
        let mut pool = Pool::default();
        let mut body = self.body(&mut pool);
        for _ in 0..self.rng.gen_range(0..=2) {
            let (v, c) = pool.categorical.choose(&mut self.rng).unwrap().clone();
            let options: Vec<&RollupEdge> = self
                .edges
                .iter()
                .copied()
                .filter(|e| e.child == c || e.parent == c)
                .collect();
            let Some(e) = options.choose(&mut self.rng) else { continue };
            if e.child == c {
                let p = self.var("e");
                body.push(Atom::new(&e.predicate, vec![Term::var(&p), Term::var(&v)]));
                pool.categorical.push((p, e.parent.clone()));
            } else {
                let ch = self.var("e");
                body.push(Atom::new(&e.predicate, vec![Term::var(&v), Term::var(&ch)]));
                pool.categorical.push((ch, e.child.clone()));
            }
        }
        let feasible: Vec<&CategoricalRelationSchema> = self
            .schema
            .relations
            .iter()
            .filter(|r| {
                r.attributes.iter().all(|a| match &a.kind {
                    AttributeKind::Categorical(c) => !pool.of(c).is_empty(),
                    AttributeKind::NonCategorical(_) => true,
                })
            })
            .collect();
        let rel = *feasible.choose(&mut self.rng).expect("a body relation is always feasible");
        let mut existentials = Vec::new();
        let mut terms = Vec::new();
        for a in &rel.attributes {
            terms.push(match &a.kind {
                AttributeKind::Categorical(c) => Term::var(pool.of(c).choose(&mut self.rng).unwrap()),
                AttributeKind::NonCategorical(_) => self.plain_term(&pool, &mut existentials),
            });
        }
        let ex: Vec<&str> = existentials.iter().map(String::as_str).collect();
        Rule::tgd(label, vec![Atom::new(&rel.name, terms)], &ex, body)
    }

    /// Whether every body category sharing a dimension with `head` is at or above it.
    fn at_or_above_in_body(&self, pool: &Pool, head: &str) -> bool {
        let dim = self.schema.dimension_of(head).unwrap();
        pool.categorical
            .iter()
            .all(|(_, c)| !dim.has_category(c) || dim.is_at_or_above(c, head))
    }

    /// A rule inventing a member one level below a body variable, or `None` when the drawn
    /// body offers no way down.
    pub fn downcast(&mut self, label: &str) -> Option<Rule> {
        let mut pool = Pool::default();
        let body = self.body(&mut pool);
        let mut options = Vec::new();
        for (v, c) in &pool.categorical {
            for e in self.edges.iter().filter(|e| &e.parent == c) {
                for rel in &self.schema.relations {
                    let cats: Vec<&Arc<str>> = rel
                        .attributes
                        .iter()
                        .filter_map(|a| match &a.kind {
                            AttributeKind::Categorical(c) => Some(c),
                            AttributeKind::NonCategorical(_) => None,
                        })
                        .collect();
                    // The new member is the only head value from its dimension.
                    let dim = self.schema.dimension_of(&e.child).unwrap();
                    let ok = cats.iter().filter(|c| dim.has_category(c)).count() == 1
                        && cats.contains(&&e.child)
                        && cats.iter().all(|c| **c == e.child || !pool.of(c).is_empty())
                        && cats.iter().all(|h| self.at_or_above_in_body(&pool, h));
                    if ok {
                        options.push((v.clone(), *e, rel));
                    }
                }
            }
        }
        let (parent, edge, rel) = options.choose(&mut self.rng)?.clone();
        if !self.downcast_plain_frontier {
            pool.plain.clear();
        }
        let z = self.var("z");
        let mut existentials = vec![z.clone()];
        let mut terms = Vec::new();
        for a in &rel.attributes {
            terms.push(match &a.kind {
                AttributeKind::Categorical(c) if *c == edge.child => Term::var(&z),
                AttributeKind::Categorical(c) => Term::var(pool.of(c).choose(&mut self.rng).unwrap()),
                AttributeKind::NonCategorical(_) => self.plain_term(&pool, &mut existentials),
            });
        }
        let head = vec![
            Atom::new(&edge.predicate, vec![Term::var(&parent), Term::var(&z)]),
            Atom::new(&rel.name, terms),
        ];
        let ex: Vec<&str> = existentials.iter().map(String::as_str).collect();
        Some(Rule::tgd(label, head, &ex, body))
    }

    /// Between one and six rules, roughly a quarter of them downcasts.
    pub fn rule_set(&mut self) -> Vec<Rule> {
        let n = self.rng.gen_range(1..=6);
        let mut rules = Vec::new();
        while rules.len() < n {
            let label = format!("g{}", rules.len() + 1);
            if self.rng.gen_bool(0.25) {
                if let Some(r) = self.downcast(&label) {
                    rules.push(r);
                }
            } else {
                rules.push(self.dimensional(&label));
            }
        }
        rules
    }
}
