//! Scope resolution: turns raw statements from one or more sources into an [`Ontology`],
//! reporting every undeclared name, arity error and unbound variable.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{Diagnostic, DiagnosticKind};
use crate::md::{
    Attribute, AttributeKind, CategoricalRelationSchema, DimensionSchema, PredicateDecl,
    PredicateKind, RollupEdge,
};
use crate::model::{Atom, Body, CmpOp, Comparison, ConjunctiveQuery, Rule, RuleKind, Term, Value};
use crate::ontology::{MappingDecl, Ontology, QualityRuleDecl};

use super::syntax::{Pos, RawAtom, RawCmp, RawLiteral, RawTerm, Stmt};

pub(crate) struct Resolver {
    diagnostics: Vec<Diagnostic>,
    ontology: Ontology,
    labels: BTreeSet<Arc<str>>,
    auto_label: usize,
}

fn arc(s: &str) -> Arc<str> {
    Arc::from(s)
}

fn term_of(t: &RawTerm) -> Term {
    match t {
        RawTerm::Var(v) => Term::var(v),
        RawTerm::Const(c) => Term::constant(c),
    }
}

fn substitute(t: &Term, from: &str, to: &Term) -> Term {
    match t {
        Term::Var(v) if &**v == from => to.clone(),
        _ => t.clone(),
    }
}

struct RawRule<'a> {
    head: Vec<Atom>,
    egd: Option<(Term, Term)>,
    body: Body,
    source: &'a str,
    pos: Pos,
}

impl<'a> RawRule<'a> {
    fn substitute(&mut self, from: &str, to: &Term) {
        let atom = |a: &mut Atom| {
            for t in a.terms.iter_mut() {
                *t = substitute(t, from, to);
            }
        };
        self.head.iter_mut().for_each(atom);
        self.body.atoms.iter_mut().for_each(atom);
        self.body.negated.iter_mut().for_each(atom);
        for c in self.body.comparisons.iter_mut() {
            c.left = substitute(&c.left, from, to);
            c.right = substitute(&c.right, from, to);
        }
        if let Some((l, r)) = &mut self.egd {
            *l = substitute(l, from, to);
            *r = substitute(r, from, to);
        }
    }

    /// Folds body equalities that involve a variable into the rule by substitution;
    /// other comparisons stay as filters.
    fn fold_equalities(&mut self, protected: &BTreeSet<String>) {
        loop {
            let found = self.body.comparisons.iter().position(|c| {
                c.op == CmpOp::Eq
                    && (c.left.as_var().is_some_and(|v| !protected.contains(v))
                        || c.right.as_var().is_some_and(|v| !protected.contains(v)))
            });
            let Some(i) = found else { break };
            let c = self.body.comparisons.remove(i);
            let (from, to) = match (&c.left, &c.right) {
                (Term::Var(l), r) if !protected.contains(&**l) => (l.clone(), r.clone()),
                (l, Term::Var(r)) => (r.clone(), l.clone()),
                _ => unreachable!(),
            };
            if Term::Var(from.clone()) != to {
                self.substitute(&from, &to);
            }
        }
    }
}

impl Resolver {
    pub fn new() -> Self {
        Resolver {
            diagnostics: Vec::new(),
            ontology: Ontology::default(),
            labels: BTreeSet::new(),
            auto_label: 0,
        }
    }

    fn error(&mut self, source: &str, pos: Pos, message: String) {
        self.diagnostics.push(Diagnostic {
            source: source.to_string(),
            line: pos.line,
            col: pos.col,
            kind: DiagnosticKind::Scope,
            message,
        });
    }

    pub fn finish(self) -> Result<Ontology, Vec<Diagnostic>> {
        if self.diagnostics.is_empty() {
            Ok(self.ontology)
        } else {
            Err(self.diagnostics)
        }
    }

    /// Resolves all statements; declarations are collected first so their order is irrelevant.
    pub fn resolve(&mut self, stmts: &[(String, Stmt)]) {
        let mut declared = BTreeMap::<String, (String, Pos)>::new();
        let mut declare = |this: &mut Self, name: &str, source: &str, pos: Pos| {
            if let Some((s, p)) = declared.get(name) {
                let msg = format!(
                    "`{name}` is already declared at {s}:{}:{}",
                    p.line, p.col
                );
                this.error(source, pos, msg);
            } else {
                declared.insert(name.to_string(), (source.to_string(), pos));
            }
        };
        let mut dimensions = BTreeSet::new();

        for (source, stmt) in stmts {
            match stmt {
                Stmt::Dimension {
                    name,
                    categories,
                    rollups,
                    pos,
                } => {
                    // Dimension names live apart from predicate names.
                    if !dimensions.insert(name.clone()) {
                        self.error(source, *pos, format!("dimension `{name}` is declared twice"));
                    }
                    for (c, p) in categories {
                        declare(self, c, source, *p);
                    }
                    for (e, _, _, p) in rollups {
                        declare(self, e, source, *p);
                    }
                    let cats: Vec<Arc<str>> = categories.iter().map(|(c, _)| arc(c)).collect();
                    let mut edges = Vec::new();
                    for (pred, child, parent, p) in rollups {
                        for c in [child, parent] {
                            if !cats.iter().any(|x| &**x == c.as_str()) {
                                self.error(
                                    source,
                                    *p,
                                    format!("category `{c}` is not declared in dimension `{name}`"),
                                );
                            }
                        }
                        edges.push(RollupEdge {
                            predicate: arc(pred),
                            child: arc(child),
                            parent: arc(parent),
                        });
                    }
                    self.ontology.schema.dimensions.push(DimensionSchema {
                        name: arc(name),
                        categories: cats,
                        edges,
                    });
                }
                Stmt::Predicate { name, attrs, pos } => {
                    declare(self, name, source, *pos);
                    self.ontology.schema.predicates.push(PredicateDecl {
                        name: arc(name),
                        attributes: attrs.iter().map(|a| arc(a)).collect(),
                    });
                }
                Stmt::Relation { name, pos, .. } => declare(self, name, source, *pos),
                _ => {}
            }
        }

        // Relations need every category to be known.
        for (source, stmt) in stmts {
            if let Stmt::Relation {
                name,
                categorical,
                plain,
                ..
            } = stmt
            {
                let mut attributes = Vec::new();
                let mut seen = BTreeSet::new();
                for a in categorical {
                    let cat = a.ty.clone().unwrap_or_default();
                    if !self.ontology.schema.is_category(&cat) {
                        self.error(
                            source,
                            a.pos,
                            format!("attribute `{}` of `{name}` refers to undeclared category `{cat}`", a.name),
                        );
                    }
                    if !seen.insert(a.name.clone()) {
                        self.error(source, a.pos, format!("duplicate attribute `{}` in `{name}`", a.name));
                    }
                    attributes.push(Attribute {
                        name: arc(&a.name),
                        kind: AttributeKind::Categorical(arc(&cat)),
                    });
                }
                for a in plain {
                    if !seen.insert(a.name.clone()) {
                        self.error(source, a.pos, format!("duplicate attribute `{}` in `{name}`", a.name));
                    }
                    attributes.push(Attribute {
                        name: arc(&a.name),
                        kind: AttributeKind::NonCategorical(a.ty.as_deref().map(arc)),
                    });
                }
                self.ontology
                    .schema
                    .relations
                    .push(CategoricalRelationSchema {
                        name: arc(name),
                        attributes,
                    });
            }
        }

        for (source, stmt) in stmts {
            self.statement(source, stmt);
        }
    }

    fn check_atom(&mut self, source: &str, a: &RawAtom) -> Atom {
        let atom = Atom {
            predicate: arc(&a.predicate),
            terms: a.terms.iter().map(term_of).collect(),
        };
        let schema = &self.ontology.schema;
        match schema.predicate_kind(&a.predicate) {
            None => {
                let what = if a.predicate.contains('^') || a.predicate.ends_with('\'') {
                    "predicate"
                } else {
                    "predicate or category"
                };
                self.error(source, a.pos, format!("undeclared {what} `{}`", a.predicate));
            }
            Some(kind) => {
                let arity = schema.arity(&a.predicate).unwrap_or(0);
                if arity != a.terms.len() {
                    self.error(
                        source,
                        a.pos,
                        format!(
                            "`{}` expects {arity} arguments, found {}",
                            a.predicate,
                            a.terms.len()
                        ),
                    );
                } else if let (PredicateKind::Categorical(r), Some(split)) = (kind, a.semicolon) {
                    let cats = r.categorical_count();
                    if split != cats {
                        self.error(
                            source,
                            a.pos,
                            format!(
                                "`{}` has {cats} categorical attributes but `;` follows argument {split}",
                                a.predicate
                            ),
                        );
                    }
                }
            }
        }
        atom
    }

    fn body(&mut self, source: &str, lits: &[RawLiteral]) -> Body {
        let mut body = Body::default();
        for l in lits {
            match l {
                RawLiteral::Atom(a) => {
                    let a = self.check_atom(source, a);
                    body.atoms.push(a)
                }
                RawLiteral::Negated(a) => {
                    let a = self.check_atom(source, a);
                    body.negated.push(a)
                }
                RawLiteral::Compare(l, op, r) => {
                    let (l, r) = (term_of(l), term_of(r));
                    body.comparisons.push(match op {
                        RawCmp::Eq => Comparison { left: l, op: CmpOp::Eq, right: r },
                        RawCmp::Le => Comparison { left: l, op: CmpOp::Le, right: r },
                        RawCmp::Lt => Comparison { left: l, op: CmpOp::Lt, right: r },
                        RawCmp::Ge => Comparison { left: r, op: CmpOp::Le, right: l },
                        RawCmp::Gt => Comparison { left: r, op: CmpOp::Lt, right: l },
                    });
                }
            }
        }
        body
    }

    fn check_bound(&mut self, rule: &RawRule<'_>, what: &str) {
        let bound: BTreeSet<String> = rule.body.bound_variables().into_iter().map(String::from).collect();
        let mut unbound = BTreeSet::new();
        for a in &rule.body.negated {
            unbound.extend(a.variables().filter(|v| !bound.contains(*v)).map(String::from));
        }
        for c in &rule.body.comparisons {
            for t in [&c.left, &c.right] {
                if let Some(v) = t.as_var() {
                    if !bound.contains(v) {
                        unbound.insert(v.to_string());
                    }
                }
            }
        }
        for v in unbound {
            self.error(
                rule.source,
                rule.pos,
                format!("variable `{v}` in {what} is not bound by a positive body atom"),
            );
        }
    }

    fn label(&mut self, source: &str, pos: Pos, label: &Option<String>) -> Arc<str> {
        match label {
            Some(l) => {
                if !self.labels.insert(arc(l)) {
                    self.error(source, pos, format!("duplicate rule label `{l}`"));
                }
                arc(l)
            }
            None => loop {
                self.auto_label += 1;
                let l = arc(&format!("r{}", self.auto_label));
                if self.labels.insert(l.clone()) {
                    break l;
                }
            },
        }
    }

    fn statement(&mut self, source: &str, stmt: &Stmt) {
        match stmt {
            Stmt::Dimension { .. } | Stmt::Relation { .. } | Stmt::Predicate { .. } => {}
            Stmt::Include { pos, .. } => self.error(
                source,
                *pos,
                "`include` needs a file context; load the program from a file".into(),
            ),
            Stmt::Tgd {
                label,
                existentials,
                head,
                body,
                pos,
            } => {
                let head: Vec<Atom> = head.iter().map(|a| self.check_atom(source, a)).collect();
                let body = self.body(source, body);
                let mut rule = RawRule { head, egd: None, body, source, pos: *pos };
                let ex: BTreeSet<String> = existentials.iter().map(|(v, _)| v.clone()).collect();
                rule.fold_equalities(&ex);
                if !rule.body.negated.is_empty() {
                    self.error(source, *pos, "negated atoms are only allowed in negative constraints".into());
                }
                self.check_bound(&rule, "the rule body");
                let bound = rule.body.bound_variables();
                let head_vars: BTreeSet<&str> = rule.head.iter().flat_map(Atom::variables).collect();
                for (v, p) in existentials {
                    if bound.contains(v.as_str()) {
                        self.error(source, *p, format!("existential variable `{v}` also occurs in the body"));
                    }
                    if !head_vars.contains(v.as_str()) {
                        self.error(source, *p, format!("existential variable `{v}` does not occur in the head"));
                    }
                }
                for v in &head_vars {
                    if !bound.contains(v) && !ex.contains(*v) {
                        self.error(
                            source,
                            *pos,
                            format!("head variable `{v}` is neither bound in the body nor declared existential"),
                        );
                    }
                }
                let label = self.label(source, *pos, label);
                self.ontology.rules.push(Rule {
                    label,
                    kind: RuleKind::Tgd {
                        head: rule.head,
                        existentials: existentials.iter().map(|(v, _)| arc(v)).collect(),
                    },
                    body: rule.body,
                });
            }
            Stmt::Egd {
                label,
                left,
                right,
                body,
                pos,
            } => {
                let body = self.body(source, body);
                let mut rule = RawRule {
                    head: vec![],
                    egd: Some((term_of(left), term_of(right))),
                    body,
                    source,
                    pos: *pos,
                };
                let protected: BTreeSet<String> = [left, right]
                    .into_iter()
                    .filter_map(|t| match t {
                        RawTerm::Var(v) => Some(v.clone()),
                        RawTerm::Const(_) => None,
                    })
                    .collect();
                rule.fold_equalities(&protected);
                if !rule.body.negated.is_empty() {
                    self.error(source, *pos, "negated atoms are only allowed in negative constraints".into());
                }
                self.check_bound(&rule, "the rule body");
                let bound = rule.body.bound_variables();
                let (l, r) = rule.egd.clone().unwrap();
                for t in [&l, &r] {
                    if let Some(v) = t.as_var() {
                        if !bound.contains(v) {
                            self.error(source, *pos, format!("EGD head variable `{v}` does not occur in the body"));
                        }
                    }
                }
                let label = self.label(source, *pos, label);
                self.ontology.constraints.push(Rule {
                    label,
                    kind: RuleKind::Egd { left: l, right: r },
                    body: rule.body,
                });
            }
            Stmt::Nc { label, body, pos } => {
                let body = self.body(source, body);
                let mut rule = RawRule { head: vec![], egd: None, body, source, pos: *pos };
                rule.fold_equalities(&BTreeSet::new());
                self.check_bound(&rule, "the constraint");
                let label = self.label(source, *pos, label);
                self.ontology.constraints.push(Rule {
                    label,
                    kind: RuleKind::Nc,
                    body: rule.body,
                });
            }
            Stmt::Query {
                name,
                answer,
                body,
                pos,
            } => {
                let body = self.body(source, body);
                if !body.negated.is_empty() {
                    self.error(source, *pos, "negated atoms are not allowed in queries".into());
                }
                let rule = RawRule { head: vec![], egd: None, body, source, pos: *pos };
                self.check_bound(&rule, &format!("query `{name}`"));
                let bound = rule.body.bound_variables();
                let mut seen = BTreeSet::new();
                for (v, p) in answer {
                    if !bound.contains(v.as_str()) {
                        self.error(source, *p, format!("answer variable `{v}` does not occur in a body atom"));
                    }
                    if !seen.insert(v.clone()) {
                        self.error(source, *p, format!("answer variable `{v}` is repeated"));
                    }
                }
                if self.ontology.query(name).is_some() {
                    self.error(source, *pos, format!("duplicate query `{name}`"));
                }
                self.ontology.queries.push(ConjunctiveQuery {
                    name: arc(name),
                    answer_vars: answer.iter().map(|(v, _)| arc(v)).collect(),
                    atoms: rule.body.atoms,
                    comparisons: rule.body.comparisons,
                });
            }
            Stmt::Fact { atom } => {
                let a = self.check_atom(source, atom);
                let mut values = Vec::new();
                for t in &a.terms {
                    match t {
                        Term::Const(c) => values.push(Value::Const(c.clone())),
                        Term::Var(v) => {
                            self.error(source, atom.pos, format!("facts must be ground, found variable `{v}`"))
                        }
                    }
                }
                self.ontology.facts.push((a.predicate, values));
            }
            Stmt::Data { predicate, path, pos } => {
                if self.ontology.schema.arity(predicate).is_none() {
                    self.error(source, *pos, format!("data bound to undeclared predicate `{predicate}`"));
                }
                self.ontology.data_bindings.insert(arc(predicate), path.clone());
            }
            Stmt::Map {
                base,
                contextual,
                pos,
            } => {
                let b = self.check_atom(source, base);
                let c = self.check_atom(source, contextual);
                let mut base_vars = BTreeSet::new();
                for t in &b.terms {
                    match t.as_var() {
                        Some(v) if base_vars.insert(v.to_string()) => {}
                        _ => self.error(source, *pos, format!("mapping source `{b}` must list distinct variables")),
                    }
                }
                let mut ctx_vars = BTreeSet::new();
                for t in &c.terms {
                    match t.as_var() {
                        Some(v) if ctx_vars.insert(v.to_string()) => {}
                        _ => self.error(source, *pos, format!("mapping target `{c}` must list distinct variables")),
                    }
                }
                for v in &base_vars {
                    if !ctx_vars.contains(v) {
                        self.error(source, *pos, format!("base attribute `{v}` is not mapped into `{}`", c.predicate));
                    }
                }
                self.ontology.mappings.push(MappingDecl { base: b, contextual: c });
            }
            Stmt::Quality {
                base,
                head,
                body,
                pos,
            } => {
                if self.ontology.schema.arity(base).is_none() {
                    self.error(source, *pos, format!("quality version for undeclared predicate `{base}`"));
                }
                let h = self.check_atom(source, head);
                let body = self.body(source, body);
                let mut rule = RawRule { head: vec![h], egd: None, body, source, pos: *pos };
                rule.fold_equalities(&BTreeSet::new());
                if !rule.body.negated.is_empty() {
                    self.error(source, *pos, "negated atoms are not allowed in quality rules".into());
                }
                self.check_bound(&rule, "the quality rule");
                let bound = rule.body.bound_variables();
                for v in rule.head[0].variables() {
                    if !bound.contains(v) {
                        self.error(source, *pos, format!("head variable `{v}` is not bound in the body"));
                    }
                }
                self.ontology.quality_rules.push(QualityRuleDecl {
                    base: arc(base),
                    head: rule.head.remove(0),
                    body: rule.body,
                });
            }
        }
    }
}
