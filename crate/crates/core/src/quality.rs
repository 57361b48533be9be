//! Contextual quality assessment: contextual copies, quality versions, query rewriting and a
//! per-relation report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::chase::{chase, fact_atom, ChaseConfig};
use crate::database::Database;
use crate::error::{DataError, QualityError};
use crate::md::{MdSchema, PredicateKind};
use crate::model::{Atom, ConjunctiveQuery, NullId, Term, Tuple, Value};
use crate::ontology::{MappingDecl, Ontology, QualityRuleDecl};
use crate::query::{answer_cq, QueryConfig};

/// Copies every mapped base relation into its contextual predicate. Contextual attributes
/// without a base counterpart get fresh labeled nulls.
pub fn build_context(db: &Database, mappings: &[MappingDecl]) -> Result<Database, DataError> {
    let mut ctx = db.clone();
    let mut next_null = db
        .relations()
        .flat_map(|(_, r)| r.iter())
        .flatten()
        .filter_map(|v| match v {
            Value::Null(n) => Some(n.0 + 1),
            Value::Const(_) => None,
        })
        .max()
        .unwrap_or(0);
    for m in mappings {
        let base = db
            .relation(&m.base.predicate)
            .ok_or_else(|| DataError::UnknownPredicate(m.base.predicate.to_string()))?;
        if base.arity() != m.base.arity() {
            return Err(DataError::ArityMismatch {
                predicate: m.base.predicate.to_string(),
                row: None,
                expected: base.arity(),
                found: m.base.arity(),
            });
        }
        ctx.declare(&m.contextual.predicate, m.contextual.arity())?;
        for t in base.iter() {
            let mut extra: BTreeMap<&str, Value> = BTreeMap::new();
            let row: Tuple = m
                .contextual
                .terms
                .iter()
                .map(|term| match term {
                    Term::Const(c) => Value::Const(c.clone()),
                    Term::Var(v) => match m.base.terms.iter().position(|b| b.as_var() == Some(v)) {
                        Some(i) => t[i].clone(),
                        None => extra
                            .entry(v)
                            .or_insert_with(|| {
                                next_null += 1;
                                Value::Null(NullId(next_null - 1))
                            })
                            .clone(),
                    },
                })
                .collect();
            ctx.insert(&m.contextual.predicate, row)?;
        }
    }
    Ok(ctx)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RemovedFact {
    pub fact: String,
    pub rule: Arc<str>,
}

fn is_discardable(schema: &MdSchema, contextual: &BTreeSet<&str>, p: &str) -> bool {
    matches!(schema.predicate_kind(p), Some(PredicateKind::Categorical(_))) || contextual.contains(p)
}

/// Chases the context and removes the extensional categorical and contextual facts that take
/// part in a negative-constraint violation. Dimension instances are never touched.
pub fn discard_violations(
    ctx: &Database,
    ontology: &Ontology,
    config: &ChaseConfig,
) -> (Database, Vec<RemovedFact>) {
    let result = chase(ctx, ontology, config);
    let contextual: BTreeSet<&str> = ontology.mappings.iter().map(|m| &*m.contextual.predicate).collect();
    let mut out = ctx.clone();
    let mut removed = Vec::new();
    for v in &result.nc_violations {
        for (p, t) in &v.facts {
            if is_discardable(&ontology.schema, &contextual, p) && out.remove(p, t) {
                removed.push(RemovedFact { fact: fact_atom(p, t).to_string(), rule: v.rule.clone() });
            }
        }
    }
    (out, removed)
}

fn rule_query(def: &QualityRuleDecl) -> ConjunctiveQuery {
    let mut answer_vars: Vec<Arc<str>> = Vec::new();
    for v in def.head.variables() {
        if !answer_vars.iter().any(|a| &**a == v) {
            answer_vars.push(Arc::from(v));
        }
    }
    ConjunctiveQuery {
        name: def.head.predicate.clone(),
        answer_vars,
        atoms: def.body.atoms.clone(),
        comparisons: def.body.comparisons.clone(),
    }
}

fn head_tuple(head: &Atom, answer_vars: &[Arc<str>], answer: &Tuple) -> Tuple {
    head.terms
        .iter()
        .map(|t| match t {
            Term::Const(c) => Value::Const(c.clone()),
            Term::Var(v) => answer[answer_vars.iter().position(|a| a == v).expect("head variable")].clone(),
        })
        .collect()
}

fn definitions<'a>(ontology: &'a Ontology, base: &str) -> Vec<&'a QualityRuleDecl> {
    ontology.quality_rules.iter().filter(|d| &*d.base == base).collect()
}

/// Null-free extension of the quality version of `base`, evaluated over `ctx` with every rule
/// of the ontology (quality predicates included).
pub fn compute_quality_version(
    ctx: &Database,
    ontology: &Ontology,
    base: &str,
    config: &QueryConfig,
) -> Result<BTreeSet<Tuple>, QualityError> {
    let defs = definitions(ontology, base);
    if defs.is_empty() {
        return Err(QualityError::MissingQualityDefinition(base.to_string()));
    }
    let mut out = BTreeSet::new();
    for d in defs {
        let q = rule_query(d);
        for a in answer_cq(ctx, &ontology.rules, &q, config)? {
            out.insert(head_tuple(&d.head, &q.answer_vars, &a));
        }
    }
    Ok(out)
}

/// The quality predicate standing for `base`, if one is defined.
pub fn quality_predicate(ontology: &Ontology, base: &str) -> Option<Arc<str>> {
    definitions(ontology, base).first().map(|d| d.head.predicate.clone())
}

/// Replaces every base predicate in `q` by its quality version. Base predicates are the mapped
/// ones and anything the ontology does not declare; other ontology predicates stay.
pub fn rewrite_query(q: &ConjunctiveQuery, ontology: &Ontology) -> Result<ConjunctiveQuery, QualityError> {
    let declared = ontology.schema.all_predicates();
    let mut out = q.clone();
    out.name = Arc::from(format!("{}^q", q.name));
    for a in &mut out.atoms {
        let mapped = ontology.mappings.iter().any(|m| m.base.predicate == a.predicate);
        if !mapped && declared.contains_key(&a.predicate) {
            continue;
        }
        a.predicate = quality_predicate(ontology, &a.predicate)
            .ok_or_else(|| QualityError::MissingQualityDefinition(a.predicate.to_string()))?;
    }
    Ok(out)
}

/// |S^q| / |S| kept as exact counts; an empty base counts as fully clean.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    pub fn new(quality: usize, base: usize) -> Self {
        if base == 0 {
            Ratio { numerator: 1, denominator: 1 }
        } else {
            Ratio { numerator: quality, denominator: base }
        }
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.numerator * other.denominator == other.numerator * self.denominator
    }
}

impl Eq for Ratio {}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiscardedTuple {
    pub tuple: Vec<String>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationReport {
    pub relation: Arc<str>,
    pub quality_relation: Arc<str>,
    pub base_count: usize,
    pub quality_count: usize,
    pub ratio: Ratio,
    pub discarded: Vec<DiscardedTuple>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QualityReport {
    pub relations: Vec<RelationReport>,
    /// Facts dropped from the context because they take part in a constraint violation.
    pub removed: Vec<RemovedFact>,
}

impl QualityReport {
    pub fn relation(&self, name: &str) -> Option<&RelationReport> {
        self.relations.iter().find(|r| &*r.relation == name)
    }
}

fn strings(t: &Tuple) -> Vec<String> {
    t.iter().map(Value::to_string).collect()
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            writeln!(
                f,
                "{} -> {}: {} of {} tuples (ratio {} = {:.3})",
                r.relation,
                r.quality_relation,
                r.quality_count,
                r.base_count,
                r.ratio,
                r.ratio.value()
            )?;
            for d in &r.discarded {
                writeln!(f, "  discarded ({}): {}", d.tuple.join(", "), d.reason)?;
            }
        }
        for r in &self.removed {
            writeln!(f, "removed {} by {}", r.fact, r.rule)?;
        }
        Ok(())
    }
}

fn attribute_name(schema: &MdSchema, predicate: &str, i: usize) -> String {
    match schema.predicate_kind(predicate) {
        Some(PredicateKind::Categorical(r)) => r.attributes.get(i).map(|a| a.name.to_string()),
        Some(PredicateKind::Contextual(p)) => p.attributes.get(i).map(|a| a.to_string()),
        _ => None,
    }
    .unwrap_or_else(|| format!("#{}", i + 1))
}

/// Why `tuple` of `base` is not in its quality version: the first definition is re-run with
/// the tuple fixed and its constant conditions turned into variables, so the values actually
/// present can be compared with the required ones.
fn explain(
    ctx: &Database,
    full_ctx: &Database,
    removed: &[RemovedFact],
    ontology: &Ontology,
    def: &QualityRuleDecl,
    tuple: &Tuple,
    config: &QueryConfig,
) -> Result<String, QualityError> {
    let mut fixed: BTreeMap<&str, Value> = BTreeMap::new();
    for (t, v) in def.head.terms.iter().zip(tuple) {
        if let Term::Var(x) = t {
            fixed.insert(x, v.clone());
        }
    }
    let mut failed = Vec::new();
    for c in &def.body.comparisons {
        let side = |t: &Term| match t {
            Term::Var(x) => fixed.get(&**x).cloned(),
            Term::Const(k) => Some(Value::Const(k.clone())),
        };
        if let (Some(l), Some(r)) = (side(&c.left), side(&c.right)) {
            if !c.eval(&l, &r) {
                failed.push(format!("fails {c}"));
            }
        }
    }
    if !failed.is_empty() {
        return Ok(failed.join("; "));
    }
    let mut conditions: Vec<(Arc<str>, usize, Arc<str>)> = Vec::new();
    let mut atoms = Vec::new();
    for a in &def.body.atoms {
        let terms = a
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| match t {
                Term::Const(c) => {
                    conditions.push((a.predicate.clone(), i, c.clone()));
                    Term::var(&format!("_c{}", conditions.len()))
                }
                Term::Var(x) => match fixed.get(&**x) {
                    Some(Value::Const(c)) => Term::Const(c.clone()),
                    _ => t.clone(),
                },
            })
            .collect();
        atoms.push(Atom { predicate: a.predicate.clone(), terms });
    }
    let names: Vec<String> = (1..=conditions.len()).map(|k| format!("_c{k}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let q = ConjunctiveQuery::new("_why", &refs, atoms.clone());
    let found = answer_cq(ctx, &ontology.rules, &q, config)?;
    let Some(values) = found.iter().next() else {
        let preds: BTreeSet<&str> = atoms.iter().map(|a| &*a.predicate).collect();
        let preds: Vec<&str> = preds.into_iter().collect();
        if !removed.is_empty() && !answer_cq(full_ctx, &ontology.rules, &q, config)?.is_empty() {
            let rules: BTreeSet<&str> = removed.iter().map(|r| &*r.rule).collect();
            let rules: Vec<&str> = rules.into_iter().collect();
            return Ok(format!(
                "{} only derivable from facts removed by {}",
                preds.join(", "),
                rules.join(", ")
            ));
        }
        return Ok(format!("no {} derivable for this tuple", preds.join(", ")));
    };
    let mismatches: Vec<String> = conditions
        .iter()
        .zip(values)
        .filter(|((_, _, want), got)| got.as_const() != Some(&**want))
        .map(|((p, i, want), got)| {
            format!("{}.{} is {got}, required {}", p, attribute_name(&ontology.schema, p, *i), Term::Const(want.clone()))
        })
        .collect();
    Ok(mismatches.join("; "))
}

#[derive(Clone, Debug, Default)]
pub struct AssessConfig {
    pub query: QueryConfig,
    pub chase: ChaseConfig,
}

#[derive(Clone, Debug)]
pub struct Assessment {
    pub report: QualityReport,
    /// Quality versions keyed by base relation.
    pub versions: BTreeMap<Arc<str>, BTreeSet<Tuple>>,
    pub rewritten: Option<ConjunctiveQuery>,
    pub answers: Option<BTreeSet<Tuple>>,
}

/// Runs the whole pipeline: context, discard, quality versions, report and, when a query is
/// given, its quality rewriting answered over the quality versions.
pub fn quality_assess(
    db: &Database,
    ontology: &Ontology,
    q: Option<&ConjunctiveQuery>,
    config: &AssessConfig,
) -> Result<Assessment, QualityError> {
    let full_ctx = build_context(db, &ontology.mappings)?;
    let (ctx, removed) = discard_violations(&full_ctx, ontology, &config.chase);
    let mut bases: Vec<Arc<str>> = Vec::new();
    for d in &ontology.quality_rules {
        if !bases.contains(&d.base) {
            bases.push(d.base.clone());
        }
    }
    let mut report = QualityReport { relations: Vec::new(), removed: Vec::new() };
    let mut versions = BTreeMap::new();
    let mut quality_db = ctx.clone();
    for base in &bases {
        let version = compute_quality_version(&ctx, ontology, base, &config.query)?;
        let qp = quality_predicate(ontology, base).expect("base has a definition");
        let base_rel: Vec<Tuple> = db.tuples(base).cloned().collect();
        let def = definitions(ontology, base)[0];
        let mut discarded = Vec::new();
        for t in base_rel.iter().filter(|t| !version.contains(*t)) {
            let reason = explain(&ctx, &full_ctx, &removed, ontology, def, t, &config.query)?;
            discarded.push(DiscardedTuple { tuple: strings(t), reason });
        }
        let quality_count = version.iter().filter(|t| base_rel.contains(t)).count();
        report.relations.push(RelationReport {
            relation: base.clone(),
            quality_relation: qp.clone(),
            base_count: base_rel.len(),
            quality_count,
            ratio: Ratio::new(quality_count, base_rel.len()),
            discarded,
        });
        quality_db.declare(&qp, def.head.arity())?;
        for t in &version {
            quality_db.insert(&qp, t.clone())?;
        }
        versions.insert(base.clone(), version);
    }
    report.removed = removed;
    let (rewritten, answers) = match q {
        Some(q) => {
            let r = rewrite_query(q, ontology)?;
            let a = answer_cq(&quality_db, &ontology.rules, &r, &config.query)?;
            (Some(r), Some(a))
        }
        None => (None, None),
    };
    Ok(Assessment { report, versions, rewritten, answers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tuple;
    use crate::parser::parse_program;

    #[test]
    fn ratio_is_exact() {
        assert_eq!(Ratio::new(2, 6), Ratio::new(1, 3));
        assert_eq!(Ratio::new(2, 6).to_string(), "2/6");
        assert_eq!(Ratio::new(0, 0), Ratio::new(5, 5));
    }

    #[test]
    fn wider_context_gets_fresh_nulls() {
        let o = parse_program(
            "predicate S(a, b).\npredicate S^c(a, b, x, y).\n\
             map S(a, b) => S^c(a, b, x, y).",
        )
        .unwrap();
        let mut db = Database::new();
        db.add("S", tuple(&["1", "2"])).unwrap();
        db.add("S", tuple(&["3", "4"])).unwrap();
        let ctx = build_context(&db, &o.mappings).unwrap();
        let rows: Vec<&Tuple> = ctx.tuples("S^c").collect();
        assert_eq!(rows.len(), 2);
        let nulls: BTreeSet<&Value> = rows.iter().flat_map(|t| &t[2..]).collect();
        assert_eq!(nulls.len(), 4);
        assert!(nulls.iter().all(|v| v.is_null()));
    }

    #[test]
    fn empty_and_unknown_bases() {
        let o = parse_program("predicate S(a).\npredicate S^c(a).\nmap S(a) => S^c(a).").unwrap();
        let mut db = Database::new();
        db.declare("S", 1).unwrap();
        assert!(build_context(&db, &o.mappings).unwrap().relation("S^c").unwrap().is_empty());
        assert!(matches!(
            build_context(&Database::new(), &o.mappings),
            Err(DataError::UnknownPredicate(p)) if p == "S"
        ));
    }

    #[test]
    fn rewriting_keeps_ontology_predicates() {
        let o = parse_program(
            "predicate S(a).\npredicate S^c(a).\npredicate S^q(a).\npredicate T(a).\n\
             map S(a) => S^c(a).\n\
             quality S: S^q(a) <- S^c(a), T(a).\n\
             query Q(a) <- S(a), T(a), a <= \"z\".\n\
             query Only(a) <- T(a).",
        )
        .unwrap();
        let r = rewrite_query(o.query("Q").unwrap(), &o).unwrap();
        assert_eq!(&*r.atoms[0].predicate, "S^q");
        assert_eq!(&*r.atoms[1].predicate, "T");
        assert_eq!(r.comparisons, o.query("Q").unwrap().comparisons);
        assert_eq!(rewrite_query(o.query("Only").unwrap(), &o).unwrap().atoms, o.query("Only").unwrap().atoms);
        let foo = ConjunctiveQuery::new("F", &[], vec![Atom::new("Foo", vec![Term::var("x")])]);
        assert!(matches!(rewrite_query(&foo, &o), Err(QualityError::MissingQualityDefinition(p)) if p == "Foo"));
    }
}
