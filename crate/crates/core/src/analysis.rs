//! Static analysis of dimensional rules: syntactic classification, the position dependency
//! graph with its finite-rank positions, variable marking, weak stickiness, stickiness and
//! EGD/TGD separability.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::md::{MdSchema, PredicateKind};
use crate::model::{Atom, Rule, RuleKind, Term};
use crate::ontology::Ontology;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Position {
    pub predicate: Arc<str>,
    pub index: usize,
}

impl Position {
    pub fn new(predicate: &str, index: usize) -> Self {
        Position {
            predicate: Arc::from(predicate),
            index,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.predicate, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upward,
    Downward,
    Mixed,
    /// No parent-child atom links the body to the head.
    Lateral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum RuleClass {
    ReferentialNc,
    DimensionalEgd,
    DimensionalNc,
    DimensionalTgd { direction: Direction },
    DowncastTgd,
    Generic,
}

impl fmt::Display for RuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleClass::ReferentialNc => f.write_str("referential constraint"),
            RuleClass::DimensionalEgd => f.write_str("dimensional EGD"),
            RuleClass::DimensionalNc => f.write_str("dimensional constraint"),
            RuleClass::DimensionalTgd { direction } => {
                let d = match direction {
                    Direction::Upward => "upward",
                    Direction::Downward => "downward",
                    Direction::Mixed => "mixed",
                    Direction::Lateral => "lateral",
                };
                write!(f, "dimensional rule ({d})")
            }
            RuleClass::DowncastTgd => f.write_str("downward rule with categorical existentials"),
            RuleClass::Generic => f.write_str("generic"),
        }
    }
}

fn is_dimensional_atom(schema: &MdSchema, a: &Atom) -> bool {
    matches!(
        schema.predicate_kind(&a.predicate),
        Some(PredicateKind::Categorical(_) | PredicateKind::ParentChild(_))
    )
}

fn var_at_categorical(schema: &MdSchema, atoms: &[Atom], var: &str) -> bool {
    atoms.iter().any(|a| {
        a.terms
            .iter()
            .enumerate()
            .any(|(i, t)| t.as_var() == Some(var) && schema.is_categorical_position(&a.predicate, i))
    })
}

fn occurrences<'a>(atoms: &'a [Atom]) -> impl Iterator<Item = (Position, &'a str)> + 'a {
    atoms.iter().flat_map(|a| {
        a.terms.iter().enumerate().filter_map(move |(i, t)| {
            t.as_var()
                .map(|v| (Position { predicate: a.predicate.clone(), index: i }, v))
        })
    })
}

/// Most specific syntactic form of `rule` over `schema`.
pub fn classify_rule(rule: &Rule, schema: &MdSchema) -> RuleClass {
    let body = &rule.body;
    let all_dimensional = body.atoms.iter().all(|a| is_dimensional_atom(schema, a));
    match &rule.kind {
        RuleKind::Nc => {
            if let ([r], [k]) = (&body.atoms[..], &body.negated[..]) {
                let referential = matches!(schema.predicate_kind(&r.predicate), Some(PredicateKind::Categorical(_)))
                    && matches!(schema.predicate_kind(&k.predicate), Some(PredicateKind::Category(_)))
                    && body.comparisons.is_empty()
                    && k.terms[0].as_var().is_some_and(|e| {
                        r.terms.iter().enumerate().any(|(i, t)| {
                            t.as_var() == Some(e)
                                && schema.position_category(&r.predicate, i).as_deref() == Some(&*k.predicate)
                        })
                    });
                if referential {
                    return RuleClass::ReferentialNc;
                }
            }
            if all_dimensional && body.negated.is_empty() && !body.atoms.is_empty() {
                RuleClass::DimensionalNc
            } else {
                RuleClass::Generic
            }
        }
        RuleKind::Egd { .. } => {
            if all_dimensional && body.negated.is_empty() && !body.atoms.is_empty() {
                RuleClass::DimensionalEgd
            } else {
                RuleClass::Generic
            }
        }
        RuleKind::Tgd { head, .. } => {
            if !all_dimensional || !body.comparisons.is_empty() || !head.iter().all(|a| is_dimensional_atom(schema, a)) {
                return RuleClass::Generic;
            }
            let categorical_existential = rule
                .existentials()
                .iter()
                .any(|z| var_at_categorical(schema, head, z));
            if categorical_existential {
                return RuleClass::DowncastTgd;
            }
            let [h] = &head[..] else { return RuleClass::Generic };
            if !matches!(schema.predicate_kind(&h.predicate), Some(PredicateKind::Categorical(_))) {
                return RuleClass::Generic;
            }
            // Joins only on categorical attributes; values keep their kind from body to head.
            let mut count: BTreeMap<&str, usize> = BTreeMap::new();
            for (_, v) in occurrences(&body.atoms) {
                *count.entry(v).or_default() += 1;
            }
            let nc_in_body = |v: &str| {
                occurrences(&body.atoms).any(|(p, x)| x == v && !schema.is_categorical_position(&p.predicate, p.index))
            };
            for (&v, &n) in &count {
                if n > 1 && nc_in_body(v) {
                    return RuleClass::Generic;
                }
            }
            for (i, t) in h.terms.iter().enumerate() {
                let Some(v) = t.as_var() else { continue };
                if rule.is_existential(v) {
                    continue;
                }
                let cat_head = schema.is_categorical_position(&h.predicate, i);
                if cat_head != var_at_categorical(schema, &body.atoms, v) {
                    return RuleClass::Generic;
                }
            }
            let head_vars: BTreeSet<&str> = h.variables().collect();
            let in_categorical_body = |v: &str| {
                body.atoms.iter().any(|a| {
                    matches!(schema.predicate_kind(&a.predicate), Some(PredicateKind::Categorical(_)))
                        && a.terms.iter().enumerate().any(|(i, t)| {
                            t.as_var() == Some(v) && schema.is_categorical_position(&a.predicate, i)
                        })
                })
            };
            let (mut up, mut down) = (false, false);
            for d in &body.atoms {
                if !matches!(schema.predicate_kind(&d.predicate), Some(PredicateKind::ParentChild(_))) {
                    continue;
                }
                let (Some(parent), Some(child)) = (d.terms[0].as_var(), d.terms[1].as_var()) else {
                    continue;
                };
                if in_categorical_body(child) && head_vars.contains(parent) {
                    up = true;
                }
                if in_categorical_body(parent) && head_vars.contains(child) {
                    down = true;
                }
            }
            let direction = match (up, down) {
                (true, true) => Direction::Mixed,
                (true, false) => Direction::Upward,
                (false, true) => Direction::Downward,
                (false, false) => Direction::Lateral,
            };
            RuleClass::DimensionalTgd { direction }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<Position>,
    pub normal_edges: BTreeSet<(Position, Position)>,
    pub special_edges: BTreeSet<(Position, Position)>,
}

impl DependencyGraph {
    /// Edges run from a body occurrence of a frontier variable to each head position of the
    /// same variable (normal) and to each head position of an existential variable (special).
    pub fn build(tgds: &[Rule]) -> Self {
        let mut g = DependencyGraph::default();
        for r in tgds.iter().filter(|r| r.is_tgd()) {
            for a in r.body.atoms.iter().chain(r.head()) {
                for i in 0..a.arity() {
                    g.nodes.insert(Position { predicate: a.predicate.clone(), index: i });
                }
            }
            let head: Vec<(Position, &str)> = occurrences(r.head()).collect();
            for (p, v) in occurrences(&r.body.atoms) {
                if !head.iter().any(|(_, h)| *h == v) {
                    continue;
                }
                for (q, h) in &head {
                    if *h == v {
                        g.normal_edges.insert((p.clone(), q.clone()));
                    } else if r.is_existential(h) {
                        g.special_edges.insert((p.clone(), q.clone()));
                    }
                }
            }
        }
        g
    }

    fn successors(&self) -> BTreeMap<&Position, Vec<&Position>> {
        let mut out: BTreeMap<&Position, Vec<&Position>> = BTreeMap::new();
        for (a, b) in self.normal_edges.iter().chain(&self.special_edges) {
            out.entry(a).or_default().push(b);
        }
        out
    }

    /// Positions of infinite rank: those in a strongly connected component containing a
    /// special edge, plus everything reachable from such a component.
    pub fn infinite_positions(&self) -> BTreeSet<Position> {
        let mut graph = DiGraph::<&Position, ()>::new();
        let ids: BTreeMap<&Position, NodeIndex> = self.nodes.iter().map(|p| (p, graph.add_node(p))).collect();
        for (a, b) in self.normal_edges.iter().chain(&self.special_edges) {
            graph.add_edge(ids[a], ids[b], ());
        }
        let mut component = BTreeMap::new();
        for (i, scc) in tarjan_scc(&graph).into_iter().enumerate() {
            for n in scc {
                component.insert(graph[n], i);
            }
        }
        let cyclic: BTreeSet<usize> = self
            .special_edges
            .iter()
            .filter(|(a, b)| component[a] == component[b])
            .map(|(a, _)| component[a])
            .collect();
        let mut stack: Vec<&Position> = self
            .nodes
            .iter()
            .filter(|p| cyclic.contains(&component[p]))
            .collect();
        let succ = self.successors();
        let mut seen = BTreeSet::new();
        while let Some(p) = stack.pop() {
            if seen.insert(p.clone()) {
                stack.extend(succ.get(p).into_iter().flatten().copied());
            }
        }
        seen
    }
}

/// The dependency graph of `tgds` and its finite-rank positions.
pub fn compute_finite_positions(tgds: &[Rule]) -> (DependencyGraph, BTreeSet<Position>) {
    let g = DependencyGraph::build(tgds);
    let infinite = g.infinite_positions();
    let finite = g.nodes.iter().filter(|p| !infinite.contains(*p)).cloned().collect();
    (g, finite)
}

pub type Marking = BTreeSet<(Arc<str>, Arc<str>)>;

/// Every round of the marking fixpoint, starting with the base marking; the last entry is
/// the least fixpoint.
pub fn marking_rounds(tgds: &[Rule]) -> Vec<Marking> {
    let tgds: Vec<&Rule> = tgds.iter().filter(|r| r.is_tgd()).collect();
    let mut marked = Marking::new();
    for r in &tgds {
        let head: BTreeSet<&str> = r.head().iter().flat_map(Atom::variables).collect();
        for v in r.body_variables() {
            if !head.contains(&*v) {
                marked.insert((r.label.clone(), v));
            }
        }
    }
    let mut rounds = vec![marked.clone()];
    loop {
        let mut positions = BTreeSet::new();
        for r in &tgds {
            for (p, v) in occurrences(&r.body.atoms) {
                if marked.contains(&(r.label.clone(), Arc::from(v))) {
                    positions.insert(p);
                }
            }
        }
        let mut next = marked.clone();
        for r in &tgds {
            let body: BTreeSet<&str> = r.body.bound_variables();
            for (p, v) in occurrences(r.head()) {
                if body.contains(v) && positions.contains(&p) {
                    next.insert((r.label.clone(), Arc::from(v)));
                }
            }
        }
        if next == marked {
            return rounds;
        }
        marked = next;
        rounds.push(marked.clone());
    }
}

pub fn mark_variables(tgds: &[Rule]) -> Marking {
    marking_rounds(tgds).pop().unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub rule: Arc<str>,
    pub variable: Arc<str>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject { witness: Witness },
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

fn repeated_body_variables(r: &Rule) -> Vec<Arc<str>> {
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, v) in occurrences(&r.body.atoms) {
        *count.entry(v).or_default() += 1;
    }
    count.into_iter().filter(|(_, n)| *n > 1).map(|(v, _)| Arc::from(v)).collect()
}

fn check_repeated(
    tgds: &[Rule],
    marking: &Marking,
    ok: impl Fn(&Rule, &str) -> bool,
) -> Verdict {
    for r in tgds.iter().filter(|r| r.is_tgd()) {
        for v in repeated_body_variables(r) {
            if marking.contains(&(r.label.clone(), v.clone())) && !ok(r, &v) {
                return Verdict::Reject {
                    witness: Witness { rule: r.label.clone(), variable: v },
                };
            }
        }
    }
    Verdict::Accept
}

/// Weak stickiness: every repeated body variable is unmarked or has an occurrence at a
/// finite-rank position.
pub fn is_weakly_sticky(tgds: &[Rule]) -> Verdict {
    let (_, finite) = compute_finite_positions(tgds);
    weakly_sticky_with(tgds, &mark_variables(tgds), &finite)
}

fn weakly_sticky_with(tgds: &[Rule], marking: &Marking, finite: &BTreeSet<Position>) -> Verdict {
    check_repeated(tgds, marking, |r, v| {
        occurrences(&r.body.atoms).any(|(p, x)| x == v && finite.contains(&p))
    })
}

/// Stickiness: marked variables never repeat in a body.
pub fn is_sticky(tgds: &[Rule]) -> Verdict {
    check_repeated(tgds, &mark_variables(tgds), |_, _| false)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Separability {
    Guaranteed,
    NotGuaranteed { reason: String },
}

/// Sufficient syntactic condition: EGD heads equate categorical variables only, and no rule
/// invents categorical values.
pub fn check_separability(egds: &[Rule], tgds: &[Rule], schema: &MdSchema) -> Separability {
    for e in egds {
        let RuleKind::Egd { left, right } = &e.kind else { continue };
        for t in [left, right] {
            let Term::Var(v) = t else { continue };
            let non_categorical = occurrences(&e.body.atoms)
                .any(|(p, x)| x == &**v && !schema.is_categorical_position(&p.predicate, p.index));
            if non_categorical {
                return Separability::NotGuaranteed {
                    reason: format!("EGD `{}` equates non-categorical variable `{v}`", e.label),
                };
            }
        }
    }
    if egds.iter().any(|e| matches!(e.kind, RuleKind::Egd { .. })) {
        if let Some(r) = tgds.iter().find(|r| classify_rule(r, schema) == RuleClass::DowncastTgd) {
            return Separability::NotGuaranteed {
                reason: format!(
                    "rule `{}` introduces existential categorical values, so EGDs may interact with it",
                    r.label
                ),
            };
        }
    }
    Separability::Guaranteed
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisResult {
    pub classes: Vec<(Arc<str>, RuleClass)>,
    pub graph: DependencyGraph,
    pub finite_positions: BTreeSet<Position>,
    pub marking: Marking,
    pub weakly_sticky: Verdict,
    pub sticky: Verdict,
    pub separability: Separability,
}

pub fn analyze(ontology: &Ontology) -> AnalysisResult {
    let schema = &ontology.schema;
    let tgds = &ontology.rules;
    let (graph, finite_positions) = compute_finite_positions(tgds);
    let marking = mark_variables(tgds);
    let weakly_sticky = weakly_sticky_with(tgds, &marking, &finite_positions);
    let sticky = check_repeated(tgds, &marking, |_, _| false);
    let egds: Vec<Rule> = ontology.egds().cloned().collect();
    AnalysisResult {
        classes: tgds
            .iter()
            .chain(&ontology.constraints)
            .map(|r| (r.label.clone(), classify_rule(r, schema)))
            .collect(),
        separability: check_separability(&egds, tgds, schema),
        graph,
        finite_positions,
        marking,
        weakly_sticky,
        sticky,
    }
}

impl fmt::Display for AnalysisResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rules:")?;
        for (l, c) in &self.classes {
            writeln!(f, "  {l}: {c}")?;
        }
        let fin: Vec<String> = self.finite_positions.iter().map(ToString::to_string).collect();
        writeln!(f, "finite-rank positions: {}", fin.join(" "))?;
        let inf: Vec<String> = self
            .graph
            .nodes
            .iter()
            .filter(|p| !self.finite_positions.contains(*p))
            .map(ToString::to_string)
            .collect();
        writeln!(f, "infinite-rank positions: {}", if inf.is_empty() { "none".into() } else { inf.join(" ") })?;
        writeln!(f, "marked variables:")?;
        for (r, v) in &self.marking {
            writeln!(f, "  {r}: {v}")?;
        }
        let verdict = |v: &Verdict| match v {
            Verdict::Accept => "yes".to_string(),
            Verdict::Reject { witness } => {
                format!("no (variable `{}` in rule `{}`)", witness.variable, witness.rule)
            }
        };
        writeln!(f, "weakly sticky: {}", verdict(&self.weakly_sticky))?;
        writeln!(f, "sticky: {}", verdict(&self.sticky))?;
        match &self.separability {
            Separability::Guaranteed => writeln!(f, "separability: guaranteed"),
            Separability::NotGuaranteed { reason } => writeln!(f, "separability: not guaranteed ({reason})"),
        }
    }
}
