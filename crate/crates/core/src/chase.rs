//! Restricted and oblivious chase with labeled nulls, EGD unification and post-hoc
//! negative-constraint checking.

use std::collections::HashSet;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;

use crate::analysis::Position;
use crate::database::{Database, FactIndex};
use crate::error::ChaseError;
use crate::matching::{body_matches, exists_match, ground, term_value, Subst};
use crate::model::{Atom, NullId, Rule, RuleKind, Term, Tuple, Value};
use crate::ontology::Ontology;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaseVariant {
    /// Fires a trigger only when its head is not already satisfied.
    #[default]
    Restricted,
    /// Fires every trigger exactly once.
    Oblivious,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChaseConfig {
    pub variant: ChaseVariant,
    pub max_steps: usize,
    pub max_nulls: usize,
    /// When set, the rule order of every round is a seeded shuffle instead of declaration order.
    pub schedule_seed: Option<u64>,
}

impl Default for ChaseConfig {
    fn default() -> Self {
        ChaseConfig {
            variant: ChaseVariant::Restricted,
            max_steps: 100_000,
            max_nulls: 100_000,
            schedule_seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NullOrigin {
    pub null: NullId,
    pub rule: Arc<str>,
    pub position: Position,
    pub step: usize,
}

pub type Fact = (Arc<str>, Tuple);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Tgd {
        step: usize,
        rule: Arc<str>,
        trigger: Subst,
        added: Vec<Fact>,
    },
    Egd {
        rule: Arc<str>,
        trigger: Subst,
        replaced: NullId,
        by: Value,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EgdViolation {
    pub rule: Arc<str>,
    pub trigger: Subst,
    pub left: Value,
    pub right: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EgdOutcome {
    pub substitutions: Vec<(NullId, Value)>,
    pub violations: Vec<EgdViolation>,
}

impl EgdOutcome {
    pub fn is_hard_violation(&self) -> bool {
        !self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NcViolation {
    pub rule: Arc<str>,
    pub trigger: Subst,
    /// The positive body atoms under the trigger.
    pub facts: Vec<Fact>,
}

#[derive(Debug)]
pub struct ChaseState {
    db: Database,
    index: FactIndex,
    pub step: usize,
    pub trace: Vec<TraceEvent>,
    pub nulls: Vec<NullOrigin>,
    next_null: u32,
    fired: HashSet<(Arc<str>, Vec<Value>)>,
}

impl ChaseState {
    pub fn new(db: Database) -> Self {
        ChaseState {
            index: FactIndex::build(&db),
            db,
            step: 0,
            trace: Vec::new(),
            nulls: Vec::new(),
            next_null: 0,
            fired: HashSet::new(),
        }
    }

    pub fn facts(&self) -> &Database {
        &self.db
    }

    pub fn into_facts(self) -> Database {
        self.db
    }

    fn add(&mut self, predicate: &Arc<str>, t: Tuple) -> bool {
        let arity = t.len();
        if self.db.relation(predicate).is_none() {
            let _ = self.db.declare(predicate, arity);
        }
        match self.db.insert(predicate, t.clone()) {
            Ok(true) => {
                let i = self.db.relation(predicate).map_or(0, |r| r.len() - 1);
                self.index.insert(predicate, i, &t);
                true
            }
            _ => false,
        }
    }
}

fn trigger_key(rule: &Rule, s: &Subst) -> Vec<Value> {
    rule.body_variables()
        .iter()
        .filter_map(|v| s.get(v).cloned())
        .collect()
}

/// Applies one TGD to every trigger found in the current state. Triggers are collected first
/// and fired in enumeration order; the restricted check sees atoms added by earlier triggers.
pub fn apply_tgd(state: &mut ChaseState, tgd: &Rule, config: &ChaseConfig) -> Result<Vec<Fact>, ChaseError> {
    let RuleKind::Tgd { head, existentials } = &tgd.kind else {
        return Ok(Vec::new());
    };
    let triggers = body_matches(&state.db, &state.index, &tgd.body, &Subst::new());
    let mut added = Vec::new();
    for s in triggers {
        match config.variant {
            ChaseVariant::Restricted => {
                if exists_match(&state.db, &state.index, head, &s) {
                    continue;
                }
            }
            ChaseVariant::Oblivious => {
                if !state.fired.insert((tgd.label.clone(), trigger_key(tgd, &s))) {
                    continue;
                }
            }
        }
        if state.step >= config.max_steps {
            return Err(ChaseError::BudgetExceeded(format!("more than {} steps", config.max_steps)));
        }
        if state.nulls.len() + existentials.len() > config.max_nulls {
            return Err(ChaseError::BudgetExceeded(format!("more than {} nulls", config.max_nulls)));
        }
        state.step += 1;
        let mut ext = s.clone();
        for z in existentials {
            let id = NullId(state.next_null);
            state.next_null += 1;
            let position = head
                .iter()
                .find_map(|a| {
                    a.terms
                        .iter()
                        .position(|t| t.as_var() == Some(z))
                        .map(|i| Position { predicate: a.predicate.clone(), index: i })
                })
                .expect("existential occurs in the head");
            state.nulls.push(NullOrigin {
                null: id,
                rule: tgd.label.clone(),
                position,
                step: state.step,
            });
            ext.insert(z.clone(), Value::Null(id));
        }
        let mut new_here = Vec::new();
        for a in head {
            let t = ground(a, &ext).expect("head variables are bound");
            if state.add(&a.predicate, t.clone()) {
                new_here.push((a.predicate.clone(), t));
            }
        }
        state.trace.push(TraceEvent::Tgd {
            step: state.step,
            rule: tgd.label.clone(),
            trigger: s,
            added: new_here.clone(),
        });
        added.extend(new_here);
    }
    Ok(added)
}

/// Enforces one EGD to fixpoint: nulls are unified (with a constant if possible, otherwise
/// the newer null is replaced by the older); equating two distinct constants is reported.
pub fn apply_egd(state: &mut ChaseState, egd: &Rule) -> EgdOutcome {
    let RuleKind::Egd { left, right } = &egd.kind else {
        return EgdOutcome::default();
    };
    let mut out = EgdOutcome::default();
    loop {
        let mut merge = None;
        for s in body_matches(&state.db, &state.index, &egd.body, &Subst::new()) {
            let (Some(l), Some(r)) = (term_value(left, &s), term_value(right, &s)) else {
                continue;
            };
            if l == r {
                continue;
            }
            match (&l, &r) {
                (Value::Const(_), Value::Const(_)) => {
                    let v = EgdViolation {
                        rule: egd.label.clone(),
                        trigger: s,
                        left: l,
                        right: r,
                    };
                    if !out.violations.contains(&v) {
                        out.violations.push(v);
                    }
                }
                (Value::Null(a), Value::Null(b)) => {
                    let (old, new) = if a < b { (*a, *b) } else { (*b, *a) };
                    merge = Some((s, new, Value::Null(old)));
                    break;
                }
                (Value::Null(n), c) | (c, Value::Null(n)) => {
                    merge = Some((s, *n, c.clone()));
                    break;
                }
            }
        }
        let Some((trigger, null, by)) = merge else { break };
        state.db.replace_null(null, &by);
        state.index = FactIndex::build(&state.db);
        state.trace.push(TraceEvent::Egd {
            rule: egd.label.clone(),
            trigger,
            replaced: null,
            by: by.clone(),
        });
        out.substitutions.push((null, by));
    }
    out
}

/// Every trigger of every negative constraint in `db`.
pub fn nc_violations(db: &Database, constraints: &[Rule]) -> Vec<NcViolation> {
    let index = FactIndex::build(db);
    let mut out = Vec::new();
    for nc in constraints.iter().filter(|r| matches!(r.kind, RuleKind::Nc)) {
        for s in body_matches(db, &index, &nc.body, &Subst::new()) {
            let facts = nc
                .body
                .atoms
                .iter()
                .map(|a| (a.predicate.clone(), ground(a, &s).expect("body atoms are bound")))
                .collect();
            out.push(NcViolation {
                rule: nc.label.clone(),
                trigger: s,
                facts,
            });
        }
    }
    out
}

#[derive(Debug)]
pub struct ChaseResult {
    pub state: ChaseState,
    pub terminated: bool,
    pub budget_exceeded: Option<String>,
    pub rounds: usize,
    pub egd_violations: Vec<EgdViolation>,
    pub nc_violations: Vec<NcViolation>,
}

/// Chases `db` with the ontology's TGDs and EGDs: rounds apply every TGD in turn and then
/// every EGD, until a round changes nothing or a budget runs out. Negative constraints are
/// evaluated on the final state.
pub fn chase(db: &Database, ontology: &Ontology, config: &ChaseConfig) -> ChaseResult {
    chase_rules(db, &ontology.rules, &ontology.constraints, config)
}

pub fn chase_rules(db: &Database, tgds: &[Rule], constraints: &[Rule], config: &ChaseConfig) -> ChaseResult {
    let mut state = ChaseState::new(db.clone());
    let mut rng = config.schedule_seed.map(StdRng::seed_from_u64);
    let mut order: Vec<&Rule> = tgds.iter().filter(|r| r.is_tgd()).collect();
    let egds: Vec<&Rule> = constraints
        .iter()
        .filter(|r| matches!(r.kind, RuleKind::Egd { .. }))
        .collect();
    let mut egd_violations: Vec<EgdViolation> = Vec::new();
    let mut rounds = 0;
    let mut budget_exceeded = None;
    'outer: loop {
        rounds += 1;
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut changed = false;
        for r in &order {
            match apply_tgd(&mut state, r, config) {
                Ok(added) => changed |= !added.is_empty(),
                Err(e) => {
                    let msg = match e {
                        ChaseError::BudgetExceeded(m) => m,
                        other => other.to_string(),
                    };
                    budget_exceeded = Some(msg);
                    break 'outer;
                }
            }
        }
        for e in &egds {
            let o = apply_egd(&mut state, e);
            changed |= !o.substitutions.is_empty();
            for v in o.violations {
                if !egd_violations.contains(&v) {
                    egd_violations.push(v);
                }
            }
        }
        if !changed {
            break;
        }
    }
    let nc_violations = nc_violations(&state.db, constraints);
    ChaseResult {
        terminated: budget_exceeded.is_none(),
        budget_exceeded,
        rounds,
        egd_violations,
        nc_violations,
        state,
    }
}

/// Re-applies a trace to the initial database; the result equals the chased facts.
pub fn replay(initial: &Database, trace: &[TraceEvent]) -> Database {
    let mut db = initial.clone();
    for e in trace {
        match e {
            TraceEvent::Tgd { added, .. } => {
                for (p, t) in added {
                    let _ = db.add(p, t.clone());
                }
            }
            TraceEvent::Egd { replaced, by, .. } => {
                db.replace_null(*replaced, by);
            }
        }
    }
    db
}

/// A ground atom for display: `P(a, b)`.
pub fn fact_atom(p: &Arc<str>, t: &Tuple) -> Atom {
    Atom {
        predicate: p.clone(),
        terms: t.iter().map(|v| Term::Const(Arc::from(v.to_string().as_str()))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tuple;
    use crate::parser::parse_program;

    const SCHEMA: &str = "dimension H { category Ward, Unit. rollup UnitWard: Ward -> Unit. }\n\
        dimension T { category Day. }\n\
        dimension I { category Type. }\n\
        relation WorkingSchedules(u: Unit, d: Day; n, t).\n\
        relation Shifts(w: Ward, d: Day; n, s).\n\
        relation Thermometer(w: Ward, t: Type; n).\n";

    fn onto(rules: &str) -> Ontology {
        parse_program(&format!("{SCHEMA}{rules}")).unwrap()
    }

    fn base() -> Database {
        let mut db = Database::new();
        db.add("UnitWard", tuple(&["Standard", "W1"])).unwrap();
        db.add("UnitWard", tuple(&["Standard", "W2"])).unwrap();
        db
    }

    #[test]
    fn downward_rule_invents_one_null_per_trigger() {
        let o = onto("tgd r8: exists z. Shifts(w, d; n, z) <- WorkingSchedules(u, d; n, t), UnitWard(u, w).");
        let mut db = base();
        db.add("WorkingSchedules", tuple(&["Standard", "d9", "Mark", "nc"])).unwrap();
        let r = chase(&db, &o, &ChaseConfig::default());
        assert!(r.terminated);
        let shifts: Vec<&Tuple> = r.state.facts().tuples("Shifts").collect();
        assert_eq!(shifts.len(), 2);
        assert_eq!(shifts[0][..3], tuple(&["W1", "d9", "Mark"])[..]);
        assert_eq!(shifts[1][..3], tuple(&["W2", "d9", "Mark"])[..]);
        assert_ne!(shifts[0][3], shifts[1][3]);
        assert!(shifts.iter().all(|t| t[3].is_null()));
        assert_eq!(r.state.nulls.len(), 2);
        assert_eq!(r.state.nulls[0].position, Position::new("Shifts", 3));
    }

    #[test]
    fn restricted_skips_satisfied_heads() {
        let o = onto("tgd exists z. Shifts(w, d; n, z) <- WorkingSchedules(u, d; n, t), UnitWard(u, w).");
        let mut db = base();
        db.add("WorkingSchedules", tuple(&["Standard", "d9", "Mark", "nc"])).unwrap();
        db.add("Shifts", tuple(&["W1", "d9", "Mark", "night"])).unwrap();
        let r = chase(&db, &o, &ChaseConfig::default());
        assert_eq!(r.state.facts().tuples("Shifts").count(), 2);
        let obl = ChaseConfig { variant: ChaseVariant::Oblivious, ..ChaseConfig::default() };
        let r = chase(&db, &o, &obl);
        assert_eq!(r.state.facts().tuples("Shifts").count(), 3);
    }

    #[test]
    fn egd_unifies_null_with_constant() {
        let o = onto("egd r6: t = t2 <- Thermometer(w, t; n), Thermometer(w2, t2; n2), UnitWard(u, w), UnitWard(u, w2).");
        let mut db = base();
        db.add("Thermometer", vec!["W1".into(), Value::Null(NullId(0)), "Helen".into()]).unwrap();
        db.add("Thermometer", tuple(&["W2", "B1", "Cathy"])).unwrap();
        let mut st = ChaseState::new(db);
        let out = apply_egd(&mut st, o.rule("r6").unwrap());
        assert_eq!(out.substitutions, vec![(NullId(0), Value::constant("B1"))]);
        assert!(st.facts().contains("Thermometer", &tuple(&["W1", "B1", "Helen"])));
        assert!(!st.facts().has_nulls());
    }

    #[test]
    fn egd_on_distinct_constants_is_hard_violation() {
        let o = onto("egd r6: t = t2 <- Thermometer(w, t; n), Thermometer(w2, t2; n2), UnitWard(u, w), UnitWard(u, w2).");
        let mut db = base();
        db.add("Thermometer", tuple(&["W1", "B1", "Helen"])).unwrap();
        db.add("Thermometer", tuple(&["W2", "B1", "Cathy"])).unwrap();
        let mut st = ChaseState::new(db.clone());
        let out = apply_egd(&mut st, o.rule("r6").unwrap());
        assert_eq!(out, EgdOutcome::default());
        db.add("Thermometer", tuple(&["W2", "B2", "Cathy"])).unwrap();
        let r = chase(&db, &o, &ChaseConfig::default());
        assert!(!r.egd_violations.is_empty());
        assert!(r.egd_violations.iter().all(|v| &*v.rule == "r6"));
    }

    #[test]
    fn null_null_unification_keeps_older() {
        let o = onto("egd e: t = t2 <- Thermometer(w, t; n), Thermometer(w, t2; n).");
        let mut db = Database::new();
        db.add("Thermometer", vec!["W1".into(), Value::Null(NullId(3)), "H".into()]).unwrap();
        db.add("Thermometer", vec!["W1".into(), Value::Null(NullId(1)), "H".into()]).unwrap();
        let mut st = ChaseState::new(db);
        let out = apply_egd(&mut st, o.rule("e").unwrap());
        assert_eq!(out.substitutions, vec![(NullId(3), Value::Null(NullId(1)))]);
        assert_eq!(st.facts().fact_count(), 1);
    }

    #[test]
    fn empty_database_terminates_immediately() {
        let o = onto("tgd exists z. Shifts(w, d; n, z) <- WorkingSchedules(u, d; n, t), UnitWard(u, w).\nnc <- Shifts(w, d; n, s), not Ward(w).");
        let r = chase(&Database::new(), &o, &ChaseConfig::default());
        assert!(r.terminated);
        assert_eq!(r.state.step, 0);
        assert!(r.nc_violations.is_empty());
    }

    #[test]
    fn budget_is_reported() {
        let o = parse_program("predicate R(a, b).\ntgd exists z. R(y, z) <- R(x, y).").unwrap();
        let mut db = Database::new();
        db.add("R", tuple(&["a", "b"])).unwrap();
        let cfg = ChaseConfig { max_steps: 5, ..ChaseConfig::default() };
        let r = chase(&db, &o, &cfg);
        assert!(!r.terminated);
        assert!(r.budget_exceeded.unwrap().contains('5'));
        assert_eq!(r.state.step, 5);
    }

    #[test]
    fn trace_replays_to_final_state() {
        let o = onto(
            "tgd exists z. Shifts(w, d; n, z) <- WorkingSchedules(u, d; n, t), UnitWard(u, w).\n\
             egd s = s2 <- Shifts(w, d; n, s), Shifts(w, d; n, s2).",
        );
        let mut db = base();
        db.add("WorkingSchedules", tuple(&["Standard", "d9", "Mark", "nc"])).unwrap();
        db.add("WorkingSchedules", tuple(&["Standard", "d9", "Mark", "c"])).unwrap();
        let r = chase(&db, &o, &ChaseConfig { variant: ChaseVariant::Oblivious, ..ChaseConfig::default() });
        assert!(r.state.trace.iter().any(|e| matches!(e, TraceEvent::Egd { .. })));
        assert_eq!(&replay(&db, &r.state.trace), r.state.facts());
    }
}
