//! Certain answers to conjunctive queries: a top-down proof search and a chase-based reference.

mod proof;
mod topdown;

use std::collections::BTreeSet;

use crate::analysis::{is_weakly_sticky, Verdict};
use crate::chase::{chase_rules, ChaseConfig};
use crate::database::{Database, FactIndex};
use crate::error::{ChaseError, QueryError};
use crate::matching::{for_each_match, ground, Subst};
use crate::model::{ConjunctiveQuery, Rule, Term, Tuple, Value};
use crate::ontology::Ontology;

pub use proof::{Justification, ProofNode, ProofSchema};

use topdown::{Program, Search};

pub const DEFAULT_DEPTH_BUDGET: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryConfig {
    pub depth_budget: usize,
    pub require_weakly_sticky: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig { depth_budget: DEFAULT_DEPTH_BUDGET, require_weakly_sticky: true }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BcqOutcome {
    pub accepted: bool,
    pub proof: Option<ProofSchema>,
    /// One line per decision taken, in order, including decisions later undone.
    pub trace: Vec<String>,
}

fn tgds(rules: &[Rule]) -> Vec<Rule> {
    rules.iter().filter(|r| r.is_tgd()).cloned().collect()
}

fn precheck(tgds: &[Rule], config: &QueryConfig) -> Result<(), QueryError> {
    if config.require_weakly_sticky {
        if let Verdict::Reject { witness } = is_weakly_sticky(tgds) {
            return Err(QueryError::NotWeaklySticky {
                rule: witness.rule.to_string(),
                variable: witness.variable.to_string(),
            });
        }
    }
    Ok(())
}

/// Decides a boolean query (or a query with its answer variables already instantiated).
/// Any remaining answer variables are treated as existential.
pub fn answer_bcq(
    db: &Database,
    rules: &[Rule],
    q: &ConjunctiveQuery,
    config: &QueryConfig,
) -> Result<BcqOutcome, QueryError> {
    let tgds = tgds(rules);
    precheck(&tgds, config)?;
    let program = Program::new(&tgds);
    let index = FactIndex::build(db);
    let mut search = Search::new(db, &index, &program, config.depth_budget);
    let boolean = ConjunctiveQuery { answer_vars: Vec::new(), ..q.clone() };
    let mut proof = None;
    search.run(&boolean, &mut |a| {
        proof = Some(a.proof);
        false
    });
    if proof.is_none() && search.budget_hit.get() {
        return Err(QueryError::DepthBudgetExceeded(config.depth_budget));
    }
    Ok(BcqOutcome { accepted: proof.is_some(), proof, trace: search.decisions })
}

/// Certain answers made of constants, found by enumerating every proof of the open query.
pub fn answer_cq(
    db: &Database,
    rules: &[Rule],
    q: &ConjunctiveQuery,
    config: &QueryConfig,
) -> Result<BTreeSet<Tuple>, QueryError> {
    let tgds = tgds(rules);
    precheck(&tgds, config)?;
    let program = Program::new(&tgds);
    let index = FactIndex::build(db);
    let mut search = Search::new(db, &index, &program, config.depth_budget);
    let mut answers = BTreeSet::new();
    search.run(q, &mut |a| {
        if !a.answer.iter().any(Value::is_null) {
            answers.insert(a.answer);
        }
        true
    });
    if search.budget_hit.get() {
        return Err(QueryError::DepthBudgetExceeded(config.depth_budget));
    }
    Ok(answers)
}

/// Evaluates `q` directly on `db`, keeping only answers without nulls.
pub fn evaluate(db: &Database, q: &ConjunctiveQuery) -> BTreeSet<Tuple> {
    let index = FactIndex::build(db);
    let head = crate::model::Atom::new("_answer", q.answer_vars.iter().map(|v| Term::Var(v.clone())).collect());
    let mut out = BTreeSet::new();
    for_each_match(db, &index, &q.atoms, &q.comparisons, &Subst::new(), &mut |s| {
        if q.comparisons.iter().all(|c| crate::matching::compare(c, s) == Some(true)) {
            if let Some(t) = ground(&head, s) {
                if !t.iter().any(Value::is_null) {
                    out.insert(t);
                }
            }
        }
        true
    });
    out
}

/// Certain answers through the chase with the ontology's TGDs and EGDs.
pub fn answer_via_chase(
    db: &Database,
    ontology: &Ontology,
    q: &ConjunctiveQuery,
    config: &ChaseConfig,
) -> Result<BTreeSet<Tuple>, QueryError> {
    let result = chase_rules(db, &ontology.rules, &ontology.egds().cloned().collect::<Vec<_>>(), config);
    if let Some(msg) = result.budget_exceeded {
        return Err(ChaseError::BudgetExceeded(msg).into());
    }
    Ok(evaluate(result.state.facts(), q))
}
