//! Homomorphisms from rule bodies and queries into a database.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::database::{Database, FactIndex};
use crate::model::{Atom, Body, Comparison, Term, Tuple, Value};

pub type Subst = BTreeMap<Arc<str>, Value>;

pub fn term_value(t: &Term, s: &Subst) -> Option<Value> {
    match t {
        Term::Const(c) => Some(Value::Const(c.clone())),
        Term::Var(v) => s.get(v).cloned(),
    }
}

/// Instantiates an atom whose variables are all bound.
pub fn ground(atom: &Atom, s: &Subst) -> Option<Tuple> {
    atom.terms.iter().map(|t| term_value(t, s)).collect()
}

/// Extends `s` so that `atom` maps onto `tuple`, if possible.
pub fn unify(atom: &Atom, tuple: &Tuple, s: &Subst) -> Option<Subst> {
    let mut out = s.clone();
    for (t, v) in atom.terms.iter().zip(tuple) {
        match t {
            Term::Const(c) => {
                if v.as_const() != Some(&**c) {
                    return None;
                }
            }
            Term::Var(x) => match out.get(x) {
                Some(b) if b != v => return None,
                Some(_) => {}
                None => {
                    out.insert(x.clone(), v.clone());
                }
            },
        }
    }
    Some(out)
}

/// Evaluates a comparison once both sides are bound; `None` while a side is unbound.
pub fn compare(c: &Comparison, s: &Subst) -> Option<bool> {
    Some(c.eval(&term_value(&c.left, s)?, &term_value(&c.right, s)?))
}

/// A negated literal holds when its atom is absent. With a null argument the absence is
/// not certain, so the literal does not hold.
pub fn negation_holds(db: &Database, atom: &Atom, s: &Subst) -> bool {
    match ground(atom, s) {
        Some(t) => !t.iter().any(Value::is_null) && !db.contains(&atom.predicate, &t),
        None => false,
    }
}

fn bound_positions(atom: &Atom, s: &Subst) -> Vec<(usize, Value)> {
    atom.terms
        .iter()
        .enumerate()
        .filter_map(|(i, t)| term_value(t, s).map(|v| (i, v)))
        .collect()
}

/// Enumerates homomorphisms of `atoms` into `db` extending `init`, calling `visit` on each;
/// `visit` returns `false` to stop. Comparisons are checked as soon as they are ground.
/// Atoms are matched most-bound-first, ties broken by body order, so the enumeration order
/// is deterministic.
pub fn for_each_match(
    db: &Database,
    index: &FactIndex,
    atoms: &[Atom],
    comparisons: &[Comparison],
    init: &Subst,
    visit: &mut dyn FnMut(&Subst) -> bool,
) -> bool {
    let mut pending: Vec<&Atom> = atoms.iter().collect();
    search(db, index, &mut pending, comparisons, init, visit)
}

fn search(
    db: &Database,
    index: &FactIndex,
    pending: &mut Vec<&Atom>,
    comparisons: &[Comparison],
    s: &Subst,
    visit: &mut dyn FnMut(&Subst) -> bool,
) -> bool {
    if comparisons.iter().any(|c| compare(c, s) == Some(false)) {
        return true;
    }
    if pending.is_empty() {
        return visit(s);
    }
    let (pick, _) = pending
        .iter()
        .enumerate()
        .map(|(i, a)| (i, a.terms.iter().filter(|t| term_value(t, s).is_some()).count()))
        .fold((0, None), |best, (i, n)| match best.1 {
            Some(m) if m >= n => best,
            _ => (i, Some(n)),
        });
    let atom = pending.remove(pick);
    let mut go_on = true;
    if let Some(rel) = db.relation(&atom.predicate) {
        let bound = bound_positions(atom, s);
        let mut step = |t: &Tuple| -> bool {
            match unify(atom, t, s) {
                Some(next) => search(db, index, pending, comparisons, &next, visit),
                None => true,
            }
        };
        match index.candidates(&atom.predicate, &bound) {
            Some(ids) => {
                for &i in ids {
                    if let Some(t) = rel.get(i) {
                        if !step(t) {
                            go_on = false;
                            break;
                        }
                    }
                }
            }
            None => {
                for t in rel.iter() {
                    if !step(t) {
                        go_on = false;
                        break;
                    }
                }
            }
        }
    }
    pending.insert(pick, atom);
    go_on
}

/// All homomorphisms of a body (positive atoms, comparisons and negated atoms) into `db`.
pub fn body_matches(db: &Database, index: &FactIndex, body: &Body, init: &Subst) -> Vec<Subst> {
    let mut out = Vec::new();
    for_each_match(db, index, &body.atoms, &body.comparisons, init, &mut |s| {
        if body.negated.iter().all(|a| negation_holds(db, a, s)) {
            out.push(s.clone());
        }
        true
    });
    out
}

/// Whether some homomorphism of `atoms` extends `init`.
pub fn exists_match(db: &Database, index: &FactIndex, atoms: &[Atom], init: &Subst) -> bool {
    let mut found = false;
    for_each_match(db, index, atoms, &[], init, &mut |_| {
        found = true;
        false
    });
    found
}
