//! Deterministic top-down resolution over Skolemized TGDs with an explicit decision stack.
//!
//! Goals are resolved leftmost first. For each goal the choices are tried in a fixed order:
//! reuse of the first earlier resolved atom that is var(q)-isomorphic to it, then matching
//! extensional facts in load order, then expanding rule clauses in declaration order.
//! A goal isomorphic to one of its ancestors is a dead end, and goals deeper than the depth
//! budget are abandoned and reported.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::database::{Database, FactIndex};
use crate::model::{Atom, CmpOp, ConjunctiveQuery, Rule, RuleKind, Term, Value};

use super::proof::{Justification, ProofNode, ProofSchema};

/// Resolved atoms larger than this count against the depth budget.
const MAX_TERM_SIZE: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum T {
    V(u32),
    C(Arc<str>),
    F(Arc<Skolem>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Skolem {
    rule: Arc<str>,
    var: Arc<str>,
    args: Vec<T>,
}

#[derive(Clone, Debug)]
struct AtomT {
    pred: Arc<str>,
    args: Vec<T>,
}

#[derive(Clone, Debug)]
struct CmpT {
    left: T,
    op: CmpOp,
    right: T,
}

struct Clause {
    label: Arc<str>,
    head: AtomT,
    body: Vec<AtomT>,
    cmps: Vec<CmpT>,
    nvars: u32,
}

fn shift(t: &T, base: u32) -> T {
    match t {
        T::V(v) => T::V(v + base),
        T::C(_) => t.clone(),
        T::F(s) => T::F(Arc::new(Skolem {
            rule: s.rule.clone(),
            var: s.var.clone(),
            args: s.args.iter().map(|a| shift(a, base)).collect(),
        })),
    }
}

fn shift_atom(a: &AtomT, base: u32) -> AtomT {
    AtomT {
        pred: a.pred.clone(),
        args: a.args.iter().map(|t| shift(t, base)).collect(),
    }
}

/// Skolemized clauses: one per head atom, sharing the rule's Skolem functions.
pub(crate) struct Program {
    clauses: Vec<Clause>,
}

impl Program {
    pub fn new(tgds: &[Rule]) -> Self {
        let mut clauses = Vec::new();
        for r in tgds {
            let RuleKind::Tgd { head, existentials } = &r.kind else { continue };
            let vars = r.body_variables();
            let ids: HashMap<&str, u32> = vars.iter().enumerate().map(|(i, v)| (&**v, i as u32)).collect();
            let skolems: HashMap<&str, T> = existentials
                .iter()
                .map(|z| {
                    let sk = Skolem {
                        rule: r.label.clone(),
                        var: z.clone(),
                        args: (0..vars.len() as u32).map(T::V).collect(),
                    };
                    (&**z, T::F(Arc::new(sk)))
                })
                .collect();
            let term = |t: &Term| match t {
                Term::Const(c) => T::C(c.clone()),
                Term::Var(v) => skolems.get(&**v).cloned().unwrap_or_else(|| T::V(ids[&**v])),
            };
            let atom = |a: &Atom| AtomT {
                pred: a.predicate.clone(),
                args: a.terms.iter().map(term).collect(),
            };
            let body: Vec<AtomT> = r.body.atoms.iter().map(atom).collect();
            let cmps: Vec<CmpT> = r
                .body
                .comparisons
                .iter()
                .map(|c| CmpT { left: term(&c.left), op: c.op, right: term(&c.right) })
                .collect();
            for h in head {
                clauses.push(Clause {
                    label: r.label.clone(),
                    head: atom(h),
                    body: body.clone(),
                    cmps: cmps.clone(),
                    nvars: vars.len() as u32,
                });
            }
        }
        Program { clauses }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Just {
    Fact(usize),
    Clause(usize),
    Reuse(usize),
}

#[derive(Clone, Debug)]
struct Node {
    atom: AtomT,
    parent: Option<usize>,
    depth: usize,
    just: Option<Just>,
    children: Vec<usize>,
}

#[derive(Clone, Debug)]
struct State {
    subst: Vec<Option<T>>,
    nodes: Vec<Node>,
    /// Unresolved goals; the next goal is the last element.
    pending: Vec<usize>,
    cmps: Vec<CmpT>,
}

impl State {
    fn walk<'a>(&'a self, mut t: &'a T, overlay: &'a HashMap<u32, T>) -> &'a T {
        loop {
            match t {
                T::V(v) => match overlay.get(v).or_else(|| self.subst[*v as usize].as_ref()) {
                    Some(next) => t = next,
                    None => return t,
                },
                _ => return t,
            }
        }
    }

    fn resolve(&self, t: &T) -> T {
        let empty = HashMap::new();
        match self.walk(t, &empty) {
            T::F(s) => T::F(Arc::new(Skolem {
                rule: s.rule.clone(),
                var: s.var.clone(),
                args: s.args.iter().map(|a| self.resolve(a)).collect(),
            })),
            other => other.clone(),
        }
    }

    /// Like `resolve_atom`, giving up once the result would exceed `MAX_TERM_SIZE` symbols.
    fn resolve_atom_bounded(&self, a: &AtomT) -> Option<AtomT> {
        fn go(s: &State, t: &T, left: &mut usize) -> Option<T> {
            *left = left.checked_sub(1)?;
            let empty = HashMap::new();
            Some(match s.walk(t, &empty) {
                T::F(k) => T::F(Arc::new(Skolem {
                    rule: k.rule.clone(),
                    var: k.var.clone(),
                    args: k.args.iter().map(|x| go(s, x, left)).collect::<Option<_>>()?,
                })),
                other => other.clone(),
            })
        }
        let mut left = MAX_TERM_SIZE;
        Some(AtomT {
            pred: a.pred.clone(),
            args: a.args.iter().map(|t| go(self, t, &mut left)).collect::<Option<_>>()?,
        })
    }

    fn resolve_atom(&self, a: &AtomT) -> AtomT {
        AtomT {
            pred: a.pred.clone(),
            args: a.args.iter().map(|t| self.resolve(t)).collect(),
        }
    }

    fn occurs(&self, v: u32, t: &T, overlay: &HashMap<u32, T>) -> bool {
        match self.walk(t, overlay) {
            T::V(w) => *w == v,
            T::C(_) => false,
            T::F(s) => s.args.iter().any(|a| self.occurs(v, a, overlay)),
        }
    }

    fn unify_into(&self, a: &T, b: &T, overlay: &mut HashMap<u32, T>) -> bool {
        let (a, b) = (self.walk(a, overlay).clone(), self.walk(b, overlay).clone());
        match (&a, &b) {
            _ if a == b => true,
            // Bind the newer variable so query variables stay visible.
            (T::V(x), T::V(y)) => {
                overlay.insert((*x).max(*y), T::V((*x).min(*y)));
                true
            }
            (T::V(v), t) | (t, T::V(v)) => {
                if self.occurs(*v, t, overlay) {
                    return false;
                }
                overlay.insert(*v, t.clone());
                true
            }
            (T::F(x), T::F(y)) => {
                x.rule == y.rule
                    && x.var == y.var
                    && x.args.len() == y.args.len()
                    && x.args.iter().zip(&y.args).all(|(p, q)| self.unify_into(p, q, overlay))
            }
            _ => false,
        }
    }

    /// Bindings that make the two argument lists equal, without touching the state.
    fn unify_args(&self, a: &[T], b: &[T]) -> Option<HashMap<u32, T>> {
        let mut overlay = HashMap::new();
        a.iter()
            .zip(b)
            .all(|(x, y)| self.unify_into(x, y, &mut overlay))
            .then_some(overlay)
    }

    fn bind(&mut self, overlay: HashMap<u32, T>) {
        for (v, t) in overlay {
            self.subst[v as usize] = Some(t);
        }
    }

    fn fresh(&mut self, n: u32) -> u32 {
        let base = self.subst.len() as u32;
        self.subst.resize(self.subst.len() + n as usize, None);
        base
    }

    fn ancestors(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.nodes[n].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        out
    }

    /// Nodes `n` relies on: its subtree and, transitively, the targets of reuse links in it.
    fn depends_on(&self, n: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![n];
        while let Some(m) = stack.pop() {
            if !seen.insert(m) {
                continue;
            }
            stack.extend(self.nodes[m].children.iter().copied());
            if let Some(Just::Reuse(t)) = self.nodes[m].just {
                stack.push(t);
            }
        }
        seen
    }

    /// Checks every comparison that has become ground; false if one fails.
    fn check_cmps(&mut self) -> bool {
        let mut keep = Vec::new();
        for c in std::mem::take(&mut self.cmps) {
            let (l, r) = (self.resolve(&c.left), self.resolve(&c.right));
            match (&l, &r) {
                (T::C(a), T::C(b)) => {
                    if !c.op.holds(a, b) {
                        return false;
                    }
                }
                _ if is_ground(&l) && is_ground(&r) => return false,
                _ => keep.push(c),
            }
        }
        self.cmps = keep;
        true
    }
}

fn is_ground(t: &T) -> bool {
    match t {
        T::V(_) => false,
        T::C(_) => true,
        T::F(s) => s.args.iter().all(is_ground),
    }
}

/// Equality up to a bijective renaming of non-query variables; query variables and constants
/// stay fixed. Both atoms must already be resolved.
fn isomorphic(a: &AtomT, b: &AtomT, query_vars: u32) -> bool {
    fn go(x: &T, y: &T, q: u32, fw: &mut HashMap<u32, u32>, bw: &mut HashMap<u32, u32>) -> bool {
        match (x, y) {
            (T::C(a), T::C(b)) => a == b,
            (T::V(a), T::V(b)) if *a < q || *b < q => a == b,
            (T::V(a), T::V(b)) => {
                *fw.entry(*a).or_insert(*b) == *b && *bw.entry(*b).or_insert(*a) == *a
            }
            (T::F(s), T::F(t)) => {
                s.rule == t.rule
                    && s.var == t.var
                    && s.args.iter().zip(&t.args).all(|(p, r)| go(p, r, q, fw, bw))
            }
            _ => false,
        }
    }
    let (mut fw, mut bw) = (HashMap::new(), HashMap::new());
    a.pred == b.pred
        && a.args.len() == b.args.len()
        && a.args.iter().zip(&b.args).all(|(x, y)| go(x, y, query_vars, &mut fw, &mut bw))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Choice {
    Reuse(usize),
    Fact(usize),
    Clause(usize),
}

struct Frame {
    state: State,
    goal: usize,
    choices: Vec<Choice>,
    next: usize,
}

pub(crate) struct Search<'a> {
    db: &'a Database,
    index: &'a FactIndex,
    program: &'a Program,
    depth_budget: usize,
    query_vars: u32,
    answer_vars: Vec<u32>,
    var_names: Vec<Arc<str>>,
    pub budget_hit: std::cell::Cell<bool>,
    pub decisions: Vec<String>,
}

pub(crate) struct Accepted {
    pub answer: Vec<Value>,
    pub proof: ProofSchema,
}

impl<'a> Search<'a> {
    pub fn new(
        db: &'a Database,
        index: &'a FactIndex,
        program: &'a Program,
        depth_budget: usize,
    ) -> Self {
        Search {
            db,
            index,
            program,
            depth_budget,
            query_vars: 0,
            answer_vars: Vec::new(),
            var_names: Vec::new(),
            budget_hit: Default::default(),
            decisions: Vec::new(),
        }
    }

    fn initial(&mut self, q: &ConjunctiveQuery) -> State {
        let names: Vec<Arc<str>> = q.variables().into_iter().collect();
        let ids: HashMap<&str, u32> = names.iter().enumerate().map(|(i, v)| (&**v, i as u32)).collect();
        let term = |t: &Term| match t {
            Term::Const(c) => T::C(c.clone()),
            Term::Var(v) => T::V(ids[&**v]),
        };
        self.query_vars = names.len() as u32;
        self.answer_vars = q.answer_vars.iter().map(|v| ids[&**v]).collect();
        let nodes: Vec<Node> = q
            .atoms
            .iter()
            .map(|a| Node {
                atom: AtomT { pred: a.predicate.clone(), args: a.terms.iter().map(term).collect() },
                parent: None,
                depth: 0,
                just: None,
                children: Vec::new(),
            })
            .collect();
        let cmps = q
            .comparisons
            .iter()
            .map(|c| CmpT { left: term(&c.left), op: c.op, right: term(&c.right) })
            .collect();
        self.var_names = names;
        State {
            subst: vec![None; self.query_vars as usize],
            pending: (0..nodes.len()).rev().collect(),
            nodes,
            cmps,
        }
    }

    /// A node's resolved atom, or `None` (recorded as a budget overrun) when it is too large.
    fn bounded(&self, s: &State, node: usize) -> Option<AtomT> {
        let out = s.resolve_atom_bounded(&s.nodes[node].atom);
        if out.is_none() {
            self.budget_hit.set(true);
        }
        out
    }

    fn choices(&mut self, s: &State, goal: usize) -> Vec<Choice> {
        let node = &s.nodes[goal];
        if node.depth > self.depth_budget {
            self.budget_hit.set(true);
            return Vec::new();
        }
        let Some(atom) = self.bounded(s, goal) else { return Vec::new() };
        let ancestors = s.ancestors(goal);
        if ancestors.iter().any(|&a| self.bounded(s, a).is_none_or(|b| isomorphic(&atom, &b, self.query_vars))) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut blocked: BTreeSet<usize> = ancestors.iter().copied().collect();
        blocked.insert(goal);
        let reuse = s.nodes.iter().enumerate().find(|(i, n)| {
            n.just.is_some()
                && !blocked.contains(i)
                && self.bounded(s, *i).is_some_and(|b| isomorphic(&atom, &b, self.query_vars))
                && s.depends_on(*i).is_disjoint(&blocked)
        });
        if let Some((i, _)) = reuse {
            out.push(Choice::Reuse(i));
        }
        if !atom.args.iter().any(|t| matches!(t, T::F(_))) {
            if let Some(rel) = self.db.relation(&atom.pred) {
                let bound: Vec<(usize, Value)> = atom
                    .args
                    .iter()
                    .enumerate()
                    .filter_map(|(i, t)| match t {
                        T::C(c) => Some((i, Value::Const(c.clone()))),
                        _ => None,
                    })
                    .collect();
                match self.index.candidates(&atom.pred, &bound) {
                    Some(ids) => out.extend(ids.iter().map(|&i| Choice::Fact(i))),
                    None => out.extend((0..rel.len()).map(Choice::Fact)),
                }
            }
        }
        for (ci, c) in self.program.clauses.iter().enumerate() {
            if c.head.pred == atom.pred {
                out.push(Choice::Clause(ci));
            }
        }
        out
    }

    fn apply(&self, s: &State, goal: usize, choice: Choice) -> Option<State> {
        let atom = &s.nodes[goal].atom;
        match choice {
            Choice::Reuse(target) => {
                let b = s.unify_args(&atom.args, &s.nodes[target].atom.args)?;
                let mut next = s.clone();
                next.bind(b);
                next.pending.pop();
                next.nodes[goal].just = Some(Just::Reuse(target));
                next.check_cmps().then_some(next)
            }
            Choice::Fact(i) => {
                let t = self.db.relation(&atom.pred)?.get(i)?;
                let vals: Vec<T> = t
                    .iter()
                    .map(|v| match v {
                        Value::Const(c) => Some(T::C(c.clone())),
                        Value::Null(_) => None,
                    })
                    .collect::<Option<_>>()?;
                let b = s.unify_args(&atom.args, &vals)?;
                let mut next = s.clone();
                next.bind(b);
                next.pending.pop();
                next.nodes[goal].just = Some(Just::Fact(i));
                next.check_cmps().then_some(next)
            }
            Choice::Clause(ci) => {
                let c = &self.program.clauses[ci];
                let mut next = s.clone();
                let base = next.fresh(c.nvars);
                let head = shift_atom(&c.head, base);
                let b = next.unify_args(&atom.args, &head.args)?;
                next.bind(b);
                // Unification may turn the goal into a copy of an ancestor.
                let now = self.bounded(&next, goal)?;
                if next
                    .ancestors(goal)
                    .iter()
                    .any(|&a| self.bounded(&next, a).is_none_or(|b| isomorphic(&now, &b, self.query_vars)))
                {
                    return None;
                }
                next.pending.pop();
                next.nodes[goal].just = Some(Just::Clause(ci));
                let depth = next.nodes[goal].depth + 1;
                let first = next.nodes.len();
                for a in &c.body {
                    next.nodes.push(Node {
                        atom: shift_atom(a, base),
                        parent: Some(goal),
                        depth,
                        just: None,
                        children: Vec::new(),
                    });
                }
                let kids: Vec<usize> = (first..next.nodes.len()).collect();
                next.nodes[goal].children = kids.clone();
                next.pending.extend(kids.into_iter().rev());
                next.cmps.extend(c.cmps.iter().map(|x| CmpT {
                    left: shift(&x.left, base),
                    op: x.op,
                    right: shift(&x.right, base),
                }));
                next.check_cmps().then_some(next)
            }
        }
    }

    fn describe(&self, s: &State, goal: usize, choice: Choice) -> String {
        let atom = display_atom(&s.resolve_atom(&s.nodes[goal].atom), &self.var_names);
        match choice {
            Choice::Reuse(t) => format!("{atom} reuse #{t}"),
            Choice::Fact(i) => format!("{atom} fact #{i}"),
            Choice::Clause(c) => format!("{atom} rule {}", self.program.clauses[c].label),
        }
    }

    fn accept(&self, s: &State) -> Option<Accepted> {
        if !s.cmps.is_empty() {
            return None;
        }
        let answer = self
            .answer_vars
            .iter()
            .map(|v| match s.resolve(&T::V(*v)) {
                T::C(c) => Value::Const(c),
                _ => Value::Null(crate::model::NullId(u32::MAX)),
            })
            .collect();
        let nodes = s
            .nodes
            .iter()
            .map(|n| ProofNode {
                atom: display_atom(&s.resolve_atom(&n.atom), &self.var_names),
                parent: n.parent,
                justification: match n.just.expect("accepted proofs resolve every node") {
                    Just::Fact(_) => Justification::Fact,
                    Just::Clause(c) => Justification::Rule(self.program.clauses[c].label.clone()),
                    Just::Reuse(t) => Justification::Reuse(t),
                },
                children: n.children.clone(),
            })
            .collect();
        Some(Accepted { answer, proof: ProofSchema { nodes } })
    }

    /// Runs the search; `on_accept` returns whether to keep looking for further proofs.
    pub fn run(&mut self, q: &ConjunctiveQuery, on_accept: &mut dyn FnMut(Accepted) -> bool) {
        let mut state = self.initial(q);
        let mut stack: Vec<Frame> = Vec::new();
        let mut fresh = state.check_cmps();
        loop {
            if fresh {
                match state.pending.last().copied() {
                    None => {
                        if let Some(a) = self.accept(&state) {
                            if !on_accept(a) {
                                return;
                            }
                        }
                    }
                    Some(goal) => {
                        let choices = self.choices(&state, goal);
                        stack.push(Frame { state, goal, choices, next: 0 });
                    }
                }
            }
            // Take the next untried choice, popping exhausted frames.
            loop {
                let Some(frame) = stack.last_mut() else { return };
                if frame.next >= frame.choices.len() {
                    stack.pop();
                    continue;
                }
                let choice = frame.choices[frame.next];
                frame.next += 1;
                let (goal, attempt) = (frame.goal, self.apply(&frame.state, frame.goal, choice));
                if let Some(next) = attempt {
                    let frame = stack.last().expect("frame still on the stack");
                    self.decisions.push(self.describe(&frame.state, goal, choice));
                    state = next;
                    fresh = true;
                    break;
                }
            }
        }
    }
}

fn display_term(t: &T, names: &[Arc<str>], out: &mut String) {
    use fmt::Write;
    match t {
        T::V(v) => match names.get(*v as usize) {
            Some(n) => out.push_str(n),
            None => {
                let _ = write!(out, "_v{v}");
            }
        },
        T::C(c) => out.push_str(&Term::Const(c.clone()).to_string()),
        T::F(s) => {
            let _ = write!(out, "f_{}_{}(", s.rule, s.var);
            for (i, a) in s.args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                display_term(a, names, out);
            }
            out.push(')');
        }
    }
}

fn display_atom(a: &AtomT, names: &[Arc<str>]) -> String {
    let mut out = format!("{}(", a.pred);
    for (i, t) in a.args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        display_term(t, names, &mut out);
    }
    out.push(')');
    out
}
