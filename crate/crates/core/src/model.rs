//! Terms, atoms, rules and conjunctive queries shared by every stage of the engine.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

/// Identifier of a labeled null introduced by the chase or by context padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NullId(pub u32);

impl fmt::Display for NullId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_:n{}", self.0)
    }
}

/// A database value: a constant from the underlying domain or a labeled null.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Const(Arc<str>),
    Null(NullId),
}

impl Value {
    pub fn constant(s: &str) -> Self {
        Value::Const(Arc::from(s))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null(_))
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Value::Const(c) => Some(c),
            Value::Null(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Const(c) => f.write_str(c),
            Value::Null(n) => n.fmt(f),
        }
    }
}

impl Serialize for NullId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::constant(s)
    }
}

pub type Tuple = Vec<Value>;

/// Builds a constant tuple from string slices; handy in tests and fixtures.
pub fn tuple(values: &[&str]) -> Tuple {
    values.iter().map(|v| Value::constant(v)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Arc<str>),
    Const(Arc<str>),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Arc::from(name))
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(Arc::from(name))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

/// True when a constant can be printed without quotes and re-read as a constant.
pub(crate) fn is_bare_constant(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '^'),
        Some(c) if c.is_ascii_digit() => {
            let mut seen_dot = false;
            for c in s.chars() {
                if c == '.' {
                    if seen_dot {
                        return false;
                    }
                    seen_dot = true;
                } else if !c.is_ascii_digit() {
                    return false;
                }
            }
            !s.ends_with('.')
        }
        _ => false,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) if is_bare_constant(c) => f.write_str(c),
            Term::Const(c) => write!(f, "\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\"")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Arc<str>,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, terms: Vec<Term>) -> Self {
        Atom {
            predicate: Arc::from(predicate),
            terms,
        }
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CmpOp {
    Eq,
    Le,
    Lt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
        }
    }

    /// Constants compare as strings under the sortable encoding of the data files.
    pub fn holds(self, left: &str, right: &str) -> bool {
        match self {
            CmpOp::Eq => left == right,
            CmpOp::Le => left <= right,
            CmpOp::Lt => left < right,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparison {
    pub left: Term,
    pub op: CmpOp,
    pub right: Term,
}

impl Comparison {
    /// Evaluates the comparison on values; anything involving a null is not certain and fails.
    pub fn eval(&self, left: &Value, right: &Value) -> bool {
        match (left, right) {
            (Value::Const(l), Value::Const(r)) => self.op.holds(l, r),
            _ => false,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

/// A rule or query body: positive atoms, negated atoms (constraints only) and comparisons.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Body {
    pub atoms: Vec<Atom>,
    pub negated: Vec<Atom>,
    pub comparisons: Vec<Comparison>,
}

impl Body {
    pub fn positive(atoms: Vec<Atom>) -> Self {
        Body {
            atoms,
            ..Body::default()
        }
    }

    /// Variables bound by the positive atoms.
    pub fn bound_variables(&self) -> BTreeSet<&str> {
        self.atoms.iter().flat_map(Atom::variables).collect()
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !std::mem::take(&mut first) {
                f.write_str(", ")?;
            }
            Ok(())
        };
        for a in &self.atoms {
            sep(f)?;
            write!(f, "{a}")?;
        }
        for a in &self.negated {
            sep(f)?;
            write!(f, "not {a}")?;
        }
        for c in &self.comparisons {
            sep(f)?;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    /// `∃ existentials. head ← body`
    Tgd {
        head: Vec<Atom>,
        existentials: Vec<Arc<str>>,
    },
    /// `left = right ← body`
    Egd { left: Term, right: Term },
    /// `⊥ ← body`
    Nc,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub label: Arc<str>,
    pub kind: RuleKind,
    pub body: Body,
}

impl Rule {
    pub fn tgd(label: &str, head: Vec<Atom>, existentials: &[&str], body: Vec<Atom>) -> Self {
        Rule {
            label: Arc::from(label),
            kind: RuleKind::Tgd {
                head,
                existentials: existentials.iter().map(|v| Arc::from(*v)).collect(),
            },
            body: Body::positive(body),
        }
    }

    pub fn is_tgd(&self) -> bool {
        matches!(self.kind, RuleKind::Tgd { .. })
    }

    pub fn head(&self) -> &[Atom] {
        match &self.kind {
            RuleKind::Tgd { head, .. } => head,
            _ => &[],
        }
    }

    pub fn existentials(&self) -> &[Arc<str>] {
        match &self.kind {
            RuleKind::Tgd { existentials, .. } => existentials,
            _ => &[],
        }
    }

    pub fn is_existential(&self, var: &str) -> bool {
        self.existentials().iter().any(|e| &**e == var)
    }

    /// Body variables in order of first occurrence.
    pub fn body_variables(&self) -> Vec<Arc<str>> {
        let mut seen = Vec::<Arc<str>>::new();
        for a in &self.body.atoms {
            for t in &a.terms {
                if let Term::Var(v) = t {
                    if !seen.contains(v) {
                        seen.push(v.clone());
                    }
                }
            }
        }
        seen
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RuleKind::Tgd { head, existentials } => {
                write!(f, "tgd {}: ", self.label)?;
                if !existentials.is_empty() {
                    f.write_str("exists ")?;
                    for (i, v) in existentials.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        f.write_str(v)?;
                    }
                    f.write_str(". ")?;
                }
                for (i, a) in head.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, " <- {}.", self.body)
            }
            RuleKind::Egd { left, right } => {
                write!(f, "egd {}: {left} = {right} <- {}.", self.label, self.body)
            }
            RuleKind::Nc => write!(f, "nc {}: <- {}.", self.label, self.body),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConjunctiveQuery {
    pub name: Arc<str>,
    pub answer_vars: Vec<Arc<str>>,
    pub atoms: Vec<Atom>,
    pub comparisons: Vec<Comparison>,
}

impl ConjunctiveQuery {
    pub fn new(name: &str, answer_vars: &[&str], atoms: Vec<Atom>) -> Self {
        ConjunctiveQuery {
            name: Arc::from(name),
            answer_vars: answer_vars.iter().map(|v| Arc::from(*v)).collect(),
            atoms,
            comparisons: Vec::new(),
        }
    }

    pub fn with_comparison(mut self, left: Term, op: CmpOp, right: Term) -> Self {
        self.comparisons.push(Comparison { left, op, right });
        self
    }

    pub fn is_boolean(&self) -> bool {
        self.answer_vars.is_empty()
    }

    pub fn variables(&self) -> BTreeSet<Arc<str>> {
        self.atoms
            .iter()
            .flat_map(|a| a.terms.iter())
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                Term::Const(_) => None,
            })
            .collect()
    }

    /// Replaces answer variables by the given constants, producing a boolean query.
    pub fn instantiate(&self, answer: &[Value]) -> ConjunctiveQuery {
        let subst = |t: &Term| -> Term {
            if let Term::Var(v) = t {
                if let Some(i) = self.answer_vars.iter().position(|a| a == v) {
                    if let Value::Const(c) = &answer[i] {
                        return Term::Const(c.clone());
                    }
                }
            }
            t.clone()
        };
        ConjunctiveQuery {
            name: self.name.clone(),
            answer_vars: Vec::new(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    predicate: a.predicate.clone(),
                    terms: a.terms.iter().map(subst).collect(),
                })
                .collect(),
            comparisons: self
                .comparisons
                .iter()
                .map(|c| Comparison {
                    left: subst(&c.left),
                    op: c.op,
                    right: subst(&c.right),
                })
                .collect(),
        }
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "query {}(", self.name)?;
        for (i, v) in self.answer_vars.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(v)?;
        }
        let body = Body {
            atoms: self.atoms.clone(),
            negated: Vec::new(),
            comparisons: self.comparisons.clone(),
        };
        write!(f, ") <- {body}.")
    }
}
