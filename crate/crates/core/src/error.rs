use std::fmt;

use thiserror::Error;

/// Errors raised while loading or mutating fact data.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("arity mismatch for `{predicate}`{}: expected {expected} values, found {found}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    ArityMismatch {
        predicate: String,
        row: Option<usize>,
        expected: usize,
        found: usize,
    },
    #[error("cannot read data for `{predicate}` from {path}: {message}")]
    Io {
        predicate: String,
        path: String,
        message: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RollupError {
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    Scope,
}

/// One parse problem, rendered as `file:line:col: message`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub source: String,
    pub line: usize,
    pub col: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Scope => "scope error",
        };
        write!(
            f,
            "{}:{}:{}: {kind}: {}",
            self.source, self.line, self.col, self.message
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn has_scope_errors(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::Scope)
    }

    pub fn has_syntax_errors(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::Syntax)
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChaseError {
    #[error("chase budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("derivation depth budget of {0} exceeded before the search completed")]
    DepthBudgetExceeded(usize),
    #[error("rule set is not weakly sticky: rule `{rule}` repeats marked variable `{variable}` outside finite-rank positions")]
    NotWeaklySticky { rule: String, variable: String },
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QualityError {
    #[error("no quality definition for predicate `{0}`")]
    MissingQualityDefinition(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Query(#[from] QueryError),
}
