//! The ontology DSL: lexer, recursive-descent parser and scope resolution.

mod lexer;
mod resolve;
mod syntax;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Diagnostic, DiagnosticKind, ParseError};
use crate::ontology::Ontology;

use syntax::Stmt;

fn parse_stmts(source: &str, text: &str, diagnostics: &mut Vec<Diagnostic>) -> Vec<Stmt> {
    match lexer::tokenize(source, text) {
        Ok(tokens) => {
            let mut p = syntax::Parser::new(source, tokens);
            let stmts = p.parse_program();
            diagnostics.append(&mut p.diagnostics);
            stmts
        }
        Err(d) => {
            diagnostics.push(d);
            Vec::new()
        }
    }
}

fn resolve(stmts: Vec<(String, Stmt)>, mut diagnostics: Vec<Diagnostic>) -> Result<Ontology, ParseError> {
    if !diagnostics.is_empty() {
        return Err(ParseError { diagnostics });
    }
    let mut r = resolve::Resolver::new();
    r.resolve(&stmts);
    r.finish().map_err(|mut d| {
        diagnostics.append(&mut d);
        ParseError { diagnostics }
    })
}

/// Parses a single self-contained program. `include` statements are rejected.
pub fn parse_program(text: &str) -> Result<Ontology, ParseError> {
    parse_sources(&[("<input>", text)])
}

/// Parses several named sources as one program; declarations may appear in any of them.
pub fn parse_sources(sources: &[(&str, &str)]) -> Result<Ontology, ParseError> {
    let mut diagnostics = Vec::new();
    let mut stmts = Vec::new();
    for (name, text) in sources {
        for s in parse_stmts(name, text, &mut diagnostics) {
            stmts.push((name.to_string(), s));
        }
    }
    resolve(stmts, diagnostics)
}

/// Loads one or more program files, following `include` statements relative to the
/// including file. Relative `data` paths are rewritten relative to their file too.
pub fn load_program_files(paths: &[&Path]) -> Result<Ontology, ParseError> {
    let mut diagnostics = Vec::new();
    let mut stmts = Vec::new();
    let mut seen = BTreeSet::new();
    for p in paths {
        load_into(p, None, &mut seen, &mut stmts, &mut diagnostics);
    }
    resolve(stmts, diagnostics)
}

pub fn load_program_file(path: &Path) -> Result<Ontology, ParseError> {
    load_program_files(&[path])
}

fn load_into(
    path: &Path,
    from: Option<(&str, syntax::Pos)>,
    seen: &mut BTreeSet<PathBuf>,
    out: &mut Vec<(String, Stmt)>,
    diagnostics: &mut Vec<Diagnostic>,
) {
    let name = path.display().to_string();
    let key = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    if !seen.insert(key) {
        return;
    }
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let (source, line, col) = match from {
                Some((s, p)) => (s.to_string(), p.line, p.col),
                None => (name.clone(), 0, 0),
            };
            diagnostics.push(Diagnostic {
                source,
                line,
                col,
                kind: DiagnosticKind::Scope,
                message: format!("cannot read `{name}`: {e}"),
            });
            return;
        }
    };
    let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
    for stmt in parse_stmts(&name, &text, diagnostics) {
        match stmt {
            Stmt::Include { path: inc, pos } => {
                load_into(&dir.join(&inc), Some((&name, pos)), seen, out, diagnostics)
            }
            Stmt::Data { predicate, path: p, pos } => {
                let p = if Path::new(&p).is_relative() {
                    dir.join(&p).display().to_string()
                } else {
                    p
                };
                out.push((name.clone(), Stmt::Data { predicate, path: p, pos }))
            }
            s => out.push((name.clone(), s)),
        }
    }
}
