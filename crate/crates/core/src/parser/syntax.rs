//! Recursive-descent parser from tokens to raw statements. Scoping happens later, in
//! `resolve`.

use crate::error::{Diagnostic, DiagnosticKind};

use super::lexer::{Tok, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum RawTerm {
    Var(String),
    Const(String),
}

#[derive(Clone, Debug)]
pub(crate) struct RawAtom {
    pub predicate: String,
    pub terms: Vec<RawTerm>,
    /// Number of terms before the `;` separator, when one was written.
    pub semicolon: Option<usize>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RawCmp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

#[derive(Clone, Debug)]
pub(crate) enum RawLiteral {
    Atom(RawAtom),
    Negated(RawAtom),
    Compare(RawTerm, RawCmp, RawTerm),
}

#[derive(Clone, Debug)]
pub(crate) struct RawAttr {
    pub name: String,
    pub ty: Option<String>,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub(crate) enum Stmt {
    Dimension {
        name: String,
        categories: Vec<(String, Pos)>,
        rollups: Vec<(String, String, String, Pos)>,
        pos: Pos,
    },
    Relation {
        name: String,
        categorical: Vec<RawAttr>,
        plain: Vec<RawAttr>,
        pos: Pos,
    },
    Predicate {
        name: String,
        attrs: Vec<String>,
        pos: Pos,
    },
    Tgd {
        label: Option<String>,
        existentials: Vec<(String, Pos)>,
        head: Vec<RawAtom>,
        body: Vec<RawLiteral>,
        pos: Pos,
    },
    Egd {
        label: Option<String>,
        left: RawTerm,
        right: RawTerm,
        body: Vec<RawLiteral>,
        pos: Pos,
    },
    Nc {
        label: Option<String>,
        body: Vec<RawLiteral>,
        pos: Pos,
    },
    Query {
        name: String,
        answer: Vec<(String, Pos)>,
        body: Vec<RawLiteral>,
        pos: Pos,
    },
    Fact {
        atom: RawAtom,
    },
    Data {
        predicate: String,
        path: String,
        pos: Pos,
    },
    Include {
        path: String,
        pos: Pos,
    },
    Map {
        base: RawAtom,
        contextual: RawAtom,
        pos: Pos,
    },
    Quality {
        base: String,
        head: RawAtom,
        body: Vec<RawLiteral>,
        pos: Pos,
    },
}

pub(crate) struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    at: usize,
    anon: usize,
    pub diagnostics: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    pub fn new(source: &'a str, tokens: Vec<Token>) -> Self {
        Parser {
            source,
            tokens,
            at: 0,
            anon: 0,
            diagnostics: Vec::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        let t = &self.tokens[self.at];
        Pos {
            line: t.line,
            col: t.col,
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.at].tok.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error_here(&self, message: String) -> Diagnostic {
        let p = self.pos();
        Diagnostic {
            source: self.source.to_string(),
            line: p.line,
            col: p.col,
            kind: DiagnosticKind::Syntax,
            message,
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn name(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Upper(s) | Tok::Lower(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn upper(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Upper(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error_here(format!(
                "expected {what} (capitalized identifier), found {}",
                other.describe()
            ))),
        }
    }

    fn variable(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Lower(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error_here(format!(
                "expected a variable, found {}",
                other.describe()
            ))),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error_here(format!(
                "expected a quoted string, found {}",
                other.describe()
            ))),
        }
    }

    pub fn parse_program(&mut self) -> Vec<Stmt> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            match self.statement() {
                Ok(s) => out.push(s),
                Err(d) => {
                    self.diagnostics.push(d);
                    self.recover();
                }
            }
        }
        out
    }

    /// Skips to just past the next statement-terminating `.` or `}`.
    fn recover(&mut self) {
        let mut depth = 0i32;
        loop {
            match self.bump() {
                Tok::Eof => return,
                Tok::LParen => depth += 1,
                Tok::RParen => depth -= 1,
                Tok::Dot if depth <= 0 => {
                    if !matches!(self.peek(), Tok::Upper(_) | Tok::Lower(_) | Tok::Eof | Tok::RBrace) {
                        continue;
                    }
                    return;
                }
                Tok::RBrace => return,
                _ => {}
            }
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kw = match self.peek().clone() {
            Tok::Lower(s) => s,
            other => {
                return Err(self.error_here(format!(
                    "expected a statement keyword, found {}",
                    other.describe()
                )))
            }
        };
        self.bump();
        match kw.as_str() {
            "dimension" => self.dimension(pos),
            "relation" => self.relation(pos),
            "predicate" => {
                let name = self.upper("predicate name")?;
                self.expect(Tok::LParen)?;
                let mut attrs = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        attrs.push(self.name("attribute name")?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::Dot)?;
                Ok(Stmt::Predicate { name, attrs, pos })
            }
            "tgd" => {
                let label = self.label()?;
                let mut existentials = Vec::new();
                if matches!(self.peek(), Tok::Lower(s) if s == "exists") {
                    self.bump();
                    loop {
                        let p = self.pos();
                        existentials.push((self.variable()?, p));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::Dot)?;
                }
                let mut head = vec![self.atom()?];
                while self.eat(&Tok::Comma) {
                    head.push(self.atom()?);
                }
                self.expect(Tok::Arrow)?;
                let body = self.body()?;
                Ok(Stmt::Tgd {
                    label,
                    existentials,
                    head,
                    body,
                    pos,
                })
            }
            "egd" => {
                let label = self.label()?;
                let left = self.term()?;
                self.expect(Tok::Eq)?;
                let right = self.term()?;
                self.expect(Tok::Arrow)?;
                let body = self.body()?;
                Ok(Stmt::Egd {
                    label,
                    left,
                    right,
                    body,
                    pos,
                })
            }
            "nc" => {
                let label = self.label()?;
                self.expect(Tok::Arrow)?;
                let body = self.body()?;
                Ok(Stmt::Nc { label, body, pos })
            }
            "query" => {
                let name = self.name("query name")?;
                self.expect(Tok::LParen)?;
                let mut answer = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        let p = self.pos();
                        answer.push((self.variable()?, p));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::Arrow)?;
                let body = self.body()?;
                Ok(Stmt::Query {
                    name,
                    answer,
                    body,
                    pos,
                })
            }
            "fact" => {
                let atom = self.atom()?;
                self.expect(Tok::Dot)?;
                Ok(Stmt::Fact { atom })
            }
            "data" => {
                let predicate = self.upper("predicate name")?;
                let path = self.string()?;
                self.expect(Tok::Dot)?;
                Ok(Stmt::Data {
                    predicate,
                    path,
                    pos,
                })
            }
            "include" => {
                let path = self.string()?;
                self.expect(Tok::Dot)?;
                Ok(Stmt::Include { path, pos })
            }
            "map" => {
                let base = self.atom()?;
                self.expect(Tok::FatArrow)?;
                let contextual = self.atom()?;
                self.expect(Tok::Dot)?;
                Ok(Stmt::Map {
                    base,
                    contextual,
                    pos,
                })
            }
            "quality" => {
                let base = self.upper("base predicate name")?;
                self.expect(Tok::Colon)?;
                let head = self.atom()?;
                self.expect(Tok::Arrow)?;
                let body = self.body()?;
                Ok(Stmt::Quality {
                    base,
                    head,
                    body,
                    pos,
                })
            }
            other => Err(Diagnostic {
                source: self.source.to_string(),
                line: pos.line,
                col: pos.col,
                kind: DiagnosticKind::Syntax,
                message: format!("unknown statement `{other}`"),
            }),
        }
    }

    fn label(&mut self) -> PResult<Option<String>> {
        let is_label = matches!(self.peek(), Tok::Upper(_) | Tok::Lower(_))
            && *self.peek_at(1) == Tok::Colon;
        if is_label {
            let l = self.name("label")?;
            self.bump();
            Ok(Some(l))
        } else {
            Ok(None)
        }
    }

    fn dimension(&mut self, pos: Pos) -> PResult<Stmt> {
        let name = self.upper("dimension name")?;
        self.expect(Tok::LBrace)?;
        let mut categories = Vec::new();
        let mut rollups = Vec::new();
        loop {
            let p = self.pos();
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Lower(k) if k == "category" => {
                    self.bump();
                    loop {
                        let cp = self.pos();
                        categories.push((self.upper("category name")?, cp));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::Dot)?;
                }
                Tok::Lower(k) if k == "rollup" => {
                    self.bump();
                    let pred = self.upper("parent-child predicate name")?;
                    self.expect(Tok::Colon)?;
                    let child = self.upper("child category")?;
                    self.expect(Tok::ThinArrow)?;
                    let parent = self.upper("parent category")?;
                    self.expect(Tok::Dot)?;
                    rollups.push((pred, child, parent, p));
                }
                other => {
                    return Err(self.error_here(format!(
                        "expected `category`, `rollup` or `}}`, found {}",
                        other.describe()
                    )))
                }
            }
        }
        Ok(Stmt::Dimension {
            name,
            categories,
            rollups,
            pos,
        })
    }

    fn attr(&mut self, typed: bool) -> PResult<RawAttr> {
        let pos = self.pos();
        let name = self.name("attribute name")?;
        let ty = if self.eat(&Tok::Colon) {
            Some(self.name("attribute type")?)
        } else if typed {
            return Err(self.error_here(
                "categorical attribute needs a category, as in `ward: Ward`".into(),
            ));
        } else {
            None
        };
        Ok(RawAttr { name, ty, pos })
    }

    fn relation(&mut self, pos: Pos) -> PResult<Stmt> {
        let name = self.upper("relation name")?;
        self.expect(Tok::LParen)?;
        let mut categorical = Vec::new();
        let mut plain = Vec::new();
        if !matches!(self.peek(), Tok::Semi | Tok::RParen) {
            loop {
                categorical.push(self.attr(true)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.eat(&Tok::Semi) && *self.peek() != Tok::RParen {
            loop {
                plain.push(self.attr(false)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Dot)?;
        Ok(Stmt::Relation {
            name,
            categorical,
            plain,
            pos,
        })
    }

    fn term(&mut self) -> PResult<RawTerm> {
        match self.peek().clone() {
            Tok::Lower(s) if s == "_" => {
                self.bump();
                self.anon += 1;
                Ok(RawTerm::Var(format!("_anon{}", self.anon)))
            }
            Tok::Lower(s) if !is_keyword(&s) => {
                self.bump();
                Ok(RawTerm::Var(s))
            }
            Tok::Upper(s) | Tok::Number(s) | Tok::Str(s) => {
                self.bump();
                Ok(RawTerm::Const(s))
            }
            other => Err(self.error_here(format!("expected a term, found {}", other.describe()))),
        }
    }

    fn atom(&mut self) -> PResult<RawAtom> {
        let pos = self.pos();
        let predicate = self.upper("predicate name")?;
        self.expect(Tok::LParen)?;
        let mut terms = Vec::new();
        let mut semicolon = None;
        if *self.peek() != Tok::RParen {
            if *self.peek() == Tok::Semi {
                self.bump();
                semicolon = Some(0);
            }
            loop {
                terms.push(self.term()?);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::Semi if semicolon.is_none() => {
                        self.bump();
                        semicolon = Some(terms.len());
                    }
                    _ => break,
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(RawAtom {
            predicate,
            terms,
            semicolon,
            pos,
        })
    }

    fn body(&mut self) -> PResult<Vec<RawLiteral>> {
        let mut lits = vec![self.literal()?];
        while self.eat(&Tok::Comma) {
            lits.push(self.literal()?);
        }
        self.expect(Tok::Dot)?;
        Ok(lits)
    }

    fn literal(&mut self) -> PResult<RawLiteral> {
        if matches!(self.peek(), Tok::Lower(s) if s == "not") {
            self.bump();
            return Ok(RawLiteral::Negated(self.atom()?));
        }
        if matches!(self.peek(), Tok::Upper(_)) && *self.peek_at(1) == Tok::LParen {
            return Ok(RawLiteral::Atom(self.atom()?));
        }
        let left = self.term()?;
        let op = match self.peek() {
            Tok::Eq => RawCmp::Eq,
            Tok::Le => RawCmp::Le,
            Tok::Lt => RawCmp::Lt,
            Tok::Ge => RawCmp::Ge,
            Tok::Gt => RawCmp::Gt,
            other => {
                return Err(self.error_here(format!(
                    "expected a comparison operator, found {}",
                    other.describe()
                )));
            }
        };
        self.bump();
        let right = self.term()?;
        Ok(RawLiteral::Compare(left, op, right))
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "not" | "exists")
}
