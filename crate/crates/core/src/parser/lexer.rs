use crate::error::{Diagnostic, DiagnosticKind};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    /// Identifier starting with a lowercase letter or underscore.
    Lower(String),
    /// Identifier starting with an uppercase letter.
    Upper(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Colon,
    Arrow,     // <-
    FatArrow,  // =>
    ThinArrow, // ->
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Lower(s) | Tok::Upper(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::ThinArrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '^'
}

pub(crate) fn tokenize(source: &str, text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| Diagnostic {
        source: source.to_string(),
        line,
        col,
        kind: DiagnosticKind::Syntax,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let peek = chars.get(i + 1).copied();
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '%' || (c == '/' && peek == Some('/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let simple = match (c, peek) {
            ('<', Some('-')) => Some((Tok::Arrow, 2)),
            ('<', Some('=')) => Some((Tok::Le, 2)),
            ('>', Some('=')) => Some((Tok::Ge, 2)),
            ('=', Some('>')) => Some((Tok::FatArrow, 2)),
            ('-', Some('>')) => Some((Tok::ThinArrow, 2)),
            ('<', _) => Some((Tok::Lt, 1)),
            ('>', _) => Some((Tok::Gt, 1)),
            ('=', _) => Some((Tok::Eq, 1)),
            ('(', _) => Some((Tok::LParen, 1)),
            (')', _) => Some((Tok::RParen, 1)),
            ('{', _) => Some((Tok::LBrace, 1)),
            ('}', _) => Some((Tok::RBrace, 1)),
            (',', _) => Some((Tok::Comma, 1)),
            (';', _) => Some((Tok::Semi, 1)),
            ('.', _) => Some((Tok::Dot, 1)),
            (':', _) => Some((Tok::Colon, 1)),
            _ => None,
        };
        if let Some((tok, n)) = simple {
            advance(n, &mut i, &mut col);
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            advance(1, &mut i, &mut col);
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(tl, tc, "unterminated string literal".into()))
                    }
                    Some('"') => {
                        advance(1, &mut i, &mut col);
                        break;
                    }
                    Some('\\') => {
                        match chars.get(i + 1) {
                            Some(e @ ('"' | '\\')) => s.push(*e),
                            _ => {
                                return Err(err(line, col, "invalid escape in string literal".into()))
                            }
                        }
                        advance(2, &mut i, &mut col);
                    }
                    Some(ch) => {
                        s.push(*ch);
                        advance(1, &mut i, &mut col);
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i, &mut col);
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
                advance(1, &mut i, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(1, &mut i, &mut col);
                }
            }
            if chars.get(i).is_some_and(|c| c.is_ascii_alphabetic() || *c == '_') {
                return Err(err(tl, tc, "identifiers cannot start with a digit".into()));
            }
            out.push(Token {
                tok: Tok::Number(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                advance(1, &mut i, &mut col);
            }
            let s: String = chars[start..i].iter().collect();
            let tok = if c.is_ascii_uppercase() {
                Tok::Upper(s)
            } else {
                Tok::Lower(s)
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize("t", s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_do_not_swallow_statement_dot() {
        assert_eq!(
            toks("fact M(38.2). fact N(5)."),
            vec![
                Tok::Lower("fact".into()),
                Tok::Upper("M".into()),
                Tok::LParen,
                Tok::Number("38.2".into()),
                Tok::RParen,
                Tok::Dot,
                Tok::Lower("fact".into()),
                Tok::Upper("N".into()),
                Tok::LParen,
                Tok::Number("5".into()),
                Tok::RParen,
                Tok::Dot,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn operators_comments_and_positions() {
        let t = tokenize("t", "% c\n a <- b <= \"x\\\"y\" // c\n=>").unwrap();
        let kinds: Vec<_> = t.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Lower("a".into()),
                Tok::Arrow,
                Tok::Lower("b".into()),
                Tok::Le,
                Tok::Str("x\"y".into()),
                Tok::FatArrow,
                Tok::Eof
            ]
        );
        assert_eq!((t[0].line, t[0].col), (2, 2));
        assert_eq!((t[5].line, t[5].col), (3, 1));
    }

    #[test]
    fn primes_and_carets_in_identifiers() {
        assert_eq!(
            toks("Measurements^q t'"),
            vec![
                Tok::Upper("Measurements^q".into()),
                Tok::Lower("t'".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn bad_input() {
        assert!(tokenize("t", "a # b").is_err());
        assert!(tokenize("t", "\"open").is_err());
        assert_eq!(tokenize("t", "x\n  @").unwrap_err().col, 3);
    }
}
