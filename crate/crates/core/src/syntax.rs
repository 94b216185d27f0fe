//! Process files.
//!
//! ```text
//! file      := decl+
//! decl      := "proc" NAME "=" term
//! term      := "0" | "W" | summand ("+" summand)*
//! summand   := pomlit ":" child | "W" | "0" | NAME
//! child     := "0" | "W" | "(" term ")"
//! pomlit    := LABEL | "{" LABEL ("," LABEL)* "}"
//!            | "pomset{" (ID ":" LABEL ";")+ (ID "<" ID ";")* "}"
//! ```
//!
//! `W` is `Ω`; `#` starts a comment. A bare `NAME` summand refers to an
//! earlier declaration and contributes its summands. Edges of a `pomset{}`
//! literal are covering pairs; the final `;` may be omitted.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::pomset::{canonicalize, Label, LabelledPoset, Pomset, PosetError};
use crate::sync_tree::SyncTree;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: process `{name}` declared twice")]
    DuplicateName { line: usize, col: usize, name: String },
    #[error("{line}:{col}: undefined process `{name}`")]
    UndefinedName { line: usize, col: usize, name: String },
    #[error("{line}:{col}: empty pomset literal")]
    EmptyPomset { line: usize, col: usize },
    #[error("{line}:{col}: {source}")]
    Poset {
        line: usize,
        col: usize,
        source: PosetError,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let (l, k) = (line, col);
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '#' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                chars.next();
            }
        } else if c.is_alphanumeric() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek().filter(|c| c.is_alphanumeric() || **c == '_') {
                s.push(c);
                chars.next();
                col += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line: l,
                col: k,
            });
        } else if "=:()+{},;<".contains(c) {
            chars.next();
            col += 1;
            out.push(Token {
                tok: Tok::Sym(c),
                line: l,
                col: k,
            });
        } else {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    defs: BTreeMap<String, SyncTree>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::Eof => "end of input".to_string(),
        };
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: format!("expected {}, found {found}", msg.into()),
        })
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.is_sym(c) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("`{c}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t.line, t.col))
            }
            _ => self.error(what),
        }
    }

    fn label(&mut self) -> Result<Label, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s != "W" && s != "0" => {
                let l = Label::new(s);
                self.bump();
                Ok(l)
            }
            _ => self.error("a label"),
        }
    }

    fn term(&mut self) -> Result<SyncTree, ParseError> {
        let mut t = self.summand()?;
        while self.is_sym('+') {
            self.bump();
            t = t.plus(&self.summand()?);
        }
        Ok(t)
    }

    fn summand(&mut self) -> Result<SyncTree, ParseError> {
        let tok = self.peek().clone();
        match &tok.tok {
            Tok::Ident(s) if s == "0" => {
                self.bump();
                Ok(SyncTree::zero())
            }
            Tok::Ident(s) if s == "W" => {
                self.bump();
                Ok(SyncTree::omega())
            }
            Tok::Ident(s) if *self.peek2() != Tok::Sym(':') && !(s == "pomset" && *self.peek2() == Tok::Sym('{')) => {
                self.bump();
                self.defs.get(s).cloned().ok_or_else(|| ParseError::UndefinedName {
                    line: tok.line,
                    col: tok.col,
                    name: s.clone(),
                })
            }
            Tok::Ident(_) | Tok::Sym('{') => {
                let u = self.pomset()?;
                self.expect_sym(':')?;
                let child = self.child()?;
                Ok(SyncTree::prefix(u, child).expect("pomset literals are nonempty"))
            }
            _ => self.error("a summand"),
        }
    }

    fn child(&mut self) -> Result<SyncTree, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == "0" => {
                self.bump();
                Ok(SyncTree::zero())
            }
            Tok::Ident(s) if s == "W" => {
                self.bump();
                Ok(SyncTree::omega())
            }
            Tok::Sym('(') => {
                self.bump();
                let t = self.term()?;
                self.expect_sym(')')?;
                Ok(t)
            }
            _ => self.error("`0`, `W` or `(`"),
        }
    }

    fn pomset(&mut self) -> Result<Pomset, ParseError> {
        let start = self.peek().clone();
        let empty = || ParseError::EmptyPomset {
            line: start.line,
            col: start.col,
        };
        if self.is_sym('{') {
            self.bump();
            if self.is_sym('}') {
                return Err(empty());
            }
            let mut labels = vec![self.label()?];
            while self.is_sym(',') {
                self.bump();
                labels.push(self.label()?);
            }
            self.expect_sym('}')?;
            return self.build(&start, labels, &[]);
        }
        if self.peek().tok == Tok::Ident("pomset".into()) && *self.peek2() == Tok::Sym('{') {
            self.bump();
            self.bump();
            let mut ids: BTreeMap<String, usize> = BTreeMap::new();
            let mut labels = Vec::new();
            let mut edges = Vec::new();
            loop {
                if self.is_sym('}') {
                    self.bump();
                    break;
                }
                let (id, line, col) = self.ident("an event name or `}`")?;
                if self.is_sym(':') {
                    self.bump();
                    if !edges.is_empty() {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: "events must be declared before edges".into(),
                        });
                    }
                    let l = self.label()?;
                    if ids.insert(id.clone(), labels.len()).is_some() {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: format!("event `{id}` declared twice"),
                        });
                    }
                    labels.push(l);
                } else if self.is_sym('<') {
                    self.bump();
                    let (hi, l2, c2) = self.ident("an event name")?;
                    let lookup = |name: &str, line, col| {
                        ids.get(name).copied().ok_or_else(|| ParseError::Syntax {
                            line,
                            col,
                            msg: format!("undeclared event `{name}`"),
                        })
                    };
                    edges.push((lookup(&id, line, col)?, lookup(&hi, l2, c2)?));
                } else {
                    return self.error("`:` or `<`");
                }
                if self.is_sym(';') {
                    self.bump();
                } else if !self.is_sym('}') {
                    return self.error("`;` or `}`");
                }
            }
            if labels.is_empty() {
                return Err(empty());
            }
            return self.build(&start, labels, &edges);
        }
        Ok(Pomset::singleton(self.label()?))
    }

    fn build(&self, at: &Token, labels: Vec<Label>, edges: &[(usize, usize)]) -> Result<Pomset, ParseError> {
        LabelledPoset::from_covering(labels, edges)
            .map(|lp| canonicalize(&lp))
            .map_err(|source| ParseError::Poset {
                line: at.line,
                col: at.col,
                source,
            })
    }
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            defs: BTreeMap::new(),
        })
    }
}

/// Parses a process file into its declarations.
pub fn parse(text: &str) -> Result<BTreeMap<String, SyncTree>, ParseError> {
    let mut p = Parser::new(text)?;
    loop {
        match &p.peek().tok {
            Tok::Eof if !p.defs.is_empty() => break,
            Tok::Ident(s) if s == "proc" => {
                p.bump();
            }
            _ => return p.error("`proc`"),
        }
        let (name, line, col) = p.ident("a process name")?;
        if name == "0" || name == "W" {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: format!("`{name}` cannot name a process"),
            });
        }
        p.expect_sym('=')?;
        let t = p.term()?;
        if p.defs.contains_key(&name) {
            return Err(ParseError::DuplicateName { line, col, name });
        }
        p.defs.insert(name, t);
    }
    Ok(p.defs)
}

/// Parses a single term.
pub fn parse_tree(text: &str) -> Result<SyncTree, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    if p.peek().tok != Tok::Eof {
        return p.error("end of input");
    }
    Ok(t)
}

/// Parses whitespace-separated pomset literals, as used for restriction sets.
pub fn parse_pomsets(text: &str) -> Result<Vec<Pomset>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while p.peek().tok != Tok::Eof {
        out.push(p.pomset()?);
        if p.is_sym(',') {
            p.bump();
        }
    }
    Ok(out)
}

/// Prints declarations in file syntax.
pub fn print(defs: &BTreeMap<String, SyncTree>) -> String {
    defs.iter().map(|(n, t)| format!("proc {n} = {t}\n")).collect()
}
