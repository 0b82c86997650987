//! S-expression text form of programs and types.
//!
//! Constants print as their literal values (`(repeat line 3 (affine 1 0 0 1
//! srt))`), so parsing is type-directed: the expected type at each position
//! decides which domain a number belongs to. Parse errors carry the byte
//! offset of the offending token.

use super::{ConstKind, EntryId, Library, Program, Ty};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        offset,
        message: message.into(),
    })
}

/// Renders a program as an s-expression.
pub fn to_text(lib: &Library, p: &Program) -> String {
    let mut out = String::new();
    write_prog(lib, p, &mut out);
    out
}

fn write_prog(lib: &Library, p: &Program, out: &mut String) {
    match p {
        Program::Const(kind, idx) => {
            let i = *idx as usize;
            let d = &lib.domains;
            match kind {
                ConstKind::Count => {
                    let _ = write!(out, "{}", d.counts[i]);
                }
                ConstKind::Angle => {
                    let _ = write!(out, "{}", d.angles[i]);
                }
                ConstKind::Dist => {
                    let _ = write!(out, "{}", d.dists[i]);
                }
                ConstKind::Scale => {
                    let _ = write!(out, "{}", d.scales[i]);
                }
                ConstKind::Order => out.push_str(d.orders[i].name()),
            }
        }
        Program::Var(i) => {
            let _ = write!(out, "${}", i);
        }
        Program::Lambda(b) => {
            out.push_str("(lambda ");
            write_prog(lib, b, out);
            out.push(')');
        }
        Program::Call(id, args) => {
            let name = &lib.entry(*id).name;
            if args.is_empty() {
                out.push_str(name);
            } else {
                out.push('(');
                out.push_str(name);
                for a in args {
                    out.push(' ');
                    write_prog(lib, a, out);
                }
                out.push(')');
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    LParen,
    RParen,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(usize, Tok<'_>)> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                toks.push((start, Tok::Atom(&text[start..i])));
            }
        }
    }
    toks
}

struct Parser<'a> {
    lib: &'a Library,
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
    env: Vec<Ty>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<(usize, Tok<'a>)> {
        self.toks.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(usize, Tok<'a>)> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some((_, Tok::RParen)) => Ok(()),
            Some((off, _)) => err(off, "expected `)`"),
            None => err(self.end, "expected `)`, found end of input"),
        }
    }

    fn parse(&mut self, expected: &Ty) -> Result<Program, ParseError> {
        match self.next() {
            None => err(self.end, format!("expected a {expected}, found end of input")),
            Some((off, Tok::RParen)) => err(off, "unexpected `)`"),
            Some((off, Tok::LParen)) => {
                let (hoff, head) = match self.next() {
                    Some((o, Tok::Atom(a))) => (o, a),
                    Some((o, _)) => return err(o, "expected an operator name after `(`"),
                    None => return err(self.end, "expected an operator name, found end of input"),
                };
                if head == "lambda" {
                    let Ty::Fn(a, r) = expected else {
                        return err(off, format!("lambda found where a {expected} was expected"));
                    };
                    self.env.push((**a).clone());
                    let body = self.parse(r);
                    self.env.pop();
                    let body = body?;
                    self.expect_rparen()?;
                    return Ok(Program::Lambda(Box::new(body)));
                }
                let id = self.lookup(hoff, head, expected)?;
                let arg_tys = self.lib.entry(id).arg_tys.clone();
                let mut args = Vec::with_capacity(arg_tys.len());
                for ty in &arg_tys {
                    args.push(self.parse(ty)?);
                }
                self.expect_rparen()?;
                Ok(Program::Call(id, args))
            }
            Some((off, Tok::Atom(a))) => self.parse_atom(off, a, expected),
        }
    }

    fn lookup(&self, off: usize, name: &str, expected: &Ty) -> Result<EntryId, ParseError> {
        let Some(id) = self.lib.find(name) else {
            return err(off, format!("unknown name `{name}`"));
        };
        let entry = self.lib.entry(id);
        if entry.ret != *expected {
            return err(
                off,
                format!("`{name}` produces a {}, expected a {expected}", entry.ret),
            );
        }
        Ok(id)
    }

    fn parse_atom(&mut self, off: usize, atom: &str, expected: &Ty) -> Result<Program, ParseError> {
        if let Some(rest) = atom.strip_prefix('$') {
            let Ok(i) = rest.parse::<u32>() else {
                return err(off, format!("bad variable `{atom}`"));
            };
            let Some(pos) = self.env.len().checked_sub(1 + i as usize) else {
                return err(off, format!("unbound variable `{atom}`"));
            };
            if self.env[pos] != *expected {
                return err(
                    off,
                    format!("variable `{atom}` has type {}, expected {expected}", self.env[pos]),
                );
            }
            return Ok(Program::Var(i));
        }
        if atom == "srt" || atom == "trs" {
            if *expected != Ty::Order {
                return err(off, format!("order value found where a {expected} was expected"));
            }
            let idx = self
                .lib
                .domains
                .orders
                .iter()
                .position(|o| o.name() == atom)
                .unwrap();
            return Ok(Program::Const(ConstKind::Order, idx as u8));
        }
        if atom
            .chars()
            .next()
            .map(|c| c.is_ascii_digit() || c == '-' || c == '.')
            .unwrap_or(false)
        {
            let Some(kind) = expected.const_kind() else {
                return err(off, format!("number found where a {expected} was expected"));
            };
            let Ok(value) = atom.parse::<f64>() else {
                return err(off, format!("bad number `{atom}`"));
            };
            let Some(idx) = self.lib.domains.index_of(kind, value) else {
                return err(off, format!("{atom} is not in the {kind:?} domain"));
            };
            return Ok(Program::Const(kind, idx as u8));
        }
        let id = self.lookup(off, atom, expected)?;
        let entry = self.lib.entry(id);
        if entry.arity() != 0 {
            return err(
                off,
                format!("`{atom}` takes {} arguments and must be applied", entry.arity()),
            );
        }
        Ok(Program::call0(id))
    }
}

/// Parses a program of the given type. Lambdas are only accepted when the
/// expected type is a function type (library entry bodies).
pub fn parse(lib: &Library, text: &str, expected: &Ty) -> Result<Program, ParseError> {
    let mut p = Parser {
        lib,
        toks: tokenize(text),
        pos: 0,
        end: text.len(),
        env: Vec::new(),
    };
    let prog = p.parse(expected)?;
    if let Some((off, _)) = p.peek() {
        return err(off, "trailing input after program");
    }
    Ok(prog)
}

/// Parses a type: leaf names, `->` (right associative), parentheses.
pub fn parse_ty(text: &str) -> Result<Ty, ParseError> {
    fn leaf(name: &str, off: usize) -> Result<Ty, ParseError> {
        match name {
            "D" => Ok(Ty::Drawing),
            "T" => Ok(Ty::Transform),
            "N" => Ok(Ty::Count),
            "angle" => Ok(Ty::Angle),
            "dist" => Ok(Ty::Dist),
            "scale" => Ok(Ty::Scale),
            "order" => Ok(Ty::Order),
            _ => err(off, format!("unknown type `{name}`")),
        }
    }
    fn go(toks: &[(usize, Tok<'_>)], pos: &mut usize, end: usize) -> Result<Ty, ParseError> {
        let lhs = match toks.get(*pos).copied() {
            None => return err(end, "expected a type"),
            Some((off, Tok::RParen)) => return err(off, "unexpected `)`"),
            Some((_, Tok::LParen)) => {
                *pos += 1;
                let inner = go(toks, pos, end)?;
                match toks.get(*pos).copied() {
                    Some((_, Tok::RParen)) => {
                        *pos += 1;
                        inner
                    }
                    Some((off, _)) => return err(off, "expected `)`"),
                    None => return err(end, "expected `)`"),
                }
            }
            Some((off, Tok::Atom(a))) => {
                *pos += 1;
                leaf(a, off)?
            }
        };
        if let Some((_, Tok::Atom("->"))) = toks.get(*pos).copied() {
            *pos += 1;
            let rhs = go(toks, pos, end)?;
            return Ok(Ty::Fn(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }
    let toks = tokenize(text);
    let mut pos = 0;
    let ty = go(&toks, &mut pos, text.len())?;
    if let Some((off, _)) = toks.get(pos) {
        return err(*off, "trailing input after type");
    }
    Ok(ty)
}
