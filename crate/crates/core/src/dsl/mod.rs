//! The drawing DSL: a small typed lambda calculus whose base vocabulary
//! draws line segments and circles and combines them with affine maps.
//!
//! Programs are first-order trees of fully applied calls. Lambdas and
//! de Bruijn variables appear only inside library entry bodies, where they
//! parameterize learned abstractions. Constants reference finite value
//! domains by index, so program equality and hashing are exact.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use thiserror::Error;

pub mod eval;
pub mod raster;
pub mod text;

pub use eval::{evaluate, expand, Value};
pub use raster::{RasterImage, RenderConfig};

/// Types: drawings, transforms, five parameter kinds, and functions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ty {
    Drawing,
    Transform,
    Count,
    Angle,
    Dist,
    Scale,
    Order,
    Fn(Box<Ty>, Box<Ty>),
}

impl Ty {
    pub fn func(args: &[Ty], ret: Ty) -> Ty {
        args.iter()
            .rev()
            .fold(ret, |acc, a| Ty::Fn(Box::new(a.clone()), Box::new(acc)))
    }

    /// Splits `a -> b -> r` into (`[a, b]`, `r`).
    pub fn uncurry(&self) -> (Vec<Ty>, Ty) {
        let mut args = Vec::new();
        let mut t = self;
        while let Ty::Fn(a, r) = t {
            args.push((**a).clone());
            t = r;
        }
        (args, t.clone())
    }

    pub fn const_kind(&self) -> Option<ConstKind> {
        match self {
            Ty::Count => Some(ConstKind::Count),
            Ty::Angle => Some(ConstKind::Angle),
            Ty::Dist => Some(ConstKind::Dist),
            Ty::Scale => Some(ConstKind::Scale),
            Ty::Order => Some(ConstKind::Order),
            _ => None,
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Drawing => write!(f, "D"),
            Ty::Transform => write!(f, "T"),
            Ty::Count => write!(f, "N"),
            Ty::Angle => write!(f, "angle"),
            Ty::Dist => write!(f, "dist"),
            Ty::Scale => write!(f, "scale"),
            Ty::Order => write!(f, "order"),
            Ty::Fn(a, r) => {
                if matches!(**a, Ty::Fn(..)) {
                    write!(f, "({}) -> {}", a, r)
                } else {
                    write!(f, "{} -> {}", a, r)
                }
            }
        }
    }
}

/// Parameter kinds that draw values from a finite domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstKind {
    Count,
    Angle,
    Dist,
    Scale,
    Order,
}

pub const CONST_KINDS: [ConstKind; 5] = [
    ConstKind::Count,
    ConstKind::Angle,
    ConstKind::Dist,
    ConstKind::Scale,
    ConstKind::Order,
];

impl ConstKind {
    pub fn ty(self) -> Ty {
        match self {
            ConstKind::Count => Ty::Count,
            ConstKind::Angle => Ty::Angle,
            ConstKind::Dist => Ty::Dist,
            ConstKind::Scale => Ty::Scale,
            ConstKind::Order => Ty::Order,
        }
    }
}

/// Composition order of the three parts of an `affine` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    /// Scale first, then rotate, then translate.
    Srt,
    /// Translate first, then rotate, then scale.
    Trs,
}

impl Order {
    pub fn name(self) -> &'static str {
        match self {
            Order::Srt => "srt",
            Order::Trs => "trs",
        }
    }
}

/// Finite value domains for the parameter kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDomains {
    pub counts: Vec<i64>,
    pub angles: Vec<f64>,
    pub dists: Vec<f64>,
    pub scales: Vec<f64>,
    pub orders: Vec<Order>,
}

impl Default for ParamDomains {
    fn default() -> Self {
        ParamDomains {
            counts: (2..=6).collect(),
            angles: (0..8).map(|k| k as f64 * FRAC_PI_4).collect(),
            dists: vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
            scales: vec![0.25, 0.5, 1.0, 2.0],
            orders: vec![Order::Srt, Order::Trs],
        }
    }
}

impl ParamDomains {
    pub fn len(&self, kind: ConstKind) -> usize {
        match kind {
            ConstKind::Count => self.counts.len(),
            ConstKind::Angle => self.angles.len(),
            ConstKind::Dist => self.dists.len(),
            ConstKind::Scale => self.scales.len(),
            ConstKind::Order => self.orders.len(),
        }
    }

    pub fn total_len(&self) -> usize {
        CONST_KINDS.iter().map(|&k| self.len(k)).sum()
    }

    /// Index of a numeric value in a kind's domain, matching exactly or
    /// within 1e-9 (for hand-written program text).
    pub fn index_of(&self, kind: ConstKind, value: f64) -> Option<usize> {
        let dom: &[f64] = match kind {
            ConstKind::Count => {
                return self
                    .counts
                    .iter()
                    .position(|&c| c as f64 == value);
            }
            ConstKind::Angle => &self.angles,
            ConstKind::Dist => &self.dists,
            ConstKind::Scale => &self.scales,
            ConstKind::Order => return None,
        };
        dom.iter()
            .position(|&v| v == value)
            .or_else(|| dom.iter().position(|&v| (v - value).abs() < 1e-9))
    }
}

pub type EntryId = usize;

/// A program: fully applied calls into a [`Library`], domain constants, and
/// (inside entry bodies) lambdas over de Bruijn variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Program {
    Call(EntryId, Vec<Program>),
    Const(ConstKind, u8),
    Var(u32),
    Lambda(Box<Program>),
}

impl Program {
    pub fn call0(e: EntryId) -> Program {
        Program::Call(e, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        match self {
            Program::Call(_, args) => 1 + args.iter().map(|a| a.node_count()).sum::<usize>(),
            Program::Lambda(b) => 1 + b.node_count(),
            _ => 1,
        }
    }

    /// Pre-order traversal over all subtrees, including `self`.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a Program>) {
        out.push(self);
        match self {
            Program::Call(_, args) => {
                for a in args {
                    a.walk(out);
                }
            }
            Program::Lambda(b) => b.walk(out),
            _ => {}
        }
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Program::Var(_) => true,
            Program::Call(_, args) => args.iter().any(|a| a.has_vars()),
            Program::Lambda(b) => b.has_vars(),
            Program::Const(..) => false,
        }
    }
}

/// Builtin drawing operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Builtin {
    Line,
    Circle,
    Repeat,
    Transform,
    Reflect,
    Connect,
    Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntryKind {
    Builtin(Builtin),
    Learned { body: Program },
}

/// One named vocabulary item: a builtin or a learned abstraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub ty: Ty,
    pub kind: EntryKind,
    /// Cached from `ty`.
    pub arg_tys: Vec<Ty>,
    pub ret: Ty,
}

impl Entry {
    pub fn arity(&self) -> usize {
        self.arg_tys.len()
    }

    pub fn body(&self) -> Option<&Program> {
        match &self.kind {
            EntryKind::Learned { body } => Some(body),
            EntryKind::Builtin(_) => None,
        }
    }

    /// Description-length size of the entry: node count of its body.
    /// Builtins carry no body and cost nothing.
    pub fn body_size(&self) -> usize {
        self.body().map_or(0, |b| b.node_count())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LibraryError {
    #[error("entry name {0:?} is not a valid identifier")]
    BadName(String),
    #[error("entry name {0:?} already exists")]
    DuplicateName(String),
    #[error("{0}")]
    Type(#[from] TypeError),
}

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("expected type {expected}, found {found}")]
    Mismatch { expected: Ty, found: Ty },
    #[error("entry {name} expects {expected} arguments, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unbound variable ${0}")]
    UnboundVar(u32),
    #[error("constant index {index} out of range for {kind:?} domain of size {len}")]
    ConstRange {
        kind: ConstKind,
        index: usize,
        len: usize,
    },
    #[error("lambda used where a non-function type {0} was expected")]
    UnexpectedLambda(Ty),
    #[error("unknown entry id {0}")]
    UnknownEntry(EntryId),
}

/// The program vocabulary: builtins plus learned abstractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    entries: Vec<Entry>,
    by_name: HashMap<String, EntryId>,
    pub domains: ParamDomains,
}

pub const BUILTIN_COUNT: usize = 7;

impl Library {
    /// The seven builtins and default parameter domains.
    pub fn base() -> Library {
        let mut lib = Library {
            entries: Vec::new(),
            by_name: HashMap::new(),
            domains: ParamDomains::default(),
        };
        let d = Ty::Drawing;
        let t = Ty::Transform;
        let builtins: [(&str, Builtin, Vec<Ty>, Ty); BUILTIN_COUNT] = [
            ("line", Builtin::Line, vec![], d.clone()),
            ("circle", Builtin::Circle, vec![], d.clone()),
            (
                "repeat",
                Builtin::Repeat,
                vec![d.clone(), Ty::Count, t.clone()],
                d.clone(),
            ),
            (
                "transform",
                Builtin::Transform,
                vec![d.clone(), t.clone()],
                d.clone(),
            ),
            (
                "reflect",
                Builtin::Reflect,
                vec![d.clone(), Ty::Angle],
                d.clone(),
            ),
            (
                "connect",
                Builtin::Connect,
                vec![d.clone(), d.clone()],
                d.clone(),
            ),
            (
                "affine",
                Builtin::Affine,
                vec![Ty::Dist, Ty::Dist, Ty::Angle, Ty::Scale, Ty::Order],
                t.clone(),
            ),
        ];
        for (name, op, args, ret) in builtins {
            let ty = Ty::func(&args, ret.clone());
            let id = lib.entries.len();
            lib.by_name.insert(name.to_string(), id);
            lib.entries.push(Entry {
                name: name.to_string(),
                ty,
                kind: EntryKind::Builtin(op),
                arg_tys: args,
                ret,
            });
        }
        lib
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: EntryId) -> &Entry {
        &self.entries[id]
    }

    pub fn find(&self, name: &str) -> Option<EntryId> {
        self.by_name.get(name).copied()
    }

    pub fn id(&self, name: &str) -> EntryId {
        self.by_name[name]
    }

    pub fn learned_ids(&self) -> impl Iterator<Item = EntryId> + '_ {
        (BUILTIN_COUNT..self.len()).filter(|&i| self.entries[i].body().is_some())
    }

    /// Adds a learned abstraction. The body must be closed and typecheck
    /// against `ty` (lambda bodies see their parameters as variables).
    pub fn add(&mut self, name: &str, ty: Ty, body: Program) -> Result<EntryId, LibraryError> {
        if !is_ident(name) {
            return Err(LibraryError::BadName(name.to_string()));
        }
        if self.by_name.contains_key(name) {
            return Err(LibraryError::DuplicateName(name.to_string()));
        }
        let mut env = Vec::new();
        self.check(&body, &ty, &mut env)?;
        let (arg_tys, ret) = ty.uncurry();
        let id = self.entries.len();
        self.by_name.insert(name.to_string(), id);
        self.entries.push(Entry {
            name: name.to_string(),
            ty,
            kind: EntryKind::Learned { body },
            arg_tys,
            ret,
        });
        Ok(id)
    }

    /// Bidirectional type check of `p` against `expected`. `env` holds the
    /// types of enclosing lambda binders, innermost last.
    pub fn check(&self, p: &Program, expected: &Ty, env: &mut Vec<Ty>) -> Result<(), TypeError> {
        match p {
            Program::Const(kind, idx) => {
                let want = kind.ty();
                if want != *expected {
                    return Err(TypeError::Mismatch {
                        expected: expected.clone(),
                        found: want,
                    });
                }
                let len = self.domains.len(*kind);
                if (*idx as usize) >= len {
                    return Err(TypeError::ConstRange {
                        kind: *kind,
                        index: *idx as usize,
                        len,
                    });
                }
                Ok(())
            }
            Program::Var(i) => {
                let pos = env
                    .len()
                    .checked_sub(1 + *i as usize)
                    .ok_or(TypeError::UnboundVar(*i))?;
                if env[pos] != *expected {
                    return Err(TypeError::Mismatch {
                        expected: expected.clone(),
                        found: env[pos].clone(),
                    });
                }
                Ok(())
            }
            Program::Lambda(b) => match expected {
                Ty::Fn(a, r) => {
                    env.push((**a).clone());
                    let res = self.check(b, r, env);
                    env.pop();
                    res
                }
                other => Err(TypeError::UnexpectedLambda(other.clone())),
            },
            Program::Call(id, args) => {
                let entry = self
                    .entries
                    .get(*id)
                    .ok_or(TypeError::UnknownEntry(*id))?;
                if entry.ret != *expected {
                    return Err(TypeError::Mismatch {
                        expected: expected.clone(),
                        found: entry.ret.clone(),
                    });
                }
                if entry.arity() != args.len() {
                    return Err(TypeError::Arity {
                        name: entry.name.clone(),
                        expected: entry.arity(),
                        found: args.len(),
                    });
                }
                let arg_tys = entry.arg_tys.clone();
                for (arg, ty) in args.iter().zip(&arg_tys) {
                    self.check(arg, ty, env)?;
                }
                Ok(())
            }
        }
    }

    pub fn check_closed(&self, p: &Program, expected: &Ty) -> Result<(), TypeError> {
        self.check(p, expected, &mut Vec::new())
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    let ok_first = chars
        .next()
        .map(|c| c.is_ascii_alphabetic() || c == '_')
        .unwrap_or(false);
    ok_first
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "lambda" | "srt" | "trs")
}
