//! Evaluation of drawing programs to stroke lists, and beta-expansion of
//! library calls for analyses that need the primitive-level tree.

use super::{Builtin, ConstKind, EntryKind, Library, Order, Program};
use crate::geom::{v, LinMap, Stroke};
use thiserror::Error;

/// Runtime values. Well-typed programs only ever see the variant their type
/// dictates; the error paths exist for hand-built trees.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Drawing(Vec<Stroke>),
    Map(LinMap),
    Count(i64),
    Angle(f64),
    Dist(f64),
    Scale(f64),
    Order(Order),
}

impl Value {
    fn kind_name(&self) -> &'static str {
        match self {
            Value::Drawing(_) => "drawing",
            Value::Map(_) => "transform",
            Value::Count(_) => "count",
            Value::Angle(_) => "angle",
            Value::Dist(_) => "dist",
            Value::Scale(_) => "scale",
            Value::Order(_) => "order",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("expected a {expected} value, found {found}")]
    Kind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("entry {0} applied to {1} arguments, expects {2}")]
    Arity(String, usize, usize),
    #[error("unbound variable ${0}")]
    UnboundVar(u32),
    #[error("constant index {0} out of domain range")]
    ConstRange(usize),
    #[error("repeat count {0} out of range")]
    BadCount(i64),
    #[error("a bare lambda has no first-order value")]
    BareLambda,
}

/// Evaluates a closed program. Drawing-typed programs yield their strokes in
/// left-to-right syntax order, which downstream trajectory code relies on.
pub fn evaluate(lib: &Library, p: &Program) -> Result<Value, EvalError> {
    eval_in(lib, p, &mut Vec::new())
}

/// Convenience wrapper for drawing-typed programs.
pub fn strokes(lib: &Library, p: &Program) -> Result<Vec<Stroke>, EvalError> {
    match evaluate(lib, p)? {
        Value::Drawing(s) => Ok(s),
        other => Err(EvalError::Kind {
            expected: "drawing",
            found: other.kind_name(),
        }),
    }
}

/// The runtime value of a domain constant.
pub(crate) fn const_value(lib: &Library, kind: ConstKind, idx: u8) -> Result<Value, EvalError> {
    let i = idx as usize;
    let d = &lib.domains;
    let out = match kind {
        ConstKind::Count => Value::Count(*d.counts.get(i).ok_or(EvalError::ConstRange(i))?),
        ConstKind::Angle => Value::Angle(*d.angles.get(i).ok_or(EvalError::ConstRange(i))?),
        ConstKind::Dist => Value::Dist(*d.dists.get(i).ok_or(EvalError::ConstRange(i))?),
        ConstKind::Scale => Value::Scale(*d.scales.get(i).ok_or(EvalError::ConstRange(i))?),
        ConstKind::Order => Value::Order(*d.orders.get(i).ok_or(EvalError::ConstRange(i))?),
    };
    Ok(out)
}

/// Applies an entry to already-evaluated arguments. Learned bodies are closed
/// lambda terms, so they run in a fresh environment of just the arguments
/// (first argument bound by the outermost lambda).
pub(crate) fn apply_entry(lib: &Library, id: usize, vals: Vec<Value>) -> Result<Value, EvalError> {
    let entry = lib.entry(id);
    if entry.arity() != vals.len() {
        return Err(EvalError::Arity(entry.name.clone(), vals.len(), entry.arity()));
    }
    match &entry.kind {
        EntryKind::Builtin(op) => apply_builtin(*op, vals),
        EntryKind::Learned { body } => {
            let mut b = body;
            for _ in 0..vals.len() {
                match b {
                    Program::Lambda(inner) => b = inner,
                    _ => return Err(EvalError::BareLambda),
                }
            }
            let mut env = vals;
            eval_in(lib, b, &mut env)
        }
    }
}

fn eval_in(lib: &Library, p: &Program, env: &mut Vec<Value>) -> Result<Value, EvalError> {
    match p {
        Program::Const(kind, idx) => const_value(lib, *kind, *idx),
        Program::Var(i) => {
            let pos = env
                .len()
                .checked_sub(1 + *i as usize)
                .ok_or(EvalError::UnboundVar(*i))?;
            Ok(env[pos].clone())
        }
        Program::Lambda(_) => Err(EvalError::BareLambda),
        Program::Call(id, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_in(lib, a, env)?);
            }
            apply_entry(lib, *id, vals)
        }
    }
}

fn apply_builtin(op: Builtin, mut vals: Vec<Value>) -> Result<Value, EvalError> {
    fn drawing(v: Value) -> Result<Vec<Stroke>, EvalError> {
        match v {
            Value::Drawing(s) => Ok(s),
            other => Err(EvalError::Kind {
                expected: "drawing",
                found: other.kind_name(),
            }),
        }
    }
    fn map(v: Value) -> Result<LinMap, EvalError> {
        match v {
            Value::Map(m) => Ok(m),
            other => Err(EvalError::Kind {
                expected: "transform",
                found: other.kind_name(),
            }),
        }
    }
    fn num(v: Value, expected: &'static str) -> Result<f64, EvalError> {
        match v {
            Value::Angle(x) | Value::Dist(x) | Value::Scale(x) => Ok(x),
            other => Err(EvalError::Kind {
                expected,
                found: other.kind_name(),
            }),
        }
    }

    match op {
        Builtin::Line => Ok(Value::Drawing(vec![Stroke::Line {
            a: v(0.0, 0.0),
            b: v(1.0, 0.0),
        }])),
        Builtin::Circle => Ok(Value::Drawing(vec![Stroke::Circle {
            c: v(0.0, 0.0),
            r: 1.0,
        }])),
        Builtin::Connect => {
            let b = drawing(vals.pop().unwrap())?;
            let mut a = drawing(vals.pop().unwrap())?;
            a.extend(b);
            Ok(Value::Drawing(a))
        }
        Builtin::Transform => {
            let m = map(vals.pop().unwrap())?;
            let d = drawing(vals.pop().unwrap())?;
            Ok(Value::Drawing(d.iter().map(|s| s.map(&m)).collect()))
        }
        Builtin::Reflect => {
            let theta = num(vals.pop().unwrap(), "angle")?;
            let d = drawing(vals.pop().unwrap())?;
            let m = LinMap::reflection(theta);
            Ok(Value::Drawing(d.iter().map(|s| s.map(&m)).collect()))
        }
        Builtin::Repeat => {
            let step = map(vals.pop().unwrap())?;
            let n = match vals.pop().unwrap() {
                Value::Count(n) => n,
                other => {
                    return Err(EvalError::Kind {
                        expected: "count",
                        found: other.kind_name(),
                    })
                }
            };
            if !(1..=64).contains(&n) {
                return Err(EvalError::BadCount(n));
            }
            let d = drawing(vals.pop().unwrap())?;
            let mut acc = LinMap::IDENTITY;
            let mut out = Vec::with_capacity(d.len() * n as usize);
            for _ in 0..n {
                out.extend(d.iter().map(|s| s.map(&acc)));
                acc = step.compose(&acc);
            }
            Ok(Value::Drawing(out))
        }
        Builtin::Affine => {
            let order = match vals.pop().unwrap() {
                Value::Order(o) => o,
                other => {
                    return Err(EvalError::Kind {
                        expected: "order",
                        found: other.kind_name(),
                    })
                }
            };
            let s = num(vals.pop().unwrap(), "scale")?;
            let theta = num(vals.pop().unwrap(), "angle")?;
            let dy = num(vals.pop().unwrap(), "dist")?;
            let dx = num(vals.pop().unwrap(), "dist")?;
            let t = LinMap::translation(v(dx, dy));
            let r = LinMap::rotation(theta);
            let k = LinMap::scaling(s);
            let m = match order {
                Order::Srt => t.compose(&r).compose(&k),
                Order::Trs => k.compose(&r).compose(&t),
            };
            Ok(Value::Map(m))
        }
    }
}

/// Inlines every learned-entry call, leaving a tree of builtins and
/// constants. Arguments are expanded first, so substitution never captures.
pub fn expand(lib: &Library, p: &Program) -> Program {
    match p {
        Program::Call(id, args) => {
            let expanded: Vec<Program> = args.iter().map(|a| expand(lib, a)).collect();
            match lib.entry(*id).body() {
                None => Program::Call(*id, expanded),
                Some(body) => {
                    let mut b = body;
                    for _ in 0..expanded.len() {
                        match b {
                            Program::Lambda(inner) => b = inner,
                            _ => unreachable!("library entry arity matches its lambdas"),
                        }
                    }
                    let inlined = substitute(b, &expanded);
                    // The body may itself call other learned entries.
                    expand(lib, &inlined)
                }
            }
        }
        other => other.clone(),
    }
}

/// Replaces de Bruijn variables with closed argument trees; `args[0]` binds
/// the outermost lambda.
fn substitute(body: &Program, args: &[Program]) -> Program {
    fn go(p: &Program, args: &[Program], depth: u32) -> Program {
        match p {
            Program::Var(i) => {
                if *i >= depth {
                    let which = (*i - depth) as usize;
                    // Innermost lambda is args.last().
                    args[args.len() - 1 - which].clone()
                } else {
                    Program::Var(*i)
                }
            }
            Program::Lambda(b) => Program::Lambda(Box::new(go(b, args, depth + 1))),
            Program::Call(id, xs) => {
                Program::Call(*id, xs.iter().map(|x| go(x, args, depth)).collect())
            }
            Program::Const(k, i) => Program::Const(*k, *i),
        }
    }
    go(body, args, 0)
}
