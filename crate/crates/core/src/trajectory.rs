//! Grounding programs into drawing trajectories: strokes snapped to grid
//! tokens, the admissible stroke orders of a program, and the uniform
//! distribution over them.
//!
//! A program fixes what is drawn; its syntax tree leaves binary choices open
//! for the order: either child of a `connect` may come first, and a `repeat`
//! may run forward or backward. Each choice is made once per syntax node and
//! shared by every copy of a repeated body, so a program with k such nodes
//! admits at most 2^k stroke orders (fewer after geometric deduplication).

use crate::dsl::eval::{self, EvalError};
use crate::dsl::{Builtin, EntryKind, Library, Program};
use crate::geom::{v, LinMap, Stroke, Vec2};
use crate::stimuli::{GridSpec, ObjKind, COL_STEP, ROW_STEP};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Snapping tolerance, as a fraction of the cell pitch on each axis.
const SNAP_TOLERANCE: f64 = 0.75;

/// Upper bound on order-choice nodes; beyond this the admissible set
/// (2^k orders) is too large to enumerate.
const MAX_CHOICE_NODES: usize = 16;

/// One drawn stroke, snapped onto the stimulus grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeToken {
    pub kind: ObjKind,
    /// Where the pen comes down: top end of a vertical line, left end of a
    /// horizontal one, topmost point of a circle.
    pub start: Vec2,
    pub center: Vec2,
    pub row: usize,
    pub col: usize,
}

impl StrokeToken {
    /// Exact geometric identity at micro-unit resolution, used for
    /// deduplication and admissibility checks.
    pub fn key(&self) -> TokenKey {
        (
            self.kind,
            quant(self.start.x),
            quant(self.start.y),
            quant(self.center.x),
            quant(self.center.y),
            self.row,
            self.col,
        )
    }

    /// Grid-level identity: what is drawn and in which cell, ignoring exact
    /// coordinates.
    pub fn cell(&self) -> (ObjKind, usize, usize) {
        (self.kind, self.row, self.col)
    }
}

pub type TokenKey = (ObjKind, i64, i64, i64, i64, usize, usize);

fn quant(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// An ordered pass over every stroke of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub image_id: String,
    pub tokens: Vec<StrokeToken>,
}

impl Trajectory {
    pub fn new(tokens: Vec<StrokeToken>) -> Trajectory {
        Trajectory {
            image_id: String::new(),
            tokens,
        }
    }

    pub fn with_image(mut self, id: &str) -> Trajectory {
        self.image_id = id.to_string();
        self
    }

    pub fn keys(&self) -> Vec<TokenKey> {
        self.tokens.iter().map(StrokeToken::key).collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GroundError {
    #[error("stroke center ({x}, {y}) sits more than three quarters of a cell outside the grid")]
    OffGrid { x: f64, y: f64 },
    #[error("program cannot be grounded: {0}")]
    Eval(#[from] EvalError),
    #[error("malformed drawing program: {0}")]
    Malformed(&'static str),
    #[error("{0} order-choice nodes exceed the supported bound of {MAX_CHOICE_NODES}")]
    TooManyOrders(usize),
}

/// Maps one stroke to its grid token.
pub fn stroke_token(s: &Stroke, grid: &GridSpec) -> Result<StrokeToken, GroundError> {
    let (kind, start, center) = match *s {
        Stroke::Line { a, b } => {
            let kind = if (b.y - a.y).abs() > (b.x - a.x).abs() {
                ObjKind::VLine
            } else {
                ObjKind::HLine
            };
            let start = match kind {
                ObjKind::VLine => {
                    if a.y <= b.y {
                        a
                    } else {
                        b
                    }
                }
                _ => {
                    if a.x <= b.x {
                        a
                    } else {
                        b
                    }
                }
            };
            (kind, start, v((a.x + b.x) / 2.0, (a.y + b.y) / 2.0))
        }
        Stroke::Circle { c, r } => (ObjKind::Circle, v(c.x, c.y - r), c),
    };
    let row = snap(center.y, ROW_STEP, grid.n_rows);
    let col = snap(center.x, COL_STEP, grid.n_cols);
    match (row, col) {
        (Some(row), Some(col)) => Ok(StrokeToken {
            kind,
            start,
            center,
            row,
            col,
        }),
        _ => Err(GroundError::OffGrid {
            x: center.x,
            y: center.y,
        }),
    }
}

fn snap(x: f64, pitch: f64, n: usize) -> Option<usize> {
    let idx = (x / pitch).round().clamp(0.0, (n - 1) as f64) as usize;
    let err = (x - idx as f64 * pitch).abs();
    (err <= SNAP_TOLERANCE * pitch).then_some(idx)
}

/// Tokens of a drawing, in the order its strokes were produced.
pub fn stroke_tokens(strokes: &[Stroke], grid: &GridSpec) -> Result<Vec<StrokeToken>, GroundError> {
    strokes.iter().map(|s| stroke_token(s, grid)).collect()
}

/// A drawing-typed syntax tree reduced to what ordering needs: leaf strokes,
/// accumulated maps, and the two kinds of order-choice node.
enum Plan {
    Leaf(Stroke),
    Transform(Box<Plan>, LinMap),
    Connect(Box<Plan>, Box<Plan>, usize),
    Repeat {
        body: Box<Plan>,
        n: i64,
        step: LinMap,
        choice: Option<usize>,
    },
}

fn build_plan(lib: &Library, p: &Program, choices: &mut usize) -> Result<Plan, GroundError> {
    let Program::Call(id, args) = p else {
        return Err(GroundError::Malformed(
            "drawing position holds a non-drawing term",
        ));
    };
    let EntryKind::Builtin(op) = lib.entry(*id).kind else {
        return Err(GroundError::Malformed("library call left unexpanded"));
    };
    match op {
        Builtin::Line => Ok(Plan::Leaf(Stroke::Line {
            a: v(0.0, 0.0),
            b: v(1.0, 0.0),
        })),
        Builtin::Circle => Ok(Plan::Leaf(Stroke::Circle {
            c: v(0.0, 0.0),
            r: 1.0,
        })),
        Builtin::Connect => {
            let a = build_plan(lib, &args[0], choices)?;
            let b = build_plan(lib, &args[1], choices)?;
            let i = *choices;
            *choices += 1;
            Ok(Plan::Connect(Box::new(a), Box::new(b), i))
        }
        Builtin::Transform => {
            let body = build_plan(lib, &args[0], choices)?;
            let m = eval_map(lib, &args[1])?;
            Ok(Plan::Transform(Box::new(body), m))
        }
        Builtin::Reflect => {
            let body = build_plan(lib, &args[0], choices)?;
            let theta = match eval::evaluate(lib, &args[1])? {
                eval::Value::Angle(a) => a,
                _ => return Err(GroundError::Malformed("reflect angle is not an angle")),
            };
            Ok(Plan::Transform(Box::new(body), LinMap::reflection(theta)))
        }
        Builtin::Repeat => {
            let body = build_plan(lib, &args[0], choices)?;
            let n = match eval::evaluate(lib, &args[1])? {
                eval::Value::Count(n) => n,
                _ => return Err(GroundError::Malformed("repeat count is not a count")),
            };
            if !(1..=64).contains(&n) {
                return Err(GroundError::Eval(EvalError::BadCount(n)));
            }
            let step = eval_map(lib, &args[2])?;
            let choice = (n >= 2).then(|| {
                let i = *choices;
                *choices += 1;
                i
            });
            Ok(Plan::Repeat {
                body: Box::new(body),
                n,
                step,
                choice,
            })
        }
        Builtin::Affine => Err(GroundError::Malformed("affine is not a drawing")),
    }
}

fn eval_map(lib: &Library, p: &Program) -> Result<LinMap, GroundError> {
    match eval::evaluate(lib, p)? {
        eval::Value::Map(m) => Ok(m),
        _ => Err(GroundError::Malformed("transform argument is not a map")),
    }
}

/// Emits strokes for one choice assignment. Bit i of `mask` flips choice
/// node i: a connect draws its second child first, a repeat runs backward.
fn emit(plan: &Plan, acc: &LinMap, mask: u64, out: &mut Vec<Stroke>) {
    match plan {
        Plan::Leaf(s) => out.push(s.map(acc)),
        Plan::Transform(body, m) => emit(body, &acc.compose(m), mask, out),
        Plan::Connect(a, b, i) => {
            let (first, second) = if mask >> i & 1 == 0 { (a, b) } else { (b, a) };
            emit(first, acc, mask, out);
            emit(second, acc, mask, out);
        }
        Plan::Repeat {
            body,
            n,
            step,
            choice,
        } => {
            let mut maps = Vec::with_capacity(*n as usize);
            let mut m = LinMap::IDENTITY;
            for _ in 0..*n {
                maps.push(acc.compose(&m));
                m = step.compose(&m);
            }
            if choice.is_some_and(|i| mask >> i & 1 == 1) {
                maps.reverse();
            }
            for mm in &maps {
                emit(body, mm, mask, out);
            }
        }
    }
}

/// Every stroke order the program admits, deduplicated on geometry. The
/// result is non-empty for any well-typed drawing program and every element
/// contains the same token multiset.
pub fn admissible_trajectories(
    lib: &Library,
    p: &Program,
    grid: &GridSpec,
) -> Result<Vec<Trajectory>, GroundError> {
    let expanded = eval::expand(lib, p);
    let mut choices = 0usize;
    let plan = build_plan(lib, &expanded, &mut choices)?;
    if choices > MAX_CHOICE_NODES {
        return Err(GroundError::TooManyOrders(choices));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for mask in 0u64..1 << choices {
        let mut strokes = Vec::new();
        emit(&plan, &LinMap::IDENTITY, mask, &mut strokes);
        let tokens = stroke_tokens(&strokes, grid)?;
        let traj = Trajectory::new(tokens);
        if seen.insert(traj.keys()) {
            out.push(traj);
        }
    }
    Ok(out)
}

/// Probability of `t` under the uniform distribution over the program's
/// admissible orders: 1/|set| when admissible, 0 otherwise.
pub fn trajectory_probability_pi(
    t: &Trajectory,
    lib: &Library,
    p: &Program,
    grid: &GridSpec,
) -> Result<f64, GroundError> {
    let set = admissible_trajectories(lib, p, grid)?;
    let key = t.keys();
    if set.iter().any(|s| s.keys() == key) {
        Ok(1.0 / set.len() as f64)
    } else {
        Ok(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::text::parse;
    use crate::dsl::Ty;
    use crate::stimuli::{object_stroke, Object};
    use approx::assert_relative_eq;

    fn grid() -> GridSpec {
        GridSpec {
            n_rows: 3,
            n_cols: 5,
        }
    }

    fn drawing(lib: &Library, text: &str) -> Program {
        parse(lib, text, &Ty::Drawing).unwrap()
    }

    #[test]
    fn a_vertical_line_token_starts_at_its_top() {
        let lib = Library::base();
        let p = drawing(&lib, "(reflect line 0.7853981633974483)");
        let strokes = eval::strokes(&lib, &p).unwrap();
        let t = stroke_token(&strokes[0], &grid()).unwrap();
        assert_eq!(t.kind, ObjKind::VLine);
        assert_eq!((t.row, t.col), (1, 0));
        assert_relative_eq!(t.start.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.start.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.center.y, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn a_circle_lands_in_its_cell() {
        let g = grid();
        let s = object_stroke(
            &g,
            &Object {
                row: 1,
                col: 2,
                kind: ObjKind::Circle,
            },
        );
        let t = stroke_token(&s, &g).unwrap();
        assert_eq!(t.kind, ObjKind::Circle);
        assert_eq!((t.row, t.col), (1, 2));
        assert_relative_eq!(t.start.y, t.center.y - 0.25, epsilon = 1e-12);
    }

    #[test]
    fn a_repeated_column_admits_forward_and_reverse() {
        let lib = Library::base();
        let p = drawing(
            &lib,
            "(repeat (reflect line 0.7853981633974483) 4 (affine 1 0 0 1 srt))",
        );
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        assert_eq!(set.len(), 2);
        let cols: Vec<Vec<usize>> = set
            .iter()
            .map(|t| t.tokens.iter().map(|tok| tok.col).collect())
            .collect();
        assert_eq!(cols[0], vec![0, 1, 2, 3]);
        assert_eq!(cols[1], vec![3, 2, 1, 0]);
        for t in &set {
            let pr = trajectory_probability_pi(t, &lib, &p, &grid()).unwrap();
            assert_relative_eq!(pr, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn a_single_stroke_has_one_order() {
        let lib = Library::base();
        let p = drawing(&lib, "circle");
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        assert_eq!(set.len(), 1);
        let pr = trajectory_probability_pi(&set[0], &lib, &p, &grid()).unwrap();
        assert_relative_eq!(pr, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn order_choices_multiply_per_syntax_node() {
        let lib = Library::base();
        // Two connect nodes and one 2-repeat over distinct cells: 2^3 orders.
        let p = drawing(
            &lib,
            "(connect (connect circle (transform circle (affine 1 0 0 1 srt))) \
             (repeat (transform circle (affine 0 1 0 1 srt)) 2 (affine 1 0 0 1 srt)))",
        );
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        assert_eq!(set.len(), 8);
        let mut total = 0.0;
        for t in &set {
            total += trajectory_probability_pi(t, &lib, &p, &grid()).unwrap();
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);

        // Interleaving the two connect arms breaks subtree contiguity.
        let base = &set[0];
        let woven = Trajectory::new(vec![
            base.tokens[0],
            base.tokens[2],
            base.tokens[1],
            base.tokens[3],
        ]);
        let pr = trajectory_probability_pi(&woven, &lib, &p, &grid()).unwrap();
        assert_eq!(pr, 0.0);
    }

    #[test]
    fn every_order_draws_the_same_strokes() {
        let lib = Library::base();
        let p = drawing(
            &lib,
            "(connect (connect circle (transform circle (affine 1 0 0 1 srt))) \
             (repeat (transform circle (affine 0 1 0 1 srt)) 2 (affine 1 0 0 1 srt)))",
        );
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        let mut first = set[0].keys();
        first.sort_unstable();
        for t in &set[1..] {
            let mut keys = t.keys();
            keys.sort_unstable();
            assert_eq!(keys, first);
        }
    }

    #[test]
    fn reversing_an_admissible_order_stays_admissible() {
        let lib = Library::base();
        let p = drawing(
            &lib,
            "(connect circle (repeat (transform circle (affine 0 1 0 1 srt)) 3 (affine 1 0 0 1 srt)))",
        );
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        for t in &set {
            let mut rev = t.tokens.clone();
            rev.reverse();
            let pr = trajectory_probability_pi(&Trajectory::new(rev), &lib, &p, &grid()).unwrap();
            assert!(pr > 0.0);
        }
    }

    #[test]
    fn identical_halves_collapse_after_dedup() {
        let lib = Library::base();
        let p = drawing(&lib, "(connect circle circle)");
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].tokens.len(), 2);
    }

    #[test]
    fn off_grid_strokes_are_rejected() {
        let lib = Library::base();
        let p = drawing(&lib, "(transform circle (affine -2 0 0 1 srt))");
        let err = admissible_trajectories(&lib, &p, &grid()).unwrap_err();
        assert!(matches!(err, GroundError::OffGrid { .. }));
    }

    #[test]
    fn learned_entries_ground_through_their_expansion() {
        let mut lib = Library::base();
        let body = parse(
            &lib,
            "(lambda (connect circle (transform circle (affine $0 0 0 1 srt))))",
            &Ty::func(&[Ty::Dist], Ty::Drawing),
        )
        .unwrap();
        let f = lib
            .add("pairat", Ty::func(&[Ty::Dist], Ty::Drawing), body)
            .unwrap();
        let p = Program::Call(f, vec![Program::Const(crate::dsl::ConstKind::Dist, 5)]);
        let set = admissible_trajectories(&lib, &p, &grid()).unwrap();
        assert_eq!(set.len(), 2);
    }
}
