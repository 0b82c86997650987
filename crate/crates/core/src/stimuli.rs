//! Grid stimuli: generation, canonical programs, rotation.
//!
//! A stimulus lives on a grid whose columns sit one unit apart and whose rows
//! sit half a unit apart, matching the natural translation steps of the
//! drawing language. It has two kinds of ink: segments (straight strokes
//! between two cell centers, used for full-height grating lines and for the
//! horizontal bars of composite objects) and cell objects (short vertical
//! lines, short horizontal lines, small circles). Each stimulus has canonical
//! programs in both sweep orders (row-major and column-major), built from one
//! shared object idiom so that library learning can factor the common
//! structure out.
//!
//! Two training distributions share the grating backbone and differ in what
//! hangs on it. Set 1 attaches a vertical column of zero to three small
//! objects to each line. Set 2 spans one to three horizontal composites
//! (dumbbells, lollipops, poles) between adjacent lines.

use crate::dsl::raster::{render, RasterImage, RenderConfig};
use crate::dsl::{eval, ConstKind, Library, Program};
use crate::geom::{v, Stroke, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const ROW_STEP: f64 = 0.5;
pub const COL_STEP: f64 = 1.0;
/// Half the length of a line object; also the circle radius.
pub const OBJ_HALF: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjKind {
    VLine,
    HLine,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridSpec {
    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        v(col as f64 * COL_STEP, row as f64 * ROW_STEP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Object {
    pub row: usize,
    pub col: usize,
    pub kind: ObjKind,
}

/// A straight stroke between two cell centers sharing a row or a column.
/// Endpoints are stored in (row, col) order with `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seg {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

impl Seg {
    pub fn new(a: (usize, usize), b: (usize, usize)) -> Seg {
        assert!(a.0 == b.0 || a.1 == b.1, "segments are axis-aligned");
        assert_ne!(a, b, "segments have distinct endpoints");
        if a <= b {
            Seg { a, b }
        } else {
            Seg { a: b, b: a }
        }
    }

    /// Full-height grating line at a column.
    pub fn vline(col: usize, n_rows: usize) -> Seg {
        Seg::new((0, col), (n_rows - 1, col))
    }

    /// Unit-width horizontal bar from one column center to the next.
    pub fn bar(row: usize, col: usize) -> Seg {
        Seg::new((row, col), (row, col + 1))
    }

    pub fn is_vertical(&self) -> bool {
        self.a.1 == self.b.1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stimulus {
    pub grid: GridSpec,
    /// Sorted; no duplicates.
    #[serde(default)]
    pub segs: Vec<Seg>,
    /// Sorted by (row, col, kind); no duplicates.
    pub objects: Vec<Object>,
}

impl Stimulus {
    pub fn new(grid: GridSpec, objects: Vec<Object>) -> Stimulus {
        Stimulus::with_segs(grid, Vec::new(), objects)
    }

    pub fn with_segs(grid: GridSpec, mut segs: Vec<Seg>, mut objects: Vec<Object>) -> Stimulus {
        segs.sort_unstable();
        segs.dedup();
        objects.sort_unstable();
        objects.dedup();
        Stimulus { grid, segs, objects }
    }

    pub fn len(&self) -> usize {
        self.segs.len() + self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty() && self.objects.is_empty()
    }
}

/// The single stroke an object draws.
pub fn object_stroke(grid: &GridSpec, obj: &Object) -> Stroke {
    let c = grid.cell_center(obj.row, obj.col);
    match obj.kind {
        ObjKind::VLine => Stroke::Line {
            a: v(c.x, c.y - OBJ_HALF),
            b: v(c.x, c.y + OBJ_HALF),
        },
        ObjKind::HLine => Stroke::Line {
            a: v(c.x - OBJ_HALF, c.y),
            b: v(c.x + OBJ_HALF, c.y),
        },
        ObjKind::Circle => Stroke::Circle { c, r: OBJ_HALF },
    }
}

/// The single stroke a segment draws.
pub fn seg_stroke(grid: &GridSpec, seg: &Seg) -> Stroke {
    Stroke::Line {
        a: grid.cell_center(seg.a.0, seg.a.1),
        b: grid.cell_center(seg.b.0, seg.b.1),
    }
}

pub fn stimulus_strokes(stim: &Stimulus) -> Vec<Stroke> {
    stim.segs
        .iter()
        .map(|s| seg_stroke(&stim.grid, s))
        .chain(stim.objects.iter().map(|o| object_stroke(&stim.grid, o)))
        .collect()
}

/// Renders the stimulus through its canonical program, so the target raster
/// is exactly reachable by program induction.
pub fn render_stimulus(lib: &Library, cfg: &RenderConfig, stim: &Stimulus) -> RasterImage {
    let p = program_for(lib, stim, SweepOrder::RowMajor);
    let strokes = eval::strokes(lib, &p).expect("canonical programs evaluate");
    render(&strokes, cfg)
}

/// Quarter-turn clockwise: rows become columns. Line objects swap
/// orientation, segment endpoints move with their cells, the grid transposes.
pub fn rotate(stim: &Stimulus) -> Stimulus {
    let turn = |row: usize, col: usize| (col, stim.grid.n_rows - 1 - row);
    let objects = stim
        .objects
        .iter()
        .map(|o| {
            let (row, col) = turn(o.row, o.col);
            Object {
                row,
                col,
                kind: match o.kind {
                    ObjKind::VLine => ObjKind::HLine,
                    ObjKind::HLine => ObjKind::VLine,
                    ObjKind::Circle => ObjKind::Circle,
                },
            }
        })
        .collect();
    let segs = stim
        .segs
        .iter()
        .map(|s| Seg::new(turn(s.a.0, s.a.1), turn(s.b.0, s.b.1)))
        .collect();
    Stimulus::with_segs(
        GridSpec {
            n_rows: stim.grid.n_cols,
            n_cols: stim.grid.n_rows,
        },
        segs,
        objects,
    )
}

/// Stroke emission order of a canonical program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOrder {
    RowMajor,
    ColMajor,
}

fn const_of(lib: &Library, kind: ConstKind, value: f64) -> Program {
    let idx = lib
        .domains
        .index_of(kind, value)
        .unwrap_or_else(|| panic!("{value} not in the {kind:?} domain"));
    Program::Const(kind, idx as u8)
}

fn affine_of(lib: &Library, dx: f64, dy: f64, theta: f64, scale: f64, srt: bool) -> Program {
    Program::Call(
        lib.id("affine"),
        vec![
            const_of(lib, ConstKind::Dist, dx),
            const_of(lib, ConstKind::Dist, dy),
            const_of(lib, ConstKind::Angle, theta),
            const_of(lib, ConstKind::Scale, scale),
            Program::Const(ConstKind::Order, if srt { 0 } else { 1 }),
        ],
    )
}

fn transformed(lib: &Library, d: Program, t: Program) -> Program {
    Program::Call(lib.id("transform"), vec![d, t])
}

/// Splits an offset into translation constants: twos first, then the
/// remainder, with 1.5 expressed as one plus a half.
fn split_offset(lib: &Library, mut v: f64) -> Vec<f64> {
    let mut steps = Vec::new();
    while v > 2.0 {
        steps.push(2.0);
        v -= 2.0;
    }
    if lib.domains.index_of(ConstKind::Dist, v).is_some() {
        if v != 0.0 {
            steps.push(v);
        }
    } else {
        steps.push(1.0);
        steps.push(v - 1.0);
    }
    steps
}

/// Translates a drawing by (dx, dy), splitting each axis into domain-sized
/// steps and pairing them into as few transforms as possible.
fn translate_to(lib: &Library, mut d: Program, dx: f64, dy: f64) -> Program {
    let xs = split_offset(lib, dx);
    let ys = split_offset(lib, dy);
    for i in 0..xs.len().max(ys.len()) {
        let sx = xs.get(i).copied().unwrap_or(0.0);
        let sy = ys.get(i).copied().unwrap_or(0.0);
        d = transformed(lib, d, affine_of(lib, sx, sy, 0.0, 1.0, true));
    }
    d
}

/// A unit-length vertical stroke rising from the origin.
fn unit_vertical(lib: &Library) -> Program {
    Program::Call(
        lib.id("reflect"),
        vec![
            Program::call0(lib.id("line")),
            const_of(lib, ConstKind::Angle, std::f64::consts::FRAC_PI_4),
        ],
    )
}

/// A unit object centered at the origin.
fn unit_object(lib: &Library, kind: ObjKind) -> Program {
    match kind {
        ObjKind::HLine => transformed(
            lib,
            Program::call0(lib.id("line")),
            affine_of(lib, -0.5, 0.0, 0.0, 0.5, false),
        ),
        ObjKind::VLine => transformed(
            lib,
            unit_vertical(lib),
            affine_of(lib, 0.0, -0.5, 0.0, 0.5, false),
        ),
        ObjKind::Circle => transformed(
            lib,
            Program::call0(lib.id("circle")),
            affine_of(lib, 0.0, 0.0, 0.0, 0.25, true),
        ),
    }
}

fn object_program(lib: &Library, grid: &GridSpec, obj: &Object) -> Program {
    let c = grid.cell_center(obj.row, obj.col);
    translate_to(lib, unit_object(lib, obj.kind), c.x, c.y)
}

fn seg_program(lib: &Library, grid: &GridSpec, seg: &Seg) -> Program {
    let a = grid.cell_center(seg.a.0, seg.a.1);
    let b = grid.cell_center(seg.b.0, seg.b.1);
    let (mut d, len) = if seg.is_vertical() {
        (unit_vertical(lib), b.y - a.y)
    } else {
        (Program::call0(lib.id("line")), b.x - a.x)
    };
    if len != 1.0 {
        d = transformed(lib, d, affine_of(lib, 0.0, 0.0, 0.0, len, true));
    }
    translate_to(lib, d, a.x, a.y)
}

/// Canonical program: a right-leaning chain of connects over the stimulus
/// elements in the requested sweep order, so strokes come out in that order.
/// Segments sort at their lower endpoint and come before the objects of the
/// tied cell, which puts each grating line ahead of the column it carries.
pub fn program_for(lib: &Library, stim: &Stimulus, order: SweepOrder) -> Program {
    assert!(!stim.is_empty(), "stimuli are non-empty");
    enum Elem<'a> {
        Seg(&'a Seg),
        Obj(&'a Object),
    }
    let mut elems: Vec<(usize, usize, usize, Elem)> = Vec::with_capacity(stim.len());
    for s in &stim.segs {
        let (row, col) = s.a;
        elems.push((row, col, 0, Elem::Seg(s)));
    }
    for o in &stim.objects {
        elems.push((o.row, o.col, 1, Elem::Obj(o)));
    }
    match order {
        SweepOrder::RowMajor => elems.sort_by_key(|&(r, c, t, _)| (r, c, t)),
        SweepOrder::ColMajor => elems.sort_by_key(|&(r, c, t, _)| (c, r, t)),
    }
    let mut parts: Vec<Program> = elems
        .iter()
        .map(|(_, _, _, e)| match e {
            Elem::Seg(s) => seg_program(lib, &stim.grid, s),
            Elem::Obj(o) => object_program(lib, &stim.grid, o),
        })
        .collect();
    let mut out = parts.pop().unwrap();
    while let Some(p) = parts.pop() {
        out = Program::Call(lib.id("connect"), vec![p, out]);
    }
    out
}

/// The horizontal composite objects of the second training distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Composite {
    Dumbbell,
    Lollipop,
    Pole,
}

pub const COMPOSITES: [Composite; 3] = [Composite::Dumbbell, Composite::Lollipop, Composite::Pole];

const ATTACH_KINDS: [ObjKind; 2] = [ObjKind::HLine, ObjKind::Circle];

fn grating<R: Rng>(rng: &mut R) -> (GridSpec, Vec<Seg>) {
    let n = rng.gen_range(2..=4);
    let grid = GridSpec { n_rows: 3, n_cols: n };
    let segs = (0..n).map(|c| Seg::vline(c, grid.n_rows)).collect();
    (grid, segs)
}

/// One draw from the first training distribution: vertical lines, each
/// carrying a column of zero to three small objects at distinct rows.
pub fn sample_train1<R: Rng>(rng: &mut R) -> Stimulus {
    let (grid, segs) = grating(rng);
    let mut objects = Vec::new();
    for col in 0..grid.n_cols {
        let k = rng.gen_range(0..=3);
        for row in rand::seq::index::sample(rng, grid.n_rows, k) {
            objects.push(Object {
                row,
                col,
                kind: ATTACH_KINDS[rng.gen_range(0..2)],
            });
        }
    }
    Stimulus::with_segs(grid, segs, objects)
}

/// One draw from the second training distribution: vertical lines plus one
/// to three horizontal composites, each filling a distinct (row, gap) slot
/// between adjacent lines. A composite is a bar from line to line, with a
/// circle on its right end for a lollipop and on both ends for a dumbbell.
pub fn sample_train2<R: Rng>(rng: &mut R) -> (Vec<Composite>, Stimulus) {
    let (grid, mut segs) = grating(rng);
    let gaps = grid.n_cols - 1;
    let slots: Vec<(usize, usize)> = (0..grid.n_rows)
        .flat_map(|row| (0..gaps).map(move |gap| (row, gap)))
        .collect();
    let n_comp = rng.gen_range(1..=3);
    let mut kinds = Vec::with_capacity(n_comp);
    let mut objects = Vec::new();
    for i in rand::seq::index::sample(rng, slots.len(), n_comp) {
        let (row, col) = slots[i];
        let kind = COMPOSITES[rng.gen_range(0..3)];
        kinds.push(kind);
        segs.push(Seg::bar(row, col));
        let circle = |col| Object { row, col, kind: ObjKind::Circle };
        match kind {
            Composite::Dumbbell => {
                objects.push(circle(col));
                objects.push(circle(col + 1));
            }
            Composite::Lollipop => objects.push(circle(col + 1)),
            Composite::Pole => {}
        }
    }
    (kinds, Stimulus::with_segs(grid, segs, objects))
}

/// Which training distribution to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetId {
    Train1,
    Train2,
}

/// Draws distinct stimuli until `n` accumulate, skipping anything in `avoid`.
pub fn train_set(set: SetId, seed: u64, n: usize, avoid: &[Stimulus]) -> Vec<Stimulus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Stimulus> = Vec::with_capacity(n);
    while out.len() < n {
        let s = match set {
            SetId::Train1 => sample_train1(&mut rng),
            SetId::Train2 => sample_train2(&mut rng).1,
        };
        if avoid.contains(&s) || out.contains(&s) {
            continue;
        }
        out.push(s);
    }
    out
}

pub const SET1_SEED: u64 = 11;
pub const SET2_SEED: u64 = 22;
pub const TRAIN_SET_SIZE: usize = 36;

/// The grid every behavioral test item is drawn on.
pub const CATALOG_GRID: GridSpec = GridSpec { n_rows: 3, n_cols: 5 };

/// The two fixed training sets. Every set-2 stimulus carries a unit-width
/// horizontal bar and no set-1 stimulus ever does, so the sets are disjoint
/// as images by construction.
pub fn default_sets() -> (Vec<Stimulus>, Vec<Stimulus>) {
    let set1 = train_set(SetId::Train1, SET1_SEED, TRAIN_SET_SIZE, &[]);
    let set2 = train_set(SetId::Train2, SET2_SEED, TRAIN_SET_SIZE, &set1);
    (set1, set2)
}

/// A behavioral test item: one stimulus with reference programs in both
/// sweep orders.
#[derive(Debug, Clone)]
pub struct TestItem {
    pub name: String,
    pub stimulus: Stimulus,
    pub row_major: Program,
    pub col_major: Program,
}

fn full_grid(kind: ObjKind, n_cols: usize) -> Stimulus {
    let mut objects = Vec::new();
    for col in 0..n_cols {
        for row in 0..3 {
            objects.push(Object { row, col, kind });
        }
    }
    Stimulus::new(GridSpec { n_rows: 3, n_cols: 5 }, objects)
}

fn caps_grid(n_cols: usize) -> Stimulus {
    let mut objects = Vec::new();
    for col in 0..n_cols {
        objects.push(Object { row: 0, col, kind: ObjKind::Circle });
        objects.push(Object { row: 1, col, kind: ObjKind::VLine });
        objects.push(Object { row: 2, col, kind: ObjKind::VLine });
    }
    Stimulus::new(GridSpec { n_rows: 3, n_cols: 5 }, objects)
}

/// The fixed eighteen-item behavioral catalog: twelve uniform grids and six
/// mixed figures. Every item is a full grid of cell objects, so a column
/// sweep and a row sweep both generate it exactly.
pub fn catalog(lib: &Library) -> Vec<TestItem> {
    let mut items: Vec<(String, Stimulus)> = Vec::new();
    for n in 2..=5 {
        items.push((format!("grating-{n}"), full_grid(ObjKind::VLine, n)));
    }
    for n in 2..=5 {
        items.push((format!("circles-{n}"), full_grid(ObjKind::Circle, n)));
    }
    for n in 2..=5 {
        items.push((format!("hlines-{n}"), full_grid(ObjKind::HLine, n)));
    }
    for n in 2..=5 {
        items.push((format!("caps-{n}"), caps_grid(n)));
    }
    // Alternating vline and circle columns.
    let mut alt = Vec::new();
    for col in 0..4 {
        let kind = if col % 2 == 0 { ObjKind::VLine } else { ObjKind::Circle };
        for row in 0..3 {
            alt.push(Object { row, col, kind });
        }
    }
    items.push((
        "alt-cols-4".to_string(),
        Stimulus::new(GridSpec { n_rows: 3, n_cols: 5 }, alt),
    ));
    // One kind per row.
    let mut banded = Vec::new();
    for col in 0..3 {
        banded.push(Object { row: 0, col, kind: ObjKind::Circle });
        banded.push(Object { row: 1, col, kind: ObjKind::HLine });
        banded.push(Object { row: 2, col, kind: ObjKind::VLine });
    }
    items.push((
        "banded-3".to_string(),
        Stimulus::new(GridSpec { n_rows: 3, n_cols: 5 }, banded),
    ));

    items
        .into_iter()
        .map(|(name, stimulus)| TestItem {
            row_major: program_for(lib, &stimulus, SweepOrder::RowMajor),
            col_major: program_for(lib, &stimulus, SweepOrder::ColMajor),
            name,
            stimulus,
        })
        .collect()
}

/// Whether a stroke set contains a vertical stack: two or more stroke
/// centers sharing an x position at clearly different heights.
pub fn has_column_structure(strokes: &[Stroke]) -> bool {
    let mut centers: Vec<Vec2> = strokes
        .iter()
        .map(|s| match s {
            Stroke::Line { a, b } => v((a.x + b.x) / 2.0, (a.y + b.y) / 2.0),
            Stroke::Circle { c, .. } => *c,
        })
        .collect();
    centers.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    let mut i = 0;
    while i < centers.len() {
        let mut j = i;
        while j < centers.len() && centers[j].x - centers[i].x < 0.05 {
            j += 1;
        }
        if centers[i..j]
            .windows(2)
            .any(|w| (w[1].y - w[0].y).abs() > 0.1)
        {
            return true;
        }
        i = j;
    }
    false
}

/// Compact inventory of a stimulus, for logs. Grating lines print as `|col`,
/// bars as `-(row,col)`, objects as `kind(row,col)`.
pub fn describe(stim: &Stimulus) -> String {
    use std::fmt::Write;
    let mut out = format!("{}x{} grid:", stim.grid.n_rows, stim.grid.n_cols);
    for s in &stim.segs {
        if s.is_vertical() && s.a.0 == 0 && s.b.0 == stim.grid.n_rows - 1 {
            let _ = write!(out, " |{}", s.a.1);
        } else if !s.is_vertical() {
            let _ = write!(out, " -({},{})", s.a.0, s.a.1);
        } else {
            let _ = write!(out, " seg({:?},{:?})", s.a, s.b);
        }
    }
    for o in &stim.objects {
        let k = match o.kind {
            ObjKind::VLine => "v",
            ObjKind::HLine => "h",
            ObjKind::Circle => "c",
        };
        let _ = write!(out, " {k}({},{})", o.row, o.col);
    }
    out
}
