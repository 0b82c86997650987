//! Best-first program enumeration by iterative cost bands.
//!
//! Programs are generated in depth-first order within a sliding cost band
//! `[lo, lo + BAND_NATS)`, where a program's cost is its negative log
//! probability under a guiding [`Grammar`]. Branches whose optimistic
//! completion cost (current cost plus a per-slot-type lower bound on the
//! cheapest completion) already exceeds the band's upper edge are pruned, so
//! each pass touches little more than the band it emits. Successive bands
//! revisit cheaper prefixes, which costs a bounded constant factor
//! (`1 / (1 - e^-BAND_NATS)`, about 5%) and keeps memory flat: no frontier
//! queue, just the recursion stack.
//!
//! The unordered [`for_each`] drives the search; [`enumerate_sorted`] wraps
//! it to return programs in globally non-decreasing cost order with a
//! deterministic text tie-break.

use crate::config::Budget;
use crate::dsl::eval::{apply_entry, const_value, EvalError, Value};
use crate::dsl::text::to_text;
use crate::dsl::{Library, Program, Ty};
use crate::grammar::{slot_ty_index, Grammar, Production, SLOT_TY_COUNT};
use std::time::{Duration, Instant};

/// Width of one enumeration band in nats.
pub const BAND_NATS: f64 = 3.0;

/// Why an enumeration run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Every program of the requested type was emitted.
    Exhausted,
    /// The program cap was reached.
    Budget,
    /// The deadline passed.
    Timeout,
    /// The callback asked to stop.
    Aborted,
}

#[derive(Debug, Clone, Copy)]
pub struct EnumStats {
    /// Programs handed to the callback.
    pub emitted: u64,
    /// Completions visited, counting band revisits.
    pub completed: u64,
    pub reason: StopReason,
}

/// Rebuilds the program tree from a pre-order production sequence.
pub fn seq_to_program(lib: &Library, seq: &[Production]) -> Program {
    fn go(lib: &Library, seq: &[Production], i: &mut usize) -> Program {
        let p = seq[*i];
        *i += 1;
        match p {
            Production::Const(kind, idx) => Program::Const(kind, idx),
            Production::Entry(e) => {
                let arity = lib.entry(e).arity();
                let args = (0..arity).map(|_| go(lib, seq, i)).collect();
                Program::Call(e, args)
            }
        }
    }
    let mut i = 0;
    let p = go(lib, seq, &mut i);
    debug_assert_eq!(i, seq.len(), "sequence fully consumed");
    p
}

/// Evaluates a pre-order production sequence without building the tree.
pub fn eval_seq(lib: &Library, seq: &[Production]) -> Result<Value, EvalError> {
    fn go(lib: &Library, seq: &[Production], i: &mut usize) -> Result<Value, EvalError> {
        let p = seq[*i];
        *i += 1;
        match p {
            Production::Const(kind, idx) => const_value(lib, kind, idx),
            Production::Entry(e) => {
                let arity = lib.entry(e).arity();
                let mut vals = Vec::with_capacity(arity);
                for _ in 0..arity {
                    vals.push(go(lib, seq, i)?);
                }
                apply_entry(lib, e, vals)
            }
        }
    }
    let mut i = 0;
    go(lib, seq, &mut i)
}

/// Enumerates programs of type `root` in unspecified order within each cost
/// band, cheapest band first. The callback receives the pre-order production
/// sequence and its cost (negative log probability under `g`); returning
/// `false` stops the run. `root` must be a first-order leaf type.
pub fn for_each<F>(g: &Grammar, root: &Ty, budget: &Budget, f: F) -> EnumStats
where
    F: FnMut(&[Production], f64) -> bool,
{
    let root_tyi = slot_ty_index(root).expect("enumeration roots are leaf types");
    let deadline = Instant::now() + Duration::from_secs_f64(budget.timeout_sec);
    let mut dfs = Dfs::new(g, root_tyi, budget.max_programs, deadline, f);
    let mut lo = 0.0;
    loop {
        match dfs.pass(lo, lo + BAND_NATS) {
            PassEnd::Stopped(reason) => return dfs.stats(reason),
            PassEnd::Done { pruned: false } => return dfs.stats(StopReason::Exhausted),
            PassEnd::Done { pruned: true } => lo += BAND_NATS,
        }
        // A cost this deep is beyond any realistic budget; treat the space
        // as exhausted rather than spin on empty bands.
        if lo > 600.0 {
            return dfs.stats(StopReason::Exhausted);
        }
    }
}

/// Enumerates up to `budget.max_programs` programs of type `root` in
/// non-decreasing cost order; equal-cost programs are ordered by their text
/// form. Returns the programs with their costs.
pub fn enumerate_sorted(
    g: &Grammar,
    root: &Ty,
    budget: &Budget,
) -> (Vec<(Program, f64)>, EnumStats) {
    let cap = budget.max_programs as usize;
    let mut out: Vec<(Program, f64)> = Vec::new();
    let mut band: Vec<(f64, String, Program)> = Vec::new();
    let mut band_lo = 0.0;
    let stats = for_each(g, root, budget, |seq, cost| {
        if cost >= band_lo + BAND_NATS {
            // A new band begins: flush the finished one in order.
            flush_band(&mut band, &mut out, cap);
            band_lo = (cost / BAND_NATS).floor() * BAND_NATS;
        }
        let p = seq_to_program(g.lib(), seq);
        let text = to_text(g.lib(), &p);
        band.push((cost, text, p));
        true
    });
    flush_band(&mut band, &mut out, cap);
    (out, stats)
}

fn flush_band(band: &mut Vec<(f64, String, Program)>, out: &mut Vec<(Program, f64)>, cap: usize) {
    band.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    for (cost, _, p) in band.drain(..) {
        if out.len() >= cap {
            break;
        }
        out.push((p, cost));
    }
}

enum PassEnd {
    Done { pruned: bool },
    Stopped(StopReason),
}

struct Dfs<'a, F> {
    g: &'a Grammar,
    f: F,
    /// Production costs per row, aligned with the slot type's production
    /// list. Rows 0..n_ctx mirror the grammar contexts; an extra row serves
    /// as the virtual root for non-drawing enumeration.
    costs: Vec<Vec<f64>>,
    /// Production positions per row, sorted by ascending cost.
    order: Vec<Vec<u32>>,
    row_tyi: Vec<usize>,
    /// Cheapest completion cost per slot type.
    minc: [f64; SLOT_TY_COUNT],
    /// Per slot type, per production: sum of `minc` over its argument slots.
    argmin: [Vec<f64>; SLOT_TY_COUNT],
    start_row: u32,
    seq: Vec<Production>,
    stack: Vec<u32>,
    lo: f64,
    hi: f64,
    emitted: u64,
    completed: u64,
    visits: u64,
    max_programs: u64,
    deadline: Instant,
}

impl<'a, F: FnMut(&[Production], f64) -> bool> Dfs<'a, F> {
    fn new(g: &'a Grammar, root_tyi: usize, max_programs: u64, deadline: Instant, f: F) -> Self {
        let n_ctx = g.n_ctx();
        let mut costs: Vec<Vec<f64>> = Vec::with_capacity(n_ctx + 1);
        let mut row_tyi: Vec<usize> = Vec::with_capacity(n_ctx + 1);
        for ctx in 0..n_ctx {
            costs.push(g.log_weights(ctx).iter().map(|&lw| -lw).collect());
            row_tyi.push(g.ctx_slot_ty(ctx));
        }
        // Virtual root row for non-drawing roots: uniform over the slot
        // type's productions (there is no parent context to condition on).
        let n_root = g.productions(root_tyi).len();
        costs.push(vec![(n_root.max(1) as f64).ln(); n_root]);
        row_tyi.push(root_tyi);
        let start_row = if root_tyi == 0 { 0 } else { n_ctx as u32 };

        let order: Vec<Vec<u32>> = costs
            .iter()
            .map(|row| {
                let mut idx: Vec<u32> = (0..row.len() as u32).collect();
                idx.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]));
                idx
            })
            .collect();

        // Cheapest production cost per slot type, over real contexts only
        // (pending slots are never the root).
        let mut min_prod: [Vec<f64>; SLOT_TY_COUNT] =
            std::array::from_fn(|tyi| vec![f64::INFINITY; g.productions(tyi).len()]);
        for ctx in 0..n_ctx {
            let tyi = row_tyi[ctx];
            for (pos, &c) in costs[ctx].iter().enumerate() {
                if c < min_prod[tyi][pos] {
                    min_prod[tyi][pos] = c;
                }
            }
        }
        let mut minc = [f64::INFINITY; SLOT_TY_COUNT];
        loop {
            let mut changed = false;
            for tyi in 0..SLOT_TY_COUNT {
                for (pos, prod) in g.productions(tyi).iter().enumerate() {
                    let mut c = min_prod[tyi][pos];
                    if let Production::Entry(e) = prod {
                        for at in &g.lib().entry(*e).arg_tys {
                            c += minc[slot_ty_index(at).expect("leaf arg types")];
                        }
                    }
                    if c < minc[tyi] {
                        minc[tyi] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let argmin: [Vec<f64>; SLOT_TY_COUNT] = std::array::from_fn(|tyi| {
            g.productions(tyi)
                .iter()
                .map(|prod| match prod {
                    Production::Const(..) => 0.0,
                    Production::Entry(e) => g
                        .lib()
                        .entry(*e)
                        .arg_tys
                        .iter()
                        .map(|at| minc[slot_ty_index(at).expect("leaf arg types")])
                        .sum(),
                })
                .collect()
        });

        Dfs {
            g,
            f,
            costs,
            order,
            row_tyi,
            minc,
            argmin,
            start_row,
            seq: Vec::with_capacity(64),
            stack: Vec::with_capacity(64),
            lo: 0.0,
            hi: 0.0,
            emitted: 0,
            completed: 0,
            visits: 0,
            max_programs,
            deadline,
        }
    }

    fn stats(&self, reason: StopReason) -> EnumStats {
        EnumStats {
            emitted: self.emitted,
            completed: self.completed,
            reason,
        }
    }

    fn pass(&mut self, lo: f64, hi: f64) -> PassEnd {
        self.lo = lo;
        self.hi = hi;
        self.seq.clear();
        self.stack.clear();
        self.stack.push(self.start_row);
        let start_min = self.minc[self.row_tyi[self.start_row as usize]];
        if !start_min.is_finite() {
            // No finite-cost program of this type exists.
            return PassEnd::Done { pruned: false };
        }
        match self.dfs(0.0, start_min) {
            Ok(pruned) => PassEnd::Done { pruned },
            Err(reason) => PassEnd::Stopped(reason),
        }
    }

    /// Fills the next pending slot. `cost` is the cost of productions chosen
    /// so far; `pending_min` is the sum of `minc` over all pending slots.
    /// Returns whether any branch was cut by the band's upper edge.
    fn dfs(&mut self, cost: f64, pending_min: f64) -> Result<bool, StopReason> {
        let row = match self.stack.pop() {
            None => {
                self.completed += 1;
                if self.completed & 0x1FFF == 0 && Instant::now() >= self.deadline {
                    return Err(StopReason::Timeout);
                }
                if cost >= self.lo {
                    self.emitted += 1;
                    if !(self.f)(&self.seq, cost) {
                        return Err(StopReason::Aborted);
                    }
                    if self.emitted >= self.max_programs {
                        return Err(StopReason::Budget);
                    }
                }
                return Ok(false);
            }
            Some(row) => row,
        };
        self.visits += 1;
        if self.visits & 0x3FFF == 0 && Instant::now() >= self.deadline {
            return Err(StopReason::Timeout);
        }

        let tyi = self.row_tyi[row as usize];
        let rest_min = pending_min - self.minc[tyi];
        let mut pruned = false;
        for oi in 0..self.order[row as usize].len() {
            let pos = self.order[row as usize][oi] as usize;
            let c = self.costs[row as usize][pos];
            if !c.is_finite() {
                // Zero-weight productions close out the sorted row.
                break;
            }
            let head = cost + c + rest_min;
            if head >= self.hi {
                // Costs are sorted, and argument bounds are non-negative, so
                // every later production is cut too.
                pruned = true;
                break;
            }
            let amin = self.argmin[tyi][pos];
            if !amin.is_finite() {
                continue;
            }
            if head + amin >= self.hi {
                pruned = true;
                continue;
            }
            let prod = self.g.productions(tyi)[pos];
            self.seq.push(prod);
            let mark = self.stack.len();
            if let Production::Entry(e) = prod {
                let base = self.g.ctx_index(Some((e, 0)));
                let arity = self.g.lib().entry(e).arity();
                for s in (0..arity).rev() {
                    self.stack.push((base + s) as u32);
                }
            }
            let sub = self.dfs(cost + c, rest_min + amin);
            self.stack.truncate(mark);
            self.seq.pop();
            pruned |= sub?;
        }
        self.stack.push(row);
        Ok(pruned)
    }
}
