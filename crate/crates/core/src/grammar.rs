//! Bigram-weighted grammar over a [`Library`].
//!
//! Every argument position of every entry (plus a synthetic root slot of
//! drawing type) is a *context*; each context carries a normalized
//! distribution over the productions that can fill it: entries whose return
//! type matches the slot, and domain constants for parameter-typed slots.
//! A program's prior is the product of its production weights, context by
//! context, so priors, description lengths, sampling (dreams) and guided
//! enumeration all share this one structure.

use crate::dsl::{ConstKind, EntryId, Library, Program, Ty, TypeError, CONST_KINDS};
use rand::Rng;

/// Leaf slot types, indexable 0..7.
pub const SLOT_TY_COUNT: usize = 7;

pub fn slot_ty_index(ty: &Ty) -> Option<usize> {
    match ty {
        Ty::Drawing => Some(0),
        Ty::Transform => Some(1),
        Ty::Count => Some(2),
        Ty::Angle => Some(3),
        Ty::Dist => Some(4),
        Ty::Scale => Some(5),
        Ty::Order => Some(6),
        Ty::Fn(..) => None,
    }
}

pub fn slot_ty(tyi: usize) -> Ty {
    match tyi {
        0 => Ty::Drawing,
        1 => Ty::Transform,
        2 => Ty::Count,
        3 => Ty::Angle,
        4 => Ty::Dist,
        5 => Ty::Scale,
        6 => Ty::Order,
        _ => panic!("slot type index {tyi} out of range"),
    }
}

/// One alternative for filling a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Production {
    Entry(EntryId),
    Const(ConstKind, u8),
}

#[derive(Debug, Clone)]
pub struct Grammar {
    lib: Library,
    /// Per context: parent (entry, slot) or `None` for the root, plus the
    /// slot type index. Context 0 is always the root.
    ctxs: Vec<(Option<(EntryId, usize)>, usize)>,
    ctx_base: Vec<usize>,
    prods: [Vec<Production>; SLOT_TY_COUNT],
    /// Per slot type: entry id -> position in `prods`, or `u32::MAX`.
    entry_pos: [Vec<u32>; SLOT_TY_COUNT],
    n_entries_of: [usize; SLOT_TY_COUNT],
    /// Per context, aligned with the slot type's production list. Normalized.
    weights: Vec<Vec<f64>>,
    logw: Vec<Vec<f64>>,
}

impl Grammar {
    /// Uniform weights over every context of the library.
    pub fn uniform(lib: Library) -> Grammar {
        let mut g = Grammar::layout(lib);
        for ctx in 0..g.ctxs.len() {
            let n = g.prods[g.ctxs[ctx].1].len();
            g.weights[ctx] = vec![1.0 / n as f64; n];
        }
        g.refresh_logs();
        g
    }

    /// Weights from production counts with add-one smoothing. `counts` must
    /// be aligned with this library's context layout (see [`Grammar::zero_counts`]).
    pub fn from_counts(lib: Library, counts: &[Vec<f64>]) -> Grammar {
        let mut g = Grammar::layout(lib);
        assert_eq!(counts.len(), g.ctxs.len(), "count table shape mismatch");
        for ctx in 0..g.ctxs.len() {
            let n = g.prods[g.ctxs[ctx].1].len();
            assert_eq!(counts[ctx].len(), n, "count row shape mismatch");
            let total: f64 = counts[ctx].iter().sum::<f64>() + n as f64;
            g.weights[ctx] = counts[ctx].iter().map(|&c| (c + 1.0) / total).collect();
        }
        g.refresh_logs();
        g
    }

    /// Same library and layout, different weights (e.g. a recognition
    /// model's per-image prediction). Rows are normalized here.
    pub fn with_weights(&self, mut weights: Vec<Vec<f64>>) -> Grammar {
        assert_eq!(weights.len(), self.ctxs.len(), "weight table shape mismatch");
        for (ctx, row) in weights.iter_mut().enumerate() {
            let n = self.prods[self.ctxs[ctx].1].len();
            assert_eq!(row.len(), n, "weight row shape mismatch");
            let total: f64 = row.iter().sum();
            assert!(total > 0.0 && total.is_finite(), "weight row must have mass");
            for w in row.iter_mut() {
                *w /= total;
            }
        }
        let mut g = self.clone();
        g.weights = weights;
        g.refresh_logs();
        g
    }

    fn layout(lib: Library) -> Grammar {
        let mut prods: [Vec<Production>; SLOT_TY_COUNT] = Default::default();
        let mut entry_pos: [Vec<u32>; SLOT_TY_COUNT] = Default::default();
        let mut n_entries_of = [0usize; SLOT_TY_COUNT];
        for tyi in 0..SLOT_TY_COUNT {
            entry_pos[tyi] = vec![u32::MAX; lib.len()];
        }
        for (id, entry) in lib.entries().iter().enumerate() {
            if let Some(tyi) = slot_ty_index(&entry.ret) {
                entry_pos[tyi][id] = prods[tyi].len() as u32;
                prods[tyi].push(Production::Entry(id));
                n_entries_of[tyi] += 1;
            }
        }
        for &kind in &CONST_KINDS {
            let tyi = slot_ty_index(&kind.ty()).unwrap();
            for idx in 0..lib.domains.len(kind) {
                prods[tyi].push(Production::Const(kind, idx as u8));
            }
        }

        let mut ctxs = vec![(None, slot_ty_index(&Ty::Drawing).unwrap())];
        let mut ctx_base = Vec::with_capacity(lib.len());
        for (id, entry) in lib.entries().iter().enumerate() {
            ctx_base.push(ctxs.len());
            for (s, at) in entry.arg_tys.iter().enumerate() {
                let tyi = slot_ty_index(at)
                    .expect("entry argument types are first-order leaf types");
                ctxs.push((Some((id, s)), tyi));
            }
        }
        let n_ctx = ctxs.len();
        Grammar {
            lib,
            ctxs,
            ctx_base,
            prods,
            entry_pos,
            n_entries_of,
            weights: vec![Vec::new(); n_ctx],
            logw: vec![Vec::new(); n_ctx],
        }
    }

    fn refresh_logs(&mut self) {
        self.logw = self
            .weights
            .iter()
            .map(|row| row.iter().map(|&w| w.ln()).collect())
            .collect();
    }

    pub fn lib(&self) -> &Library {
        &self.lib
    }

    pub fn n_ctx(&self) -> usize {
        self.ctxs.len()
    }

    pub fn ctx_parent(&self, ctx: usize) -> Option<(EntryId, usize)> {
        self.ctxs[ctx].0
    }

    pub fn ctx_slot_ty(&self, ctx: usize) -> usize {
        self.ctxs[ctx].1
    }

    pub fn ctx_index(&self, parent: Option<(EntryId, usize)>) -> usize {
        match parent {
            None => 0,
            Some((e, s)) => self.ctx_base[e] + s,
        }
    }

    pub fn productions(&self, tyi: usize) -> &[Production] {
        &self.prods[tyi]
    }

    pub fn ctx_productions(&self, ctx: usize) -> &[Production] {
        &self.prods[self.ctxs[ctx].1]
    }

    pub fn weights(&self, ctx: usize) -> &[f64] {
        &self.weights[ctx]
    }

    pub fn log_weights(&self, ctx: usize) -> &[f64] {
        &self.logw[ctx]
    }

    /// Position of a production within its slot type's list.
    pub fn production_pos(&self, tyi: usize, prod: Production) -> Option<u32> {
        match prod {
            Production::Entry(e) => {
                let p = *self.entry_pos[tyi].get(e)?;
                (p != u32::MAX).then_some(p)
            }
            Production::Const(kind, idx) => {
                if slot_ty_index(&kind.ty()) != Some(tyi) {
                    return None;
                }
                if (idx as usize) < self.lib.domains.len(kind) {
                    Some((self.n_entries_of[tyi] + idx as usize) as u32)
                } else {
                    None
                }
            }
        }
    }

    /// Human-readable production label (entry name or constant literal).
    pub fn production_label(&self, prod: Production) -> String {
        match prod {
            Production::Entry(e) => self.lib.entry(e).name.clone(),
            Production::Const(kind, idx) => {
                crate::dsl::text::to_text(&self.lib, &Program::Const(kind, idx))
            }
        }
    }

    /// The (context, production position) pair of every node of a closed
    /// program, in pre-order. Errors on lambdas/variables or type mismatch.
    pub fn production_sites(&self, p: &Program) -> Result<Vec<(u32, u32)>, TypeError> {
        let mut out = Vec::with_capacity(16);
        self.sites_into(p, 0, &mut out)?;
        Ok(out)
    }

    fn sites_into(
        &self,
        p: &Program,
        ctx: usize,
        out: &mut Vec<(u32, u32)>,
    ) -> Result<(), TypeError> {
        let tyi = self.ctxs[ctx].1;
        match p {
            Program::Call(e, args) => {
                let pos = self
                    .production_pos(tyi, Production::Entry(*e))
                    .ok_or_else(|| TypeError::Mismatch {
                        expected: slot_ty(tyi),
                        found: self.lib.entry(*e).ret.clone(),
                    })?;
                out.push((ctx as u32, pos));
                if args.len() != self.lib.entry(*e).arity() {
                    return Err(TypeError::Arity {
                        name: self.lib.entry(*e).name.clone(),
                        expected: self.lib.entry(*e).arity(),
                        found: args.len(),
                    });
                }
                let base = self.ctx_base[*e];
                for (s, a) in args.iter().enumerate() {
                    self.sites_into(a, base + s, out)?;
                }
                Ok(())
            }
            Program::Const(kind, idx) => {
                let pos = self
                    .production_pos(tyi, Production::Const(*kind, *idx))
                    .ok_or(TypeError::ConstRange {
                        kind: *kind,
                        index: *idx as usize,
                        len: self.lib.domains.len(*kind),
                    })?;
                out.push((ctx as u32, pos));
                Ok(())
            }
            Program::Var(i) => Err(TypeError::UnboundVar(*i)),
            Program::Lambda(_) => Err(TypeError::UnexpectedLambda(slot_ty(tyi))),
        }
    }

    /// Log prior of a closed program under this grammar's weights.
    pub fn log_prior(&self, p: &Program) -> Result<f64, TypeError> {
        let sites = self.production_sites(p)?;
        Ok(sites
            .iter()
            .map(|&(ctx, pos)| self.logw[ctx as usize][pos as usize])
            .sum())
    }

    /// A zeroed count table aligned with this grammar's layout.
    pub fn zero_counts(&self) -> Vec<Vec<f64>> {
        (0..self.ctxs.len())
            .map(|ctx| vec![0.0; self.prods[self.ctxs[ctx].1].len()])
            .collect()
    }

    /// Adds one count per production site of `p`.
    pub fn count_sites(&self, p: &Program, counts: &mut [Vec<f64>]) -> Result<(), TypeError> {
        for (ctx, pos) in self.production_sites(p)? {
            counts[ctx as usize][pos as usize] += 1.0;
        }
        Ok(())
    }

    /// Ancestral sample of a drawing-typed program. Returns `None` when the
    /// sample exceeds `max_nodes` productions (caller retries).
    pub fn sample<R: Rng>(&self, rng: &mut R, max_nodes: usize) -> Option<Program> {
        let mut budget = max_nodes as i64;
        self.sample_at(0, rng, &mut budget)
    }

    fn sample_at<R: Rng>(&self, ctx: usize, rng: &mut R, budget: &mut i64) -> Option<Program> {
        *budget -= 1;
        if *budget < 0 {
            return None;
        }
        let row = &self.weights[ctx];
        let mut r: f64 = rng.gen::<f64>();
        let mut choice = row.len() - 1;
        for (i, &w) in row.iter().enumerate() {
            if r < w {
                choice = i;
                break;
            }
            r -= w;
        }
        match self.prods[self.ctxs[ctx].1][choice] {
            Production::Const(kind, idx) => Some(Program::Const(kind, idx)),
            Production::Entry(e) => {
                let arity = self.lib.entry(e).arity();
                let base = self.ctx_base[e];
                let mut args = Vec::with_capacity(arity);
                for s in 0..arity {
                    args.push(self.sample_at(base + s, rng, budget)?);
                }
                Some(Program::Call(e, args))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::text::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_base() -> Grammar {
        Grammar::uniform(Library::base())
    }

    #[test]
    fn weights_normalize_per_context() {
        let g = uniform_base();
        for ctx in 0..g.n_ctx() {
            let sum: f64 = g.weights(ctx).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "ctx {ctx} sums to {sum}");
        }
    }

    #[test]
    fn drawing_slot_has_six_entry_productions() {
        let g = uniform_base();
        // line, circle, repeat, transform, reflect, connect return drawings.
        assert_eq!(g.productions(0).len(), 6);
        // Transform slots admit only `affine`.
        assert_eq!(g.productions(1).len(), 1);
        // Count slots admit the five count constants.
        assert_eq!(g.productions(2).len(), 5);
    }

    #[test]
    fn log_prior_is_log_product_of_weights() {
        let g = uniform_base();
        let p = parse(g.lib(), "(connect line circle)", &Ty::Drawing).unwrap();
        // Root connect: 1/6; two drawing args under connect: 1/6 each.
        let expected = (1.0f64 / 6.0).ln() * 3.0;
        assert!((g.log_prior(&p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn contexts_distinguish_parent_slots() {
        let g = uniform_base();
        let lib = g.lib();
        let repeat = lib.id("repeat");
        let connect = lib.id("connect");
        let c1 = g.ctx_index(Some((repeat, 0)));
        let c2 = g.ctx_index(Some((connect, 0)));
        let c3 = g.ctx_index(Some((connect, 1)));
        assert_ne!(c1, c2);
        assert_ne!(c2, c3);
        assert_eq!(g.ctx_slot_ty(c1), 0);
    }

    #[test]
    fn counts_refit_shifts_mass_toward_observed() {
        let lib = Library::base();
        let g0 = Grammar::uniform(lib.clone());
        let p = parse(&lib, "(connect line line)", &Ty::Drawing).unwrap();
        let mut counts = g0.zero_counts();
        for _ in 0..50 {
            g0.count_sites(&p, &mut counts).unwrap();
        }
        let g = Grammar::from_counts(lib, &counts);
        let root_connect = g
            .production_pos(0, Production::Entry(g.lib().id("connect")))
            .unwrap() as usize;
        let root_circle = g
            .production_pos(0, Production::Entry(g.lib().id("circle")))
            .unwrap() as usize;
        assert!(g.weights(0)[root_connect] > 0.5);
        // Smoothing keeps unobserved productions strictly positive.
        assert!(g.weights(0)[root_circle] > 0.0);
    }

    #[test]
    fn sampling_is_seeded_and_respects_node_budget() {
        let g = uniform_base();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<Option<Program>> = (0..20).map(|_| g.sample(&mut r1, 30)).collect();
        let b: Vec<Option<Program>> = (0..20).map(|_| g.sample(&mut r2, 30)).collect();
        assert_eq!(a, b);
        for p in a.into_iter().flatten() {
            assert!(p.node_count() <= 30);
            g.lib().check_closed(&p, &Ty::Drawing).unwrap();
        }
    }

    #[test]
    fn production_sites_error_on_open_terms() {
        let g = uniform_base();
        assert!(g.production_sites(&Program::Var(0)).is_err());
    }
}
