//! Per-image enumeration under the recognition model, keeping exact matches.

use super::{Beam, BeamItem, TrainState};
use crate::config::{Budget, RunConfig};
use crate::dsl::eval::Value;
use crate::dsl::raster::{MatchScratch, RasterImage};
use crate::dsl::text::to_text;
use crate::dsl::{Program, Ty};
use crate::enumerate::{self, eval_seq, seq_to_program};
use crate::exec::map_slice;
use crate::grammar::Grammar;

#[derive(Debug, Clone, Copy)]
pub struct ExploreOutcome {
    /// Images with a non-empty beam after this step.
    pub solved: usize,
    /// Images solved now that were not solved before.
    pub newly_solved: usize,
    /// Exact-render matches found this step, before beam truncation.
    pub matches_found: u64,
    /// Images searched with the full (not refine) budget.
    pub full_searches: usize,
}

/// Searches every image and merges findings into its beam. Already-solved
/// images get the smaller refinement budget; unsolved ones get the full
/// budget. Beams are ranked by library prior (not the per-image guide), so
/// exploration under a sharpened guide can only improve them.
pub fn explore_step(
    state: &mut TrainState,
    images: &[RasterImage],
    cfg: &RunConfig,
) -> ExploreOutcome {
    assert_eq!(images.len(), state.beams.len(), "one beam per image");
    let g = &state.grammar;
    let q = &state.q;
    let beams = &state.beams;
    let was_solved: Vec<bool> = beams.iter().map(Beam::is_solved).collect();

    let idxs: Vec<usize> = (0..images.len()).collect();
    let results: Vec<(Beam, u64)> = map_slice(&idxs, |&i| {
        let img = &images[i];
        let prev = &beams[i];
        let budget = if prev.is_solved() {
            Budget {
                timeout_sec: cfg.explore.timeout_sec,
                max_programs: cfg.refine_max_programs,
            }
        } else {
            cfg.explore.clone()
        };
        let guided = q.guide(g, img);
        let mut scratch = MatchScratch::new(&cfg.render);
        let mut found: Vec<Program> = Vec::new();
        enumerate::for_each(&guided, &Ty::Drawing, &budget, |seq, _| {
            if let Ok(Value::Drawing(strokes)) = eval_seq(g.lib(), seq) {
                if scratch.matches(&strokes, &cfg.render, img) {
                    found.push(seq_to_program(g.lib(), seq));
                }
            }
            true
        });
        let n = found.len() as u64;
        (merge_beam(g, prev, found, cfg.beam_size), n)
    });

    let mut out = ExploreOutcome {
        solved: 0,
        newly_solved: 0,
        matches_found: 0,
        full_searches: was_solved.iter().filter(|&&s| !s).count(),
    };
    for (i, (beam, n)) in results.into_iter().enumerate() {
        out.matches_found += n;
        if beam.is_solved() {
            out.solved += 1;
            if !was_solved[i] {
                out.newly_solved += 1;
            }
        }
        state.beams[i] = beam;
    }
    out
}

/// Union of the old beam and new findings, deduplicated, rescored under the
/// library grammar, and truncated. Ties break on program text so beams are
/// identical across runs.
fn merge_beam(g: &Grammar, prev: &Beam, found: Vec<Program>, beam_size: usize) -> Beam {
    let mut pool: Vec<Program> = prev.items.iter().map(|it| it.program.clone()).collect();
    for p in found {
        if !pool.contains(&p) {
            pool.push(p);
        }
    }
    let mut ranked: Vec<(f64, String, Program)> = pool
        .into_iter()
        .map(|p| {
            let lp = g.log_prior(&p).expect("beam programs type check");
            (lp, to_text(g.lib(), &p), p)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    ranked.truncate(beam_size);
    Beam {
        items: ranked
            .into_iter()
            .map(|(log_prior, _, program)| BeamItem { program, log_prior })
            .collect(),
    }
}
