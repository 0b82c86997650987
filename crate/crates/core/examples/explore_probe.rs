//! One guided search per image at a configurable budget, smallest images
//! first. Usage: explore_probe [n_images] [timeout_sec] [max_programs]

use limn_core::config::{Budget, RunConfig};
use limn_core::dsl::eval::Value;
use limn_core::dsl::raster::MatchScratch;
use limn_core::dsl::text::to_text;
use limn_core::dsl::{Library, Ty};
use limn_core::enumerate::{self, eval_seq, seq_to_program};
use limn_core::grammar::Grammar;
use limn_core::recognition::RecognitionModel;
use limn_core::stimuli;
use std::time::Instant;

fn main() {
    let mut args = std::env::args().skip(1);
    let n_images: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let timeout: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let max_programs: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(u64::MAX);

    let cfg = RunConfig::default();
    let lib = Library::base();
    let g = Grammar::uniform(lib.clone());
    let q = RecognitionModel::new(cfg.feature_width, cfg.feature_height);
    let (set1, _) = stimuli::default_sets();

    let mut order: Vec<usize> = (0..set1.len()).collect();
    order.sort_by_key(|&i| set1[i].len());

    for &i in order.iter().take(n_images) {
        let s = &set1[i];
        let img = stimuli::render_stimulus(&lib, &cfg.render, s);
        let guided = q.guide(&g, &img);
        let mut scratch = MatchScratch::new(&cfg.render);
        let budget = Budget { timeout_sec: timeout, max_programs };
        let t = Instant::now();
        let mut first: Option<(f64, String, f64)> = None;
        let mut n_found = 0u64;
        let stats = enumerate::for_each(&guided, &Ty::Drawing, &budget, |seq, cost| {
            if let Ok(Value::Drawing(strokes)) = eval_seq(g.lib(), seq) {
                if scratch.matches(&strokes, &cfg.render, &img) {
                    n_found += 1;
                    if first.is_none() {
                        let p = seq_to_program(g.lib(), seq);
                        first = Some((cost, to_text(g.lib(), &p), t.elapsed().as_secs_f64()));
                    }
                }
            }
            true
        });
        let dt = t.elapsed().as_secs_f64();
        match &first {
            Some((cost, text, at)) => println!(
                "[{i:2}] {}  SOLVED at {at:.1}s cost {cost:.1} ({n_found} matches, {} emitted, {dt:.1}s total)\n      {text}",
                stimuli::describe(s), stats.emitted
            ),
            None => println!(
                "[{i:2}] {}  unsolved ({} emitted, {dt:.1}s)",
                stimuli::describe(s), stats.emitted
            ),
        }
    }
}
