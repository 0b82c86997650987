use limn_core::config::Budget;
use limn_core::dsl::{eval::Value, raster::{render, MatchScratch, RenderConfig}, Library, Ty};
use limn_core::enumerate::{self, eval_seq};
use limn_core::grammar::Grammar;
use std::time::Instant;

fn main() {
    let lib = Library::base();
    let g = Grammar::uniform(lib);
    let budget = Budget { timeout_sec: 5.0, max_programs: u64::MAX };
    let t = Instant::now();
    let stats = enumerate::for_each(&g, &Ty::Drawing, &budget, |_, _| true);
    let dt = t.elapsed().as_secs_f64();
    println!("enumerate only: {} emitted, {} completed in {:.2}s = {:.0}/s",
        stats.emitted, stats.completed, dt, stats.emitted as f64 / dt);

    let cfg = RenderConfig::default();
    let target = render(&[], &cfg);
    let mut scratch = MatchScratch::new(&cfg);
    let t = Instant::now();
    let mut evals = 0u64;
    let stats = enumerate::for_each(&g, &Ty::Drawing, &budget, |seq, _| {
        if let Ok(Value::Drawing(strokes)) = eval_seq(g.lib(), seq) {
            evals += 1;
            let _ = scratch.matches(&strokes, &cfg, &target);
        }
        true
    });
    let dt = t.elapsed().as_secs_f64();
    println!("enumerate+eval+match: {} emitted ({} drawable) in {:.2}s = {:.0}/s",
        stats.emitted, evals, dt, stats.emitted as f64 / dt);
}
