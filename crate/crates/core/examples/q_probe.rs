//! Measures how much the recognition model concentrates probability on the
//! canonical program of each training image after a few cycles. Usage:
//! `cargo run --release -p limn-core --example q_probe -- [cycles]`.

use limn_core::config::RunConfig;
use limn_core::dsl::Library;
use limn_core::induction::train_loop;
use limn_core::stimuli::{self, SweepOrder};

fn main() {
    let cycles: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let mut cfg = RunConfig::default();
    cfg.cycles = cycles;

    let lib = Library::base();
    let (set1, _) = stimuli::default_sets();
    let images: Vec<_> = set1
        .iter()
        .map(|s| stimuli::render_stimulus(&lib, &cfg.render, s))
        .collect();

    let (state, _) = train_loop(&images, &cfg, |_, m| {
        eprintln!("cycle {}: solved {}", m.cycle, m.solved);
    })
    .unwrap();

    println!("img  solved  lib_nats  guided_nats  (canonical row-major program)");
    for (i, (stim, img)) in set1.iter().zip(&images).enumerate() {
        let p = stimuli::program_for(state.grammar.lib(), stim, SweepOrder::RowMajor);
        let lp = state.grammar.log_prior(&p).unwrap();
        let guided = state.q.guide(&state.grammar, img);
        let gp = guided.log_prior(&p).unwrap();
        println!(
            "[{i:2}]  {}  {:8.2}  {:10.2}   {}",
            if state.beams[i].is_solved() { "y" } else { "N" },
            -lp,
            -gp,
            stimuli::describe(stim)
        );
    }
}
