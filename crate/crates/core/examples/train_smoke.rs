//! Quick training run on the first stimulus set, printing per-cycle
//! progress. Usage: `cargo run --release -p limn-core --example train_smoke
//! -- [cycles]`.

use limn_core::config::RunConfig;
use limn_core::dsl::text::to_text;
use limn_core::dsl::Library;
use limn_core::induction::train_loop;
use limn_core::stimuli;

fn main() {
    let cycles: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let mut cfg = RunConfig::default();
    cfg.cycles = cycles;

    let lib = Library::base();
    let sets = stimuli::default_sets();
    let set1 = if std::env::var("SET2").is_ok() { sets.1 } else { sets.0 };
    let images: Vec<_> = set1
        .iter()
        .map(|s| stimuli::render_stimulus(&lib, &cfg.render, s))
        .collect();
    println!("corpus: {} images", images.len());
    for (i, s) in set1.iter().enumerate() {
        println!("  [{i:2}] {}", stimuli::describe(s));
    }

    let (state, _) = train_loop(&images, &cfg, |st, m| {
        println!(
            "cycle {:2}: solved {:2}/{} (+{}), matches {}, lib {}, dl {:.1} -> {:.1}, q {:.3} -> {:.3}, dreams {}, {:.1}s",
            m.cycle,
            m.solved,
            st.beams.len(),
            m.newly_solved,
            m.matches_found,
            m.library_size,
            m.dl_before,
            m.dl_after,
            m.q_initial_loss,
            m.q_final_loss,
            m.dreams,
            m.seconds
        );
        let lib = st.grammar.lib();
        for id in lib.learned_ids() {
            let e = lib.entry(id);
            println!("    {} : {} = {}", e.name, e.ty, to_text(lib, e.body().unwrap()));
        }
        for (i, b) in st.beams.iter().enumerate() {
            if let Some(best) = b.best() {
                println!("    [{i:2}] {:7.2}  {}", best.log_prior, to_text(lib, &best.program));
            }
        }
    })
    .unwrap();

    println!("\nunsolved:");
    for (i, b) in state.beams.iter().enumerate() {
        if !b.is_solved() {
            println!("  [{i:2}] {}", stimuli::describe(&set1[i]));
        }
    }
    for (i, b) in state.beams.iter().enumerate() {
        if let Some(best) = b.best() {
            println!(
                "[{i:2}] {:6.2}  {}",
                best.log_prior,
                to_text(state.grammar.lib(), &best.program)
            );
        }
    }
}
