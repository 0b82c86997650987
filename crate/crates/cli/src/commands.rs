//! Subcommand implementations.

use crate::formats::*;
use crate::{invalid, load_ckpt, CliError, Outcome};
use crate::{
    AnalyzeArgs, DreamArgs, FitThetaArgs, GenArgs, GroundArgs, RenderArgs, ScoreArgs, SetName,
    SolveArgs, TrainArgs, VariantName,
};
use limn_core::behavior::{self, RawTrace};
use limn_core::config::{schema, Budget, RunConfig};
use limn_core::dsl::eval::strokes;
use limn_core::dsl::raster::to_svg;
use limn_core::dsl::text::parse;
use limn_core::dsl::{Library, Ty};
use limn_core::harness::{self, Variant};
use limn_core::induction::{self, checkpoint};
use limn_core::motor::{self, CostWeights, FeatureMode, FitTrial};
use limn_core::stimuli::{self, GridSpec, SetId, Stimulus};
use limn_core::trajectory::{admissible_trajectories, stroke_tokens};
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufReader;
use std::path::Path;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let data =
        fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&data)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut data = serde_json::to_string_pretty(value)?;
    data.push('\n');
    fs::write(path, data).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn read_corpus(dir: &Path) -> Result<CorpusFile, CliError> {
    let manifest = dir.join("corpus.json");
    let corpus: CorpusFile = read_json(&manifest)?;
    if corpus.schema != schema::CORPUS {
        return Err(invalid(format!(
            "{}: corpus schema {}, this build reads {}",
            manifest.display(),
            corpus.schema,
            schema::CORPUS
        )));
    }
    Ok(corpus)
}

pub fn gen(a: GenArgs) -> Result<Outcome, CliError> {
    let lib = Library::base();
    let (set_name, seed, items): (&str, u64, Vec<(String, Stimulus)>) = match a.set {
        SetName::One | SetName::Two => {
            let (id, default_seed, label) = match a.set {
                SetName::One => (SetId::Train1, stimuli::SET1_SEED, "train1"),
                _ => (SetId::Train2, stimuli::SET2_SEED, "train2"),
            };
            let seed = a.seed.unwrap_or(default_seed);
            if a.count == 0 {
                return Err(invalid("--count must be at least 1"));
            }
            let stims = stimuli::train_set(id, seed, a.count, &[]);
            let items = stims
                .into_iter()
                .enumerate()
                .map(|(i, s)| (format!("{label}-{i:02}"), s))
                .collect();
            (label, seed, items)
        }
        SetName::Test => {
            let items = stimuli::catalog(&lib)
                .into_iter()
                .map(|t| (t.name, t.stimulus))
                .collect();
            ("test", 0, items)
        }
    };

    fs::create_dir_all(&a.out).map_err(|e| invalid(format!("{}: {e}", a.out.display())))?;
    let cfg = RunConfig::default();
    for (id, stim) in &items {
        let img = stimuli::render_stimulus(&lib, &cfg.render, stim);
        let path = a.out.join(format!("{id}.pgm"));
        fs::write(&path, img.to_pgm()).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    }
    let manifest = CorpusFile {
        schema: schema::CORPUS,
        set: set_name.to_string(),
        seed,
        items: items
            .into_iter()
            .map(|(id, stimulus)| CorpusItem { id, stimulus })
            .collect(),
    };
    write_json(&a.out.join("corpus.json"), &manifest)?;
    println!("{} images in {}", manifest.items.len(), a.out.display());
    Ok(Outcome::Done)
}

pub fn train(a: TrainArgs) -> Result<Outcome, CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let mut cfg = RunConfig::default();
    cfg.seed = a.seed;
    cfg.cycles = a.cycles;
    cfg.beam_size = a.beam;
    cfg.dream_count = a.dreams;
    cfg.explore = Budget {
        timeout_sec: a.timeout,
        max_programs: a.max_programs,
    };
    if a.beam == 0 {
        return Err(invalid("--beam must be at least 1"));
    }

    let lib = Library::base();
    let images: Vec<_> = corpus
        .items
        .iter()
        .map(|it| stimuli::render_stimulus(&lib, &cfg.render, &it.stimulus))
        .collect();

    let mut rows: Vec<induction::CycleMetrics> = Vec::new();
    let (state, metrics) = induction::train_loop(&images, &cfg, |st, m| {
        println!(
            "cycle {:2}: solved {}/{}, library {}, objective {:.1} -> {:.1}",
            m.cycle,
            m.solved,
            st.beams.len(),
            m.library_size,
            m.dl_before,
            m.dl_after
        );
        rows.push(m.clone());
    })?;

    write_json(&a.out, &checkpoint::save(&state))?;
    let mut csv = csv::Writer::from_path(a.out.with_extension("metrics.csv"))
        .map_err(|e| invalid(e.to_string()))?;
    csv.write_record([
        "cycle",
        "solved",
        "newly_solved",
        "matches_found",
        "library_size",
        "dl_before",
        "dl_after",
        "q_initial_loss",
        "q_final_loss",
        "dreams",
        "seconds",
    ])
    .map_err(|e| invalid(e.to_string()))?;
    for m in &metrics {
        csv.write_record([
            m.cycle.to_string(),
            m.solved.to_string(),
            m.newly_solved.to_string(),
            m.matches_found.to_string(),
            m.library_size.to_string(),
            format!("{:.6}", m.dl_before),
            format!("{:.6}", m.dl_after),
            format!("{:.6}", m.q_initial_loss),
            format!("{:.6}", m.q_final_loss),
            m.dreams.to_string(),
            format!("{:.3}", m.seconds),
        ])
        .map_err(|e| invalid(e.to_string()))?;
    }
    csv.flush().map_err(|e| invalid(e.to_string()))?;
    write_json(
        &a.out.with_extension("manifest.json"),
        &TrainManifest {
            schema: schema::CHECKPOINT,
            corpus: a.corpus.display().to_string(),
            config: cfg,
        },
    )?;
    println!(
        "{} solved of {}, checkpoint {}",
        state.solved_count(),
        state.beams.len(),
        a.out.display()
    );
    Ok(Outcome::Done)
}

pub fn solve(a: SolveArgs) -> Result<Outcome, CliError> {
    let state = load_ckpt(&a.ckpt)?;
    let corpus = read_corpus(&a.images)?;
    if a.top == 0 {
        return Err(invalid("--top must be at least 1"));
    }
    let cfg = RunConfig::default();
    let budget = Budget {
        timeout_sec: a.timeout,
        max_programs: a.max_programs,
    };
    let lib = state.grammar.lib();

    let mut items = Vec::with_capacity(corpus.items.len());
    let mut unsolved = 0usize;
    for it in &corpus.items {
        let img = stimuli::render_stimulus(lib, &cfg.render, &it.stimulus);
        let (ranked, _) = induction::solve(&state.grammar, &state.q, &img, &cfg, &budget, a.top);
        let solved = ranked.first().is_some_and(|(_, s)| s.distance == 0.0);
        if !solved {
            unsolved += 1;
        }
        items.push(SolvedItem {
            id: it.id.clone(),
            grid: it.stimulus.grid,
            solved,
            programs: ranked
                .into_iter()
                .map(|(_, s)| ProgramScore {
                    text: s.text,
                    log_prior: s.log_prior,
                    distance: s.distance,
                    score: s.score,
                })
                .collect(),
        });
    }
    let n = items.len();
    write_json(
        &a.out,
        &SolvedFile {
            schema: schema::CHECKPOINT,
            ckpt: a.ckpt.display().to_string(),
            items,
        },
    )?;
    if unsolved > 0 {
        return Ok(Outcome::Partial(format!(
            "{unsolved} of {n} images have no exact program within budget; kept best partials"
        )));
    }
    println!("solved all {n} images");
    Ok(Outcome::Done)
}

pub fn ground(a: GroundArgs) -> Result<Outcome, CliError> {
    let lib = match &a.ckpt {
        Some(p) => load_ckpt(p)?.grammar.lib().clone(),
        None => Library::base(),
    };
    let solved: SolvedFile = read_json(&a.programs)?;
    let mut items = Vec::new();
    for it in &solved.items {
        let Some(top) = it.programs.first() else { continue };
        let p = parse(&lib, &top.text, &Ty::Drawing)?;
        let trajectories = admissible_trajectories(&lib, &p, &it.grid)?
            .into_iter()
            .map(|t| t.with_image(&it.id))
            .collect();
        items.push(GroundedItem {
            id: it.id.clone(),
            program: top.text.clone(),
            trajectories,
        });
    }
    let n = items.len();
    write_json(&a.out, &GroundedFile { schema: schema::CHECKPOINT, items })?;
    println!("grounded {n} programs");
    Ok(Outcome::Done)
}

/// Traces grouped by subject, sorted for deterministic output order.
fn by_subject(traces: Vec<RawTrace>) -> BTreeMap<String, (u8, Vec<RawTrace>)> {
    let mut map: BTreeMap<String, (u8, Vec<RawTrace>)> = BTreeMap::new();
    for t in traces {
        let e = map.entry(t.subject_id.clone()).or_insert((t.group, Vec::new()));
        e.1.push(t);
    }
    map
}

fn read_trace_file(path: &Path) -> Result<Vec<RawTrace>, CliError> {
    let file = fs::File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(behavior::read_traces(BufReader::new(file))?)
}

/// Grid lookup for traces: per-image grids from a corpus when one is given,
/// the test catalog's grid otherwise.
struct Grids(Option<HashMap<String, GridSpec>>);

impl Grids {
    fn load(images: &Option<std::path::PathBuf>) -> Result<Grids, CliError> {
        Ok(Grids(match images {
            None => None,
            Some(dir) => Some(
                read_corpus(dir)?
                    .items
                    .into_iter()
                    .map(|it| (it.id, it.stimulus.grid))
                    .collect(),
            ),
        }))
    }

    fn of(&self, image_id: &str) -> Result<GridSpec, CliError> {
        match &self.0 {
            None => Ok(stimuli::CATALOG_GRID),
            Some(map) => map.get(image_id).copied().ok_or_else(|| {
                invalid(format!("image {image_id} is not in the given corpus"))
            }),
        }
    }
}

/// One subject's choice trials: each drawn trajectory against every ordering
/// of its own tokens.
fn subject_trials(traces: &[RawTrace], grids: &Grids, seed: u64) -> Result<Vec<FitTrial>, CliError> {
    let mut trials = Vec::with_capacity(traces.len());
    for t in traces {
        let (traj, _) = behavior::trace_trajectory(t, &grids.of(&t.image_id)?)?;
        if traj.tokens.is_empty() {
            continue;
        }
        let candidates = harness::permutations_of(&traj.tokens, &t.image_id, seed);
        trials.push(FitTrial { candidates, chosen: traj });
    }
    Ok(trials)
}

pub fn fit_theta(a: FitThetaArgs) -> Result<Outcome, CliError> {
    let mode = if a.extended { FeatureMode::Extended6 } else { FeatureMode::Basic4 };
    if a.lambda < 0.0 {
        return Err(invalid("--lambda must be non-negative"));
    }
    let grouped = by_subject(read_trace_file(&a.traces)?);
    if grouped.is_empty() {
        return Err(invalid("trace file holds no traces"));
    }
    let grids = Grids::load(&a.images)?;
    let mut subjects = Vec::with_capacity(grouped.len());
    for (subject, (_, traces)) in &grouped {
        let trials = subject_trials(traces, &grids, a.seed)?;
        let fit = motor::fit_theta(subject, &trials, mode, a.lambda)?;
        subjects.push(fit.weights);
    }
    let general = motor::general_theta(&subjects)?;
    write_json(
        &a.out,
        &ThetaFile {
            schema: schema::THETA,
            lambda: a.lambda,
            subjects,
            general,
        },
    )?;
    println!("fit {} subjects", grouped.len());
    Ok(Outcome::Done)
}

fn theta_general(path: &Path) -> Result<CostWeights, CliError> {
    let file: ThetaFile = read_json(path)?;
    if file.schema != schema::THETA {
        return Err(invalid(format!(
            "{}: theta schema {}, this build reads {}",
            path.display(),
            file.schema,
            schema::THETA
        )));
    }
    Ok(file.general)
}

pub fn score(a: ScoreArgs) -> Result<Outcome, CliError> {
    let theta = a.theta.as_ref().map(|p| theta_general(p)).transpose()?;
    let need = |flag: &str, have: bool| {
        if have {
            Ok(())
        } else {
            Err(invalid(format!("variant requires {flag}")))
        }
    };
    let programs_of = |a: &ScoreArgs| -> Result<(Library, HashMap<String, _>), CliError> {
        need("--ckpt", a.ckpt.is_some())?;
        need("--programs", a.programs.is_some())?;
        let lib = load_ckpt(a.ckpt.as_ref().unwrap())?.grammar.lib().clone();
        let solved: SolvedFile = read_json(a.programs.as_ref().unwrap())?;
        let mut map = HashMap::new();
        for it in &solved.items {
            if a.exclude_unsolved && !it.solved {
                continue;
            }
            if let Some(top) = it.programs.first() {
                map.insert(it.id.clone(), parse(&lib, &top.text, &Ty::Drawing)?);
            }
        }
        Ok((lib, map))
    };
    let variant = match a.variant {
        VariantName::Null => Variant::null(),
        VariantName::Mc => {
            need("--theta", theta.is_some())?;
            Variant::mc(theta.as_ref().unwrap().theta.clone())
        }
        VariantName::Pi => {
            let (lib, programs) = programs_of(&a)?;
            Variant::pi(lib, programs)
        }
        VariantName::Hm => {
            need("--theta", theta.is_some())?;
            let (lib, programs) = programs_of(&a)?;
            Variant::hm(lib, theta.as_ref().unwrap().theta.clone(), programs)
        }
    };

    let corpus = read_corpus(&a.images)?;
    let mut cases = Vec::with_capacity(corpus.items.len());
    for it in &corpus.items {
        let strokes = stimuli::stimulus_strokes(&it.stimulus);
        let tokens = stroke_tokens(&strokes, &it.stimulus.grid)?;
        cases.push(harness::TestCase {
            image_id: it.id.clone(),
            grid: it.stimulus.grid,
            tokens,
        });
    }

    let grouped = by_subject(read_trace_file(&a.humans)?);
    let mut csv = csv::Writer::from_path(&a.out).map_err(|e| invalid(e.to_string()))?;
    csv.write_record(["subject", "group", "image", "variant", "distance", "candidates"])
        .map_err(|e| invalid(e.to_string()))?;
    let variant_name = format!("{:?}", variant.kind).to_lowercase();
    let mut skipped = 0usize;
    let mut rows = 0usize;
    for (subject, (group, traces)) in &grouped {
        for trace in traces {
            let Some(case) = cases.iter().find(|c| c.image_id == trace.image_id) else {
                return Err(invalid(format!(
                    "trace {subject}/{} has no corpus image",
                    trace.image_id
                )));
            };
            let (traj, _) = behavior::trace_trajectory(trace, &case.grid)?;
            let cands = match harness::candidate_set(&variant, case, a.seed) {
                Ok(c) => c,
                Err(harness::HarnessError::Unsolved(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let d = harness::expected_distance(&traj, &cands);
            csv.write_record([
                subject.clone(),
                group.to_string(),
                trace.image_id.clone(),
                variant_name.clone(),
                format!("{d:.6}"),
                cands.trajs.len().to_string(),
            ])
            .map_err(|e| invalid(e.to_string()))?;
            rows += 1;
        }
    }
    csv.flush().map_err(|e| invalid(e.to_string()))?;
    if rows == 0 {
        return Err(invalid("no trace matched a scoreable corpus image"));
    }
    if skipped > 0 {
        return Ok(Outcome::Partial(format!(
            "{rows} rows written; {skipped} traces skipped on images without solved programs"
        )));
    }
    println!("{rows} rows");
    Ok(Outcome::Done)
}

pub fn dream(a: DreamArgs) -> Result<Outcome, CliError> {
    let state = load_ckpt(&a.ckpt)?;
    let mut cfg = RunConfig::default();
    cfg.seed = a.seed;
    cfg.dream_count = a.count;
    let dreams = induction::dream_set(&state.grammar, &cfg, state.cycle);
    fs::create_dir_all(&a.out).map_err(|e| invalid(format!("{}: {e}", a.out.display())))?;
    let lib = state.grammar.lib();
    let mut listing = Vec::with_capacity(dreams.len());
    for (i, (p, img)) in dreams.iter().enumerate() {
        let path = a.out.join(format!("dream-{i:04}.pgm"));
        fs::write(&path, img.to_pgm()).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        listing.push(serde_json::json!({
            "index": i,
            "text": limn_core::dsl::text::to_text(lib, p),
        }));
    }
    write_json(
        &a.out.join("dreams.json"),
        &serde_json::json!({ "schema": schema::CHECKPOINT, "dreams": listing }),
    )?;
    println!("{} dreams in {}", dreams.len(), a.out.display());
    Ok(Outcome::Done)
}

pub fn render(a: RenderArgs) -> Result<Outcome, CliError> {
    let lib = match &a.ckpt {
        Some(p) => load_ckpt(p)?.grammar.lib().clone(),
        None => Library::base(),
    };
    let text = fs::read_to_string(&a.program)
        .map_err(|e| invalid(format!("{}: {e}", a.program.display())))?;
    let p = parse(&lib, text.trim(), &Ty::Drawing)?;
    let s = strokes(&lib, &p)?;
    let cfg = RunConfig::default().render;
    let ext = a.out.extension().and_then(|e| e.to_str()).unwrap_or("");
    let bytes: Vec<u8> = match ext {
        "pgm" => limn_core::dsl::raster::render(&s, &cfg).to_pgm(),
        "svg" => to_svg(&s, &cfg).into_bytes(),
        other => {
            return Err(invalid(format!(
                "unsupported output extension {other:?} (use .pgm or .svg)"
            )))
        }
    };
    fs::write(&a.out, bytes).map_err(|e| invalid(format!("{}: {e}", a.out.display())))?;
    Ok(Outcome::Done)
}

pub fn analyze(a: AnalyzeArgs) -> Result<Outcome, CliError> {
    if a.lambda < 0.0 {
        return Err(invalid("--lambda must be non-negative"));
    }
    let grouped = by_subject(read_trace_file(&a.traces)?);
    if grouped.is_empty() {
        return Err(invalid("trace file holds no traces"));
    }
    let grids = Grids::load(&a.images)?;
    let mut csv = csv::Writer::from_path(&a.out).map_err(|e| invalid(e.to_string()))?;
    let mut header = vec![
        "subject".to_string(),
        "group".to_string(),
        "traces".to_string(),
        "excluded_strokes".to_string(),
        "vertical_score".to_string(),
        "strategy".to_string(),
    ];
    header.extend(motor::FEATURE_NAMES.iter().map(|n| format!("theta_{n}")));
    csv.write_record(&header).map_err(|e| invalid(e.to_string()))?;

    for (subject, (group, traces)) in &grouped {
        let mut trajs = Vec::with_capacity(traces.len());
        let mut excluded = 0usize;
        for t in traces {
            let (traj, ex) = behavior::trace_trajectory(t, &grids.of(&t.image_id)?)?;
            excluded += ex;
            trajs.push(traj);
        }
        let vscore = behavior::vertical_score(&trajs)?;
        let trials = subject_trials(traces, &grids, a.seed)?;
        let fit = motor::fit_theta(subject, &trials, FeatureMode::Extended6, a.lambda)?;
        let strategy =
            motor::assign_strategy(&fit.weights, &motor::StrategyThresholds::default());
        let mut row = vec![
            subject.clone(),
            group.to_string(),
            traces.len().to_string(),
            excluded.to_string(),
            format!("{vscore:.6}"),
            format!("{strategy:?}"),
        ];
        row.extend(fit.weights.theta.iter().map(|v| format!("{v:.6}")));
        csv.write_record(&row).map_err(|e| invalid(e.to_string()))?;
    }
    csv.flush().map_err(|e| invalid(e.to_string()))?;
    println!("{} subjects", grouped.len());
    Ok(Outcome::Done)
}
