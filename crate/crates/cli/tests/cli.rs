//! End-to-end checks of the `limn` binary: exit codes, output files, and
//! byte-level determinism across reruns.

use limn_core::behavior;
use limn_core::stimuli::{GridSpec, Seg, Stimulus};
use limn_core::trajectory::Trajectory;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn limn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limn"))
        .args(args)
        .output()
        .expect("limn should spawn")
}

fn run(args: &[&str]) -> Output {
    let out = limn(args);
    assert!(
        out.status.success(),
        "limn {:?} failed:\n{}{}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("limn should exit, not die on a signal")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// One image: a bare two-line grating, the cheapest-to-solve stimulus.
fn grating_corpus(dir: &Path) {
    let stim = Stimulus::with_segs(
        GridSpec { n_rows: 3, n_cols: 2 },
        vec![Seg::vline(0, 3), Seg::vline(1, 3)],
        Vec::new(),
    );
    let corpus = serde_json::json!({
        "schema": 1,
        "set": "custom",
        "seed": 0,
        "items": [{ "id": "g2", "stimulus": stim }],
    });
    fs::write(
        dir.join("corpus.json"),
        serde_json::to_string_pretty(&corpus).unwrap(),
    )
    .unwrap();
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

#[test]
fn version_names_every_schema() {
    let out = run(&["--version"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for part in ["corpus", "checkpoint", "traces", "theta"] {
        assert!(text.contains(part), "--version should mention {part}: {text}");
    }
}

#[test]
fn gen_test_corpus_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run(&["gen", "--set", "test", "--out", &path(&a, "")]);
    run(&["gen", "--set", "test", "--out", &path(&b, "")]);

    let manifest = json(&a.path().join("corpus.json"));
    let items = manifest["items"].as_array().unwrap();
    assert_eq!(items.len(), 18, "the test catalog holds 18 items");
    for it in items {
        let id = it["id"].as_str().unwrap();
        let pa = fs::read(a.path().join(format!("{id}.pgm"))).unwrap();
        let pb = fs::read(b.path().join(format!("{id}.pgm"))).unwrap();
        assert_eq!(pa, pb, "{id}.pgm should not vary between runs");
    }
    assert_eq!(
        fs::read(a.path().join("corpus.json")).unwrap(),
        fs::read(b.path().join("corpus.json")).unwrap(),
    );
}

#[test]
fn gen_labels_train_items_by_set_and_index() {
    let dir = TempDir::new().unwrap();
    run(&["gen", "--set", "1", "--count", "5", "--out", &path(&dir, "")]);
    let manifest = json(&dir.path().join("corpus.json"));
    assert_eq!(manifest["set"], "train1");
    let ids: Vec<&str> = manifest["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|it| it["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["train1-00", "train1-01", "train1-02", "train1-03", "train1-04"]);
}

#[test]
fn gen_rejects_an_empty_request() {
    let dir = TempDir::new().unwrap();
    let out = limn(&["gen", "--set", "1", "--count", "0", "--out", &path(&dir, "")]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn zero_jobs_is_a_validation_error() {
    let out = limn(&["--jobs", "0", "gen", "--set", "test", "--out", "/tmp/unused"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn render_matches_the_committed_golden() {
    let dir = TempDir::new().unwrap();
    let prog = dir.path().join("grating2.limn");
    fs::write(
        &prog,
        "(repeat (reflect line 0.7853981633974483) 2 (affine -1 -1 3.141592653589793 1 trs))\n",
    )
    .unwrap();
    let out = path(&dir, "out.pgm");
    run(&["render", "--program", &prog.display().to_string(), "--out", &out]);
    assert_eq!(
        fs::read(&out).unwrap(),
        include_bytes!("golden/grating2.pgm"),
        "render output drifted from the golden raster"
    );
}

#[test]
fn render_rejects_unknown_extensions() {
    let dir = TempDir::new().unwrap();
    let prog = dir.path().join("p.limn");
    fs::write(&prog, "line\n").unwrap();
    let out = limn(&[
        "render",
        "--program",
        &prog.display().to_string(),
        "--out",
        &path(&dir, "out.bmp"),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn train_with_zero_cycles_saves_the_base_library() {
    let dir = TempDir::new().unwrap();
    grating_corpus(dir.path());
    let ckpt = path(&dir, "ckpt.json");
    run(&["train", "--corpus", &path(&dir, ""), "--cycles", "0", "--out", &ckpt]);
    let saved = json(Path::new(&ckpt));
    assert_eq!(saved["cycle"], 0);
    assert_eq!(saved["entries"].as_array().unwrap().len(), 0);
    assert_eq!(saved["beams"], serde_json::json!([[]]));
    assert!(dir.path().join("ckpt.metrics.csv").exists());
    assert!(dir.path().join("ckpt.manifest.json").exists());
}

#[test]
fn score_without_theta_rejects_the_hm_variant() {
    let dir = TempDir::new().unwrap();
    grating_corpus(dir.path());
    fs::write(dir.path().join("traces.jsonl"), "").unwrap();
    let out = limn(&[
        "score",
        "--variant",
        "hm",
        "--humans",
        &path(&dir, "traces.jsonl"),
        "--images",
        &path(&dir, ""),
        "--out",
        &path(&dir, "scores.csv"),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn exhausted_budgets_exit_with_partial_results() {
    let dir = TempDir::new().unwrap();
    grating_corpus(dir.path());
    let ckpt = path(&dir, "ckpt.json");
    run(&["train", "--corpus", &path(&dir, ""), "--cycles", "0", "--out", &ckpt]);
    let out = limn(&[
        "solve",
        "--ckpt",
        &ckpt,
        "--images",
        &path(&dir, ""),
        "--max-programs",
        "1000",
        "--out",
        &path(&dir, "solved.json"),
    ]);
    assert_eq!(exit_code(&out), 3, "a 1000-program budget cannot solve the grating");
    let solved = json(&dir.path().join("solved.json"));
    assert_eq!(solved["items"][0]["solved"], false);
}

#[test]
fn the_pipeline_runs_from_corpus_to_scores() {
    let dir = TempDir::new().unwrap();
    grating_corpus(dir.path());
    let corpus = path(&dir, "");
    let ckpt = path(&dir, "ckpt.json");
    let solved = path(&dir, "solved.json");
    let grounded = path(&dir, "grounded.json");
    let traces = path(&dir, "traces.jsonl");
    let theta = path(&dir, "theta.json");

    run(&["train", "--corpus", &corpus, "--cycles", "0", "--out", &ckpt]);
    run(&[
        "solve",
        "--ckpt",
        &ckpt,
        "--images",
        &corpus,
        "--timeout",
        "60",
        "--max-programs",
        "8000000",
        "--out",
        &solved,
    ]);
    let sv = json(Path::new(&solved));
    assert_eq!(sv["items"][0]["solved"], true, "the bare grating should solve exactly");
    assert_eq!(sv["items"][0]["programs"][0]["distance"], 0.0);

    run(&["ground", "--programs", &solved, "--out", &grounded]);
    let gr = json(Path::new(&grounded));
    let trajs: Vec<Trajectory> =
        serde_json::from_value(gr["items"][0]["trajectories"].clone()).unwrap();
    assert!(!trajs.is_empty());
    assert!(trajs.iter().all(|t| t.tokens.len() == 2), "two strokes per admissible pass");

    let mut lines = String::new();
    for (i, t) in trajs.iter().enumerate() {
        let raw = behavior::synthesize_trace(t, &format!("s{i}"), 1);
        lines.push_str(&serde_json::to_string(&raw).unwrap());
        lines.push('\n');
    }
    fs::write(&traces, lines).unwrap();

    run(&[
        "score",
        "--variant",
        "null",
        "--humans",
        &traces,
        "--images",
        &corpus,
        "--out",
        &path(&dir, "null.csv"),
    ]);
    let csv = fs::read_to_string(dir.path().join("null.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + trajs.len(), "one row per trace plus the header");

    run(&["fit-theta", "--traces", &traces, "--images", &corpus, "--out", &theta]);
    let th = json(Path::new(&theta));
    assert_eq!(th["general"]["theta"].as_array().unwrap().len(), 4);

    run(&[
        "score",
        "--variant",
        "hm",
        "--ckpt",
        &ckpt,
        "--theta",
        &theta,
        "--programs",
        &solved,
        "--humans",
        &traces,
        "--images",
        &corpus,
        "--out",
        &path(&dir, "hm.csv"),
    ]);

    run(&[
        "analyze",
        "--traces",
        &traces,
        "--images",
        &corpus,
        "--out",
        &path(&dir, "analyze.csv"),
    ]);
    let head = fs::read_to_string(dir.path().join("analyze.csv")).unwrap();
    assert!(head.starts_with("subject,group,traces,"), "unexpected header: {head}");
}

#[test]
fn dreams_from_a_base_checkpoint_are_reproducible() {
    let dir = TempDir::new().unwrap();
    grating_corpus(dir.path());
    let ckpt = path(&dir, "ckpt.json");
    run(&["train", "--corpus", &path(&dir, ""), "--cycles", "0", "--out", &ckpt]);
    let d1 = TempDir::new().unwrap();
    let d2 = TempDir::new().unwrap();
    run(&["dream", "--ckpt", &ckpt, "--count", "8", "--out", &path(&d1, "")]);
    run(&["dream", "--ckpt", &ckpt, "--count", "8", "--out", &path(&d2, "")]);
    assert_eq!(
        fs::read(d1.path().join("dreams.json")).unwrap(),
        fs::read(d2.path().join("dreams.json")).unwrap(),
    );
}
