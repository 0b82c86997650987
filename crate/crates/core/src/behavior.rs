//! Raw touch traces: stroke segmentation, token classification, and
//! group-level readouts.
//!
//! A raw trace is a timestamped (x, y, touching) stream from one subject
//! drawing one image. Segmentation splits it at no-touch gaps, each touching
//! run becomes a stroke, and each stroke is classified into the same grid
//! tokens that program grounding produces, so human and model trajectories
//! land in one shared vocabulary. The vertical score summarizes how much of
//! a trajectory moves within columns rather than along rows.

use crate::geom::{v, Stroke, Vec2};
use crate::stimuli::{GridSpec, ObjKind, COL_STEP, ROW_STEP};
use crate::trajectory::{stroke_token, GroundError, StrokeToken, Trajectory};
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use thiserror::Error;

/// Touching runs shorter than this many samples are discarded as noise.
pub const MIN_SAMPLES: usize = 3;

/// A closed shape: endpoint gap below this fraction of path length.
const CLOSURE_RATIO: f64 = 0.3;

/// A line's dominant displacement axis must exceed the other axis by this
/// factor, else the stroke is ambiguous.
const AXIS_MARGIN: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceSample {
    pub x: f64,
    pub y: f64,
    pub t_millis: u64,
    pub touching: bool,
}

/// One subject drawing one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawTrace {
    pub subject_id: String,
    pub image_id: String,
    /// Training group of the subject: 1 or 2.
    pub group: u8,
    pub samples: Vec<TraceSample>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("timestamps must increase strictly (sample {index})")]
    NonIncreasingTime { index: usize },
    #[error("no touching run of at least {MIN_SAMPLES} samples")]
    NoStrokes,
    #[error("stroke is neither closed nor axis-dominant")]
    Ambiguous,
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("no defined transitions, vertical score is undefined")]
    NoTransitions,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// Maximal touching runs, in order; runs shorter than [`MIN_SAMPLES`] are
/// dropped.
pub fn segment_strokes(trace: &RawTrace) -> Result<Vec<Vec<Vec2>>, TraceError> {
    for (i, w) in trace.samples.windows(2).enumerate() {
        if w[1].t_millis <= w[0].t_millis {
            return Err(TraceError::NonIncreasingTime { index: i + 1 });
        }
    }
    let mut runs: Vec<Vec<Vec2>> = Vec::new();
    let mut current: Vec<Vec2> = Vec::new();
    for s in &trace.samples {
        if s.touching {
            current.push(v(s.x, s.y));
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.retain(|r| r.len() >= MIN_SAMPLES);
    if runs.is_empty() {
        return Err(TraceError::NoStrokes);
    }
    Ok(runs)
}

/// Classifies one stroke's points into a grid token: a closed path is a
/// circle (center and radius from the point cloud), anything else is a line
/// through its endpoints, upgraded to a token by the usual grid snapping.
pub fn classify_stroke(points: &[Vec2], grid: &GridSpec) -> Result<StrokeToken, TraceError> {
    let first = points[0];
    let last = points[points.len() - 1];
    let path_len: f64 = points.windows(2).map(|w| w[0].dist(w[1])).sum();
    if path_len == 0.0 {
        return Err(TraceError::Ambiguous);
    }
    if first.dist(last) < CLOSURE_RATIO * path_len {
        let n = points.len() as f64;
        let c = v(
            points.iter().map(|p| p.x).sum::<f64>() / n,
            points.iter().map(|p| p.y).sum::<f64>() / n,
        );
        let r = points.iter().map(|p| p.dist(c)).sum::<f64>() / n;
        return Ok(stroke_token(&Stroke::Circle { c, r }, grid)?);
    }
    let dx = (last.x - first.x).abs();
    let dy = (last.y - first.y).abs();
    if dx.max(dy) < AXIS_MARGIN * dx.min(dy) {
        return Err(TraceError::Ambiguous);
    }
    Ok(stroke_token(&Stroke::Line { a: first, b: last }, grid)?)
}

/// Full pipeline from a raw trace to a trajectory. Ambiguous strokes are
/// excluded; the count of exclusions comes back alongside the result.
pub fn trace_trajectory(
    trace: &RawTrace,
    grid: &GridSpec,
) -> Result<(Trajectory, usize), TraceError> {
    let mut tokens = Vec::new();
    let mut excluded = 0usize;
    for run in segment_strokes(trace)? {
        match classify_stroke(&run, grid) {
            Ok(t) => tokens.push(t),
            Err(TraceError::Ambiguous) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((Trajectory::new(tokens).with_image(&trace.image_id), excluded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    Vertical,
    Horizontal,
    Undefined,
}

/// Same column is a vertical move, same row across columns a horizontal
/// one, anything diagonal undefined.
pub fn transition_class(a: &StrokeToken, b: &StrokeToken) -> Transition {
    if a.col == b.col {
        Transition::Vertical
    } else if a.row == b.row {
        Transition::Horizontal
    } else {
        Transition::Undefined
    }
}

/// V / (V + H) where V and H are the mean counts of vertical and horizontal
/// transitions per trajectory.
pub fn vertical_score(trajs: &[Trajectory]) -> Result<f64, TraceError> {
    let mut verticals = 0.0;
    let mut horizontals = 0.0;
    for t in trajs {
        for w in t.tokens.windows(2) {
            match transition_class(&w[0], &w[1]) {
                Transition::Vertical => verticals += 1.0,
                Transition::Horizontal => horizontals += 1.0,
                Transition::Undefined => {}
            }
        }
    }
    if trajs.is_empty() || verticals + horizontals == 0.0 {
        return Err(TraceError::NoTransitions);
    }
    let n = trajs.len() as f64;
    let v_mean = verticals / n;
    let h_mean = horizontals / n;
    Ok(v_mean / (v_mean + h_mean))
}

/// One grid-preserving quarter turn clockwise: row coordinates become
/// column coordinates and vice versa, so the turned points land on the
/// transposed grid exactly as [`crate::stimuli::rotate`] moves the cells.
fn turn_point(grid: &GridSpec, x: f64, y: f64) -> (f64, f64) {
    let u = x / COL_STEP;
    let w = y / ROW_STEP;
    (
        ((grid.n_rows - 1) as f64 - w) * COL_STEP,
        u * ROW_STEP,
    )
}

/// Rotates a trace by quarter turns about the grid, preserving timestamps
/// and touch state.
pub fn rotate_trace(trace: &RawTrace, grid: &GridSpec, quarter_turns: usize) -> RawTrace {
    let mut out = trace.clone();
    let mut grid = *grid;
    for _ in 0..quarter_turns % 4 {
        for s in &mut out.samples {
            let (x, y) = turn_point(&grid, s.x, s.y);
            s.x = x;
            s.y = y;
        }
        grid = GridSpec {
            n_rows: grid.n_cols,
            n_cols: grid.n_rows,
        };
    }
    out
}

/// Renders a trajectory back into a raw trace: each token is walked as a
/// polyline (lines end to end, circles as a full loop from the top), with a
/// pen lift between tokens.
pub fn synthesize_trace(
    traj: &Trajectory,
    subject_id: &str,
    group: u8,
) -> RawTrace {
    const LINE_SAMPLES: usize = 12;
    const CIRCLE_SAMPLES: usize = 24;
    const STEP_MILLIS: u64 = 10;
    let mut samples = Vec::new();
    let mut t = 0u64;
    for tok in &traj.tokens {
        let points: Vec<Vec2> = match tok.kind {
            ObjKind::Circle => {
                let r = tok.center.y - tok.start.y;
                (0..CIRCLE_SAMPLES)
                    .map(|k| {
                        let phi = 2.0 * std::f64::consts::PI * k as f64 / CIRCLE_SAMPLES as f64;
                        v(
                            tok.center.x + r * phi.sin(),
                            tok.center.y - r * phi.cos(),
                        )
                    })
                    .collect()
            }
            _ => {
                let end = v(
                    2.0 * tok.center.x - tok.start.x,
                    2.0 * tok.center.y - tok.start.y,
                );
                (0..LINE_SAMPLES)
                    .map(|k| {
                        let s = k as f64 / (LINE_SAMPLES - 1) as f64;
                        v(
                            tok.start.x + s * (end.x - tok.start.x),
                            tok.start.y + s * (end.y - tok.start.y),
                        )
                    })
                    .collect()
            }
        };
        for p in &points {
            samples.push(TraceSample {
                x: p.x,
                y: p.y,
                t_millis: t,
                touching: true,
            });
            t += STEP_MILLIS;
        }
        let lift = points[points.len() - 1];
        samples.push(TraceSample {
            x: lift.x,
            y: lift.y,
            t_millis: t,
            touching: false,
        });
        t += 5 * STEP_MILLIS;
    }
    RawTrace {
        subject_id: subject_id.to_string(),
        image_id: traj.image_id.clone(),
        group,
        samples,
    }
}

/// Reads traces from JSON lines, one trace per line; blank lines skipped.
pub fn read_traces<R: BufRead>(reader: R) -> Result<Vec<RawTrace>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace =
            serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?;
        out.push(trace);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::{object_stroke, Object};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const GRID: GridSpec = GridSpec { n_rows: 3, n_cols: 5 };

    fn touch(samples: &[(f64, f64, u64, bool)]) -> RawTrace {
        RawTrace {
            subject_id: "s1".into(),
            image_id: "img".into(),
            group: 1,
            samples: samples
                .iter()
                .map(|&(x, y, t_millis, touching)| TraceSample { x, y, t_millis, touching })
                .collect(),
        }
    }

    fn token_at(kind: ObjKind, row: usize, col: usize) -> StrokeToken {
        stroke_token(&object_stroke(&GRID, &Object { row, col, kind }), &GRID).unwrap()
    }

    #[test]
    fn one_continuous_touch_is_one_stroke() {
        let t = touch(&[
            (0.0, 0.0, 0, true),
            (0.1, 0.0, 10, true),
            (0.2, 0.0, 20, true),
            (0.3, 0.0, 30, true),
        ]);
        assert_eq!(segment_strokes(&t).unwrap().len(), 1);
    }

    #[test]
    fn touch_lift_touch_is_two_strokes() {
        let t = touch(&[
            (0.0, 0.0, 0, true),
            (0.1, 0.0, 10, true),
            (0.2, 0.0, 20, true),
            (0.2, 0.0, 30, false),
            (1.0, 0.0, 40, true),
            (1.1, 0.0, 50, true),
            (1.2, 0.0, 60, true),
        ]);
        assert_eq!(segment_strokes(&t).unwrap().len(), 2);
    }

    #[test]
    fn short_runs_are_noise_and_all_noise_is_an_error() {
        let t = touch(&[
            (0.0, 0.0, 0, true),
            (0.1, 0.0, 10, true),
            (0.1, 0.0, 20, false),
            (0.0, 0.5, 30, true),
            (0.3, 0.5, 40, true),
            (0.6, 0.5, 50, true),
        ]);
        // The two-sample run disappears, the three-sample run stays.
        assert_eq!(segment_strokes(&t).unwrap().len(), 1);
        let noise = touch(&[(0.0, 0.0, 0, true), (0.1, 0.0, 10, true)]);
        assert!(matches!(segment_strokes(&noise), Err(TraceError::NoStrokes)));
    }

    #[test]
    fn backwards_timestamps_are_rejected() {
        let t = touch(&[(0.0, 0.0, 10, true), (0.1, 0.0, 10, true), (0.2, 0.0, 30, true)]);
        assert!(matches!(
            segment_strokes(&t),
            Err(TraceError::NonIncreasingTime { index: 1 })
        ));
    }

    #[test]
    fn a_sampled_circle_classifies_as_a_circle() {
        let want = token_at(ObjKind::Circle, 1, 2);
        let trace = synthesize_trace(&Trajectory::new(vec![want]), "s", 1);
        let runs = segment_strokes(&trace).unwrap();
        let got = classify_stroke(&runs[0], &GRID).unwrap();
        assert_eq!(got.kind, ObjKind::Circle);
        assert_eq!(got.cell(), want.cell());
        assert_eq!(got.key(), want.key());
    }

    #[test]
    fn a_near_vertical_polyline_classifies_as_a_vertical_line() {
        let pts = vec![v(1.0, 0.0), v(1.02, 0.3), v(1.0, 0.6), v(1.05, 1.0)];
        let tok = classify_stroke(&pts, &GRID).unwrap();
        assert_eq!(tok.kind, ObjKind::VLine);
        assert_eq!((tok.row, tok.col), (1, 1));
    }

    #[test]
    fn a_diagonal_stroke_is_ambiguous() {
        let pts = vec![v(0.0, 0.0), v(0.2, 0.2), v(0.4, 0.4), v(0.5, 0.5)];
        assert!(matches!(
            classify_stroke(&pts, &GRID),
            Err(TraceError::Ambiguous)
        ));
    }

    #[test]
    fn twelve_gapped_token_paths_recover_twelve_strokes() {
        let mut tokens = Vec::new();
        for col in 0..4 {
            for (row, kind) in [(0, ObjKind::Circle), (1, ObjKind::VLine), (2, ObjKind::HLine)] {
                tokens.push(token_at(kind, row, col));
            }
        }
        let traj = Trajectory::new(tokens).with_image("twelve");
        let trace = synthesize_trace(&traj, "s", 1);
        assert_eq!(segment_strokes(&trace).unwrap().len(), 12);
        let (got, excluded) = trace_trajectory(&trace, &GRID).unwrap();
        assert_eq!(excluded, 0);
        assert_eq!(got.keys(), traj.keys());
        assert_eq!(got.image_id, "twelve");
    }

    #[test]
    fn jittered_strokes_classify_correctly_almost_always() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut ok = 0usize;
        let mut total = 0usize;
        for rep in 0..100 {
            for kind in [ObjKind::VLine, ObjKind::HLine, ObjKind::Circle] {
                let row = rep % 3;
                let col = rep % 5;
                let want = token_at(kind, row, col);
                let trace = synthesize_trace(&Trajectory::new(vec![want]), "s", 1);
                let mut pts: Vec<Vec2> = segment_strokes(&trace).unwrap().remove(0);
                for p in &mut pts {
                    p.x += noise.sample(&mut rng);
                    p.y += noise.sample(&mut rng);
                }
                total += 1;
                if let Ok(tok) = classify_stroke(&pts, &GRID) {
                    if tok.cell() == want.cell() {
                        ok += 1;
                    }
                }
            }
        }
        assert!(
            ok as f64 >= 0.99 * total as f64,
            "{ok}/{total} classified correctly"
        );
    }

    #[test]
    fn transition_classes_follow_the_grid() {
        let a = token_at(ObjKind::Circle, 0, 1);
        let b = token_at(ObjKind::Circle, 2, 1);
        assert_eq!(transition_class(&a, &b), Transition::Vertical);
        let c = token_at(ObjKind::VLine, 1, 0);
        let d = token_at(ObjKind::VLine, 1, 2);
        assert_eq!(transition_class(&c, &d), Transition::Horizontal);
        let e = token_at(ObjKind::HLine, 0, 0);
        let f = token_at(ObjKind::HLine, 2, 1);
        assert_eq!(transition_class(&e, &f), Transition::Undefined);
    }

    #[test]
    fn vertical_score_counts_transition_means() {
        let column: Vec<StrokeToken> = (0..3).map(|r| token_at(ObjKind::Circle, r, 0)).collect();
        let all_vertical = Trajectory::new(column);
        assert_relative_eq!(vertical_score(&[all_vertical.clone()]).unwrap(), 1.0);

        // Three vertical and one horizontal transition per task.
        let snake = Trajectory::new(vec![
            token_at(ObjKind::Circle, 0, 0),
            token_at(ObjKind::Circle, 1, 0),
            token_at(ObjKind::Circle, 2, 0),
            token_at(ObjKind::Circle, 2, 1),
            token_at(ObjKind::Circle, 1, 1),
        ]);
        assert_relative_eq!(
            vertical_score(&[snake.clone(), snake]).unwrap(),
            0.75
        );

        let lone = Trajectory::new(vec![token_at(ObjKind::Circle, 0, 0)]);
        assert!(matches!(
            vertical_score(&[lone]),
            Err(TraceError::NoTransitions)
        ));
        assert!(matches!(vertical_score(&[]), Err(TraceError::NoTransitions)));
    }

    #[test]
    fn four_quarter_turns_restore_the_trace() {
        let traj = Trajectory::new(vec![
            token_at(ObjKind::VLine, 0, 1),
            token_at(ObjKind::Circle, 2, 3),
        ]);
        let trace = synthesize_trace(&traj, "s", 1);
        let back = rotate_trace(&trace, &GRID, 4);
        for (a, b) in trace.samples.iter().zip(&back.samples) {
            assert_relative_eq!(a.x, b.x, epsilon = 1e-9);
            assert_relative_eq!(a.y, b.y, epsilon = 1e-9);
            assert_eq!(a.t_millis, b.t_millis);
            assert_eq!(a.touching, b.touching);
        }
    }

    #[test]
    fn a_quarter_turn_turns_vertical_strokes_flat() {
        let traj = Trajectory::new(vec![token_at(ObjKind::VLine, 1, 1)]);
        let trace = synthesize_trace(&traj, "s", 1);
        let turned = rotate_trace(&trace, &GRID, 1);
        let grid_after = GridSpec { n_rows: GRID.n_cols, n_cols: GRID.n_rows };
        let (t, _) = trace_trajectory(&turned, &grid_after).unwrap();
        assert_eq!(t.tokens[0].kind, ObjKind::HLine);
    }

    #[test]
    fn a_quarter_turn_flips_the_vertical_score() {
        // Column sweep plus one horizontal hop: V=4, H=1, no undefined moves.
        let mut tokens = Vec::new();
        for row in 0..3 {
            tokens.push(token_at(ObjKind::Circle, row, 0));
        }
        for row in (0..3).rev() {
            tokens.push(token_at(ObjKind::Circle, row, 1));
        }
        let traj = Trajectory::new(tokens).with_image("zigzag");
        let trace = synthesize_trace(&traj, "s", 1);
        let (t0, _) = trace_trajectory(&trace, &GRID).unwrap();
        let before = vertical_score(std::slice::from_ref(&t0)).unwrap();

        let turned = rotate_trace(&trace, &GRID, 1);
        let grid_after = GridSpec { n_rows: GRID.n_cols, n_cols: GRID.n_rows };
        let (t1, _) = trace_trajectory(&turned, &grid_after).unwrap();
        let after = vertical_score(std::slice::from_ref(&t1)).unwrap();
        assert_relative_eq!(after, 1.0 - before, epsilon = 1e-12);
    }

    #[test]
    fn json_lines_round_trip() {
        let traj = Trajectory::new(vec![token_at(ObjKind::HLine, 1, 2)]).with_image("img-7");
        let traces = vec![
            synthesize_trace(&traj, "alpha", 1),
            synthesize_trace(&traj, "beta", 2),
        ];
        let mut text = String::new();
        for t in &traces {
            text.push_str(&serde_json::to_string(t).unwrap());
            text.push('\n');
        }
        text.push('\n');
        let back = read_traces(text.as_bytes()).unwrap();
        assert_eq!(back, traces);
        assert!(matches!(
            read_traces("{broken".as_bytes()),
            Err(TraceError::Json { line: 1, .. })
        ));
    }
}
