//! Motor cost over trajectories: effort features, the softmax choice
//! distribution they induce, and per-subject weight fitting.
//!
//! A trajectory's cost is a weighted sum of effort features; a drawer picks
//! among candidate trajectories with probability proportional to
//! exp(-cost). Weights are fitted per subject by regularized maximum
//! likelihood and averaged into a group vector.

use crate::exec::map_slice;
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEATURE_NAMES: [&str; 6] = [
    "start",
    "distance",
    "direction",
    "verticality",
    "chunking",
    "skewers",
];

/// Which prefix of the feature vector a weight vector covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    Basic4,
    Extended6,
}

impl FeatureMode {
    pub fn dim(self) -> usize {
        match self {
            FeatureMode::Basic4 => 4,
            FeatureMode::Extended6 => 6,
        }
    }

    pub fn from_dim(dim: usize) -> Option<FeatureMode> {
        match dim {
            4 => Some(FeatureMode::Basic4),
            6 => Some(FeatureMode::Extended6),
            _ => None,
        }
    }
}

/// Effort summary of one trajectory. Transition terms sum over consecutive
/// token pairs; a single-stroke trajectory has only its start term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostFeatures {
    /// Distance of the first pen-down point from the grid origin (the
    /// top-left cell center).
    pub start: f64,
    /// Summed center-to-center path length.
    pub distance: f64,
    /// Path length projected on the unit diagonal toward bottom-right.
    pub direction: f64,
    /// Vertical minus horizontal travel, `sum(|dy| - |dx|)`.
    pub verticality: f64,
    /// Count of transitions that stay within one stroke category.
    pub chunking: f64,
    /// Verticality summed over transitions that leave a vertical line.
    pub skewers: f64,
}

impl CostFeatures {
    pub fn vector(&self, mode: FeatureMode) -> Vec<f64> {
        let mut v = vec![self.start, self.distance, self.direction, self.verticality];
        if mode == FeatureMode::Extended6 {
            v.push(self.chunking);
            v.push(self.skewers);
        }
        v
    }
}

pub fn extract_features(t: &Trajectory) -> CostFeatures {
    let tokens = &t.tokens;
    let first = &tokens[0];
    let mut f = CostFeatures {
        start: first.start.norm(),
        distance: 0.0,
        direction: 0.0,
        verticality: 0.0,
        chunking: 0.0,
        skewers: 0.0,
    };
    let diag = std::f64::consts::FRAC_1_SQRT_2;
    for pair in tokens.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let d = b.center.sub(a.center);
        f.distance += d.norm();
        f.direction += (d.x + d.y) * diag;
        let vert = d.y.abs() - d.x.abs();
        f.verticality += vert;
        if a.kind == b.kind {
            f.chunking += 1.0;
        }
        if a.kind == crate::stimuli::ObjKind::VLine {
            f.skewers += vert;
        }
    }
    f
}

/// A weight vector over the cost features, in FEATURE_NAMES order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub subject: String,
    pub theta: Vec<f64>,
    pub lambda: f64,
}

impl CostWeights {
    pub fn mode(&self) -> FeatureMode {
        FeatureMode::from_dim(self.theta.len()).expect("weight dimension is 4 or 6")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MotorError {
    #[error("trial {0}: the chosen trajectory is not among its candidates")]
    ChosenNotInCandidates(usize),
    #[error("trial {0} has no candidate trajectories")]
    NoCandidates(usize),
    #[error("weight vectors mix dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
}

/// Choice probabilities over a candidate set: softmax of negated costs,
/// computed with max subtraction.
pub fn trajectory_distribution(candidates: &[Trajectory], theta: &[f64]) -> Vec<f64> {
    let mode = FeatureMode::from_dim(theta.len()).expect("weight dimension is 4 or 6");
    let feats: Vec<Vec<f64>> = candidates
        .iter()
        .map(|t| extract_features(t).vector(mode))
        .collect();
    softmax_neg_costs(&feats, theta)
}

fn softmax_neg_costs(feats: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = feats.iter().map(|f| -dot(f, theta)).collect();
    let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - hi).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One observed drawing: the orders that were available and the one taken.
#[derive(Debug, Clone)]
pub struct FitTrial {
    pub candidates: Vec<Trajectory>,
    pub chosen: Trajectory,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub weights: CostWeights,
    pub objective: f64,
    pub grad_norm: f64,
    /// Per-iteration (objective, gradient norm), for the fitting log.
    pub trace: Vec<(f64, f64)>,
}

const GRAD_TOLERANCE: f64 = 1e-6;
const MAX_FIT_ITERATIONS: usize = 500;
const ARMIJO_SLOPE: f64 = 1e-4;

/// Fits cost weights on the convex objective
/// `sum(-log P(chosen)) + lambda * |theta|^2` by damped Newton descent:
/// the exact Hessian is a few-by-few matrix, so each step solves it
/// directly and a backtracking line search keeps the objective monotone.
pub fn fit_theta(
    subject: &str,
    trials: &[FitTrial],
    mode: FeatureMode,
    lambda: f64,
) -> Result<FitOutcome, MotorError> {
    let prepared = prepare_trials(trials, mode)?;
    let dim = mode.dim();
    let mut theta = vec![0.0; dim];
    let (mut obj, mut grad, mut hess) = eval_grad_hess(&prepared, lambda, &theta);
    let mut trace = vec![(obj, norm(&grad))];
    for _ in 0..MAX_FIT_ITERATIONS {
        if norm(&grad) < GRAD_TOLERANCE {
            break;
        }
        let dir = solve_spd(&hess, &grad, dim);
        let slope = dot(&grad, &dir);
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-18 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&dir)
                .map(|(t, d)| t - step * d)
                .collect();
            let cobj = eval_objective(&prepared, lambda, &cand);
            if cobj <= obj - ARMIJO_SLOPE * step * slope {
                theta = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        let next = eval_grad_hess(&prepared, lambda, &theta);
        obj = next.0;
        grad = next.1;
        hess = next.2;
        trace.push((obj, norm(&grad)));
    }
    Ok(FitOutcome {
        weights: CostWeights {
            subject: subject.to_string(),
            theta,
            lambda,
        },
        objective: obj,
        grad_norm: norm(&grad),
        trace,
    })
}

struct PreparedTrial {
    feats: Vec<Vec<f64>>,
    chosen: usize,
}

fn prepare_trials(trials: &[FitTrial], mode: FeatureMode) -> Result<Vec<PreparedTrial>, MotorError> {
    trials
        .iter()
        .enumerate()
        .map(|(i, trial)| {
            if trial.candidates.is_empty() {
                return Err(MotorError::NoCandidates(i));
            }
            let key = trial.chosen.keys();
            let chosen = trial
                .candidates
                .iter()
                .position(|c| c.keys() == key)
                .ok_or(MotorError::ChosenNotInCandidates(i))?;
            let feats = trial
                .candidates
                .iter()
                .map(|t| extract_features(t).vector(mode))
                .collect();
            Ok(PreparedTrial { feats, chosen })
        })
        .collect()
}

fn eval_objective(trials: &[PreparedTrial], lambda: f64, theta: &[f64]) -> f64 {
    let parts = map_slice(trials, |trial| {
        dot(&trial.feats[trial.chosen], theta) + log_z(&trial.feats, theta)
    });
    lambda * dot(theta, theta) + parts.iter().sum::<f64>()
}

fn log_z(feats: &[Vec<f64>], theta: &[f64]) -> f64 {
    let logits: Vec<f64> = feats.iter().map(|f| -dot(f, theta)).collect();
    let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi + logits.iter().map(|l| (l - hi).exp()).sum::<f64>().ln()
}

/// Objective, gradient, and Hessian (row-major, `dim * dim`). The data part
/// of the Hessian is the summed per-trial feature covariance under the
/// model, so the full matrix is positive definite whenever lambda > 0.
fn eval_grad_hess(
    trials: &[PreparedTrial],
    lambda: f64,
    theta: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let dim = theta.len();
    let parts = map_slice(trials, |trial| {
        let probs = softmax_neg_costs(&trial.feats, theta);
        let obj = dot(&trial.feats[trial.chosen], theta) + log_z(&trial.feats, theta);
        let mut mean = vec![0.0; dim];
        for (f, p) in trial.feats.iter().zip(&probs) {
            for (m, x) in mean.iter_mut().zip(f) {
                *m += p * x;
            }
        }
        let mut g = trial.feats[trial.chosen].clone();
        for (gi, m) in g.iter_mut().zip(&mean) {
            *gi -= m;
        }
        let mut h = vec![0.0; dim * dim];
        for (f, p) in trial.feats.iter().zip(&probs) {
            for r in 0..dim {
                let dr = f[r] - mean[r];
                for c in 0..dim {
                    h[r * dim + c] += p * dr * (f[c] - mean[c]);
                }
            }
        }
        (obj, g, h)
    });
    let mut obj = lambda * dot(theta, theta);
    let mut grad: Vec<f64> = theta.iter().map(|t| 2.0 * lambda * t).collect();
    let mut hess = vec![0.0; dim * dim];
    for i in 0..dim {
        hess[i * dim + i] = 2.0 * lambda;
    }
    for (o, g, h) in parts {
        obj += o;
        for (gi, x) in grad.iter_mut().zip(&g) {
            *gi += x;
        }
        for (hi, x) in hess.iter_mut().zip(&h) {
            *hi += x;
        }
    }
    (obj, grad, hess)
}

/// Solves `H x = b` for a symmetric positive semidefinite H by Gaussian
/// elimination with partial pivoting; a hair of ridge keeps the solve
/// finite when lambda = 0 leaves flat directions.
fn solve_spd(h: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut a = h.to_vec();
    let mut x = b.to_vec();
    for i in 0..dim {
        a[i * dim + i] += 1e-12;
    }
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&r, &s| a[r * dim + col].abs().total_cmp(&a[s * dim + col].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot * dim + k);
            }
            x.swap(col, pivot);
        }
        let d = a[col * dim + col];
        for r in col + 1..dim {
            let factor = a[r * dim + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..dim {
                a[r * dim + k] -= factor * a[col * dim + k];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..dim).rev() {
        x[col] /= a[col * dim + col];
        for r in 0..col {
            x[r] -= a[r * dim + col] * x[col];
        }
    }
    x
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Element-wise mean of per-subject weights.
pub fn general_theta(per_subject: &[CostWeights]) -> Result<CostWeights, MotorError> {
    let dim = per_subject[0].theta.len();
    for w in per_subject {
        if w.theta.len() != dim {
            return Err(MotorError::DimensionMismatch(dim, w.theta.len()));
        }
    }
    let n = per_subject.len() as f64;
    let mut theta = vec![0.0; dim];
    for w in per_subject {
        for (t, x) in theta.iter_mut().zip(&w.theta) {
            *t += x / n;
        }
    }
    let lambda = per_subject.iter().map(|w| w.lambda).sum::<f64>() / n;
    Ok(CostWeights {
        subject: "general".to_string(),
        theta,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Skewers,
    GratingThenColumns,
    GratingThenRows,
    GratingThenChunks,
}

/// Decision thresholds for strategy assignment, calibrated on synthetic
/// agents rather than taken from any published fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StrategyThresholds {
    pub skewers: f64,
    pub verticality: f64,
    pub chunking: f64,
}

impl Default for StrategyThresholds {
    fn default() -> StrategyThresholds {
        StrategyThresholds {
            skewers: 0.5,
            verticality: 0.5,
            chunking: 0.5,
        }
    }
}

/// Two-step rule over extended weights: a dominant skewers weight wins
/// outright, otherwise the verticality and chunking weights split the rest.
pub fn assign_strategy(w: &CostWeights, tau: &StrategyThresholds) -> Strategy {
    assert_eq!(w.mode(), FeatureMode::Extended6, "strategy rule needs extended weights");
    if w.theta[5] > tau.skewers {
        Strategy::Skewers
    } else if w.theta[3] > tau.verticality {
        Strategy::GratingThenColumns
    } else if w.theta[4] > tau.chunking {
        Strategy::GratingThenChunks
    } else {
        Strategy::GratingThenRows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v;
    use crate::stimuli::ObjKind;
    use crate::trajectory::StrokeToken;
    use approx::assert_relative_eq;
    use rand::distributions::{Distribution, WeightedIndex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn token(kind: ObjKind, x: f64, y: f64) -> StrokeToken {
        let start = match kind {
            ObjKind::VLine => v(x, y - 0.25),
            ObjKind::HLine => v(x - 0.25, y),
            ObjKind::Circle => v(x, y - 0.25),
        };
        StrokeToken {
            kind,
            start,
            center: v(x, y),
            row: (y / 0.5).round() as usize,
            col: x.round() as usize,
        }
    }

    fn traj(tokens: Vec<StrokeToken>) -> Trajectory {
        Trajectory::new(tokens)
    }

    #[test]
    fn a_single_stroke_has_only_its_start_cost() {
        let t = traj(vec![token(ObjKind::Circle, 2.0, 1.0)]);
        let f = extract_features(&t);
        assert_relative_eq!(f.start, v(2.0, 0.75).norm(), epsilon = 1e-12);
        assert_eq!(
            (f.distance, f.direction, f.verticality, f.chunking, f.skewers),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn transition_features_match_hand_computation() {
        let t = traj(vec![
            token(ObjKind::Circle, 0.0, 0.0),
            token(ObjKind::Circle, 0.0, 1.0),
        ]);
        let f = extract_features(&t);
        assert_relative_eq!(f.distance, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.direction, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(f.verticality, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.chunking, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.skewers, 0.0, epsilon = 1e-12);

        let s = traj(vec![
            token(ObjKind::VLine, 0.0, 0.0),
            token(ObjKind::Circle, 0.0, 1.0),
        ]);
        let g = extract_features(&s);
        assert_relative_eq!(g.chunking, 0.0, epsilon = 1e-12);
        assert_relative_eq!(g.skewers, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn features_ignore_translation_except_start() {
        let a = traj(vec![
            token(ObjKind::VLine, 0.0, 0.0),
            token(ObjKind::Circle, 1.0, 0.5),
            token(ObjKind::HLine, 2.0, 1.0),
        ]);
        let shifted: Vec<StrokeToken> = a
            .tokens
            .iter()
            .map(|t| {
                let mut t = *t;
                t.start = t.start.add(v(0.3, 0.7));
                t.center = t.center.add(v(0.3, 0.7));
                t
            })
            .collect();
        let fa = extract_features(&a);
        let fb = extract_features(&traj(shifted));
        assert_relative_eq!(fa.distance, fb.distance, epsilon = 1e-12);
        assert_relative_eq!(fa.direction, fb.direction, epsilon = 1e-12);
        assert_relative_eq!(fa.verticality, fb.verticality, epsilon = 1e-12);
        assert_relative_eq!(fa.chunking, fb.chunking, epsilon = 1e-12);
        assert_relative_eq!(fa.skewers, fb.skewers, epsilon = 1e-12);
        assert!(fa.start != fb.start);
    }

    #[test]
    fn zero_weights_spread_mass_uniformly() {
        let cands = four_orders();
        let p = trajectory_distribution(&cands, &[0.0; 4]);
        for x in &p {
            assert_relative_eq!(*x, 0.25, epsilon = 1e-12);
        }
        let p6 = trajectory_distribution(&cands, &[0.0; 6]);
        assert_relative_eq!(p6.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn a_cost_gap_of_ln_two_makes_two_to_one_odds() {
        let near = traj(vec![token(ObjKind::Circle, 0.0, 0.25)]);
        let mut far_token = token(ObjKind::Circle, 0.0, 0.25);
        far_token.start = v(0.0, std::f64::consts::LN_2);
        let far = traj(vec![far_token]);
        let p = trajectory_distribution(&[near, far], &[1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(p[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn scaling_weights_concentrates_on_the_cheapest_order() {
        let cands: Vec<Trajectory> = (0..4)
            .map(|i| {
                let mut t = token(ObjKind::Circle, 0.0, 0.25);
                t.start = v(i as f64 * std::f64::consts::LN_2, 0.0);
                traj(vec![t])
            })
            .collect();
        let theta = [1.0, 0.0, 0.0, 0.0];
        let p = trajectory_distribution(&cands, &theta);
        assert!(p[0] > p[1] && p[1] > p[2] && p[2] > p[3]);
        let q = trajectory_distribution(&cands, &[50.0, 0.0, 0.0, 0.0]);
        assert!(q[0] > 0.999);
    }

    /// Six tokens over two columns (a vertical line plus two circles each),
    /// ordered four ways that differ in verticality, chunking, and skewers.
    fn four_orders() -> Vec<Trajectory> {
        let vl = |col: f64| token(ObjKind::VLine, col, 0.5);
        let top = |col: f64| token(ObjKind::Circle, col, 0.0);
        let bot = |col: f64| token(ObjKind::Circle, col, 1.0);
        vec![
            // Skewer each column: line first, its objects right after.
            traj(vec![vl(0.0), top(0.0), bot(0.0), vl(1.0), top(1.0), bot(1.0)]),
            // Columns, objects before the line.
            traj(vec![top(0.0), bot(0.0), vl(0.0), top(1.0), bot(1.0), vl(1.0)]),
            // Rows left to right.
            traj(vec![top(0.0), top(1.0), vl(0.0), vl(1.0), bot(0.0), bot(1.0)]),
            // Category chunks.
            traj(vec![vl(0.0), vl(1.0), top(0.0), top(1.0), bot(0.0), bot(1.0)]),
        ]
    }

    fn random_orders(rng: &mut ChaCha8Rng) -> Vec<Trajectory> {
        use rand::seq::SliceRandom;
        let base = four_orders().swap_remove(0).tokens;
        (0..8)
            .map(|_| {
                let mut t = base.clone();
                t.shuffle(rng);
                traj(t)
            })
            .collect()
    }

    fn simulate(theta: &[f64], n: usize, seed: u64) -> Vec<FitTrial> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let candidates = random_orders(&mut rng);
                let p = trajectory_distribution(&candidates, theta);
                let idx = WeightedIndex::new(&p).unwrap().sample(&mut rng);
                FitTrial {
                    chosen: candidates[idx].clone(),
                    candidates,
                }
            })
            .collect()
    }

    #[test]
    fn fitting_recovers_the_planted_weight_sign() {
        let truth = [0.0, 0.0, 0.0, 2.0];
        let trials = simulate(&truth, 200, 11);
        let fit = fit_theta("s1", &trials, FeatureMode::Basic4, 0.1).unwrap();
        assert!(fit.weights.theta[3] > 0.5, "verticality weight {:?}", fit.weights.theta);
        assert!(fit.grad_norm < GRAD_TOLERANCE);
    }

    #[test]
    fn uniform_choices_fit_to_small_weights() {
        let trials = simulate(&[0.0; 4], 2000, 17);
        let fit = fit_theta("s2", &trials, FeatureMode::Basic4, 0.1).unwrap();
        assert!(norm(&fit.weights.theta) < 0.1, "theta {:?}", fit.weights.theta);
    }

    #[test]
    fn heavy_regularization_pins_weights_to_zero() {
        let trials = simulate(&[0.0, 0.0, 0.0, 2.0], 50, 23);
        let fit = fit_theta("s3", &trials, FeatureMode::Basic4, 1e6).unwrap();
        assert!(norm(&fit.weights.theta) < 1e-3);
    }

    #[test]
    fn the_objective_never_rises_during_fitting() {
        let trials = simulate(&[1.0, -0.5, 0.3, 0.8], 60, 29);
        let fit = fit_theta("s4", &trials, FeatureMode::Basic4, 0.1).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1].0 <= w[0].0 + 1e-12);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let trials = simulate(&[0.4, -0.3, 0.2, 0.6, -0.2, 0.5], 30, 31);
        let prepared = prepare_trials(&trials, FeatureMode::Extended6).unwrap();
        let theta = [0.3, -0.1, 0.2, -0.4, 0.1, 0.25];
        let (_, grad, _) = eval_grad_hess(&prepared, 0.1, &theta);
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut up = theta.to_vec();
            up[i] += h;
            let mut dn = theta.to_vec();
            dn[i] -= h;
            let fu = eval_objective(&prepared, 0.1, &up);
            let fd = eval_objective(&prepared, 0.1, &dn);
            let numeric = (fu - fd) / (2.0 * h);
            assert_relative_eq!(grad[i], numeric, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn a_chosen_order_missing_from_its_candidates_is_an_error() {
        let cands = four_orders();
        let outsider = traj(vec![token(ObjKind::HLine, 3.0, 0.0)]);
        let trials = vec![FitTrial {
            candidates: cands,
            chosen: outsider,
        }];
        let err = fit_theta("s5", &trials, FeatureMode::Basic4, 0.1).unwrap_err();
        assert_eq!(err, MotorError::ChosenNotInCandidates(0));
    }

    #[test]
    fn group_weights_are_the_subject_mean() {
        let mk = |theta: Vec<f64>| CostWeights {
            subject: "s".into(),
            theta,
            lambda: 0.1,
        };
        let g = general_theta(&[mk(vec![1.0, 0.0, 0.0, 0.0]), mk(vec![-1.0, 0.0, 0.0, 0.0])])
            .unwrap();
        assert_eq!(g.theta, vec![0.0; 4]);
        assert_eq!(g.subject, "general");

        let solo = general_theta(&[mk(vec![0.5, 1.5, -2.0, 0.25])]).unwrap();
        assert_eq!(solo.theta, vec![0.5, 1.5, -2.0, 0.25]);

        let err = general_theta(&[mk(vec![0.0; 4]), mk(vec![0.0; 6])]).unwrap_err();
        assert_eq!(err, MotorError::DimensionMismatch(4, 6));
    }

    #[test]
    fn dominant_weights_pick_their_strategy() {
        let tau = StrategyThresholds::default();
        let mk = |theta: Vec<f64>| CostWeights {
            subject: "s".into(),
            theta,
            lambda: 0.1,
        };
        assert_eq!(
            assign_strategy(&mk(vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0]), &tau),
            Strategy::Skewers
        );
        assert_eq!(
            assign_strategy(&mk(vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]), &tau),
            Strategy::GratingThenColumns
        );
        assert_eq!(
            assign_strategy(&mk(vec![0.0, 0.0, 0.0, 0.0, 2.0, 0.0]), &tau),
            Strategy::GratingThenChunks
        );
        assert_eq!(
            assign_strategy(&mk(vec![0.0, 0.0, 0.0, -2.0, 0.0, 0.0]), &tau),
            Strategy::GratingThenRows
        );
    }

    #[test]
    fn synthetic_agents_are_classified_back_to_their_presets() {
        let tau = StrategyThresholds::default();
        let presets: [(&str, [f64; 6], Strategy); 4] = [
            ("skewer", [0.0, 0.0, 0.0, 0.0, 0.0, 2.0], Strategy::Skewers),
            ("cols", [0.0, 0.0, 0.0, 2.0, 0.0, 0.0], Strategy::GratingThenColumns),
            ("chunks", [0.0, 0.0, 0.0, 0.0, 2.0, 0.0], Strategy::GratingThenChunks),
            ("rows", [0.0, 0.0, 0.0, -2.0, 0.0, 0.0], Strategy::GratingThenRows),
        ];
        let mut agent = 0u64;
        for _ in 0..6 {
            for (name, truth, expect) in &presets {
                let trials = simulate(truth, 250, 1000 + agent);
                let fit = fit_theta(name, &trials, FeatureMode::Extended6, 0.1).unwrap();
                assert_eq!(
                    assign_strategy(&fit.weights, &tau),
                    *expect,
                    "agent {agent} preset {name} fitted {:?}",
                    fit.weights.theta
                );
                agent += 1;
            }
        }
    }
}
