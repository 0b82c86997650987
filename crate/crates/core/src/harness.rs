//! The model family and its behavioral readouts.
//!
//! Four variants explain a human trajectory on a test image. The null model
//! scores every ordering of the image's strokes equally. The motor-cost
//! model (MC) weighs every ordering by its motor cost. The program-induction
//! model (PI) restricts to the admissible orderings of a solving program,
//! uniformly. The full model (HM) combines both: admissible orderings
//! weighted by motor cost. Readouts are expected edit distances between
//! human and model trajectories, the matched-versus-crossed group similarity
//! score, and token-level mistake counts.

use crate::dsl::{eval, Library, Program};
use crate::edit::damerau_levenshtein;
use crate::motor::trajectory_distribution;
use crate::stimuli::GridSpec;
use crate::trajectory::{
    admissible_trajectories, stroke_tokens, GroundError, StrokeToken, Trajectory,
};
use itertools::Itertools;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

/// Permutation budget for the unconstrained variants.
pub const PERM_CAP: usize = 10_080;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariantKind {
    Null,
    Mc,
    Pi,
    Hm,
}

/// One model variant: a kind plus whatever it conditions on. The library
/// and per-image programs travel together, and only the variants that use
/// motor cost carry weights.
#[derive(Debug, Clone)]
pub struct Variant {
    pub kind: VariantKind,
    lib: Option<Library>,
    theta: Option<Vec<f64>>,
    /// Top-ranked program per image id, for the program-bearing variants.
    programs: HashMap<String, Program>,
}

impl Variant {
    pub fn null() -> Variant {
        Variant {
            kind: VariantKind::Null,
            lib: None,
            theta: None,
            programs: HashMap::new(),
        }
    }

    pub fn mc(theta: Vec<f64>) -> Variant {
        Variant {
            kind: VariantKind::Mc,
            lib: None,
            theta: Some(theta),
            programs: HashMap::new(),
        }
    }

    pub fn pi(lib: Library, programs: HashMap<String, Program>) -> Variant {
        Variant {
            kind: VariantKind::Pi,
            lib: Some(lib),
            theta: None,
            programs,
        }
    }

    pub fn hm(lib: Library, theta: Vec<f64>, programs: HashMap<String, Program>) -> Variant {
        Variant {
            kind: VariantKind::Hm,
            lib: Some(lib),
            theta: Some(theta),
            programs,
        }
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }
}

/// One evaluation item: the target's tokens in canonical order plus the
/// grid they snap to.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub image_id: String,
    pub grid: GridSpec,
    pub tokens: Vec<StrokeToken>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("image {0} has no solving program under this variant")]
    Unsolved(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("no test item is computable for every group and model")]
    EmptyIntersection,
}

/// A candidate trajectory set with its probability vector.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub trajs: Vec<Trajectory>,
    pub probs: Vec<f64>,
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn case_seed(seed: u64, image_id: &str) -> u64 {
    let mut h = seed;
    for b in image_id.bytes() {
        h = mix(h ^ b as u64);
    }
    h
}

/// Every ordering of `tokens`, exhaustive up to [`PERM_CAP`]; above that,
/// distinct seeded shuffles with the given order always among them.
pub fn permutations_of(tokens: &[StrokeToken], image_id: &str, seed: u64) -> Vec<Trajectory> {
    let n = tokens.len();
    let total: Option<usize> = (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k));
    let traj_of = |idxs: &[usize]| {
        Trajectory::new(idxs.iter().map(|&i| tokens[i]).collect()).with_image(image_id)
    };
    match total {
        Some(t) if t <= PERM_CAP => (0..n).permutations(n).map(|p| traj_of(&p)).collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, image_id));
            let mut seen: HashSet<Vec<usize>> = HashSet::new();
            let identity: Vec<usize> = (0..n).collect();
            let mut out = vec![traj_of(&identity)];
            seen.insert(identity);
            while out.len() < PERM_CAP {
                let mut p: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = rand::Rng::gen_range(&mut rng, 0..=i);
                    p.swap(i, j);
                }
                if seen.insert(p.clone()) {
                    out.push(traj_of(&p));
                }
            }
            out
        }
    }
}

fn permutation_set(case: &TestCase, seed: u64) -> Vec<Trajectory> {
    permutations_of(&case.tokens, &case.image_id, seed)
}

/// The variant's trajectory distribution for one test case.
pub fn candidate_set(
    variant: &Variant,
    case: &TestCase,
    seed: u64,
) -> Result<Candidates, HarnessError> {
    let trajs = match variant.kind {
        VariantKind::Null | VariantKind::Mc => permutation_set(case, seed),
        VariantKind::Pi | VariantKind::Hm => {
            let lib = variant.lib.as_ref().expect("variant carries a library");
            let p = variant
                .programs
                .get(&case.image_id)
                .ok_or_else(|| HarnessError::Unsolved(case.image_id.clone()))?;
            admissible_trajectories(lib, p, &case.grid)?
                .into_iter()
                .map(|t| t.with_image(&case.image_id))
                .collect()
        }
    };
    let probs = match variant.theta() {
        Some(theta) => trajectory_distribution(&trajs, theta),
        None => vec![1.0 / trajs.len() as f64; trajs.len()],
    };
    Ok(Candidates { trajs, probs })
}

fn cells(t: &Trajectory) -> Vec<(crate::stimuli::ObjKind, usize, usize)> {
    t.tokens.iter().map(StrokeToken::cell).collect()
}

/// Exact expectation of the Damerau-Levenshtein distance between the human
/// trajectory and the candidate distribution, tokens compared by cell.
pub fn expected_distance(human: &Trajectory, candidates: &Candidates) -> f64 {
    let h = cells(human);
    candidates
        .trajs
        .iter()
        .zip(&candidates.probs)
        .map(|(t, p)| p * damerau_levenshtein(&h, &cells(t)) as f64)
        .sum()
}

/// Convenience wrapper: candidate set, then expected distance.
pub fn human_model_distance(
    human: &Trajectory,
    variant: &Variant,
    case: &TestCase,
    seed: u64,
) -> Result<f64, HarnessError> {
    Ok(expected_distance(human, &candidate_set(variant, case, seed)?))
}

/// One behavioral group: per subject, one trajectory per drawn image,
/// matched to test cases by image id.
pub type Group = Vec<Vec<Trajectory>>;

/// Mean expected distance between a group's subjects and a model over the
/// test cases both sides cover. Unsolved model items are skipped.
pub fn group_distance(
    group: &Group,
    variant: &Variant,
    cases: &[TestCase],
    seed: u64,
) -> Result<f64, HarnessError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for case in cases {
        let cands = match candidate_set(variant, case, seed) {
            Ok(c) => c,
            Err(HarnessError::Unsolved(_)) => continue,
            Err(e) => return Err(e),
        };
        for subject in group {
            for t in subject.iter().filter(|t| t.image_id == case.image_id) {
                sum += expected_distance(t, &cands);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(HarnessError::EmptyIntersection);
    }
    Ok(sum / n as f64)
}

/// Crossed-minus-matched distance: positive when each model sits closer to
/// the group it was trained on.
pub fn similarity_score(
    h1: &Group,
    h2: &Group,
    m1: &Variant,
    m2: &Variant,
    cases: &[TestCase],
    seed: u64,
) -> Result<f64, HarnessError> {
    let crossed = 0.5 * (group_distance(h1, m2, cases, seed)? + group_distance(h2, m1, cases, seed)?);
    let matched = 0.5 * (group_distance(h1, m1, cases, seed)? + group_distance(h2, m2, cases, seed)?);
    Ok(crossed - matched)
}

/// The variant's single most probable trajectory for a case, ties broken by
/// candidate order.
pub fn top_trajectory(
    variant: &Variant,
    case: &TestCase,
    seed: u64,
) -> Result<Trajectory, HarnessError> {
    let c = candidate_set(variant, case, seed)?;
    let best = c
        .probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("candidate sets are non-empty");
    Ok(c.trajs[best].clone())
}

/// Samples a synthetic group: `n_agents` subjects who each draw every case
/// by sampling from the variant's trajectory distribution.
pub fn sample_group(
    variant: &Variant,
    cases: &[TestCase],
    n_agents: usize,
    seed: u64,
) -> Result<Group, HarnessError> {
    let mut group = Vec::with_capacity(n_agents);
    for agent in 0..n_agents {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ agent as u64));
        let mut trajs = Vec::with_capacity(cases.len());
        for case in cases {
            let c = match candidate_set(variant, case, seed) {
                Ok(c) => c,
                Err(HarnessError::Unsolved(_)) => continue,
                Err(e) => return Err(e),
            };
            let pick = WeightedIndex::new(&c.probs)
                .map(|w| w.sample(&mut rng))
                .unwrap_or(0);
            trajs.push(c.trajs[pick].clone());
        }
        group.push(trajs);
    }
    Ok(group)
}

/// Strokes the target wants but the program misses, and strokes the program
/// draws that the target lacks, both at token-cell granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mistakes {
    pub missed: usize,
    pub extra: usize,
}

impl Mistakes {
    pub fn total(&self) -> usize {
        self.missed + self.extra
    }
}

/// Token-multiset difference between two trajectories' cells.
pub fn token_mistakes(produced: &[StrokeToken], target: &[StrokeToken]) -> Mistakes {
    let mut counts: HashMap<(crate::stimuli::ObjKind, usize, usize), i64> = HashMap::new();
    for t in target {
        *counts.entry(t.cell()).or_insert(0) += 1;
    }
    for p in produced {
        *counts.entry(p.cell()).or_insert(0) -= 1;
    }
    let mut m = Mistakes { missed: 0, extra: 0 };
    for (_, d) in counts {
        if d > 0 {
            m.missed += d as usize;
        } else {
            m.extra += (-d) as usize;
        }
    }
    m
}

/// Mistakes of a program against a case: evaluate, ground, diff.
pub fn mistake_count(
    lib: &Library,
    program: &Program,
    case: &TestCase,
) -> Result<Mistakes, HarnessError> {
    let strokes = eval::strokes(lib, program).map_err(GroundError::from)?;
    let toks = stroke_tokens(&strokes, &case.grid)?;
    Ok(token_mistakes(&toks, &case.tokens))
}
