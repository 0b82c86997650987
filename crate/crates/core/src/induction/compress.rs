//! Library growth by greedy description-length minimization.
//!
//! The objective is the joint description length of the library and the
//! beams: each learned body pays a per-node vocabulary cost, and each image
//! pays the negative log of its beam's total prior mass under refit
//! production weights. Candidate abstractions come from two sources:
//! whole subtrees that recur across beam programs, and anti-unifications of
//! subtree pairs sharing a root entry, whose mismatches become lambda
//! parameters (repeated mismatches share one parameter). Every candidate is
//! scored by actually rewriting the beams and refitting, so an accepted
//! candidate lowers the objective by construction.

use super::{Beam, BeamItem, TrainState};
use crate::config::RunConfig;
use crate::dsl::text::to_text;
use crate::dsl::{EntryId, Library, Program, Ty};
use crate::exec::map_slice;
use crate::grammar::Grammar;
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Debug, Clone)]
pub struct CompressOutcome {
    pub dl_before: f64,
    pub dl_after: f64,
    /// Names and bodies of entries added this step.
    pub added: Vec<(String, String)>,
    pub iterations: usize,
}

/// Nats charged per node of learned library code. Half a nat per node lets
/// an object-shaped pattern pay for itself at two or three occurrences,
/// which is what the first cycle's beams can offer; a steeper rate stalls
/// the bootstrap before multi-object images become reachable.
const STRUCTURE_COST: f64 = 0.5;
/// Code length charged for an image with an empty beam. Any explanation the
/// search can find is shorter, so solving an image never raises the
/// objective, keeping it comparable across cycles.
const UNSOLVED_NATS: f64 = 600.0;
/// Per-candidate cap on lambda parameters.
const MAX_HOLES: usize = 3;
/// Candidates scored per greedy iteration, per source class.
const CANDIDATE_CAP: usize = 160;
/// Greedy iterations per compress step.
const MAX_ITERATIONS: usize = 24;

/// Grows the library while doing so shrinks the joint description length,
/// then leaves the grammar refit on the (possibly rewritten) beams.
pub fn compress_step(state: &mut TrainState, cfg: &RunConfig) -> CompressOutcome {
    let _ = cfg;
    let mut lib = state.grammar.lib().clone();
    let mut beams: Vec<Vec<Program>> = state
        .beams
        .iter()
        .map(|b| b.items.iter().map(|it| it.program.clone()).collect())
        .collect();

    let mut grammar = refit(&lib, &beams);
    let dl_before = description_length(&grammar, &beams);
    let mut dl = dl_before;
    let mut added = Vec::new();
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        let candidates = propose(&lib, &beams);
        if candidates.is_empty() {
            break;
        }
        iterations += 1;
        let name = format!("f{}", lib.learned_ids().count());
        let scores: Vec<Option<f64>> = map_slice(&candidates, |cand| {
            score_candidate(&lib, &beams, cand, &name)
        });
        let best = scores
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|dl2| (i, dl2)))
            .min_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| candidates[a.0].key.cmp(&candidates[b.0].key))
            });
        let Some((bi, dl2)) = best else { break };
        if dl2 >= dl - 1e-9 {
            break;
        }
        let cand = &candidates[bi];
        let new_id = lib
            .add(&name, cand.entry_ty(), cand.as_body())
            .expect("scored candidates type check");
        for beam in beams.iter_mut() {
            for p in beam.iter_mut() {
                *p = rewrite(p, cand, new_id);
            }
        }
        grammar = refit(&lib, &beams);
        debug_assert!({
            let chk = description_length(&grammar, &beams);
            (chk - dl2).abs() < 1e-6
        });
        dl = dl2;
        added.push((name, to_text(&lib, &cand.body)));
    }

    // Rewritten beams render exactly as before; this guards the rewriter.
    #[cfg(debug_assertions)]
    for (beam, old) in beams.iter().zip(&state.beams) {
        for (p, it) in beam.iter().zip(&old.items) {
            let a = crate::dsl::eval::strokes(&lib, p).expect("rewritten programs evaluate");
            let b = crate::dsl::eval::strokes(&lib, &it.program).unwrap();
            debug_assert_eq!(a.len(), b.len());
        }
    }

    state.beams = beams
        .into_iter()
        .map(|progs| rebuild_beam(&grammar, progs))
        .collect();
    state.grammar = grammar;
    CompressOutcome {
        dl_before,
        dl_after: dl,
        added,
        iterations,
    }
}

fn rebuild_beam(g: &Grammar, progs: Vec<Program>) -> Beam {
    let mut ranked: Vec<(f64, String, Program)> = progs
        .into_iter()
        .map(|p| {
            let lp = g.log_prior(&p).expect("beam programs type check");
            (lp, to_text(g.lib(), &p), p)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Beam {
        items: ranked
            .into_iter()
            .map(|(log_prior, _, program)| BeamItem { program, log_prior })
            .collect(),
    }
}

/// Production weights refit to the current beams with add-one smoothing.
pub fn refit(lib: &Library, beams: &[Vec<Program>]) -> Grammar {
    let layout = Grammar::uniform(lib.clone());
    let mut counts = layout.zero_counts();
    for beam in beams {
        for p in beam {
            layout
                .count_sites(p, &mut counts)
                .expect("beam programs type check");
        }
    }
    Grammar::from_counts(lib.clone(), &counts)
}

/// Joint description length: learned body nodes at [`STRUCTURE_COST`] plus
/// each image's negative log beam mass.
pub fn description_length(g: &Grammar, beams: &[Vec<Program>]) -> f64 {
    let lib = g.lib();
    let body_nodes: usize = lib.learned_ids().map(|id| lib.entry(id).body_size()).sum();
    let mut dl = STRUCTURE_COST * body_nodes as f64;
    for beam in beams {
        if beam.is_empty() {
            dl += UNSOLVED_NATS;
            continue;
        }
        let lps: Vec<f64> = beam
            .iter()
            .map(|p| g.log_prior(p).expect("beam programs type check"))
            .collect();
        dl -= log_sum_exp(&lps);
    }
    dl
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// An abstraction candidate: a body whose de Bruijn variables are the holes
/// (`Var(n-1)` is the first hole, bound by the outermost lambda).
#[derive(Debug, Clone)]
pub struct Candidate {
    pub body: Program,
    pub hole_tys: Vec<Ty>,
    pub ret: Ty,
    /// Deterministic tie-break and dedup key.
    pub key: String,
}

impl Candidate {
    fn entry_ty(&self) -> Ty {
        if self.hole_tys.is_empty() {
            self.ret.clone()
        } else {
            Ty::func(&self.hole_tys, self.ret.clone())
        }
    }

    fn as_body(&self) -> Program {
        let mut b = self.body.clone();
        for _ in 0..self.hole_tys.len() {
            b = Program::Lambda(Box::new(b));
        }
        b
    }
}

/// Typed subtree occurrences of every beam program.
fn collect_subtrees(lib: &Library, beams: &[Vec<Program>]) -> Vec<(Program, Ty)> {
    fn go(lib: &Library, p: &Program, ty: &Ty, out: &mut Vec<(Program, Ty)>) {
        out.push((p.clone(), ty.clone()));
        if let Program::Call(e, args) = p {
            let entry = lib.entry(*e);
            for (a, at) in args.iter().zip(&entry.arg_tys) {
                go(lib, a, at, out);
            }
        }
    }
    let mut out = Vec::new();
    for beam in beams {
        for p in beam {
            go(lib, p, &Ty::Drawing, &mut out);
        }
    }
    out
}

/// Anti-unifies two trees: agreements stay, disagreements become holes, and
/// a repeated disagreement reuses its hole. Fails when the pair needs more
/// than [`MAX_HOLES`].
fn anti_unify(
    lib: &Library,
    a: &Program,
    b: &Program,
    ty: &Ty,
    holes: &mut Vec<(Program, Program, Ty)>,
) -> Option<Program> {
    if a == b {
        return Some(a.clone());
    }
    if let (Program::Call(ea, aa), Program::Call(eb, ab)) = (a, b) {
        if ea == eb {
            let entry = lib.entry(*ea);
            let mut args = Vec::with_capacity(aa.len());
            for ((x, y), at) in aa.iter().zip(ab).zip(&entry.arg_tys) {
                args.push(anti_unify(lib, x, y, at, holes)?);
            }
            return Some(Program::Call(*ea, args));
        }
    }
    let k = match holes
        .iter()
        .position(|(x, y, _)| x == a && y == b)
    {
        Some(k) => k,
        None => {
            if holes.len() == MAX_HOLES {
                return None;
            }
            holes.push((a.clone(), b.clone(), ty.clone()));
            holes.len() - 1
        }
    };
    Some(Program::Var(k as u32))
}

/// Rewrites temporary hole indices into final de Bruijn levels: hole 0 is
/// bound by the outermost lambda, so inside the body it is `Var(n-1)`.
fn finalize_holes(p: &Program, n: usize) -> Program {
    match p {
        Program::Var(k) => Program::Var((n - 1 - *k as usize) as u32),
        Program::Call(e, args) => {
            Program::Call(*e, args.iter().map(|a| finalize_holes(a, n)).collect())
        }
        other => other.clone(),
    }
}

/// Candidate abstractions from the current beams, deterministically ranked.
fn propose(lib: &Library, beams: &[Vec<Program>]) -> Vec<Candidate> {
    let occurrences = collect_subtrees(lib, beams);

    let mut counts: HashMap<&(Program, Ty), u32> = HashMap::new();
    for occ in &occurrences {
        *counts.entry(occ).or_insert(0) += 1;
    }

    // Recurring whole subtrees, ranked by how much syntax they remove.
    let mut subtree_cands: Vec<(f64, Candidate)> = counts
        .iter()
        .filter(|((p, _), &n)| n >= 2 && p.node_count() >= 2)
        .map(|((p, ty), &n)| {
            let size = p.node_count() as f64;
            let est = (n as f64 - 1.0) * (size - 1.0);
            let cand = Candidate {
                key: to_text(lib, p),
                body: p.clone(),
                hole_tys: Vec::new(),
                ret: ty.clone(),
            };
            (est, cand)
        })
        .collect();
    subtree_cands.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.key.cmp(&b.1.key)));
    subtree_cands.truncate(CANDIDATE_CAP);

    // Anti-unifications of distinct subtrees sharing a root entry and type.
    let mut groups: BTreeMap<(EntryId, String), Vec<Program>> = BTreeMap::new();
    {
        let mut seen: HashSet<&(Program, Ty)> = HashSet::new();
        let mut keyed: Vec<(String, &(Program, Ty))> = occurrences
            .iter()
            .filter(|occ| seen.insert(occ))
            .map(|occ| (to_text(lib, &occ.0), occ))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, (p, ty)) in keyed {
            if let Program::Call(e, _) = p {
                if p.node_count() >= 3 {
                    groups
                        .entry((*e, ty.to_string()))
                        .or_default()
                        .push(p.clone());
                }
            }
        }
    }

    // The same body arises once per pair of matching subtrees, so the
    // number of pair hits recovers how many subtrees the pattern covers.
    let mut au_pool: HashMap<(Program, Vec<Ty>), (Candidate, usize)> = HashMap::new();
    for ((_, ty_text), members) in &groups {
        let ty: Ty = parse_ty_text(ty_text);
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let mut holes = Vec::new();
                let Some(raw) = anti_unify(lib, &members[i], &members[j], &ty, &mut holes)
                else {
                    continue;
                };
                if holes.is_empty() || raw.node_count() < 3 {
                    continue;
                }
                let n = holes.len();
                let body = finalize_holes(&raw, n);
                let hole_tys: Vec<Ty> = holes.iter().map(|(_, _, t)| t.clone()).collect();
                au_pool
                    .entry((body.clone(), hole_tys.clone()))
                    .or_insert_with(|| {
                        let key = format!("{}|{}", to_text(lib, &body), n);
                        (
                            Candidate {
                                body,
                                hole_tys,
                                ret: ty.clone(),
                                key,
                            },
                            0,
                        )
                    })
                    .1 += 1;
            }
        }
    }
    let mut au_cands: Vec<(f64, Candidate)> = au_pool
        .into_values()
        .map(|(cand, hits)| {
            // hits = k(k-1)/2 over k covered subtrees.
            let k = (1.0 + (1.0 + 8.0 * hits as f64).sqrt()) / 2.0;
            let holes = cand.hole_tys.len() as f64;
            let est = (k - 1.0) * (cand.body.node_count() as f64 - 1.0 - holes);
            (est, cand)
        })
        .collect();
    au_cands.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.key.cmp(&b.1.key)));
    au_cands.truncate(CANDIDATE_CAP);

    subtree_cands
        .into_iter()
        .chain(au_cands)
        .map(|(_, c)| c)
        .collect()
}

fn parse_ty_text(text: &str) -> Ty {
    crate::dsl::text::parse_ty(text).expect("type display round-trips")
}

/// Description length after hypothetically adding the candidate and
/// rewriting; `None` when the candidate is unusable or never matches.
fn score_candidate(
    lib: &Library,
    beams: &[Vec<Program>],
    cand: &Candidate,
    name: &str,
) -> Option<f64> {
    let mut lib2 = lib.clone();
    let new_id = lib2.add(name, cand.entry_ty(), cand.as_body()).ok()?;
    let mut replacements = 0usize;
    let rewritten: Vec<Vec<Program>> = beams
        .iter()
        .map(|beam| {
            beam.iter()
                .map(|p| {
                    let q = rewrite(p, cand, new_id);
                    if q != *p {
                        replacements += 1;
                    }
                    q
                })
                .collect()
        })
        .collect();
    if replacements == 0 {
        return None;
    }
    let g2 = refit(&lib2, &rewritten);
    Some(description_length(&g2, &rewritten))
}

/// Replaces every match of the candidate, outermost first; arguments are
/// rewritten too, so nested uses collapse in one pass.
fn rewrite(p: &Program, cand: &Candidate, new_id: EntryId) -> Program {
    if let Some(args) = match_pattern(p, cand) {
        let rw: Vec<Program> = args.into_iter().map(|a| rewrite(&a, cand, new_id)).collect();
        return Program::Call(new_id, rw);
    }
    match p {
        Program::Call(e, args) => Program::Call(
            *e,
            args.iter().map(|a| rewrite(a, cand, new_id)).collect(),
        ),
        other => other.clone(),
    }
}

/// Matches a tree against the candidate body, binding holes consistently.
/// Returns hole bindings in parameter order.
fn match_pattern(p: &Program, cand: &Candidate) -> Option<Vec<Program>> {
    let n = cand.hole_tys.len();
    let mut binds: Vec<Option<&Program>> = vec![None; n];
    fn go<'a>(
        p: &'a Program,
        pat: &Program,
        n: usize,
        binds: &mut Vec<Option<&'a Program>>,
    ) -> bool {
        match pat {
            Program::Var(i) => {
                let k = n - 1 - *i as usize;
                match binds[k] {
                    None => {
                        binds[k] = Some(p);
                        true
                    }
                    Some(prev) => prev == p,
                }
            }
            Program::Const(..) => p == pat,
            Program::Call(e, pargs) => match p {
                Program::Call(pe, xs) if pe == e && xs.len() == pargs.len() => xs
                    .iter()
                    .zip(pargs)
                    .all(|(x, pa)| go(x, pa, n, binds)),
                _ => false,
            },
            Program::Lambda(_) => false,
        }
    }
    if !go(p, &cand.body, n, &mut binds) {
        return None;
    }
    binds
        .into_iter()
        .map(|b| b.cloned())
        .collect::<Option<Vec<Program>>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::dsl::text::parse;

    fn beams_of(lib: &Library, texts: &[&[&str]]) -> Vec<Vec<Program>> {
        texts
            .iter()
            .map(|beam| {
                beam.iter()
                    .map(|t| parse(lib, t, &Ty::Drawing).unwrap())
                    .collect()
            })
            .collect()
    }

    fn state_with(lib: &Library, beams: Vec<Vec<Program>>) -> TrainState {
        let cfg = RunConfig::default();
        let g = Grammar::uniform(lib.clone());
        let mut st = TrainState::new(&cfg, beams.len());
        st.beams = beams
            .into_iter()
            .map(|progs| super::rebuild_beam(&g, progs))
            .collect();
        st.grammar = g;
        st
    }

    #[test]
    fn recurring_subtree_becomes_a_nullary_entry() {
        let lib = Library::base();
        let vline = "(reflect line 0.7853981633974483)";
        let beams = beams_of(
            &lib,
            &[
                &[&format!("(connect {vline} {vline})") as &str],
                &[&format!("(connect circle {vline})") as &str],
                &[vline],
            ],
        );
        let mut st = state_with(&lib, beams);
        let cfg = RunConfig::default();
        let out = compress_step(&mut st, &cfg);
        assert!(out.dl_after < out.dl_before, "{out:?}");
        assert!(!out.added.is_empty());
        let lib2 = st.grammar.lib();
        let f0 = lib2.find("f0").expect("an entry was added");
        assert_eq!(lib2.entry(f0).ret, Ty::Drawing);
        // Beams now call the new entry.
        let texts: Vec<String> = st.beams[0]
            .items
            .iter()
            .map(|it| to_text(lib2, &it.program))
            .collect();
        assert!(texts[0].contains("f0"), "{texts:?}");
    }

    #[test]
    fn parameterized_pattern_becomes_a_lambda_entry() {
        let lib = Library::base();
        // One shape placed at six distinct positions, plus unrelated
        // programs so the production contexts stay contested. Pure
        // repetition would be memorized by refitting alone; the lambda
        // abstraction has to earn its keep against that baseline.
        let at = |dx: &str, dy: &str| {
            format!(
                "(transform (reflect line 0.7853981633974483) (affine {dx} {dy} 0 0.5 trs))"
            )
        };
        let placed: Vec<String> = [
            ("0", "0"),
            ("1", "0.5"),
            ("2", "1"),
            ("-1", "-0.5"),
            ("0.5", "2"),
            ("-2", "1"),
        ]
        .iter()
        .map(|(x, y)| at(x, y))
        .collect();
        let mut rows: Vec<&[&str]> = Vec::new();
        let refs: Vec<&str> = placed.iter().map(|s| s.as_str()).collect();
        let singles: Vec<[&str; 1]> = refs.iter().map(|&s| [s]).collect();
        for s in &singles {
            rows.push(s);
        }
        rows.push(&["(connect line line)"]);
        rows.push(&["(reflect line 1.5707963267948966)"]);
        rows.push(&["line"]);
        rows.push(&["circle"]);
        let beams = beams_of(&lib, &rows);
        let mut st = state_with(&lib, beams);
        let cfg = RunConfig::default();
        let out = compress_step(&mut st, &cfg);
        assert!(out.dl_after < out.dl_before, "{out:?}");
        let lib2 = st.grammar.lib();
        // Some learned entry must take the two varying distances as
        // parameters.
        assert!(
            lib2.learned_ids().any(|id| {
                lib2.entry(id)
                    .arg_tys
                    .iter()
                    .filter(|t| matches!(t, Ty::Dist))
                    .count()
                    >= 2
            }),
            "expected a distance-parameterized abstraction, got {:?}",
            out.added
        );
        // Placed beams still render exactly one stroke each.
        for beam in &st.beams[..6] {
            let s = crate::dsl::eval::strokes(lib2, &beam.items[0].program).unwrap();
            assert_eq!(s.len(), 1);
        }
    }

    #[test]
    fn compress_never_raises_the_objective() {
        let lib = Library::base();
        let beams = beams_of(
            &lib,
            &[
                &["line", "(connect line line)"],
                &["circle"],
                &["(reflect line 1.5707963267948966)"],
            ],
        );
        let mut st = state_with(&lib, beams);
        let cfg = RunConfig::default();
        let out = compress_step(&mut st, &cfg);
        assert!(out.dl_after <= out.dl_before + 1e-9);
    }

    #[test]
    fn empty_beams_compress_to_nothing() {
        let lib = Library::base();
        let mut st = state_with(&lib, vec![Vec::new(), Vec::new()]);
        let cfg = RunConfig::default();
        let out = compress_step(&mut st, &cfg);
        assert_eq!(out.added.len(), 0);
        // Unsolved images carry a fixed worst-case charge.
        assert_eq!(out.dl_before, 2.0 * UNSOLVED_NATS);
        assert_eq!(out.dl_after, out.dl_before);
    }

    #[test]
    fn match_pattern_requires_consistent_hole_bindings() {
        let lib = Library::base();
        // Pattern: connect($0, $0) with one hole.
        let cand = Candidate {
            body: Program::Call(
                lib.id("connect"),
                vec![Program::Var(0), Program::Var(0)],
            ),
            hole_tys: vec![Ty::Drawing],
            ret: Ty::Drawing,
            key: String::new(),
        };
        let same = parse(&lib, "(connect line line)", &Ty::Drawing).unwrap();
        let diff = parse(&lib, "(connect line circle)", &Ty::Drawing).unwrap();
        assert!(match_pattern(&same, &cand).is_some());
        assert!(match_pattern(&diff, &cand).is_none());
    }

    #[test]
    fn anti_unification_reuses_repeated_mismatches() {
        let lib = Library::base();
        let a = parse(&lib, "(connect line line)", &Ty::Drawing).unwrap();
        let b = parse(&lib, "(connect circle circle)", &Ty::Drawing).unwrap();
        let mut holes = Vec::new();
        let raw = anti_unify(&lib, &a, &b, &Ty::Drawing, &mut holes).unwrap();
        assert_eq!(holes.len(), 1, "one shared hole for the repeated pair");
        let body = finalize_holes(&raw, 1);
        assert_eq!(
            body,
            Program::Call(lib.id("connect"), vec![Program::Var(0), Program::Var(0)])
        );
    }
}
