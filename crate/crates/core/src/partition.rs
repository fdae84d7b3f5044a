//! Fair extraction of independent evaluators from a shared rater pool.
//!
//! Given which raters annotated which segments, find `k` disjoint rater
//! groups and the largest set of segments such that every kept segment was
//! annotated by exactly one rater of each group. Each group then yields one
//! evaluator and no rater contributes to two of them.
//!
//! [`solve_partition`] is an exact branch and bound over rater-to-group
//! labels. Groups are unlabeled, so labels are canonical: group `g` may only
//! be opened after groups `0..g`, which numbers groups by their first rater.
//! The bound is the number of segments that can still be completed. Search
//! runs in lexicographic label order and only accepts strict improvements,
//! so the returned optimum is the lexicographically smallest canonical label
//! vector (raters in sorted order, unassigned ranking after every group).
//! [`brute_force_partition`] enumerates the same label space exhaustively
//! and applies the same tie rule.
//!
//! Equivalent ILP, for cross-checking with an external solver:
//!
//! ```text
//! maximize   Σ_s y_s
//! subject to Σ_g x_{r,g} ≤ 1                      ∀ r   (= 1 for a total partition)
//!            Σ_{r ∈ cover(s)} x_{r,g} = y_s + z_{s,g} ∀ s, g
//!            z_{s,g} ≤ M (1 − y_s)                  ∀ s, g
//!            x, y binary; z ≥ 0 integer
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotatedDataset, PartitionSolution, RaterAssignment};

/// Largest rater pool [`brute_force_partition`] accepts.
pub const BRUTE_FORCE_MAX_RATERS: usize = 12;

/// Largest rater pool [`solve_partition`] accepts (bitmask width).
pub const SOLVER_MAX_RATERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PartitionMode {
    /// Raters may be left out of every group.
    #[default]
    AllowUnassigned,
    /// Every rater must belong to one of the `k` groups.
    Total,
}

/// Segments whose cover meets every group in exactly one rater.
pub fn coverage(
    groups: &[BTreeSet<String>],
    assignment: &RaterAssignment,
) -> Result<BTreeSet<String>> {
    let mut seen = BTreeSet::new();
    for g in groups {
        for r in g {
            if !seen.insert(r) {
                return Err(Error::Argument(format!("rater {r} is in two groups")));
            }
        }
    }
    Ok(assignment
        .covers()
        .iter()
        .filter(|(_, cover)| groups.iter().all(|g| cover.intersection(g).count() == 1))
        .map(|(s, _)| s.clone())
        .collect())
}

fn check_k(assignment: &RaterAssignment, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if k > assignment.raters().len() {
        return Err(Error::Argument(format!(
            "k = {k} exceeds the {} available raters",
            assignment.raters().len()
        )));
    }
    Ok(())
}

fn solution_from_labels(
    raters: &[&String],
    labels: &[usize],
    k: usize,
    assignment: &RaterAssignment,
) -> Result<PartitionSolution> {
    let mut groups = vec![BTreeSet::new(); k];
    let mut unassigned = BTreeSet::new();
    for (r, &l) in raters.iter().zip(labels) {
        if l < k {
            groups[l].insert((*r).clone());
        } else {
            unassigned.insert((*r).clone());
        }
    }
    let retained_segments = coverage(&groups, assignment)?;
    Ok(PartitionSolution {
        objective: retained_segments.len(),
        groups,
        unassigned,
        retained_segments,
    })
}

/// Exhaustive search over every canonical labeling. Exponential; guarded at
/// [`BRUTE_FORCE_MAX_RATERS`] raters.
pub fn brute_force_partition(
    assignment: &RaterAssignment,
    k: usize,
    mode: PartitionMode,
) -> Result<PartitionSolution> {
    check_k(assignment, k)?;
    let raters: Vec<&String> = assignment.raters().iter().collect();
    let n = raters.len();
    if n > BRUTE_FORCE_MAX_RATERS {
        return Err(Error::Size(format!(
            "{n} raters exceeds the brute-force limit of {BRUTE_FORCE_MAX_RATERS}"
        )));
    }
    let radix = match mode {
        PartitionMode::AllowUnassigned => k + 1,
        PartitionMode::Total => k,
    };
    let is_canonical = |labels: &[usize]| {
        let mut opened = 0;
        for &l in labels {
            if l < k {
                if l > opened {
                    return false;
                }
                if l == opened {
                    opened += 1;
                }
            }
        }
        true
    };

    let mut labels = vec![0usize; n];
    let mut best: Option<PartitionSolution> = None;
    loop {
        if is_canonical(&labels) {
            let sol = solution_from_labels(&raters, &labels, k, assignment)?;
            if best.as_ref().is_none_or(|b| sol.objective > b.objective) {
                best = Some(sol);
            }
        }
        // odometer increment, last rater least significant
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(best.expect("at least one labeling"));
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < radix {
                break;
            }
            labels[i] = 0;
        }
    }
}

struct Search<'a> {
    k: usize,
    allow_unassigned: bool,
    n_raters: usize,
    /// weight (segment count) of each distinct cover
    weights: &'a [usize],
    /// cover indices containing each rater
    rater_covers: &'a [Vec<usize>],
    cover_size: &'a [usize],
    /// per cover: hits per group, flattened `cover * k + group`
    hits: Vec<u8>,
    decided: Vec<usize>,
    alive: Vec<bool>,
    bound: usize,
    labels: Vec<usize>,
    best: Option<(usize, Vec<usize>)>,
}

impl Search<'_> {
    fn cover_alive(&self, c: usize) -> bool {
        let row = &self.hits[c * self.k..(c + 1) * self.k];
        if row.iter().any(|&h| h > 1) {
            return false;
        }
        let empty = row.iter().filter(|&&h| h == 0).count();
        empty <= self.cover_size[c] - self.decided[c]
    }

    fn assign(&mut self, rater: usize, label: usize) -> Vec<usize> {
        let mut died = Vec::new();
        for &c in &self.rater_covers[rater] {
            self.decided[c] += 1;
            if label < self.k {
                self.hits[c * self.k + label] += 1;
            }
            if self.alive[c] && !self.cover_alive(c) {
                self.alive[c] = false;
                self.bound -= self.weights[c];
                died.push(c);
            }
        }
        died
    }

    fn unassign(&mut self, rater: usize, label: usize, died: Vec<usize>) {
        for &c in &self.rater_covers[rater] {
            self.decided[c] -= 1;
            if label < self.k {
                self.hits[c * self.k + label] -= 1;
            }
        }
        for c in died {
            self.alive[c] = true;
            self.bound += self.weights[c];
        }
    }

    fn dfs(&mut self, rater: usize, opened: usize) {
        if let Some((best, _)) = &self.best {
            if self.bound <= *best {
                return;
            }
        }
        if rater == self.n_raters {
            self.best = Some((self.bound, self.labels.clone()));
            return;
        }
        let top = opened.min(self.k - 1);
        let mut choices: Vec<usize> = (0..=top).collect();
        if self.allow_unassigned {
            choices.push(self.k);
        }
        for label in choices {
            self.labels[rater] = label;
            let died = self.assign(rater, label);
            let next_opened = if label == opened && label < self.k {
                opened + 1
            } else {
                opened
            };
            self.dfs(rater + 1, next_opened);
            self.unassign(rater, label, died);
        }
    }
}

/// Exact optimum of the rater partition problem.
pub fn solve_partition(
    assignment: &RaterAssignment,
    k: usize,
    mode: PartitionMode,
) -> Result<PartitionSolution> {
    check_k(assignment, k)?;
    let raters: Vec<&String> = assignment.raters().iter().collect();
    let n = raters.len();
    if n > SOLVER_MAX_RATERS {
        return Err(Error::Size(format!(
            "{n} raters exceeds the solver limit of {SOLVER_MAX_RATERS}"
        )));
    }
    let index: BTreeMap<&str, usize> = raters
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i))
        .collect();

    // segments sharing a cover behave identically
    let mut distinct: BTreeMap<u64, usize> = BTreeMap::new();
    for cover in assignment.covers().values() {
        if cover.len() < k {
            continue;
        }
        let mask = cover.iter().fold(0u64, |m, r| m | 1 << index[r.as_str()]);
        *distinct.entry(mask).or_default() += 1;
    }
    let masks: Vec<u64> = distinct.keys().copied().collect();
    let weights: Vec<usize> = distinct.values().copied().collect();
    let cover_size: Vec<usize> = masks.iter().map(|m| m.count_ones() as usize).collect();
    let rater_covers: Vec<Vec<usize>> = (0..n)
        .map(|r| {
            masks
                .iter()
                .enumerate()
                .filter(|(_, m)| *m & (1 << r) != 0)
                .map(|(c, _)| c)
                .collect()
        })
        .collect();

    let mut search = Search {
        k,
        allow_unassigned: mode == PartitionMode::AllowUnassigned,
        n_raters: n,
        weights: &weights,
        rater_covers: &rater_covers,
        cover_size: &cover_size,
        hits: vec![0; masks.len() * k],
        decided: vec![0; masks.len()],
        alive: vec![true; masks.len()],
        bound: weights.iter().sum(),
        labels: vec![0; n],
        best: None,
    };
    search.dfs(0, 0);
    let (objective, labels) = search.best.expect("search visits at least one leaf");
    let solution = solution_from_labels(&raters, &labels, k, assignment)?;
    debug_assert_eq!(solution.objective, objective);
    Ok(solution)
}

/// A restricted dataset plus any warnings raised while restricting.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub dataset: AnnotatedDataset,
    pub warnings: Vec<String>,
}

/// Keeps the retained segments that every evaluator in `extra_evaluators`
/// scores for all systems. An empty result is a warning, not an error.
pub fn restrict_dataset(
    dataset: &AnnotatedDataset,
    solution: &PartitionSolution,
    extra_evaluators: &[&str],
) -> Result<Restriction> {
    let mut keep: BTreeSet<String> = dataset
        .segments
        .iter()
        .filter(|s| solution.retained_segments.contains(*s))
        .cloned()
        .collect();
    for id in extra_evaluators {
        let full = dataset.fully_covered_segments(id)?;
        keep.retain(|s| full.contains(s));
    }
    let mut warnings = Vec::new();
    if keep.is_empty() {
        warnings.push("restriction left no segments".to_owned());
    }
    Ok(Restriction {
        dataset: dataset.with_segments(&keep),
        warnings,
    })
}

/// Keeps the segments every listed evaluator scores for all systems.
pub fn restrict_to_common(dataset: &AnnotatedDataset, evaluators: &[&str]) -> Result<Restriction> {
    let all = PartitionSolution {
        groups: Vec::new(),
        unassigned: BTreeSet::new(),
        retained_segments: dataset.segments.iter().cloned().collect(),
        objective: dataset.segments.len(),
    };
    restrict_dataset(dataset, &all, evaluators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoreTable;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn four_raters() -> RaterAssignment {
        RaterAssignment::from_covers(
            2,
            [
                ("s1", ["r1", "r2"]),
                ("s2", ["r1", "r3"]),
                ("s3", ["r2", "r4"]),
                ("s4", ["r3", "r4"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn coverage_cases() {
        let a = four_raters();
        let singletons = [set(&["r1"]), set(&["r2"])];
        assert_eq!(coverage(&singletons, &a).unwrap(), set(&["s1"]));

        let pair = [set(&["r1", "r2"]), set(&["r3", "r4"])];
        // s1 has two raters in group one
        assert!(!coverage(&pair, &a).unwrap().contains("s1"));

        let empty = RaterAssignment::from_covers::<&str, &str, Vec<&str>>(1, []).unwrap();
        assert!(coverage(&[set(&["r1"])], &empty).unwrap().is_empty());

        let overlap = [set(&["r1"]), set(&["r1", "r2"])];
        assert!(matches!(
            coverage(&overlap, &a).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn four_rater_instance() {
        let a = four_raters();
        for mode in [PartitionMode::AllowUnassigned, PartitionMode::Total] {
            for sol in [
                brute_force_partition(&a, 2, mode).unwrap(),
                solve_partition(&a, 2, mode).unwrap(),
            ] {
                assert_eq!(sol.objective, 4);
                assert_eq!(sol.groups, vec![set(&["r1", "r4"]), set(&["r2", "r3"])]);
                sol.check(&a).unwrap();
            }
        }
    }

    #[test]
    fn k_equals_r_keeps_everything() {
        let a = RaterAssignment::from_covers(
            3,
            [("s1", ["a", "b", "c"]), ("s2", ["a", "b", "c"]), ("s3", ["a", "b", "c"])],
        )
        .unwrap();
        let sol = solve_partition(&a, 3, PartitionMode::Total).unwrap();
        assert_eq!(sol.objective, 3);
        assert_eq!(sol.groups, vec![set(&["a"]), set(&["b"]), set(&["c"])]);
        assert_eq!(brute_force_partition(&a, 3, PartitionMode::Total).unwrap(), sol);
    }

    #[test]
    fn k_one_matches_brute_force() {
        let a = RaterAssignment::from_covers(
            1,
            [
                ("s1", vec!["r1"]),
                ("s2", vec!["r2"]),
                ("s3", vec!["r1", "r2"]),
                ("s4", vec!["r3"]),
                ("s5", vec!["r2", "r3"]),
            ],
        )
        .unwrap();
        for mode in [PartitionMode::AllowUnassigned, PartitionMode::Total] {
            let bf = brute_force_partition(&a, 1, mode).unwrap();
            let bb = solve_partition(&a, 1, mode).unwrap();
            assert_eq!(bf, bb);
        }
        // {r1, r3}: s1, s4 and s5 each hit once, s3 once; s2 missed
        let bf = brute_force_partition(&a, 1, PartitionMode::AllowUnassigned).unwrap();
        assert_eq!(bf.objective, 4);
    }

    #[test]
    fn idle_rater_does_not_change_objective() {
        let a = four_raters();
        let idle = four_raters().with_raters(["r0".to_string()]);
        for mode in [PartitionMode::AllowUnassigned, PartitionMode::Total] {
            let base = solve_partition(&a, 2, mode).unwrap().objective;
            assert_eq!(solve_partition(&idle, 2, mode).unwrap().objective, base);
            assert_eq!(brute_force_partition(&idle, 2, mode).unwrap().objective, base);
        }
    }

    #[test]
    fn argument_and_size_errors() {
        let a = four_raters();
        assert!(matches!(
            solve_partition(&a, 5, PartitionMode::AllowUnassigned).unwrap_err(),
            Error::Argument(_)
        ));
        assert!(solve_partition(&a, 0, PartitionMode::AllowUnassigned).is_err());
        let big = RaterAssignment::from_covers(
            1,
            (0..13).map(|i| (format!("s{i}"), vec![format!("r{i:02}")])),
        )
        .unwrap();
        assert!(matches!(
            brute_force_partition(&big, 1, PartitionMode::Total).unwrap_err(),
            Error::Size(_)
        ));
        assert_eq!(
            solve_partition(&big, 1, PartitionMode::AllowUnassigned)
                .unwrap()
                .objective,
            13
        );
    }

    #[test]
    fn dropping_a_rater_can_help() {
        // r3 double-covers s2 with r2; leaving r3 out keeps all segments
        let a = RaterAssignment::from_covers(
            2,
            [("s1", vec!["r1", "r2"]), ("s2", vec!["r1", "r2", "r3"])],
        )
        .unwrap();
        let free = solve_partition(&a, 2, PartitionMode::AllowUnassigned).unwrap();
        assert_eq!(free.objective, 2);
        assert_eq!(free.unassigned, set(&["r3"]));
        let total = solve_partition(&a, 2, PartitionMode::Total).unwrap();
        assert_eq!(total.objective, 1);
        assert_eq!(brute_force_partition(&a, 2, PartitionMode::Total).unwrap(), total);
    }

    fn dataset() -> AnnotatedDataset {
        let gold = ScoreTable::from_triples(
            "gold",
            [("A", "s1", 1.0), ("B", "s1", 2.0), ("A", "s2", 1.0), ("B", "s2", 2.0), ("A", "s3", 0.0), ("B", "s3", 0.0)],
        );
        let partial = ScoreTable::from_triples(
            "m",
            [("A", "s1", 1.0), ("B", "s1", 2.0), ("A", "s2", 1.0)],
        );
        let full = gold.renamed("full");
        let none = ScoreTable::from_triples("none", Vec::<(&str, &str, f64)>::new());
        AnnotatedDataset::from_tables("t", "en-de", [gold, partial, full, none])
    }

    fn retained(v: &[&str]) -> PartitionSolution {
        PartitionSolution {
            groups: vec![],
            unassigned: BTreeSet::new(),
            retained_segments: set(v),
            objective: v.len(),
        }
    }

    #[test]
    fn restrict_cases() {
        let d = dataset();
        let sol = retained(&["s1", "s2"]);
        let r = restrict_dataset(&d, &sol, &[]).unwrap();
        assert_eq!(r.dataset.segments, ["s1", "s2"]);
        assert!(r.warnings.is_empty());

        let r = restrict_dataset(&d, &sol, &["full"]).unwrap();
        assert_eq!(r.dataset.segments, ["s1", "s2"]);

        let r = restrict_dataset(&d, &sol, &["m"]).unwrap();
        assert_eq!(r.dataset.segments, ["s1"]);
        assert_eq!(r.dataset.score_tables["gold"].len(), 2);

        let r = restrict_dataset(&d, &sol, &["none"]).unwrap();
        assert!(r.dataset.segments.is_empty());
        assert_eq!(r.warnings.len(), 1);

        assert!(restrict_dataset(&d, &sol, &["missing"]).is_err());
        let common = restrict_to_common(&d, &["gold", "m"]).unwrap();
        assert_eq!(common.dataset.segments, ["s1"]);
    }
}
