//! Segment-level pairwise accuracy with ties (acc_eq) and tie calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScoreMatrix, ScoreTable};

/// Tallies of same-segment translation pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseCounts {
    /// same order under both
    pub concordant: u64,
    /// opposite order
    pub discordant: u64,
    /// tied only by the evaluator
    pub tied_eval: u64,
    /// tied only by the gold
    pub tied_gold: u64,
    /// tied by both
    pub tied_both: u64,
}

impl PairwiseCounts {
    pub fn total(&self) -> u64 {
        self.concordant + self.discordant + self.tied_eval + self.tied_gold + self.tied_both
    }

    pub fn agreements(&self) -> u64 {
        self.concordant + self.tied_both
    }
}

/// Two assessments are tied when they differ by at most `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieThreshold {
    pub epsilon: f64,
    pub calibrated: bool,
}

impl TieThreshold {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Argument(format!(
                "tie threshold {epsilon} must be finite and >= 0"
            )));
        }
        Ok(TieThreshold {
            epsilon,
            calibrated: false,
        })
    }

    /// Only exact equality counts as a tie.
    pub fn exact() -> Self {
        TieThreshold {
            epsilon: 0.0,
            calibrated: false,
        }
    }
}

impl Default for TieThreshold {
    fn default() -> Self {
        TieThreshold::exact()
    }
}

/// Gold-side relation of every same-segment system pair, in the order
/// segment-major then `(i, j)` with `i < j`: `1` when `i` beats `j`, `-1` when
/// `j` beats `i`, `0` when tied.
#[derive(Debug, Clone)]
pub struct GoldPairs {
    n_systems: usize,
    n_segments: usize,
    relations: Vec<i8>,
}

fn sign(d: f64) -> i8 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

impl GoldPairs {
    pub fn new(gold: &ScoreMatrix, eps_gold: TieThreshold) -> Self {
        let (m, n) = (gold.n_systems(), gold.n_segments());
        let mut relations = Vec::with_capacity(n * m * m.saturating_sub(1) / 2);
        for seg in 0..n {
            for i in 0..m {
                for j in i + 1..m {
                    let d = gold.get(i, seg) - gold.get(j, seg);
                    relations.push(if d.abs() <= eps_gold.epsilon { 0 } else { sign(d) });
                }
            }
        }
        GoldPairs {
            n_systems: m,
            n_segments: n,
            relations,
        }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    fn check_shape(&self, eval: &ScoreMatrix) -> Result<()> {
        if eval.n_systems() != self.n_systems || eval.n_segments() != self.n_segments {
            return Err(Error::Argument(format!(
                "evaluator matrix is {}x{}, gold is {}x{}",
                eval.n_systems(),
                eval.n_segments(),
                self.n_systems,
                self.n_segments
            )));
        }
        Ok(())
    }

    /// Evaluator differences `e_i - e_j` aligned with `relations`.
    fn eval_diffs<'a>(&'a self, eval: &'a ScoreMatrix) -> impl Iterator<Item = (i8, f64)> + 'a {
        let m = self.n_systems;
        (0..self.n_segments)
            .flat_map(move |seg| {
                (0..m).flat_map(move |i| (i + 1..m).map(move |j| (seg, i, j)))
            })
            .zip(&self.relations)
            .map(move |((seg, i, j), &g)| (g, eval.get(i, seg) - eval.get(j, seg)))
    }

    pub fn counts(&self, eval: &ScoreMatrix, eps_eval: TieThreshold) -> Result<PairwiseCounts> {
        self.check_shape(eval)?;
        let mut c = PairwiseCounts::default();
        for (g, d) in self.eval_diffs(eval) {
            let eval_tied = d.abs() <= eps_eval.epsilon;
            match (g == 0, eval_tied) {
                (true, true) => c.tied_both += 1,
                (false, true) => c.tied_eval += 1,
                (true, false) => c.tied_gold += 1,
                (false, false) if g == sign(d) => c.concordant += 1,
                (false, false) => c.discordant += 1,
            }
        }
        Ok(c)
    }

    /// Best threshold over `{0} ∪ {|e_i - e_j|}` by a single sorted sweep.
    /// Returns `(epsilon, agreements, total)`; ties favour the smaller epsilon.
    pub fn calibrate(&self, eval: &ScoreMatrix, scratch: &mut Vec<(f64, i8)>) -> Result<(f64, u64, u64)> {
        self.check_shape(eval)?;
        if self.relations.is_empty() {
            return Err(Error::Undefined("no comparable translation pairs".into()));
        }
        // weight of each pair once it becomes an evaluator tie:
        // +1 gold tie (becomes T_eg), -1 concordant (stops counting as C)
        scratch.clear();
        let mut agreements: i64 = 0;
        for (g, d) in self.eval_diffs(eval) {
            let delta = if g == 0 {
                1
            } else if g == sign(d) {
                agreements += 1;
                -1
            } else {
                0
            };
            scratch.push((d.abs(), delta));
        }
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut best_eps = 0.0;
        let mut idx = 0;
        while idx < scratch.len() && scratch[idx].0 == 0.0 {
            agreements += scratch[idx].1 as i64;
            idx += 1;
        }
        let mut best = agreements;
        while idx < scratch.len() {
            let v = scratch[idx].0;
            while idx < scratch.len() && scratch[idx].0 == v {
                agreements += scratch[idx].1 as i64;
                idx += 1;
            }
            if agreements > best {
                best = agreements;
                best_eps = v;
            }
        }
        Ok((best_eps, best as u64, self.relations.len() as u64))
    }
}

fn dense_pair(
    gold: &ScoreTable,
    eval: &ScoreTable,
    systems: &[String],
    segments: &[String],
) -> Result<(ScoreMatrix, ScoreMatrix)> {
    Ok((gold.matrix(systems, segments)?, eval.matrix(systems, segments)?))
}

/// Classifies every same-segment system pair into C, D, T_e, T_g or T_eg.
pub fn pairwise_counts(
    gold: &ScoreTable,
    eval: &ScoreTable,
    eps_gold: TieThreshold,
    eps_eval: TieThreshold,
    systems: &[String],
    segments: &[String],
) -> Result<PairwiseCounts> {
    let (g, e) = dense_pair(gold, eval, systems, segments)?;
    GoldPairs::new(&g, eps_gold).counts(&e, eps_eval)
}

/// `(C + T_eg) / (C + D + T_e + T_g + T_eg)`.
pub fn acc_eq(counts: &PairwiseCounts) -> Result<f64> {
    match counts.total() {
        0 => Err(Error::Undefined("no comparable translation pairs".into())),
        total => Ok(counts.agreements() as f64 / total as f64),
    }
}

/// The evaluator tie threshold maximizing acc_eq, and acc_eq at that threshold.
pub fn tie_calibrate(
    gold: &ScoreTable,
    eval: &ScoreTable,
    eps_gold: TieThreshold,
    systems: &[String],
    segments: &[String],
) -> Result<(TieThreshold, f64)> {
    let (g, e) = dense_pair(gold, eval, systems, segments)?;
    let (eps, agree, total) = GoldPairs::new(&g, eps_gold).calibrate(&e, &mut Vec::new())?;
    Ok((
        TieThreshold {
            epsilon: eps,
            calibrated: true,
        },
        agree as f64 / total as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    /// One segment, systems `sys0..`.
    fn one_segment(id: &str, scores: &[f64]) -> ScoreTable {
        ScoreTable::from_triples(
            id,
            scores.iter().enumerate().map(|(i, &s)| (format!("sys{i}"), "seg", s)),
        )
    }

    fn counts(gold: &[f64], eval: &[f64], eg: f64, ee: f64) -> PairwiseCounts {
        pairwise_counts(
            &one_segment("g", gold),
            &one_segment("e", eval),
            TieThreshold::new(eg).unwrap(),
            TieThreshold::new(ee).unwrap(),
            &ids("sys", gold.len()),
            &["seg".to_string()],
        )
        .unwrap()
    }

    #[test]
    fn all_concordant() {
        let c = counts(&[-5.0, -1.0, 0.0], &[0.2, 0.5, 0.9], 0.0, 0.1);
        assert_eq!(
            c,
            PairwiseCounts {
                concordant: 3,
                ..Default::default()
            }
        );
        assert_eq!(acc_eq(&c).unwrap(), 1.0);
    }

    #[test]
    fn eval_tie_within_threshold() {
        let c = counts(&[-5.0, -1.0, 0.0], &[0.2, 0.85, 0.9], 0.0, 0.1);
        assert_eq!(
            c,
            PairwiseCounts {
                concordant: 2,
                tied_eval: 1,
                ..Default::default()
            }
        );
        assert_eq!(acc_eq(&c).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn identity_has_only_concordant_pairs() {
        let s = [3.0, -1.0, 7.5, 2.0];
        let c = counts(&s, &s, 0.0, 0.0);
        assert_eq!(c.concordant, 6);
        assert_eq!(c.total(), 6);
    }

    #[test]
    fn acc_eq_edge_cases() {
        let all_tied = PairwiseCounts {
            tied_both: 4,
            ..Default::default()
        };
        assert_eq!(acc_eq(&all_tied).unwrap(), 1.0);
        assert!(matches!(
            acc_eq(&PairwiseCounts::default()).unwrap_err(),
            Error::Undefined(_)
        ));
    }

    #[test]
    fn calibration_finds_the_gold_tie() {
        let (eps, acc) = tie_calibrate(
            &one_segment("g", &[0.0, 0.0, 1.0]),
            &one_segment("e", &[0.50, 0.52, 0.90]),
            TieThreshold::exact(),
            &ids("sys", 3),
            &["seg".to_string()],
        )
        .unwrap();
        assert!(eps.calibrated);
        assert!((eps.epsilon - 0.02).abs() < 1e-12, "{}", eps.epsilon);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn calibration_keeps_zero_when_no_ties_needed() {
        let (eps, acc) = tie_calibrate(
            &one_segment("g", &[1.0, 2.0, 3.0]),
            &one_segment("e", &[0.1, 0.2, 0.3]),
            TieThreshold::exact(),
            &ids("sys", 3),
            &["seg".to_string()],
        )
        .unwrap();
        assert_eq!(eps.epsilon, 0.0);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn constant_evaluator() {
        // one gold tie among three pairs; every pair is an evaluator tie
        let (_, acc) = tie_calibrate(
            &one_segment("g", &[1.0, 1.0, 3.0]),
            &one_segment("e", &[0.4, 0.4, 0.4]),
            TieThreshold::exact(),
            &ids("sys", 3),
            &["seg".to_string()],
        )
        .unwrap();
        assert_eq!(acc, 1.0 / 3.0);
    }

    #[test]
    fn coverage_gap_is_reported() {
        let g = one_segment("g", &[1.0, 2.0]);
        let e = one_segment("e", &[1.0]);
        let err = pairwise_counts(
            &g,
            &e,
            TieThreshold::exact(),
            TieThreshold::exact(),
            &ids("sys", 2),
            &["seg".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Coverage(_)));
        assert!(TieThreshold::new(-0.1).is_err());
    }
}
