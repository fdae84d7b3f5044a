//! PERM-BOTH paired permutation tests between evaluators, significance
//! cluster ranks, and the assembled ranking report.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metaeval::{pa_dense, spa_dense, GoldPairs, SignFlips, TieThreshold};
use crate::model::{AnnotatedDataset, ScoreMatrix, ScoreTable};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "spa")]
    Spa,
    #[serde(rename = "acc-eq")]
    AccEq,
    #[serde(rename = "pa")]
    Pa,
}

impl Measure {
    pub fn key(self) -> &'static str {
        match self {
            Measure::Spa => "spa",
            Measure::AccEq => "acc-eq",
            Measure::Pa => "pa",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Measure::Spa => "SPA",
            Measure::AccEq => "acc*_eq",
            Measure::Pa => "PA",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spa" => Ok(Measure::Spa),
            "acc-eq" | "acc_eq" | "acceq" | "acc*_eq" => Ok(Measure::AccEq),
            "pa" => Ok(Measure::Pa),
            other => Err(Error::Argument(format!("unknown measure {other:?}"))),
        }
    }
}

/// What a PERM-BOTH permutation swaps between the two evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwapUnit {
    /// each `(system, segment)` score independently
    #[default]
    Item,
    /// all systems of a segment together
    Segment,
}

impl FromStr for SwapUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "item" => Ok(SwapUnit::Item),
            "segment" => Ok(SwapUnit::Segment),
            other => Err(Error::Argument(format!("unknown swap unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    /// significance level for cluster ranks
    pub alpha: f64,
    /// PERM-BOTH resamples per evaluator pair
    pub n_perm: usize,
    /// sign-flip permutations behind every SPA p-value matrix
    pub pvalue_perm: usize,
    pub seed: u64,
    pub eps_gold: TieThreshold,
    pub swap_unit: SwapUnit,
    /// additive smoothing applied to every permutation p-value
    pub smoothing: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            alpha: 0.05,
            n_perm: 1000,
            pvalue_perm: 1000,
            seed: 0,
            eps_gold: TieThreshold::exact(),
            swap_unit: SwapUnit::Item,
            smoothing: 1.0,
        }
    }
}

impl RankConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.n_perm == 0 || self.pvalue_perm == 0 {
            return Err(Error::Argument("permutation counts must be positive".into()));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(Error::Argument(format!("invalid smoothing {}", self.smoothing)));
        }
        Ok(())
    }
}

/// A measure's value for one evaluator, plus the calibrated tie threshold
/// for acc_eq.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub epsilon: Option<f64>,
}

/// Everything about the gold that a measure needs, computed once.
pub struct Scorer {
    measure: Measure,
    n_systems: usize,
    gold_means: Vec<f64>,
    flips: Option<(SignFlips, Vec<f64>)>,
    gold_pairs: Option<GoldPairs>,
    smoothing: f64,
}

impl Scorer {
    pub fn new(measure: Measure, gold: &ScoreMatrix, config: &RankConfig) -> Result<Self> {
        let flips = (measure == Measure::Spa).then(|| {
            let f = SignFlips::new(config.seed, config.pvalue_perm, gold.n_segments());
            let p = f.pvalues(gold, config.smoothing);
            (f, p)
        });
        let gold_pairs = (measure == Measure::AccEq).then(|| GoldPairs::new(gold, config.eps_gold));
        Ok(Scorer {
            measure,
            n_systems: gold.n_systems(),
            gold_means: gold.system_means(),
            flips,
            gold_pairs,
            smoothing: config.smoothing,
        })
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn score(&self, eval: &ScoreMatrix, scratch: &mut Vec<(f64, i8)>) -> Result<Scored> {
        match self.measure {
            Measure::Pa => Ok(Scored {
                value: pa_dense(&self.gold_means, &eval.system_means())?,
                epsilon: None,
            }),
            Measure::Spa => {
                let (flips, gold_p) = self.flips.as_ref().expect("built for SPA");
                let p = flips.pvalues(eval, self.smoothing);
                Ok(Scored {
                    value: spa_dense(gold_p, &p, self.n_systems)?,
                    epsilon: None,
                })
            }
            Measure::AccEq => {
                let pairs = self.gold_pairs.as_ref().expect("built for acc_eq");
                let (eps, agree, total) = pairs.calibrate(eval, scratch)?;
                Ok(Scored {
                    value: agree as f64 / total as f64,
                    epsilon: Some(eps),
                })
            }
        }
    }
}

/// Outcome of one PERM-BOTH comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermBothResult {
    /// `m(x) - m(y)`
    pub delta: f64,
    /// p-value of "x is better than y"
    pub p_x_better: f64,
    /// p-value of "y is better than x", from the same permutations
    pub p_y_better: f64,
}

fn swap_into(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    unit: SwapUnit,
    rng: &mut impl Rng,
    xs: &mut ScoreMatrix,
    ys: &mut ScoreMatrix,
) {
    let (m, n) = (x.n_systems(), x.n_segments());
    match unit {
        SwapUnit::Item => {
            for sys in 0..m {
                for seg in 0..n {
                    let (a, b) = (x.get(sys, seg), y.get(sys, seg));
                    let (a, b) = if rng.random::<bool>() { (b, a) } else { (a, b) };
                    xs.set(sys, seg, a);
                    ys.set(sys, seg, b);
                }
            }
        }
        SwapUnit::Segment => {
            for seg in 0..n {
                let flip = rng.random::<bool>();
                for sys in 0..m {
                    let (a, b) = (x.get(sys, seg), y.get(sys, seg));
                    let (a, b) = if flip { (b, a) } else { (a, b) };
                    xs.set(sys, seg, a);
                    ys.set(sys, seg, b);
                }
            }
        }
    }
}

/// PERM-BOTH on dense matrices with a prepared scorer.
pub fn perm_both_dense(
    scorer: &Scorer,
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    n_perm: usize,
    seed: u64,
    unit: SwapUnit,
    smoothing: f64,
) -> Result<PermBothResult> {
    if n_perm == 0 {
        return Err(Error::Argument("n_perm must be at least 1".into()));
    }
    if x.n_systems() != y.n_systems() || x.n_segments() != y.n_segments() {
        return Err(Error::Coverage("evaluators cover different items".into()));
    }
    let mut scratch = Vec::new();
    let delta = scorer.score(x, &mut scratch)?.value - scorer.score(y, &mut scratch)?.value;

    let outcomes: Vec<(bool, bool)> = (0..n_perm)
        .into_par_iter()
        .map_init(
            || (x.clone(), y.clone(), Vec::new()),
            |(xs, ys, scratch), r| {
                let mut rng = rng::stream(seed, &[0x5045_524d, r as u64]);
                swap_into(x, y, unit, &mut rng, xs, ys);
                let d = scorer.score(xs, scratch)?.value - scorer.score(ys, scratch)?.value;
                Ok((d >= delta, d <= delta))
            },
        )
        .collect::<Result<_>>()?;
    let ge = outcomes.iter().filter(|o| o.0).count();
    let le = outcomes.iter().filter(|o| o.1).count();
    let denom = n_perm as f64 + smoothing;
    Ok(PermBothResult {
        delta,
        p_x_better: (ge as f64 + smoothing) / denom,
        p_y_better: (le as f64 + smoothing) / denom,
    })
}

/// Tests whether `eval_x` beats `eval_y` under `measure` against `gold`.
#[allow(clippy::too_many_arguments)]
pub fn perm_both_test(
    gold: &ScoreTable,
    eval_x: &ScoreTable,
    eval_y: &ScoreTable,
    systems: &[String],
    segments: &[String],
    measure: Measure,
    config: &RankConfig,
) -> Result<PermBothResult> {
    config.validate()?;
    let g = gold.matrix(systems, segments)?;
    let x = eval_x.matrix(systems, segments)?;
    let y = eval_y.matrix(systems, segments)?;
    let scorer = Scorer::new(measure, &g, config)?;
    perm_both_dense(
        &scorer,
        &x,
        &y,
        config.n_perm,
        config.seed,
        config.swap_unit,
        config.smoothing,
    )
}

/// Significance cluster rank of every evaluator.
///
/// An evaluator's rank is one plus the number of evaluators with a higher
/// value that beat it with `p < alpha`, raised to the largest rank of any
/// evaluator scoring at least as high so ranks never decrease down the
/// ordering. `p[a][b]` is the p-value of "a is better than b".
pub fn cluster_ranks(values: &[f64], p: &[Vec<f64>], alpha: f64) -> Vec<usize> {
    let n = values.len();
    let raw: Vec<usize> = (0..n)
        .map(|e| {
            1 + (0..n)
                .filter(|&o| values[o] > values[e] && p[o][e] < alpha)
                .count()
        })
        .collect();
    (0..n)
        .map(|e| {
            (0..n)
                .filter(|&o| values[o] >= values[e])
                .map(|o| raw[o])
                .max()
                .unwrap_or(1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCell {
    pub value: f64,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub evaluator: String,
    pub human: bool,
    /// one cell per entry of [`RankingReport::measures`]
    pub cells: Vec<MeasureCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub testset_id: String,
    pub langpair: String,
    pub gold: String,
    pub measures: Vec<Measure>,
    pub config: RankConfig,
    pub n_systems: usize,
    pub n_segments: usize,
    pub rows: Vec<RankingRow>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Scores every non-gold evaluator under each measure, tests every pair with
/// PERM-BOTH and assigns significance cluster ranks. Rows are sorted by the
/// first measure, best first.
pub fn rank_table(
    dataset: &AnnotatedDataset,
    gold_id: &str,
    human_ids: &[&str],
    measures: &[Measure],
    config: &RankConfig,
) -> Result<RankingReport> {
    config.validate()?;
    if measures.is_empty() {
        return Err(Error::Argument("no measures requested".into()));
    }
    let gold_table = dataset.table(gold_id)?;
    if human_ids.contains(&gold_id) {
        return Err(Error::Argument(format!(
            "gold evaluator {gold_id} is also listed as a scored evaluator"
        )));
    }
    for h in human_ids {
        dataset.table(h)?;
    }
    let humans: BTreeSet<&str> = human_ids.iter().copied().collect();
    let evaluators: Vec<&str> = dataset.evaluator_ids().filter(|e| *e != gold_id).collect();
    if evaluators.is_empty() {
        return Err(Error::Argument("no evaluators besides the gold".into()));
    }
    let (systems, segments) = (&dataset.systems, &dataset.segments);
    let gold = gold_table.matrix(systems, segments)?;
    let matrices: Vec<ScoreMatrix> = evaluators
        .iter()
        .map(|e| dataset.score_tables[*e].matrix(systems, segments))
        .collect::<Result<_>>()?;

    let mut notes = Vec::new();
    if measures.contains(&Measure::Pa) {
        let means = gold.system_means();
        let tied = (0..means.len())
            .flat_map(|i| (i + 1..means.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| means[i] == means[j])
            .count();
        if tied > 0 {
            notes.push(format!(
                "PA: {tied} system pair(s) tied under the gold were excluded"
            ));
        }
    }

    let n = evaluators.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    let mut columns = Vec::with_capacity(measures.len());
    for &measure in measures {
        let scorer = Scorer::new(measure, &gold, config)?;
        let mut scratch = Vec::new();
        let scored: Vec<Scored> = matrices
            .iter()
            .map(|m| scorer.score(m, &mut scratch))
            .collect::<Result<_>>()?;

        let tests: Vec<PermBothResult> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let seed = rng::derive(
                    config.seed,
                    &[
                        measure as u64,
                        rng::hash_str(evaluators[a]),
                        rng::hash_str(evaluators[b]),
                    ],
                );
                perm_both_dense(
                    &scorer,
                    &matrices[a],
                    &matrices[b],
                    config.n_perm,
                    seed,
                    config.swap_unit,
                    config.smoothing,
                )
            })
            .collect::<Result<_>>()?;
        let mut p = vec![vec![1.0; n]; n];
        for (&(a, b), t) in pairs.iter().zip(&tests) {
            p[a][b] = t.p_x_better;
            p[b][a] = t.p_y_better;
        }
        let values: Vec<f64> = scored.iter().map(|s| s.value).collect();
        let ranks = cluster_ranks(&values, &p, config.alpha);
        columns.push((scored, ranks));
    }

    let mut rows: Vec<RankingRow> = evaluators
        .iter()
        .enumerate()
        .map(|(i, e)| RankingRow {
            evaluator: (*e).to_owned(),
            human: humans.contains(e),
            cells: columns
                .iter()
                .map(|(scored, ranks)| MeasureCell {
                    value: scored[i].value,
                    rank: ranks[i],
                    epsilon: scored[i].epsilon,
                })
                .collect(),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.cells[0]
            .value
            .total_cmp(&a.cells[0].value)
            .then_with(|| a.evaluator.cmp(&b.evaluator))
    });

    Ok(RankingReport {
        testset_id: dataset.testset_id.clone(),
        langpair: dataset.langpair.clone(),
        gold: gold_id.to_owned(),
        measures: measures.to_vec(),
        config: config.clone(),
        n_systems: systems.len(),
        n_segments: segments.len(),
        rows,
        notes,
    })
}
