//! System-level measures: pairwise accuracy (PA) and soft pairwise accuracy
//! (SPA) over one-sided paired permutation p-values.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ScoreMatrix, ScoreTable};
use crate::rng;

/// Add-one smoothing: `p = (1 + hits) / (n_perm + 1)`.
pub const DEFAULT_SMOOTHING: f64 = 1.0;

/// A fixed draw of sign-flip permutations over `n_segments` paired items.
///
/// Row `r` marks which segments have their two scores swapped in permutation
/// `r`. The rows depend only on `(seed, r)`. Because the statistic is a sum,
/// flipping the paired differences `x_i - x_j` on the marked segments makes
/// the permuted sum reach the observed one exactly when
/// `Σ_marked x_i ≤ Σ_marked x_j`, so each system's marked sums are computed
/// once and every pair reduces to comparisons.
#[derive(Debug, Clone)]
pub struct SignFlips {
    n_perm: usize,
    n_segments: usize,
    /// 0.0 / 1.0 indicators, row-major by permutation
    marks: Vec<f64>,
}

impl SignFlips {
    pub fn new(seed: u64, n_perm: usize, n_segments: usize) -> Self {
        let mut marks = Vec::with_capacity(n_perm * n_segments);
        for r in 0..n_perm {
            let mut rng = rng::stream(seed, &[0x5349_474e, r as u64]);
            marks.extend((0..n_segments).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }));
        }
        SignFlips {
            n_perm,
            n_segments,
            marks,
        }
    }

    pub fn n_perm(&self) -> usize {
        self.n_perm
    }

    /// Marked sum of `values` for every permutation.
    fn marked_sums(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n_segments);
        self.marks
            .chunks_exact(self.n_segments.max(1))
            .take(self.n_perm)
            .map(|row| row.iter().zip(values).map(|(m, v)| m * v).sum())
            .collect()
    }

    /// p-values of "system i is better than system j" for all ordered pairs,
    /// row-major `M × M`; the diagonal is NaN.
    pub fn pvalues(&self, scores: &ScoreMatrix, smoothing: f64) -> Vec<f64> {
        let m = scores.n_systems();
        let sums: Vec<Vec<f64>> = (0..m)
            .map(|s| {
                if self.n_segments == 0 {
                    vec![0.0; self.n_perm]
                } else {
                    self.marked_sums(scores.system_row(s))
                }
            })
            .collect();
        let denom = self.n_perm as f64 + smoothing;
        let mut p = vec![f64::NAN; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let (mut le, mut ge) = (0usize, 0usize);
                for (a, b) in sums[i].iter().zip(&sums[j]) {
                    le += (a <= b) as usize;
                    ge += (a >= b) as usize;
                }
                p[i * m + j] = (le as f64 + smoothing) / denom;
                p[j * m + i] = (ge as f64 + smoothing) / denom;
            }
        }
        p
    }
}

/// One-sided p-values for every ordered system pair under one evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMatrix {
    systems: Vec<String>,
    p: Vec<f64>,
    pub n_perm: usize,
    pub seed: u64,
}

impl ConfidenceMatrix {
    /// Builds a matrix from explicit rows; diagonal entries are ignored.
    pub fn from_rows(systems: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = systems.len();
        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Argument("confidence matrix must be square".into()));
        }
        let mut p = Vec::with_capacity(m * m);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                if i == j {
                    p.push(f64::NAN);
                } else if (0.0..=1.0).contains(&v) {
                    p.push(v);
                } else {
                    return Err(Error::Argument(format!("p-value {v} outside [0, 1]")));
                }
            }
        }
        Ok(ConfidenceMatrix {
            systems,
            p,
            n_perm: 0,
            seed: 0,
        })
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    /// p-value that system `i` beats system `j`; `None` on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i != j).then(|| self.p[i * self.systems.len() + j])
    }

    fn index(&self) -> BTreeMap<&str, usize> {
        self.systems
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect()
    }
}

/// Paired sign-flip p-value matrix over `systems × segments`.
pub fn system_pvalue_matrix(
    table: &ScoreTable,
    systems: &[String],
    segments: &[String],
    seed: u64,
    n_perm: usize,
) -> Result<ConfidenceMatrix> {
    pvalue_matrix_smoothed(table, systems, segments, seed, n_perm, DEFAULT_SMOOTHING)
}

pub fn pvalue_matrix_smoothed(
    table: &ScoreTable,
    systems: &[String],
    segments: &[String],
    seed: u64,
    n_perm: usize,
    smoothing: f64,
) -> Result<ConfidenceMatrix> {
    if n_perm == 0 {
        return Err(Error::Argument("n_perm must be at least 1".into()));
    }
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::Argument(format!("invalid smoothing {smoothing}")));
    }
    let scores = table.matrix(systems, segments)?;
    let flips = SignFlips::new(seed, n_perm, segments.len());
    Ok(ConfidenceMatrix {
        systems: systems.to_vec(),
        p: flips.pvalues(&scores, smoothing),
        n_perm,
        seed,
    })
}

/// Mean over system pairs of `1 - |p_gold - p_eval|`, from flat `M × M` matrices.
pub(crate) fn spa_dense(p_gold: &[f64], p_eval: &[f64], m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Argument("SPA needs at least two systems".into()));
    }
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            sum += 1.0 - (p_gold[i * m + j] - p_eval[i * m + j]).abs();
        }
    }
    Ok(sum / (m * (m - 1) / 2) as f64)
}

/// Soft pairwise accuracy of an evaluator's p-values against the gold's.
pub fn spa(p_gold: &ConfidenceMatrix, p_eval: &ConfidenceMatrix) -> Result<f64> {
    let m = p_gold.systems.len();
    if m < 2 {
        return Err(Error::Argument("SPA needs at least two systems".into()));
    }
    let eval_index = p_eval.index();
    if p_eval.systems.len() != m || p_gold.systems.iter().any(|s| !eval_index.contains_key(s.as_str())) {
        return Err(Error::Argument(
            "gold and evaluator p-values cover different systems".into(),
        ));
    }
    let mut sum = 0.0;
    for i in 0..m {
        let ei = eval_index[p_gold.systems[i].as_str()];
        for j in i + 1..m {
            let ej = eval_index[p_gold.systems[j].as_str()];
            let g = p_gold.p[i * m + j];
            let e = p_eval.p[ei * m + ej];
            sum += 1.0 - (g - e).abs();
        }
    }
    Ok(sum / (m * (m - 1) / 2) as f64)
}

/// Pairwise accuracy over system scores given in matching order. System
/// pairs tied exactly under the gold are left out of both the sum and the
/// normalizer.
pub(crate) fn pa_dense(gold: &[f64], eval: &[f64]) -> Result<f64> {
    let m = gold.len();
    if m < 2 || eval.len() != m {
        return Err(Error::Argument(
            "PA needs at least two systems scored by both sides".into(),
        ));
    }
    let (mut agree, mut counted) = (0usize, 0usize);
    for i in 0..m {
        for j in i + 1..m {
            let g = gold[i] - gold[j];
            if g == 0.0 {
                continue;
            }
            counted += 1;
            let e = eval[i] - eval[j];
            if (g > 0.0 && e > 0.0) || (g < 0.0 && e < 0.0) {
                agree += 1;
            }
        }
    }
    if counted == 0 {
        return Err(Error::Undefined(
            "every system pair is tied under the gold".into(),
        ));
    }
    Ok(agree as f64 / counted as f64)
}

/// Pairwise accuracy of system-level scores keyed by system id.
pub fn pa(gold_sys: &BTreeMap<String, f64>, eval_sys: &BTreeMap<String, f64>) -> Result<f64> {
    if gold_sys.len() < 2 {
        return Err(Error::Argument("PA needs at least two systems".into()));
    }
    if gold_sys.len() != eval_sys.len() || gold_sys.keys().any(|k| !eval_sys.contains_key(k)) {
        return Err(Error::Argument(
            "gold and evaluator score different systems".into(),
        ));
    }
    let g: Vec<f64> = gold_sys.values().copied().collect();
    let e: Vec<f64> = gold_sys.keys().map(|k| eval_sys[k]).collect();
    pa_dense(&g, &e)
}

/// Mean score per system over `segments`, keyed by system id.
pub fn system_scores(
    table: &ScoreTable,
    systems: &[String],
    segments: &[String],
) -> Result<BTreeMap<String, f64>> {
    let means = table.matrix(systems, segments)?.system_means();
    Ok(systems.iter().cloned().zip(means).collect())
}
