//! Synthetic gold and evaluator datasets with controllable noise and
//! discretization.
//!
//! Latent quality of system `i` on segment `s` is
//! `offset_i + difficulty_s + disturbance_{i,s}` with
//! `offset ~ N(0, SYSTEM_SD)`, `difficulty ~ N(0, SEGMENT_SD)` and
//! `disturbance ~ N(0, ITEM_SD)`. The gold evaluator reports the latent
//! value; every other evaluator adds its own `N(0, noise_sd)` noise and is
//! optionally snapped to equal-width bins.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotatedDataset, ScoreEntry, ScoreTable};
use crate::rng;

pub const SYSTEM_SD: f64 = 0.3;
pub const SEGMENT_SD: f64 = 1.0;
pub const ITEM_SD: f64 = 1.0;

pub const GOLD_ID: &str = "gold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorSpec {
    pub id: String,
    pub noise_sd: f64,
    /// 0 keeps scores continuous
    pub bins: usize,
}

impl EvaluatorSpec {
    /// Named after its parameters, e.g. `noise0.5-bins7` or `noise1-cont`.
    pub fn new(noise_sd: f64, bins: usize) -> Self {
        let shape = if bins == 0 {
            "cont".to_owned()
        } else {
            format!("bins{bins}")
        };
        EvaluatorSpec {
            id: format!("noise{noise_sd}-{shape}"),
            noise_sd,
            bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_segments: usize,
    pub n_systems: usize,
    pub evaluators: Vec<EvaluatorSpec>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments < 1 {
            return Err(Error::Argument("need at least one segment".into()));
        }
        if self.n_systems < 2 {
            return Err(Error::Argument("need at least two systems".into()));
        }
        for e in &self.evaluators {
            if !(e.noise_sd.is_finite() && e.noise_sd >= 0.0) {
                return Err(Error::Argument(format!("noise_sd {} must be >= 0", e.noise_sd)));
            }
            if e.bins == 1 {
                return Err(Error::Argument("bins must be 0 or at least 2".into()));
            }
            if e.id == GOLD_ID {
                return Err(Error::Argument(format!("evaluator id {GOLD_ID} is reserved")));
            }
        }
        Ok(())
    }
}

pub fn system_id(i: usize) -> String {
    format!("sys{i:03}")
}

pub fn segment_id(i: usize) -> String {
    format!("seg{i:05}")
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative sd")
}

/// Gold plus one table per configured evaluator, deterministic per seed.
pub fn gen_dataset(config: &SynthConfig) -> Result<AnnotatedDataset> {
    config.validate()?;
    let (m, n) = (config.n_systems, config.n_segments);
    let systems: Vec<String> = (0..m).map(system_id).collect();
    let segments: Vec<String> = (0..n).map(segment_id).collect();

    let mut rng = rng::stream(config.seed, &[1]);
    let offsets: Vec<f64> = (0..m).map(|_| normal(SYSTEM_SD).sample(&mut rng)).collect();
    let difficulty: Vec<f64> = (0..n).map(|_| normal(SEGMENT_SD).sample(&mut rng)).collect();
    let mut latent = Vec::with_capacity(m * n);
    for &offset in &offsets {
        for &diff in &difficulty {
            latent.push(offset + diff + normal(ITEM_SD).sample(&mut rng));
        }
    }

    let table_from = |id: &str, values: &[f64]| {
        let entries = values
            .iter()
            .enumerate()
            .map(|(k, &score)| ScoreEntry {
                system: systems[k / n].clone(),
                segment: segments[k % n].clone(),
                score,
            })
            .collect();
        ScoreTable::new(id, entries)
    };

    let mut tables = vec![table_from(GOLD_ID, &latent)];
    for (idx, spec) in config.evaluators.iter().enumerate() {
        let mut rng = rng::stream(config.seed, &[2, idx as u64]);
        let noise = normal(spec.noise_sd);
        let noisy: Vec<f64> = latent.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let table = table_from(&spec.id, &noisy);
        tables.push(if spec.bins == 0 {
            table
        } else {
            discretize(&table, spec.bins)?
        });
    }

    let mut dataset = AnnotatedDataset::from_tables(
        format!("synth-{}", config.seed),
        "xx-yy",
        tables,
    );
    dataset.systems = systems;
    dataset.segments = segments;
    Ok(dataset)
}

/// Maps scores to the midpoints of `bins` equal-width bins spanning the
/// observed range. Order is preserved up to ties inside a bin.
pub fn discretize(table: &ScoreTable, bins: usize) -> Result<ScoreTable> {
    if bins < 2 {
        return Err(Error::Argument(format!("bins = {bins}, need at least 2")));
    }
    let (lo, hi) = table
        .entries()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.score), hi.max(e.score))
        });
    // constant input (or nothing to bin)
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Ok(table.clone());
    }
    let width = (hi - lo) / bins as f64;
    Ok(table.map_scores(|v| {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        lo + (idx as f64 + 0.5) * width
    }))
}
