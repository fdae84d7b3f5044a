// System-level pairwise accuracy versus soft pairwise accuracy: SPA credits
// an evaluator for matching the gold's confidence, not only its order.

use std::collections::BTreeMap;

use metameval::metaeval::{pa, spa, system_pvalue_matrix, system_scores};
use metameval::synth::{gen_dataset, EvaluatorSpec, SynthConfig, GOLD_ID};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = gen_dataset(&SynthConfig {
        n_segments: 100,
        n_systems: 6,
        evaluators: vec![EvaluatorSpec::new(0.3, 0), EvaluatorSpec::new(1.5, 0)],
        seed: 11,
    })?;
    let (systems, segments) = (&dataset.systems, &dataset.segments);
    let seed = 2024;
    let n_perm = 1000;

    let gold = dataset.table(GOLD_ID)?;
    let gold_sys: BTreeMap<String, f64> = system_scores(gold, systems, segments)?;
    let p_gold = system_pvalue_matrix(gold, systems, segments, seed, n_perm)?;
    println!("p-value that {} beats {}: {:.3}", systems[0], systems[1], p_gold.get(0, 1).unwrap());

    for id in ["noise0.3-cont", "noise1.5-cont"] {
        let table = dataset.table(id)?;
        let sys = system_scores(table, systems, segments)?;
        let p = system_pvalue_matrix(table, systems, segments, seed, n_perm)?;
        println!("{id:14} PA {:.3}  SPA {:.3}", pa(&gold_sys, &sys)?, spa(&p_gold, &p)?);
    }
    // identical matrices agree perfectly
    assert_eq!(spa(&p_gold, &p_gold)?, 1.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
