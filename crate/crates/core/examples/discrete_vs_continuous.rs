// Coarse, discrete scores lose far more under tie-aware segment accuracy
// than under SPA. Same noisy evaluator, continuous versus seven bins.

use metameval::metaeval::{spa, system_pvalue_matrix, tie_calibrate, TieThreshold};
use metameval::synth::{discretize, gen_dataset, EvaluatorSpec, SynthConfig, GOLD_ID};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut drops = (0.0, 0.0);
    let seeds = 5;
    for seed in 0..seeds {
        let d = gen_dataset(&SynthConfig {
            n_segments: 200,
            n_systems: 10,
            evaluators: vec![EvaluatorSpec::new(0.5, 0)],
            seed,
        })?;
        let (sys, seg) = (&d.systems, &d.segments);
        let gold = d.table(GOLD_ID)?;
        let cont = d.table("noise0.5-cont")?;
        let disc = discretize(cont, 7)?;

        let p_gold = system_pvalue_matrix(gold, sys, seg, seed, 500)?;
        let spa_cont = spa(&p_gold, &system_pvalue_matrix(cont, sys, seg, seed, 500)?)?;
        let spa_disc = spa(&p_gold, &system_pvalue_matrix(&disc, sys, seg, seed, 500)?)?;
        let (_, acc_cont) = tie_calibrate(gold, cont, TieThreshold::exact(), sys, seg)?;
        let (eps, acc_disc) = tie_calibrate(gold, &disc, TieThreshold::exact(), sys, seg)?;
        println!(
            "seed {seed}: SPA {spa_cont:.3} -> {spa_disc:.3}   acc*_eq {acc_cont:.3} -> {acc_disc:.3} (eps {:.3})",
            eps.epsilon
        );
        drops.0 += (acc_cont - acc_disc) / seeds as f64;
        drops.1 += (spa_cont - spa_disc) / seeds as f64;
    }
    println!("mean drop: acc*_eq {:.4}, SPA {:.4}", drops.0, drops.1);
    assert!(drops.0 > drops.1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
