// Rank several evaluators with PERM-BOTH significance clusters and print a
// markdown leaderboard.

use metameval::report::render_markdown;
use metameval::significance::{rank_table, Measure, RankConfig};
use metameval::synth::{gen_dataset, EvaluatorSpec, SynthConfig, GOLD_ID};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = gen_dataset(&SynthConfig {
        n_segments: 80,
        n_systems: 6,
        evaluators: [0.1, 0.5, 1.0, 2.0]
            .into_iter()
            .map(|noise| EvaluatorSpec::new(noise, 0))
            .collect(),
        seed: 5,
    })?;
    let config = RankConfig {
        n_perm: 200,
        pvalue_perm: 200,
        seed: 42,
        ..RankConfig::default()
    };
    let report = rank_table(
        &dataset,
        GOLD_ID,
        &["noise0.5-cont"],
        &[Measure::Spa, Measure::AccEq],
        &config,
    )?;
    print!("{}", render_markdown(&report));

    let top = &report.rows[0];
    assert_eq!(top.cells[0].rank, 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
