// End to end through the library: synthesize data, write and reload the
// canonical TSV, restrict to common segments, rank, and render TSV.

use metameval::ingest::{export_canonical, load_dataset, write_text};
use metameval::model::validate_dataset;
use metameval::partition::restrict_to_common;
use metameval::report::render_tsv;
use metameval::significance::{rank_table, Measure, RankConfig};
use metameval::synth::{gen_dataset, EvaluatorSpec, SynthConfig, GOLD_ID};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let synth = gen_dataset(&SynthConfig {
        n_segments: 60,
        n_systems: 5,
        evaluators: vec![
            EvaluatorSpec::new(0.2, 0),
            EvaluatorSpec::new(0.2, 7),
            EvaluatorSpec::new(1.0, 0),
        ],
        seed: 17,
    })?;

    let dir = std::env::temp_dir().join(format!("metameval-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("scores.tsv");
    write_text(&path, &export_canonical(&synth))?;

    let loaded = load_dataset(&path, "synth-17", "xx-yy")?;
    assert!(validate_dataset(&loaded).is_empty());
    let ids: Vec<String> = loaded.evaluator_ids().map(str::to_owned).collect();
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    let dataset = restrict_to_common(&loaded, &ids)?.dataset;

    let config = RankConfig {
        n_perm: 100,
        pvalue_perm: 100,
        seed: 1,
        ..RankConfig::default()
    };
    let report = rank_table(&dataset, GOLD_ID, &[], &[Measure::Spa, Measure::AccEq, Measure::Pa], &config)?;
    print!("{}", render_tsv(&report));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
