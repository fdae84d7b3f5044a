// Segment-level pairwise accuracy with ties, before and after calibrating
// the evaluator's tie threshold.

use metameval::metaeval::{acc_eq, pairwise_counts, tie_calibrate, TieThreshold};
use metameval::model::ScoreTable;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let systems: Vec<String> = ["A", "B", "C"].map(String::from).into();
    let segments = vec!["s1".to_owned()];

    // the gold ties A and B; the metric almost does
    let gold = ScoreTable::from_triples("gold", [("A", "s1", 0.0), ("B", "s1", 0.0), ("C", "s1", 1.0)]);
    let metric = ScoreTable::from_triples("metric", [("A", "s1", 0.50), ("B", "s1", 0.52), ("C", "s1", 0.90)]);

    let exact = TieThreshold::exact();
    let counts = pairwise_counts(&gold, &metric, exact, exact, &systems, &segments)?;
    println!("exact ties: {counts:?} -> acc_eq {:.3}", acc_eq(&counts)?);

    let (eps, acc) = tie_calibrate(&gold, &metric, exact, &systems, &segments)?;
    println!("calibrated: epsilon {:.4} -> acc*_eq {acc:.3}", eps.epsilon);
    assert!((eps.epsilon - 0.02).abs() < 1e-12);
    assert_eq!(acc, 1.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
