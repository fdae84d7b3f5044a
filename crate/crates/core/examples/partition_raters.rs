// Split an overlapping rater pool into independent groups so that each
// group can act as one evaluator.
//
// Run with `cargo run --example partition_raters`.

use metameval::model::RaterAssignment;
use metameval::partition::{solve_partition, PartitionMode};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // every segment was annotated by two raters; we want k = 2 groups
    let assignment = RaterAssignment::from_covers(
        2,
        [
            ("s1", vec!["r1", "r2"]),
            ("s2", vec!["r1", "r3"]),
            ("s3", vec!["r2", "r4"]),
            ("s4", vec!["r3", "r4"]),
            ("s5", vec!["r1", "r4"]),
        ],
    )?;

    let solution = solve_partition(&assignment, 2, PartitionMode::AllowUnassigned)?;
    solution.check(&assignment)?;
    for (i, group) in solution.groups.iter().enumerate() {
        println!("group {}: {:?}", i + 1, group);
    }
    println!(
        "retained {} of {} segments: {:?}",
        solution.objective,
        assignment.covers().len(),
        solution.retained_segments
    );
    // s5 pairs r1 with r4, which the best split puts in the same group
    assert_eq!(solution.objective, 4);
    assert!(!solution.retained_segments.contains("s5"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
