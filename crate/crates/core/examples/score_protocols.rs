// Turn MQM error spans and ESA scalar scores into evaluator score tables.

use std::collections::{BTreeMap, BTreeSet};

use metameval::model::{RaterAssignment, ScoreTable};
use metameval::partition::{solve_partition, PartitionMode};
use metameval::protocols::{
    assemble_from_solution, mqm_segment_score, system_score, Protocol, RaterAnnotations, Severity,
    SeverityWeights, Span, SpanAnnotationSet,
};

fn span(category: &str, severity: Severity) -> Span {
    Span {
        start: 0,
        end: 4,
        category: category.into(),
        severity,
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // one minor and one major error: penalty 1 + 5
    let weights = SeverityWeights::default();
    let spans = [span("accuracy/mistranslation", Severity::Major), span("fluency/grammar", Severity::Minor)];
    let score = mqm_segment_score(&spans, &weights)?;
    println!("MQM segment score: {score}");
    assert_eq!(score, -6.0);

    // punctuation minors count 0.1 under the common override
    let punct = SeverityWeights::with_punctuation_exception();
    let p = mqm_segment_score(&[span("fluency/punctuation", Severity::Minor)], &punct)?;
    println!("punctuation minor: {p}");

    // two raters per segment, two groups
    let assignment = RaterAssignment::from_covers(2, [("s1", ["a", "b"]), ("s2", ["a", "b"])])?;
    let solution = solve_partition(&assignment, 2, PartitionMode::AllowUnassigned)?;

    let mut set = SpanAnnotationSet::default();
    for (rater, sys, seg, sev) in [
        ("a", "X", "s1", Severity::Neutral),
        ("a", "Y", "s1", Severity::Major),
        ("a", "X", "s2", Severity::Minor),
        ("a", "Y", "s2", Severity::Minor),
        ("b", "X", "s1", Severity::Minor),
        ("b", "Y", "s1", Severity::Critical),
        ("b", "X", "s2", Severity::Neutral),
        ("b", "Y", "s2", Severity::Major),
    ] {
        set.push(rater, sys, seg, span("accuracy/mistranslation", sev));
    }
    let mqm = assemble_from_solution(
        "MQM",
        &solution,
        RaterAnnotations::Spans { set: &set, weights: &weights },
        &assignment,
    )?;

    let esa_raw: BTreeMap<String, ScoreTable> = [
        ScoreTable::from_triples("a", [("X", "s1", 88.0), ("Y", "s1", 40.0), ("X", "s2", 75.0), ("Y", "s2", 70.0)]),
        ScoreTable::from_triples("b", [("X", "s1", 90.0), ("Y", "s1", 20.0), ("X", "s2", 95.0), ("Y", "s2", 50.0)]),
    ]
    .into_iter()
    .map(|t| (t.evaluator_id().to_owned(), t))
    .collect();
    let esa = assemble_from_solution(
        "ESA",
        &solution,
        RaterAnnotations::Scalar { tables: &esa_raw, protocol: Protocol::Esa },
        &assignment,
    )?;

    let segments: BTreeSet<String> = solution.retained_segments.clone();
    for table in mqm.iter().chain(&esa) {
        println!(
            "{:6} X {:7.2}  Y {:7.2}",
            table.evaluator_id(),
            system_score(table, "X", &segments)?,
            system_score(table, "Y", &segments)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
