use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use metameval::ingest::{export_tables, parse_scores_tsv};
use metameval::model::{AnnotatedDataset, RaterAssignment, ScoreTable};
use metameval::partition::{solve_partition, PartitionMode};
use metameval::significance::{cluster_ranks, perm_both_test, rank_table, Measure, RankConfig};
use metameval::synth::{gen_dataset, EvaluatorSpec, SynthConfig, GOLD_ID};

fn covers_strategy() -> impl Strategy<Value = Vec<BTreeSet<u8>>> {
    prop::collection::vec(prop::collection::btree_set(0u8..6, 1..4), 1..10)
}

fn assignment(covers: &[BTreeSet<u8>], rename: impl Fn(u8) -> String) -> RaterAssignment {
    RaterAssignment::from_covers(
        2,
        covers
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("s{i}"), c.iter().map(|&r| rename(r)).collect::<Vec<_>>())),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn export_then_parse_is_identity(
        rows in prop::collection::btree_map(
            (0u8..3, 0u8..4, 0u8..5),
            prop_oneof![Just(0.0f64), -1e6f64..1e6, Just(1e-300), Just(-0.5)],
            1..40,
        )
    ) {
        let mut by_eval: BTreeMap<u8, Vec<(String, String, f64)>> = BTreeMap::new();
        for ((e, sys, seg), v) in rows {
            by_eval.entry(e).or_default().push((format!("sys{sys}"), format!("seg{seg}"), v));
        }
        let tables: Vec<ScoreTable> = by_eval
            .into_iter()
            .map(|(e, t)| ScoreTable::from_triples(format!("m{e}"), t))
            .collect();
        let text = export_tables(&tables);
        prop_assert!(!text.contains('\r'));
        let back = parse_scores_tsv(&text).unwrap();
        prop_assert_eq!(back.len(), tables.len());
        for (a, b) in back.iter().zip(&tables) {
            prop_assert_eq!(a.evaluator_id(), b.evaluator_id());
            for (sys, seg) in b.coverage() {
                prop_assert_eq!(a.get(sys, seg).map(f64::to_bits), b.get(sys, seg).map(f64::to_bits));
            }
        }
        // canonical text is a fixed point
        prop_assert_eq!(export_tables(&back), text);
    }

    #[test]
    fn partition_objective_ignores_rater_names(covers in covers_strategy()) {
        let a = assignment(&covers, |r| format!("r{r}"));
        let b = assignment(&covers, |r| format!("z{}", 9 - r));
        if a.raters().len() >= 2 {
            let sa = solve_partition(&a, 2, PartitionMode::AllowUnassigned).unwrap();
            let sb = solve_partition(&b, 2, PartitionMode::AllowUnassigned).unwrap();
            prop_assert_eq!(sa.objective, sb.objective);
            let total = solve_partition(&a, 2, PartitionMode::Total).unwrap();
            prop_assert!(sa.objective >= total.objective);
        }
    }

    #[test]
    fn adding_a_segment_never_lowers_the_objective(
        covers in covers_strategy(),
        extra in prop::collection::btree_set(0u8..6, 1..4),
    ) {
        let a = assignment(&covers, |r| format!("r{r}"));
        let mut more = covers.clone();
        more.push(extra);
        let b = assignment(&more, |r| format!("r{r}"));
        if a.raters().len() >= 2 {
            let sa = solve_partition(&a, 2, PartitionMode::AllowUnassigned).unwrap();
            let sb = solve_partition(&b, 2, PartitionMode::AllowUnassigned).unwrap();
            prop_assert!(sb.objective >= sa.objective);
        }
    }

    #[test]
    fn cluster_ranks_follow_relabeling(
        values in prop::collection::vec(0.0f64..1.0, 2..7),
        raw_p in prop::collection::vec(0.0f64..0.2, 49),
        shift in 0usize..7,
    ) {
        let n = values.len();
        let p: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| raw_p[i * 7 + j]).collect()).collect();
        let ranks = cluster_ranks(&values, &p, 0.05);
        // rotate labels
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let v2: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let p2: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| p[i][j]).collect()).collect();
        let r2 = cluster_ranks(&v2, &p2, 0.05);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(r2[k], ranks[i]);
        }
        prop_assert!(ranks.iter().all(|&r| r >= 1 && r <= n));
    }
}

fn synth(seed: u64) -> AnnotatedDataset {
    gen_dataset(&SynthConfig {
        n_segments: 25,
        n_systems: 5,
        evaluators: vec![
            EvaluatorSpec::new(0.2, 0),
            EvaluatorSpec::new(1.0, 0),
            EvaluatorSpec::new(0.5, 7),
        ],
        seed,
    })
    .unwrap()
}

#[test]
fn perm_both_directions_mirror() {
    let d = synth(3);
    let cfg = RankConfig {
        n_perm: 300,
        pvalue_perm: 200,
        seed: 9,
        ..RankConfig::default()
    };
    let (g, x, y) = (
        &d.score_tables[GOLD_ID],
        &d.score_tables["noise0.2-cont"],
        &d.score_tables["noise1-cont"],
    );
    for measure in [Measure::Spa, Measure::AccEq, Measure::Pa] {
        let xy = perm_both_test(g, x, y, &d.systems, &d.segments, measure, &cfg).unwrap();
        let yx = perm_both_test(g, y, x, &d.systems, &d.segments, measure, &cfg).unwrap();
        assert_eq!(xy.delta, -yx.delta);
        assert_eq!(xy.p_x_better, yx.p_y_better);
        assert_eq!(xy.p_y_better, yx.p_x_better);
        // ge + le counts every permutation at least once
        assert!(xy.p_x_better + yx.p_x_better >= 1.0 + 1.0 / 301.0 - 1e-12);
    }
    let xy = perm_both_test(g, x, y, &d.systems, &d.segments, Measure::Spa, &cfg).unwrap();
    let yx = perm_both_test(g, y, x, &d.systems, &d.segments, Measure::Spa, &cfg).unwrap();
    assert!((xy.p_x_better + yx.p_x_better - 1.0).abs() <= 2.0 / 301.0 + 1e-12, "{xy:?} {yx:?}");
}

#[test]
fn rank_table_ignores_thread_count() {
    let d = synth(5);
    let cfg = RankConfig {
        n_perm: 100,
        pvalue_perm: 100,
        seed: 1,
        ..RankConfig::default()
    };
    let measures = [Measure::Spa, Measure::AccEq, Measure::Pa];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rank_table(&d, GOLD_ID, &[], &measures, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&run(2)).unwrap()
    );
}

#[test]
fn noise_ordering_shows_in_measures() {
    let mut wins = 0;
    for seed in 0..20 {
        let d = synth(100 + seed);
        let cfg = RankConfig {
            n_perm: 20,
            pvalue_perm: 200,
            seed,
            ..RankConfig::default()
        };
        let r = rank_table(&d, GOLD_ID, &[], &[Measure::Spa, Measure::AccEq], &cfg).unwrap();
        let get = |id: &str| r.rows.iter().find(|row| row.evaluator == id).unwrap();
        let (good, bad) = (get("noise0.2-cont"), get("noise1-cont"));
        wins += (good.cells[0].value >= bad.cells[0].value && good.cells[1].value >= bad.cells[1].value) as usize;
    }
    assert!(wins >= 18, "low-noise evaluator won on both measures in {wins}/20 seeds");
}

#[test]
fn restriction_keeps_only_fully_scored_segments() {
    let full = ScoreTable::from_triples("a", [("A", "s1", 1.0), ("B", "s1", 2.0), ("A", "s2", 1.0), ("B", "s2", 0.0)]);
    let partial = ScoreTable::from_triples("b", [("A", "s1", 1.0), ("B", "s1", 2.0), ("A", "s2", 1.0)]);
    let d = AnnotatedDataset::from_tables("t", "xx-yy", [full, partial]);
    let r = metameval::partition::restrict_to_common(&d, &["a", "b"]).unwrap();
    assert_eq!(r.dataset.segments, vec!["s1".to_owned()]);
    assert!(r.warnings.is_empty());
}
