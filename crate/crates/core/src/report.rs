//! Text renderings of a [`RankingReport`].

use std::fmt::Write as _;

use crate::significance::{Measure, RankingReport};

/// Markdown table with one `Rank` and one `Acc.` column per measure.
/// Accuracies are percentages with two decimals; human evaluators are bold
/// and tagged `(human)`.
pub fn render_markdown(report: &RankingReport) -> String {
    let mut out = String::new();
    let langpair = if report.langpair.is_empty() {
        String::new()
    } else {
        format!(" ({})", report.langpair)
    };
    let _ = writeln!(
        out,
        "Test set {}{}, gold {}: {} systems x {} segments; alpha {}, {} PERM-BOTH resamples, {} p-value permutations, seed {}.",
        report.testset_id,
        langpair,
        report.gold,
        report.n_systems,
        report.n_segments,
        report.config.alpha,
        report.config.n_perm,
        report.config.pvalue_perm,
        report.config.seed
    );
    out.push('\n');

    out.push_str("| Metric |");
    for m in &report.measures {
        let _ = write!(out, " {} Rank | {} Acc. |", m.label(), m.label());
    }
    out.push('\n');
    out.push_str("|:--|");
    for _ in &report.measures {
        out.push_str("--:|--:|");
    }
    out.push('\n');

    for row in &report.rows {
        if row.human {
            let _ = write!(out, "| **{}** (human) |", row.evaluator);
        } else {
            let _ = write!(out, "| {} |", row.evaluator);
        }
        for cell in &row.cells {
            let _ = write!(out, " {} | {:.2} |", cell.rank, cell.value * 100.0);
        }
        out.push('\n');
    }
    for note in &report.notes {
        let _ = write!(out, "\n_{note}_\n");
    }
    out
}

/// Tab-separated table; values in `[0, 1]` with six decimals.
pub fn render_tsv(report: &RankingReport) -> String {
    let mut out = String::from("evaluator\thuman");
    for m in &report.measures {
        let _ = write!(out, "\t{m}\t{m}_rank");
        if *m == Measure::AccEq {
            out.push_str("\tacc-eq_eps");
        }
    }
    out.push('\n');
    for row in &report.rows {
        let _ = write!(out, "{}\t{}", row.evaluator, row.human as u8);
        for (m, cell) in report.measures.iter().zip(&row.cells) {
            let _ = write!(out, "\t{:.6}\t{}", cell.value, cell.rank);
            if *m == Measure::AccEq {
                let _ = write!(out, "\t{}", cell.epsilon.unwrap_or(0.0));
            }
        }
        out.push('\n');
    }
    out
}
