//! Canonical tab-separated interchange formats.
//!
//! | file         | columns, tab separated                                     |
//! |--------------|------------------------------------------------------------|
//! | `scores.tsv` | evaluator, system, segment, score                          |
//! | `spans.tsv`  | rater, system, segment, start, end, category, severity     |
//! | `assign.tsv` | segment, rater                                             |
//!
//! One header row, LF line endings, UTF-8. Numbers use `.` as the decimal
//! point and never carry thousands separators. An empty score field means
//! the pair was not scored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{AnnotatedDataset, RaterAssignment, ScoreEntry, ScoreTable};
use crate::protocols::{Severity, Span, SpanAnnotationSet};

pub const SCORES_HEADER: &str = "evaluator\tsystem\tsegment\tscore";
pub const SPANS_HEADER: &str = "rater\tsystem\tsegment\tstart\tend\tcategory\tseverity";
pub const ASSIGN_HEADER: &str = "segment\trater";

/// Data rows of a TSV document as `(line number, fields)`, after checking the header.
fn rows<'a>(
    text: &'a str,
    header: &str,
) -> Result<impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a> {
    let mut lines = text.split('\n');
    let first = lines.next().unwrap_or("");
    if first != header {
        return Err(Error::parse(
            1,
            format!("expected header {header:?}, found {first:?}"),
        ));
    }
    let n_cols = header.split('\t').count();
    let body: Vec<&str> = lines.collect();
    // a single trailing LF leaves one empty fragment behind
    let body_len = match body.last() {
        Some(&"") => body.len() - 1,
        _ => body.len(),
    };
    Ok(body
        .into_iter()
        .take(body_len)
        .enumerate()
        .map(move |(i, line)| {
            let line_no = i + 2;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != n_cols {
                return Err(Error::parse(
                    line_no,
                    format!("expected {n_cols} columns, found {}", fields.len()),
                ));
            }
            Ok((line_no, fields))
        }))
}

fn parse_score(line: usize, field: &str) -> Result<f64> {
    let bad = || Error::parse(line, format!("invalid score {field:?}"));
    if field.trim() != field || field.contains(',') {
        return Err(bad());
    }
    let v: f64 = field.parse().map_err(|_| bad())?;
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_offset(line: usize, field: &str) -> Result<i64> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid span offset {field:?}")))
}

/// Keys seen so far (including unscored ones) and the scored entries.
type Pending = (BTreeSet<(String, String)>, Vec<ScoreEntry>);

/// Parses `scores.tsv` into one table per evaluator, ordered by evaluator id.
pub fn parse_scores_tsv(text: &str) -> Result<Vec<ScoreTable>> {
    let mut per_eval: BTreeMap<String, Pending> = BTreeMap::new();
    for row in rows(text, SCORES_HEADER)? {
        let (line, f) = row?;
        let (evaluator, system, segment, score) = (f[0], f[1], f[2], f[3]);
        if evaluator.is_empty() || system.is_empty() || segment.is_empty() {
            return Err(Error::parse(line, "empty identifier"));
        }
        let (seen, entries) = per_eval.entry(evaluator.to_owned()).or_default();
        if !seen.insert((system.to_owned(), segment.to_owned())) {
            return Err(Error::parse(
                line,
                format!("duplicate key ({evaluator}, {system}, {segment})"),
            ));
        }
        if score.is_empty() {
            continue;
        }
        entries.push(ScoreEntry {
            system: system.to_owned(),
            segment: segment.to_owned(),
            score: parse_score(line, score)?,
        });
    }
    Ok(per_eval
        .into_iter()
        .map(|(id, (_, entries))| ScoreTable::new(id, entries))
        .collect())
}

/// Parses `spans.tsv`. Severity labels are case-insensitive; `start = end = -1`
/// marks an error spanning the whole segment.
pub fn parse_mqm_tsv(text: &str) -> Result<SpanAnnotationSet> {
    let mut set = SpanAnnotationSet::default();
    for row in rows(text, SPANS_HEADER)? {
        let (line, f) = row?;
        if f[0].is_empty() || f[1].is_empty() || f[2].is_empty() {
            return Err(Error::parse(line, "empty identifier"));
        }
        let start = parse_offset(line, f[3])?;
        let end = parse_offset(line, f[4])?;
        if start > end {
            return Err(Error::parse(
                line,
                format!("span start {start} exceeds end {end}"),
            ));
        }
        let severity: Severity = f[6]
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        set.push(
            f[0],
            f[1],
            f[2],
            Span {
                start,
                end,
                category: f[5].to_owned(),
                severity,
            },
        );
    }
    Ok(set)
}

/// Parses `assign.tsv`. `k` is the most frequent cover size (smallest on a
/// tie); segments whose cover deviates from it are reported by
/// [`RaterAssignment::flagged`].
pub fn parse_assignment(text: &str) -> Result<RaterAssignment> {
    let mut covers: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for row in rows(text, ASSIGN_HEADER)? {
        let (line, f) = row?;
        if f[0].is_empty() || f[1].is_empty() {
            return Err(Error::parse(line, "empty identifier"));
        }
        covers
            .entry(f[0].to_owned())
            .or_default()
            .insert(f[1].to_owned());
    }
    if covers.is_empty() {
        return Err(Error::Validation("no assignments".into()));
    }
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for c in covers.values() {
        *freq.entry(c.len()).or_default() += 1;
    }
    let k = freq
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&size, _)| size)
        .expect("non-empty");
    let raters = covers.values().flatten().cloned().collect();
    RaterAssignment::new(raters, k, covers)
}

/// Writes every covered score in `(evaluator, system, segment)` order.
pub fn export_canonical(dataset: &AnnotatedDataset) -> String {
    export_tables(dataset.score_tables.values())
}

/// [`export_canonical`] over a loose collection of tables.
pub fn export_tables<'a>(tables: impl IntoIterator<Item = &'a ScoreTable>) -> String {
    let mut rows: Vec<(&str, &str, &str, f64)> = Vec::new();
    for t in tables {
        for (sys, seg) in t.coverage() {
            let v = t.get(sys, seg).expect("covered");
            rows.push((t.evaluator_id(), sys, seg, v));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for (e, sys, seg, v) in rows {
        // `{}` on f64 is the shortest string that parses back to the same bits
        let _ = writeln!(out, "{e}\t{sys}\t{seg}\t{v}");
    }
    out
}

pub fn export_assignment(assignment: &RaterAssignment) -> String {
    let mut out = String::from(ASSIGN_HEADER);
    out.push('\n');
    for (seg, cover) in assignment.covers() {
        for r in cover {
            let _ = writeln!(out, "{seg}\t{r}");
        }
    }
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a `scores.tsv` into a dataset whose axes are the sorted union of ids.
pub fn load_dataset(path: &Path, testset_id: &str, langpair: &str) -> Result<AnnotatedDataset> {
    let tables = parse_scores_tsv(&read_text(path)?)?;
    Ok(AnnotatedDataset::from_tables(testset_id, langpair, tables))
}
