//! Shared data model: test sets, evaluators, score tables and rater assignments.
//!
//! All types are immutable once built. Scores are stored oriented
//! higher-is-better; protocol polarity is resolved before a [`ScoreTable`]
//! is constructed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One assessment of one translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub system: String,
    pub segment: String,
    pub score: f64,
}

/// Segment-level scores produced by a single evaluator.
///
/// Entries keep their input order, duplicates included, so that
/// [`validate_dataset`] can report them. Lookups resolve to the first
/// occurrence of a `(system, segment)` key.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    evaluator_id: String,
    entries: Vec<ScoreEntry>,
    index: BTreeMap<(String, String), usize>,
}

impl ScoreTable {
    pub fn new(evaluator_id: impl Into<String>, entries: Vec<ScoreEntry>) -> Self {
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            index
                .entry((e.system.clone(), e.segment.clone()))
                .or_insert(i);
        }
        ScoreTable {
            evaluator_id: evaluator_id.into(),
            entries,
            index,
        }
    }

    pub fn from_triples<S, G>(
        evaluator_id: impl Into<String>,
        triples: impl IntoIterator<Item = (S, G, f64)>,
    ) -> Self
    where
        S: Into<String>,
        G: Into<String>,
    {
        let entries = triples
            .into_iter()
            .map(|(system, segment, score)| ScoreEntry {
                system: system.into(),
                segment: segment.into(),
                score,
            })
            .collect();
        ScoreTable::new(evaluator_id, entries)
    }

    pub fn evaluator_id(&self) -> &str {
        &self.evaluator_id
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, system: &str, segment: &str) -> Option<f64> {
        self.index
            .get(&(system.to_owned(), segment.to_owned()))
            .map(|&i| self.entries[i].score)
    }

    pub fn covers(&self, system: &str, segment: &str) -> bool {
        self.get(system, segment).is_some()
    }

    /// Covered `(system, segment)` pairs in key order.
    pub fn coverage(&self) -> impl Iterator<Item = (&str, &str)> {
        self.index.keys().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Same table under a different evaluator id.
    pub fn renamed(&self, evaluator_id: impl Into<String>) -> Self {
        ScoreTable {
            evaluator_id: evaluator_id.into(),
            entries: self.entries.clone(),
            index: self.index.clone(),
        }
    }

    /// Applies `f` to every score.
    pub fn map_scores(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| ScoreEntry {
                score: f(e.score),
                ..e.clone()
            })
            .collect();
        ScoreTable::new(self.evaluator_id.clone(), entries)
    }

    /// Keeps only entries whose segment is in `segments`.
    pub fn restrict_segments(&self, segments: &BTreeSet<String>) -> Self {
        let entries = self
            .entries
            .iter()
            .filter(|e| segments.contains(&e.segment))
            .cloned()
            .collect();
        ScoreTable::new(self.evaluator_id.clone(), entries)
    }

    /// True when every `systems × segments` cell is covered.
    pub fn fully_covers(&self, systems: &[String], segments: &[String]) -> bool {
        systems
            .iter()
            .all(|sys| segments.iter().all(|seg| self.covers(sys, seg)))
    }

    /// Dense copy over the given axes; fails on the first uncovered cell.
    pub fn matrix(&self, systems: &[String], segments: &[String]) -> Result<ScoreMatrix> {
        let mut values = Vec::with_capacity(systems.len() * segments.len());
        for sys in systems {
            for seg in segments {
                let v = self.get(sys, seg).ok_or_else(|| {
                    Error::Coverage(format!(
                        "evaluator {} has no score for system {sys}, segment {seg}",
                        self.evaluator_id
                    ))
                })?;
                values.push(v);
            }
        }
        Ok(ScoreMatrix {
            n_systems: systems.len(),
            n_segments: segments.len(),
            values,
        })
    }
}

/// Dense `systems × segments` scores, row-major by system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_systems: usize,
    n_segments: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_systems = rows.len();
        let n_segments = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_segments) {
            return Err(Error::Argument("ragged score matrix".into()));
        }
        Ok(ScoreMatrix {
            n_systems,
            n_segments,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    #[inline]
    pub fn get(&self, system: usize, segment: usize) -> f64 {
        self.values[system * self.n_segments + segment]
    }

    #[inline]
    pub fn set(&mut self, system: usize, segment: usize, value: f64) {
        self.values[system * self.n_segments + segment] = value;
    }

    pub fn system_row(&self, system: usize) -> &[f64] {
        let start = system * self.n_segments;
        &self.values[start..start + self.n_segments]
    }

    /// Mean score of every system, in row order.
    pub fn system_means(&self) -> Vec<f64> {
        (0..self.n_systems)
            .map(|s| self.system_row(s).iter().sum::<f64>() / self.n_segments as f64)
            .collect()
    }
}

/// A test set: segments, systems and every evaluator's scores over them.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDataset {
    pub testset_id: String,
    pub langpair: String,
    pub segments: Vec<String>,
    pub systems: Vec<String>,
    pub score_tables: BTreeMap<String, ScoreTable>,
}

impl AnnotatedDataset {
    /// Builds a dataset whose system and segment axes are the sorted union of
    /// everything the tables mention.
    pub fn from_tables(
        testset_id: impl Into<String>,
        langpair: impl Into<String>,
        tables: impl IntoIterator<Item = ScoreTable>,
    ) -> Self {
        let mut systems = BTreeSet::new();
        let mut segments = BTreeSet::new();
        let mut score_tables = BTreeMap::new();
        for table in tables {
            for (sys, seg) in table.coverage() {
                systems.insert(sys.to_owned());
                segments.insert(seg.to_owned());
            }
            score_tables.insert(table.evaluator_id().to_owned(), table);
        }
        AnnotatedDataset {
            testset_id: testset_id.into(),
            langpair: langpair.into(),
            segments: segments.into_iter().collect(),
            systems: systems.into_iter().collect(),
            score_tables,
        }
    }

    pub fn table(&self, evaluator_id: &str) -> Result<&ScoreTable> {
        self.score_tables
            .get(evaluator_id)
            .ok_or_else(|| Error::Argument(format!("unknown evaluator {evaluator_id}")))
    }

    pub fn evaluator_ids(&self) -> impl Iterator<Item = &str> {
        self.score_tables.keys().map(String::as_str)
    }

    /// Segments on which `evaluator_id` scores every system.
    pub fn fully_covered_segments(&self, evaluator_id: &str) -> Result<BTreeSet<String>> {
        let table = self.table(evaluator_id)?;
        Ok(self
            .segments
            .iter()
            .filter(|seg| self.systems.iter().all(|sys| table.covers(sys, seg)))
            .cloned()
            .collect())
    }

    /// Keeps the given segments (in dataset order) and restricts every table.
    pub fn with_segments(&self, keep: &BTreeSet<String>) -> Self {
        AnnotatedDataset {
            testset_id: self.testset_id.clone(),
            langpair: self.langpair.clone(),
            segments: self
                .segments
                .iter()
                .filter(|s| keep.contains(*s))
                .cloned()
                .collect(),
            systems: self.systems.clone(),
            score_tables: self
                .score_tables
                .iter()
                .map(|(k, t)| (k.clone(), t.restrict_segments(keep)))
                .collect(),
        }
    }
}

/// Which raters annotated which segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterAssignment {
    raters: BTreeSet<String>,
    k: usize,
    covers: BTreeMap<String, BTreeSet<String>>,
}

impl RaterAssignment {
    pub fn new(
        raters: BTreeSet<String>,
        k: usize,
        covers: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("k must be positive".into()));
        }
        for (seg, cover) in &covers {
            if let Some(r) = cover.iter().find(|r| !raters.contains(*r)) {
                return Err(Error::Argument(format!(
                    "segment {seg} covered by rater {r} outside the rater set"
                )));
            }
        }
        Ok(RaterAssignment { raters, k, covers })
    }

    /// Rater set taken as the union of all covers.
    pub fn from_covers<S, R, I>(k: usize, covers: impl IntoIterator<Item = (S, I)>) -> Result<Self>
    where
        S: Into<String>,
        R: Into<String>,
        I: IntoIterator<Item = R>,
    {
        let covers: BTreeMap<String, BTreeSet<String>> = covers
            .into_iter()
            .map(|(s, rs)| (s.into(), rs.into_iter().map(Into::into).collect()))
            .collect();
        let raters = covers.values().flatten().cloned().collect();
        RaterAssignment::new(raters, k, covers)
    }

    /// Same covers with extra raters that annotated nothing.
    pub fn with_raters(mut self, extra: impl IntoIterator<Item = String>) -> Self {
        self.raters.extend(extra);
        self
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("k must be positive".into()));
        }
        self.k = k;
        Ok(self)
    }

    pub fn raters(&self) -> &BTreeSet<String> {
        &self.raters
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn covers(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.covers
    }

    pub fn cover(&self, segment: &str) -> Option<&BTreeSet<String>> {
        self.covers.get(segment)
    }

    /// Segments whose cover size differs from `k`.
    pub fn flagged(&self) -> BTreeSet<String> {
        self.covers
            .iter()
            .filter(|(_, c)| c.len() != self.k)
            .map(|(s, _)| s.clone())
            .collect()
    }

    /// Copy without the given segment.
    pub fn without_segment(&self, segment: &str) -> Self {
        let mut covers = self.covers.clone();
        covers.remove(segment);
        RaterAssignment {
            raters: self.raters.clone(),
            k: self.k,
            covers,
        }
    }
}

/// Disjoint rater groups plus the segments each group covers exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSolution {
    pub groups: Vec<BTreeSet<String>>,
    #[serde(default)]
    pub unassigned: BTreeSet<String>,
    pub retained_segments: BTreeSet<String>,
    pub objective: usize,
}

impl PartitionSolution {
    /// Checks disjointness and the exactly-one-per-group rule against `assignment`.
    pub fn check(&self, assignment: &RaterAssignment) -> Result<()> {
        let mut seen = HashSet::new();
        for g in &self.groups {
            for r in g {
                if !assignment.raters().contains(r) {
                    return Err(Error::PartitionConsistency(format!("unknown rater {r}")));
                }
                if !seen.insert(r) {
                    return Err(Error::PartitionConsistency(format!(
                        "rater {r} appears in two groups"
                    )));
                }
            }
        }
        for seg in &self.retained_segments {
            let cover = assignment.cover(seg).ok_or_else(|| {
                Error::PartitionConsistency(format!("retained segment {seg} has no cover"))
            })?;
            for (gi, g) in self.groups.iter().enumerate() {
                let hits = cover.intersection(g).count();
                if hits != 1 {
                    return Err(Error::PartitionConsistency(format!(
                        "segment {seg} covered by {hits} raters of group {}",
                        gi + 1
                    )));
                }
            }
        }
        if self.objective != self.retained_segments.len() {
            return Err(Error::PartitionConsistency(
                "objective differs from retained segment count".into(),
            ));
        }
        Ok(())
    }
}

/// A broken structural invariant found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateSegment(String),
    DuplicateSystem(String),
    EvaluatorIdMismatch { key: String, table: String },
    DuplicateKey { evaluator: String, system: String, segment: String },
    UnknownSystem { evaluator: String, system: String },
    UnknownSegment { evaluator: String, segment: String },
    NonFiniteScore { evaluator: String, system: String, segment: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateSegment(s) => write!(f, "duplicate segment id {s}"),
            Violation::DuplicateSystem(s) => write!(f, "duplicate system id {s}"),
            Violation::EvaluatorIdMismatch { key, table } => {
                write!(f, "score table {table} stored under evaluator key {key}")
            }
            Violation::DuplicateKey {
                evaluator,
                system,
                segment,
            } => write!(f, "duplicate key ({system}, {segment}) in evaluator {evaluator}"),
            Violation::UnknownSystem { evaluator, system } => {
                write!(f, "unknown system {system} in evaluator {evaluator}")
            }
            Violation::UnknownSegment { evaluator, segment } => {
                write!(f, "unknown segment {segment} in evaluator {evaluator}")
            }
            Violation::NonFiniteScore {
                evaluator,
                system,
                segment,
            } => write!(
                f,
                "non-finite score at ({system}, {segment}) in evaluator {evaluator}"
            ),
        }
    }
}

/// Lists every invariant violation; empty means the dataset is well formed.
pub fn validate_dataset(dataset: &AnnotatedDataset) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for s in &dataset.segments {
        if !seen.insert(s.as_str()) {
            out.push(Violation::DuplicateSegment(s.clone()));
        }
    }
    let segments = seen;

    let mut systems = HashSet::new();
    for s in &dataset.systems {
        if !systems.insert(s.as_str()) {
            out.push(Violation::DuplicateSystem(s.clone()));
        }
    }

    for (key, table) in &dataset.score_tables {
        let evaluator = table.evaluator_id();
        if key != evaluator {
            out.push(Violation::EvaluatorIdMismatch {
                key: key.clone(),
                table: evaluator.to_owned(),
            });
        }
        let mut keys = HashSet::new();
        for e in table.entries() {
            if !keys.insert((e.system.as_str(), e.segment.as_str())) {
                out.push(Violation::DuplicateKey {
                    evaluator: evaluator.to_owned(),
                    system: e.system.clone(),
                    segment: e.segment.clone(),
                });
            }
            if !systems.contains(e.system.as_str()) {
                out.push(Violation::UnknownSystem {
                    evaluator: evaluator.to_owned(),
                    system: e.system.clone(),
                });
            }
            if !segments.contains(e.segment.as_str()) {
                out.push(Violation::UnknownSegment {
                    evaluator: evaluator.to_owned(),
                    segment: e.segment.clone(),
                });
            }
            if !e.score.is_finite() {
                out.push(Violation::NonFiniteScore {
                    evaluator: evaluator.to_owned(),
                    system: e.system.clone(),
                    segment: e.segment.clone(),
                });
            }
        }
    }
    out
}
