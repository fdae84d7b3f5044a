//! Segment scoring for the MQM, ESA, pSQM and DA+SQM annotation protocols,
//! system-level aggregation, and assembly of composite evaluators from rater
//! groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PartitionSolution, RaterAssignment, ScoreEntry, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Neutral,
    Minor,
    Major,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Neutral,
        Severity::Minor,
        Severity::Major,
        Severity::Critical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Neutral => "neutral",
            Severity::Minor => "minor",
            Severity::Major => "major",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            // WMT releases mark clean translations with a "No-error" row
            "neutral" | "no-error" => Ok(Severity::Neutral),
            "minor" => Ok(Severity::Minor),
            "major" => Ok(Severity::Major),
            "critical" => Ok(Severity::Critical),
            _ => Err(Error::Config(format!("unknown severity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    /// `-1` together with `end = -1` marks a whole-segment error.
    pub start: i64,
    pub end: i64,
    pub category: String,
    pub severity: Severity,
}

/// Error spans keyed by `(rater, system, segment)`, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpanAnnotationSet {
    spans: BTreeMap<(String, String, String), Vec<Span>>,
}

impl SpanAnnotationSet {
    pub fn push(&mut self, rater: &str, system: &str, segment: &str, span: Span) {
        self.spans
            .entry((rater.to_owned(), system.to_owned(), segment.to_owned()))
            .or_default()
            .push(span);
    }

    pub fn spans(&self, rater: &str, system: &str, segment: &str) -> Option<&[Span]> {
        self.spans
            .get(&(rater.to_owned(), system.to_owned(), segment.to_owned()))
            .map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((&str, &str, &str), &[Span])> {
        self.spans
            .iter()
            .map(|((r, sys, seg), v)| ((r.as_str(), sys.as_str(), seg.as_str()), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// Penalty per severity, with optional per-category exceptions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityWeights {
    base: BTreeMap<Severity, f64>,
    overrides: BTreeMap<(String, Severity), f64>,
}

impl Default for SeverityWeights {
    /// Neutral 0, Minor 1, Major 5, Critical 10, no overrides.
    fn default() -> Self {
        SeverityWeights {
            base: BTreeMap::from([
                (Severity::Neutral, 0.0),
                (Severity::Minor, 1.0),
                (Severity::Major, 5.0),
                (Severity::Critical, 10.0),
            ]),
            overrides: BTreeMap::new(),
        }
    }
}

fn check_weight(w: f64) -> Result<f64> {
    if w.is_finite() && w >= 0.0 {
        Ok(w)
    } else {
        Err(Error::Config(format!("weight {w} must be finite and >= 0")))
    }
}

impl SeverityWeights {
    /// No weights at all; every lookup fails until weights are set.
    pub fn empty() -> Self {
        SeverityWeights {
            base: BTreeMap::new(),
            overrides: BTreeMap::new(),
        }
    }

    /// Defaults plus the conventional Minor/Punctuation = 0.1 exception.
    pub fn with_punctuation_exception() -> Self {
        let mut w = SeverityWeights::default();
        w.overrides
            .insert(("fluency/punctuation".into(), Severity::Minor), 0.1);
        w
    }

    pub fn set(&mut self, severity: Severity, weight: f64) -> Result<()> {
        self.base.insert(severity, check_weight(weight)?);
        Ok(())
    }

    pub fn set_override(&mut self, category: &str, severity: Severity, weight: f64) -> Result<()> {
        self.overrides
            .insert((category.to_lowercase(), severity), check_weight(weight)?);
        Ok(())
    }

    pub fn weight(&self, category: &str, severity: Severity) -> Result<f64> {
        if !self.overrides.is_empty() {
            if let Some(&w) = self.overrides.get(&(category.to_lowercase(), severity)) {
                return Ok(w);
            }
        }
        self.base
            .get(&severity)
            .copied()
            .ok_or_else(|| Error::Config(format!("no weight configured for severity {severity}")))
    }

    /// Applies one `key = value` setting. Keys are `major` (or
    /// `weights.major`) for a base weight and `<category>.minor` (or
    /// `overrides.<category>.minor`) for an exception.
    pub fn apply(&mut self, key: &str, value: f64) -> Result<()> {
        let key = key
            .strip_prefix("severity.")
            .unwrap_or(key)
            .trim();
        let key = key.strip_prefix("weights.").unwrap_or(key);
        let key = key.strip_prefix("overrides.").unwrap_or(key);
        match key.rsplit_once('.') {
            None => self.set(key.parse()?, value),
            Some((category, sev)) => {
                let category = category.trim_matches('"');
                self.set_override(category, sev.parse()?, value)
            }
        }
    }

    /// Reads the `[severity]` table of a TOML config on top of `self`:
    ///
    /// ```toml
    /// severity.weights.major = 5
    /// severity.overrides."fluency/punctuation".minor = 0.1
    /// ```
    pub fn apply_toml(&mut self, table: &toml::Table) -> Result<()> {
        let Some(sev) = table.get("severity") else {
            return Ok(());
        };
        let sev = sev
            .as_table()
            .ok_or_else(|| Error::Config("`severity` must be a table".into()))?;
        if let Some(w) = sev.get("weights") {
            let w = w
                .as_table()
                .ok_or_else(|| Error::Config("`severity.weights` must be a table".into()))?;
            for (name, v) in w {
                self.set(name.parse()?, toml_number(v)?)?;
            }
        }
        if let Some(o) = sev.get("overrides") {
            let o = o
                .as_table()
                .ok_or_else(|| Error::Config("`severity.overrides` must be a table".into()))?;
            for (category, inner) in o {
                let inner = inner.as_table().ok_or_else(|| {
                    Error::Config(format!("`severity.overrides.{category}` must be a table"))
                })?;
                for (name, v) in inner {
                    self.set_override(category, name.parse()?, toml_number(v)?)?;
                }
            }
        }
        Ok(())
    }
}

fn toml_number(v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::Float(f) => Ok(*f),
        other => Err(Error::Config(format!("expected a number, found {other}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Mqm,
    Esa,
    Psqm,
    DaSqm,
}

impl Protocol {
    /// Valid raw score interval. MQM is unbounded below once negated.
    pub fn range(self) -> (f64, f64) {
        match self {
            Protocol::Mqm => (f64::NEG_INFINITY, 0.0),
            Protocol::Esa | Protocol::DaSqm => (0.0, 100.0),
            Protocol::Psqm => (0.0, 6.0),
        }
    }

    /// Whether raw values must be negated to become higher-is-better.
    pub fn negates(self) -> bool {
        matches!(self, Protocol::Mqm)
    }

    pub fn is_scalar(self) -> bool {
        !matches!(self, Protocol::Mqm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Mqm => "MQM",
            Protocol::Esa => "ESA",
            Protocol::Psqm => "pSQM",
            Protocol::DaSqm => "DA+SQM",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mqm" => Ok(Protocol::Mqm),
            "esa" => Ok(Protocol::Esa),
            "psqm" | "sqm" => Ok(Protocol::Psqm),
            "da+sqm" | "dasqm" | "da-sqm" => Ok(Protocol::DaSqm),
            _ => Err(Error::Argument(format!("unknown protocol {s:?}"))),
        }
    }
}

/// Negated penalty sum of one rater's spans on one translation (0 = perfect).
pub fn mqm_segment_score(spans: &[Span], weights: &SeverityWeights) -> Result<f64> {
    let mut penalty = 0.0;
    for span in spans {
        penalty += weights.weight(&span.category, span.severity)?;
    }
    Ok(0.0 - penalty)
}

/// Range-checked scalar score for ESA, pSQM or DA+SQM.
pub fn scalar_segment_score(value: f64, protocol: Protocol) -> Result<f64> {
    if !protocol.is_scalar() {
        return Err(Error::Argument(format!(
            "{protocol} is not a scalar protocol"
        )));
    }
    let (min, max) = protocol.range();
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            protocol: protocol.name().to_owned(),
            value,
            min,
            max,
        })
    }
}

/// Mean of `table`'s scores for `system` over `segments`.
pub fn system_score(table: &ScoreTable, system: &str, segments: &BTreeSet<String>) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::Undefined("system score over zero segments".into()));
    }
    let mut sum = 0.0;
    for seg in segments {
        sum += table.get(system, seg).ok_or_else(|| {
            Error::Coverage(format!(
                "evaluator {} has no score for system {system}, segment {seg}",
                table.evaluator_id()
            ))
        })?;
    }
    Ok(sum / segments.len() as f64)
}

/// Per-rater raw annotations from which evaluators are assembled.
#[derive(Debug, Clone, Copy)]
pub enum RaterAnnotations<'a> {
    Spans {
        set: &'a SpanAnnotationSet,
        weights: &'a SeverityWeights,
    },
    /// One table per rater id holding raw protocol scores.
    Scalar {
        tables: &'a BTreeMap<String, ScoreTable>,
        protocol: Protocol,
    },
}

/// Combines the disjoint work of `group` into one evaluator over `retained`.
///
/// Each retained segment must be covered by exactly one rater of the group;
/// that rater's score becomes the evaluator's score for every system they
/// annotated on the segment.
pub fn assemble_evaluator(
    evaluator_id: &str,
    group: &BTreeSet<String>,
    annotations: RaterAnnotations<'_>,
    assignment: &RaterAssignment,
    retained: &BTreeSet<String>,
) -> Result<ScoreTable> {
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for seg in retained {
        let cover = assignment.cover(seg);
        let hits: Vec<&String> = cover
            .into_iter()
            .flatten()
            .filter(|r| group.contains(*r))
            .collect();
        if hits.len() != 1 {
            return Err(Error::PartitionConsistency(format!(
                "segment {seg} covered by {} raters of group {evaluator_id}",
                hits.len()
            )));
        }
        owner.insert(seg.as_str(), hits[0].as_str());
    }
    let owns = |rater: &str, seg: &str| owner.get(seg).is_some_and(|&r| r == rater);

    let mut entries = Vec::new();
    match annotations {
        RaterAnnotations::Spans { set, weights } => {
            for ((rater, sys, seg), spans) in set.iter() {
                if owns(rater, seg) {
                    entries.push(ScoreEntry {
                        system: sys.to_owned(),
                        segment: seg.to_owned(),
                        score: mqm_segment_score(spans, weights)?,
                    });
                }
            }
        }
        RaterAnnotations::Scalar { tables, protocol } => {
            for (rater, table) in tables {
                for (sys, seg) in table.coverage() {
                    if owns(rater, seg) {
                        let raw = table.get(sys, seg).expect("covered");
                        entries.push(ScoreEntry {
                            system: sys.to_owned(),
                            segment: seg.to_owned(),
                            score: scalar_segment_score(raw, protocol)?,
                        });
                    }
                }
            }
        }
    }
    entries.sort_by(|a, b| (&a.system, &a.segment).cmp(&(&b.system, &b.segment)));
    Ok(ScoreTable::new(evaluator_id, entries))
}

/// One evaluator per partition group, named `{prefix}-1`, `{prefix}-2`, ...
pub fn assemble_from_solution(
    prefix: &str,
    solution: &PartitionSolution,
    annotations: RaterAnnotations<'_>,
    assignment: &RaterAssignment,
) -> Result<Vec<ScoreTable>> {
    solution
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            assemble_evaluator(
                &format!("{prefix}-{}", i + 1),
                g,
                annotations,
                assignment,
                &solution.retained_segments,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(sev: Severity) -> Span {
        Span {
            start: 0,
            end: 1,
            category: "Accuracy/Mistranslation".into(),
            severity: sev,
        }
    }

    #[test]
    fn mqm_examples() {
        let w = SeverityWeights::default();
        assert_eq!(mqm_segment_score(&[], &w).unwrap(), 0.0);
        assert!(mqm_segment_score(&[], &w).unwrap().is_sign_positive());
        let spans = [span(Severity::Major), span(Severity::Major), span(Severity::Minor)];
        assert_eq!(mqm_segment_score(&spans, &w).unwrap(), -11.0);
        assert_eq!(mqm_segment_score(&[span(Severity::Neutral)], &w).unwrap(), 0.0);
    }

    #[test]
    fn missing_weight_is_config_error() {
        let mut w = SeverityWeights::empty();
        w.set(Severity::Minor, 1.0).unwrap();
        let err = mqm_segment_score(&[span(Severity::Major)], &w).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(w.set(Severity::Major, -1.0).is_err());
    }

    #[test]
    fn category_override() {
        let w = SeverityWeights::with_punctuation_exception();
        let mut s = span(Severity::Minor);
        s.category = "Fluency/Punctuation".into();
        assert_eq!(mqm_segment_score(&[s.clone()], &w).unwrap(), -0.1);
        assert_eq!(
            mqm_segment_score(&[s], &SeverityWeights::default()).unwrap(),
            -1.0
        );
    }

    #[test]
    fn weights_from_config() {
        let table: toml::Table = toml::from_str(
            "severity.weights.major = 4\nseverity.overrides.\"fluency/punctuation\".minor = 0.1\n",
        )
        .unwrap();
        let mut w = SeverityWeights::default();
        w.apply_toml(&table).unwrap();
        assert_eq!(w.weight("x", Severity::Major).unwrap(), 4.0);
        assert_eq!(w.weight("Fluency/Punctuation", Severity::Minor).unwrap(), 0.1);

        let mut w = SeverityWeights::default();
        w.apply("severity.weights.critical", 25.0).unwrap();
        w.apply("style.major", 2.0).unwrap();
        assert_eq!(w.weight("x", Severity::Critical).unwrap(), 25.0);
        assert_eq!(w.weight("Style", Severity::Major).unwrap(), 2.0);
        assert!(w.apply("catastrophic", 1.0).is_err());
    }

    #[test]
    fn scalar_ranges() {
        assert_eq!(scalar_segment_score(63.0, Protocol::Esa).unwrap(), 63.0);
        assert!(matches!(
            scalar_segment_score(7.0, Protocol::Psqm).unwrap_err(),
            Error::OutOfRange { max, .. } if max == 6.0
        ));
        assert_eq!(scalar_segment_score(100.0, Protocol::DaSqm).unwrap(), 100.0);
        assert!(scalar_segment_score(-0.5, Protocol::Esa).is_err());
        assert!(scalar_segment_score(1.0, Protocol::Mqm).is_err());
    }

    #[test]
    fn system_score_examples() {
        let t = ScoreTable::from_triples(
            "e",
            [("A", "s1", 2.0), ("A", "s2", 4.0), ("B", "s1", -11.0), ("C", "s1", 0.0), ("C", "s2", 0.0), ("C", "s3", 0.0)],
        );
        let segs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(system_score(&t, "A", &segs(&["s1", "s2"])).unwrap(), 3.0);
        assert_eq!(system_score(&t, "B", &segs(&["s1"])).unwrap(), -11.0);
        assert_eq!(system_score(&t, "C", &segs(&["s1", "s2", "s3"])).unwrap(), 0.0);
        assert!(matches!(
            system_score(&t, "B", &segs(&["s1", "s2"])).unwrap_err(),
            Error::Coverage(_)
        ));
    }

    fn scalar_fixture() -> (BTreeMap<String, ScoreTable>, RaterAssignment) {
        let r1 = ScoreTable::from_triples(
            "r1",
            [("A", "s1", 10.0), ("B", "s1", 20.0), ("A", "s2", 30.0), ("B", "s2", 40.0)],
        );
        let r2 = ScoreTable::from_triples(
            "r2",
            [("A", "s2", 50.0), ("B", "s2", 60.0), ("A", "s3", 70.0), ("B", "s3", 80.0)],
        );
        let tables = BTreeMap::from([("r1".to_string(), r1), ("r2".to_string(), r2)]);
        let a = RaterAssignment::from_covers(
            1,
            [("s1", vec!["r1"]), ("s2", vec!["r1", "r2"]), ("s3", vec!["r2"])],
        )
        .unwrap();
        (tables, a)
    }

    #[test]
    fn assemble_identity_and_halves() {
        let (tables, a) = scalar_fixture();
        let ann = RaterAnnotations::Scalar {
            tables: &tables,
            protocol: Protocol::Esa,
        };
        let g1 = BTreeSet::from(["r1".to_string()]);
        let retained = BTreeSet::from(["s1".to_string(), "s2".to_string()]);
        let t = assemble_evaluator("ESA-1", &g1, ann, &a, &retained).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.get("B", "s2"), Some(40.0));

        let g12 = BTreeSet::from(["r1".to_string(), "r2".to_string()]);
        let halves = BTreeSet::from(["s1".to_string(), "s3".to_string()]);
        let t = assemble_evaluator("ESA-1", &g12, ann, &a, &halves).unwrap();
        assert_eq!(t.get("A", "s1"), Some(10.0));
        assert_eq!(t.get("B", "s3"), Some(80.0));
        assert_eq!(t.len(), 4);

        let both = BTreeSet::from(["s2".to_string()]);
        assert!(matches!(
            assemble_evaluator("ESA-1", &g12, ann, &a, &both).unwrap_err(),
            Error::PartitionConsistency(_)
        ));
    }

    #[test]
    fn assemble_rejects_out_of_range_scalars() {
        let (mut tables, a) = scalar_fixture();
        tables.insert(
            "r1".into(),
            ScoreTable::from_triples("r1", [("A", "s1", 7.0)]),
        );
        let ann = RaterAnnotations::Scalar {
            tables: &tables,
            protocol: Protocol::Psqm,
        };
        let g = BTreeSet::from(["r1".to_string()]);
        let retained = BTreeSet::from(["s1".to_string()]);
        assert!(assemble_evaluator("p", &g, ann, &a, &retained).is_err());
    }

    #[test]
    fn assemble_spans_negates() {
        let mut set = SpanAnnotationSet::default();
        set.push("r1", "A", "s1", span(Severity::Major));
        set.push("r1", "B", "s1", span(Severity::Neutral));
        let a = RaterAssignment::from_covers(1, [("s1", ["r1"])]).unwrap();
        let w = SeverityWeights::default();
        let t = assemble_evaluator(
            "MQM-1",
            &BTreeSet::from(["r1".to_string()]),
            RaterAnnotations::Spans { set: &set, weights: &w },
            &a,
            &BTreeSet::from(["s1".to_string()]),
        )
        .unwrap();
        assert_eq!(t.get("A", "s1"), Some(-5.0));
        assert_eq!(t.get("B", "s1"), Some(0.0));
    }

    fn severity() -> impl Strategy<Value = Severity> {
        prop::sample::select(Severity::ALL.to_vec())
    }

    fn spans() -> impl Strategy<Value = Vec<Span>> {
        prop::collection::vec(severity().prop_map(span), 0..12)
    }

    proptest! {
        #[test]
        fn mqm_is_additive(a in spans(), b in spans()) {
            let w = SeverityWeights::default();
            let joined: Vec<Span> = a.iter().chain(&b).cloned().collect();
            prop_assert_eq!(
                mqm_segment_score(&joined, &w).unwrap(),
                mqm_segment_score(&a, &w).unwrap() + mqm_segment_score(&b, &w).unwrap()
            );
        }

        #[test]
        fn mqm_ignores_span_order(mut a in spans(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let w = SeverityWeights::default();
            let before = mqm_segment_score(&a, &w).unwrap();
            a.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(before, mqm_segment_score(&a, &w).unwrap());
        }

        #[test]
        fn system_score_is_plain_mean(vals in prop::collection::vec(-100i32..100, 1..20)) {
            let t = ScoreTable::from_triples(
                "e",
                vals.iter().enumerate().map(|(i, &v)| ("A", format!("s{i:03}"), v as f64)),
            );
            let segs: BTreeSet<String> = (0..vals.len()).map(|i| format!("s{i:03}")).collect();
            let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / vals.len() as f64;
            prop_assert_eq!(system_score(&t, "A", &segs).unwrap(), mean);
        }
    }
}
