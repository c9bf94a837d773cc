//! Science Q&A corpus records and synthesized answers: loading, validation,
//! and summary statistics.
//!
//! The canonical on-disk format is JSONL. Unknown fields on corpus records
//! are preserved on round-trip so files from other tools survive untouched.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::rubric::RubricId;

/// Maximum number of abstracts a record may reference.
pub const MAX_ABSTRACTS: usize = 40;
/// Required abstract count for `orkgsyn` records.
pub const ORKGSYN_ABSTRACTS: usize = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("constraint violation at line {line}: {message}")]
    Constraint { line: usize, message: String },
}

impl From<JsonlError> for CorpusError {
    fn from(err: JsonlError) -> Self {
        match err {
            JsonlError::Io(e) => CorpusError::Io(e),
            JsonlError::Parse { line, message } => CorpusError::Schema { line, message },
        }
    }
}

/// Which corpus family a record belongs to; controls the abstract-count rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusTag {
    Orkgsyn,
    Bioasq,
    Custom,
}

impl fmt::Display for CorpusTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CorpusTag::Orkgsyn => "orkgsyn",
            CorpusTag::Bioasq => "bioasq",
            CorpusTag::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for CorpusTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "orkgsyn" => Ok(CorpusTag::Orkgsyn),
            "bioasq" => Ok(CorpusTag::Bioasq),
            "custom" => Ok(CorpusTag::Custom),
            other => Err(format!("unknown corpus tag: {other}")),
        }
    }
}

/// One source paper: title, abstract, and an opaque provenance id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractRef {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub source_id: String,
}

/// A research question linked to its source abstracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QARecord {
    pub record_id: String,
    pub question: String,
    #[serde(default)]
    pub research_field: String,
    pub abstracts: Vec<AbstractRef>,
    pub corpus_tag: CorpusTag,
    /// Unknown input fields, preserved for round-trip.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Perturbation strength. `Subtle` edits are hard to notice; `Extreme` edits
/// are meant to be obvious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Subtle,
    Extreme,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Subtle => "subtle",
            Level::Extreme => "extreme",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subtle" => Ok(Level::Subtle),
            "extreme" => Ok(Level::Extreme),
            other => Err(format!("unknown level: {other}")),
        }
    }
}

/// The three evaluation settings a run can cover: unmodified texts plus the
/// two perturbation strengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunLevel {
    Benign,
    Subtle,
    Extreme,
}

impl fmt::Display for RunLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunLevel::Benign => "benign",
            RunLevel::Subtle => "subtle",
            RunLevel::Extreme => "extreme",
        })
    }
}

impl FromStr for RunLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" => Ok(RunLevel::Benign),
            "subtle" => Ok(RunLevel::Subtle),
            "extreme" => Ok(RunLevel::Extreme),
            other => Err(format!("unknown level: {other}")),
        }
    }
}

impl From<Level> for RunLevel {
    fn from(level: Level) -> Self {
        match level {
            Level::Subtle => RunLevel::Subtle,
            Level::Extreme => RunLevel::Extreme,
        }
    }
}

/// A synthesis is either the unmodified model output or a rubric-targeted
/// perturbation of it at one of two strengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Benign,
    Perturbed { rubric: RubricId, level: Level },
}

impl Variant {
    pub fn level_name(&self) -> &'static str {
        match self {
            Variant::Benign => "benign",
            Variant::Perturbed { level: Level::Subtle, .. } => "subtle",
            Variant::Perturbed { level: Level::Extreme, .. } => "extreme",
        }
    }

    pub fn run_level(&self) -> RunLevel {
        match self {
            Variant::Benign => RunLevel::Benign,
            Variant::Perturbed { level, .. } => RunLevel::from(*level),
        }
    }

    pub fn rubric(&self) -> Option<RubricId> {
        match self {
            Variant::Benign => None,
            Variant::Perturbed { rubric, .. } => Some(*rubric),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Benign => f.write_str("benign"),
            Variant::Perturbed { rubric, level } => write!(f, "{rubric}:{level}"),
        }
    }
}

// JSON form: "benign" or {"rubric": "...", "level": "subtle"|"extreme"}.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VariantRepr {
    Tag(String),
    Perturbed { rubric: RubricId, level: Level },
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Variant::Benign => VariantRepr::Tag("benign".to_string()),
            Variant::Perturbed { rubric, level } => VariantRepr::Perturbed {
                rubric: *rubric,
                level: *level,
            },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match VariantRepr::deserialize(deserializer)? {
            VariantRepr::Tag(tag) if tag == "benign" => Ok(Variant::Benign),
            VariantRepr::Tag(tag) => Err(serde::de::Error::custom(format!(
                "unknown variant tag: {tag:?} (expected \"benign\" or a rubric/level object)"
            ))),
            VariantRepr::Perturbed { rubric, level } => Ok(Variant::Perturbed { rubric, level }),
        }
    }
}

/// One answer text for a record, tagged with the generator model and whether
/// (and how) it was perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisVariant {
    pub record_id: String,
    pub generator_model: String,
    pub variant: Variant,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
}

/// Summary counts over a loaded corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub record_count: usize,
    pub field_frequencies: BTreeMap<String, usize>,
    pub abstract_count_histogram: BTreeMap<usize, usize>,
}

/// Check all per-record invariants. An empty result means the record is valid;
/// otherwise each entry names one violated invariant.
pub fn validate_record(record: &QARecord) -> Vec<String> {
    let mut violations = Vec::new();
    if record.record_id.trim().is_empty() {
        violations.push("record_id empty".to_string());
    }
    if record.question.trim().is_empty() {
        violations.push("question empty".to_string());
    }
    if record.research_field.trim().is_empty() && record.corpus_tag != CorpusTag::Custom {
        violations.push("research_field empty".to_string());
    }
    let n = record.abstracts.len();
    if n == 0 {
        violations.push("no abstracts (N must be >= 1)".to_string());
    }
    if n > MAX_ABSTRACTS {
        violations.push(format!("N = {n} exceeds cap of {MAX_ABSTRACTS}"));
    }
    if record.corpus_tag == CorpusTag::Orkgsyn && n != ORKGSYN_ABSTRACTS {
        violations.push(format!("N != {ORKGSYN_ABSTRACTS} for orkgsyn record (got {n})"));
    }
    for (i, abs) in record.abstracts.iter().enumerate() {
        if abs.title.trim().is_empty() {
            violations.push(format!("abstract {}: title empty", i + 1));
        }
        if abs.abstract_text.trim().is_empty() {
            violations.push(format!("abstract {}: abstract empty", i + 1));
        }
    }
    violations
}

// Loader-side record shape: corpus_tag and research_field may be absent in
// the file and are then filled from context.
#[derive(Deserialize)]
struct RawRecord {
    record_id: String,
    question: String,
    #[serde(default)]
    research_field: Option<String>,
    abstracts: Vec<AbstractRef>,
    #[serde(default)]
    corpus_tag: Option<CorpusTag>,
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

/// Load a corpus file, validating every record against `tag`.
///
/// Records keep their file order. A record whose `corpus_tag` field
/// contradicts `tag` is a constraint violation; a missing `corpus_tag` or
/// (for custom corpora) missing `research_field` is filled in.
pub fn load_corpus(path: &Path, tag: CorpusTag) -> Result<Vec<QARecord>, CorpusError> {
    let raw: Vec<RawRecord> = jsonl::read_jsonl(path)?;
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut records = Vec::with_capacity(raw.len());
    for (idx, r) in raw.into_iter().enumerate() {
        let line = idx + 1;
        if let Some(file_tag) = r.corpus_tag {
            if file_tag != tag {
                return Err(CorpusError::Constraint {
                    line,
                    message: format!("corpus_tag {file_tag} does not match requested tag {tag}"),
                });
            }
        }
        let research_field = match r.research_field {
            Some(f) if !f.trim().is_empty() => f,
            _ if tag == CorpusTag::Custom => "unknown".to_string(),
            _ => String::new(),
        };
        let record = QARecord {
            record_id: r.record_id,
            question: r.question,
            research_field,
            abstracts: r.abstracts,
            corpus_tag: tag,
            extra: r.extra,
        };
        let violations = validate_record(&record);
        if !violations.is_empty() {
            return Err(CorpusError::Constraint {
                line,
                message: violations.join("; "),
            });
        }
        if !seen_ids.insert(record.record_id.clone()) {
            return Err(CorpusError::Constraint {
                line,
                message: format!("duplicate record_id {:?}", record.record_id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records as JSONL. Inverse of [`load_corpus`] for valid input.
pub fn write_corpus(path: &Path, records: &[QARecord]) -> Result<usize, CorpusError> {
    Ok(jsonl::write_jsonl(path, records)?)
}

/// Exact counts over the given records.
pub fn corpus_stats(records: &[QARecord]) -> CorpusStats {
    let mut field_frequencies: BTreeMap<String, usize> = BTreeMap::new();
    let mut abstract_count_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for record in records {
        *field_frequencies.entry(record.research_field.clone()).or_default() += 1;
        *abstract_count_histogram.entry(record.abstracts.len()).or_default() += 1;
    }
    CorpusStats {
        record_count: records.len(),
        field_frequencies,
        abstract_count_histogram,
    }
}

/// Load a synthesis file, enforcing nonempty text and uniqueness of
/// (record_id, generator_model, variant).
pub fn load_syntheses(path: &Path) -> Result<Vec<SynthesisVariant>, CorpusError> {
    let items: Vec<SynthesisVariant> = jsonl::read_jsonl(path)?;
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for (idx, s) in items.iter().enumerate() {
        let line = idx + 1;
        if s.text.trim().is_empty() {
            return Err(CorpusError::Constraint {
                line,
                message: "synthesis text empty".to_string(),
            });
        }
        let key = (s.record_id.clone(), s.generator_model.clone(), s.variant.to_string());
        if !seen.insert(key) {
            return Err(CorpusError::Constraint {
                line,
                message: format!(
                    "duplicate synthesis ({}, {}, {})",
                    s.record_id, s.generator_model, s.variant
                ),
            });
        }
    }
    Ok(items)
}

/// Write syntheses as JSONL.
pub fn write_syntheses(path: &Path, items: &[SynthesisVariant]) -> Result<usize, CorpusError> {
    Ok(jsonl::write_jsonl(path, items)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, field: &str, n: usize, tag: CorpusTag) -> QARecord {
        QARecord {
            record_id: id.to_string(),
            question: "Why?".to_string(),
            research_field: field.to_string(),
            abstracts: (0..n)
                .map(|i| AbstractRef {
                    title: format!("T{i}"),
                    abstract_text: format!("A{i}"),
                    source_id: format!("s{i}"),
                })
                .collect(),
            corpus_tag: tag,
            extra: Default::default(),
        }
    }

    fn corpus_line(id: &str, n: usize) -> String {
        let abstracts: Vec<String> = (0..n)
            .map(|i| {
                format!(r#"{{"title":"T{i}","abstract":"Text {i}.","source_id":"s{i}"}}"#)
            })
            .collect();
        format!(
            r#"{{"record_id":"{id}","question":"Q?","research_field":"Computer Sciences","abstracts":[{}]}}"#,
            abstracts.join(",")
        )
    }

    #[test]
    fn loads_orkgsyn_record_with_five_abstracts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, corpus_line("r1", 5) + "\n").unwrap();
        let records = load_corpus(&path, CorpusTag::Orkgsyn).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].abstracts.len(), 5);
    }

    #[test]
    fn empty_file_gives_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let records = load_corpus(&path, CorpusTag::Custom).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn bioasq_record_over_cap_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.jsonl");
        std::fs::write(&path, corpus_line("r1", 41) + "\n").unwrap();
        let err = load_corpus(&path, CorpusTag::Bioasq).unwrap_err();
        match err {
            CorpusError::Constraint { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("41"));
            }
            other => panic!("expected constraint error, got {other}"),
        }
    }

    #[test]
    fn missing_field_is_schema_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, format!("{}\n{{\"record_id\":\"r2\"}}\n", corpus_line("r1", 3)))
            .unwrap();
        let err = load_corpus(&path, CorpusTag::Custom).unwrap_err();
        match err {
            CorpusError::Schema { line, .. } => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn duplicate_record_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        std::fs::write(&path, format!("{0}\n{0}\n", corpus_line("r1", 3))).unwrap();
        let err = load_corpus(&path, CorpusTag::Custom).unwrap_err();
        assert!(matches!(err, CorpusError::Constraint { line: 2, .. }));
    }

    #[test]
    fn validate_flags_empty_question() {
        let mut r = record("r1", "CS", 3, CorpusTag::Custom);
        r.question = " ".to_string();
        let violations = validate_record(&r);
        assert!(violations.iter().any(|v| v == "question empty"));
    }

    #[test]
    fn validate_flags_orkgsyn_with_four_abstracts() {
        let r = record("r1", "CS", 4, CorpusTag::Orkgsyn);
        let violations = validate_record(&r);
        assert!(violations.iter().any(|v| v.contains("N != 5")));
    }

    #[test]
    fn valid_record_has_no_violations() {
        let r = record("r1", "CS", 5, CorpusTag::Orkgsyn);
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn custom_records_default_missing_field_to_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.jsonl");
        let line = r#"{"record_id":"r1","question":"Q?","abstracts":[{"title":"T","abstract":"A","source_id":"s"}]}"#;
        std::fs::write(&path, format!("{line}\n")).unwrap();
        let records = load_corpus(&path, CorpusTag::Custom).unwrap();
        assert_eq!(records[0].research_field, "unknown");
    }

    #[test]
    fn stats_count_fields_and_histogram() {
        let records = vec![
            record("a", "CS", 5, CorpusTag::Custom),
            record("b", "CS", 5, CorpusTag::Custom),
            record("c", "Physics", 3, CorpusTag::Custom),
        ];
        let stats = corpus_stats(&records);
        assert_eq!(stats.record_count, 3);
        assert_eq!(stats.field_frequencies["CS"], 2);
        assert_eq!(stats.field_frequencies["Physics"], 1);
        assert_eq!(stats.abstract_count_histogram[&5], 2);
        assert_eq!(stats.abstract_count_histogram[&3], 1);
        assert_eq!(stats.field_frequencies.values().sum::<usize>(), stats.record_count);
    }

    #[test]
    fn stats_of_empty_list_are_empty() {
        let stats = corpus_stats(&[]);
        assert_eq!(stats.record_count, 0);
        assert!(stats.field_frequencies.is_empty());
        assert!(stats.abstract_count_histogram.is_empty());
    }

    #[test]
    fn stats_record_count_is_additive_over_concatenation() {
        let r1 = vec![record("a", "CS", 2, CorpusTag::Custom)];
        let r2 = vec![
            record("b", "CS", 2, CorpusTag::Custom),
            record("c", "Bio", 4, CorpusTag::Custom),
        ];
        let mut joined = r1.clone();
        joined.extend(r2.clone());
        assert_eq!(
            corpus_stats(&joined).record_count,
            corpus_stats(&r1).record_count + corpus_stats(&r2).record_count
        );
    }

    #[test]
    fn round_trip_preserves_records_and_extra_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let line = r#"{"record_id":"r1","question":"Q?","research_field":"CS","abstracts":[{"title":"T","abstract":"A","source_id":"s"}],"corpus_tag":"custom","provenance_note":"kept"}"#;
        std::fs::write(&path, format!("{line}\n")).unwrap();
        let records = load_corpus(&path, CorpusTag::Custom).unwrap();
        assert_eq!(records[0].extra["provenance_note"], "kept");

        let out = dir.path().join("out.jsonl");
        write_corpus(&out, &records).unwrap();
        let reloaded = load_corpus(&out, CorpusTag::Custom).unwrap();
        assert_eq!(reloaded, records);
    }

    #[test]
    fn variant_serialization_forms() {
        let benign = SynthesisVariant {
            record_id: "r".into(),
            generator_model: "m".into(),
            variant: Variant::Benign,
            text: "T.".into(),
            perturbation_seed: None,
        };
        let json = serde_json::to_string(&benign).unwrap();
        assert!(json.contains(r#""variant":"benign""#));
        assert!(!json.contains("perturbation_seed"));

        let perturbed = SynthesisVariant {
            variant: Variant::Perturbed {
                rubric: RubricId::Cohesion,
                level: Level::Extreme,
            },
            perturbation_seed: Some(7),
            ..benign.clone()
        };
        let json = serde_json::to_string(&perturbed).unwrap();
        assert!(json.contains(r#""rubric":"cohesion""#));
        assert!(json.contains(r#""level":"extreme""#));
        let back: SynthesisVariant = serde_json::from_str(&json).unwrap();
        assert_eq!(back, perturbed);
    }

    #[test]
    fn duplicate_synthesis_triple_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.jsonl");
        let line = r#"{"record_id":"r","generator_model":"m","variant":"benign","text":"T."}"#;
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        let err = load_syntheses(&path).unwrap_err();
        assert!(matches!(err, CorpusError::Constraint { line: 2, .. }));
    }
}
