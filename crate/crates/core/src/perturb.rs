//! Rubric-targeted adversarial perturbations of benign syntheses.
//!
//! Each of the nine rubrics has a subtle and an extreme heuristic (append an
//! off-topic sentence, drop the last sentence, delete connectors, reorder
//! sentences, inject redundancy). All randomness — pool picks and shuffles —
//! is a pure function of (seed, record id, rubric, level), so runs are
//! bit-reproducible.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Level, QARecord, SynthesisVariant, Variant};
use crate::hash;
use crate::rubric::RubricId;

/// Default connector phrases recognized by the integration heuristics.
pub const DEFAULT_CONNECTORS: [&str; 12] = [
    "however",
    "therefore",
    "moreover",
    "furthermore",
    "thus",
    "hence",
    "consequently",
    "additionally",
    "in addition",
    "in contrast",
    "nevertheless",
    "nonetheless",
];

/// Placeholder that must appear exactly once in the redundancy template.
pub const TEMPLATE_SLOT: &str = "{sentence}";

const ABBREVIATIONS: [&str; 7] = ["e.g.", "i.e.", "al.", "fig.", "dr.", "vs.", "cf."];

/// An injectable sentence, optionally tagged with the record its source
/// synthesis belongs to so self-injection can be excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSentence {
    pub text: String,
    pub source_record: Option<String>,
}

impl PoolSentence {
    pub fn new(text: impl Into<String>) -> Self {
        PoolSentence {
            text: text.into(),
            source_record: None,
        }
    }

    pub fn from_record(text: impl Into<String>, record_id: impl Into<String>) -> Self {
        PoolSentence {
            text: text.into(),
            source_record: Some(record_id.into()),
        }
    }
}

// On disk a pool entry is either a bare string or {"text": ..., "record_id": ...}.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PoolSentenceRepr {
    Plain(String),
    Tagged {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        record_id: Option<String>,
    },
}

impl Serialize for PoolSentence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match &self.source_record {
            None => PoolSentenceRepr::Plain(self.text.clone()),
            Some(id) => PoolSentenceRepr::Tagged {
                text: self.text.clone(),
                record_id: Some(id.clone()),
            },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PoolSentence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match PoolSentenceRepr::deserialize(deserializer)? {
            PoolSentenceRepr::Plain(text) => PoolSentence {
                text,
                source_record: None,
            },
            PoolSentenceRepr::Tagged { text, record_id } => PoolSentence {
                text,
                source_record: record_id,
            },
        })
    }
}

/// Sentence material for the append-style perturbations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InjectionPools {
    #[serde(default)]
    pub same_domain: BTreeMap<String, Vec<PoolSentence>>,
    #[serde(default)]
    pub sports_news: Vec<PoolSentence>,
    #[serde(default)]
    pub blog_snippets: Vec<PoolSentence>,
    #[serde(default)]
    pub tweets: Vec<PoolSentence>,
}

#[derive(Debug, Error)]
pub enum PoolsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("pools file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("pool {pool}: sentence {index} is empty after trimming")]
    EmptySentence { pool: String, index: usize },
}

impl InjectionPools {
    /// Load a pools file, trimming every sentence and rejecting empties.
    pub fn load(path: &Path) -> Result<Self, PoolsError> {
        let raw = std::fs::read_to_string(path)?;
        let mut pools: InjectionPools = serde_json::from_str(&raw)?;
        pools.normalize()?;
        Ok(pools)
    }

    pub fn save(&self, path: &Path) -> Result<(), PoolsError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    fn normalize(&mut self) -> Result<(), PoolsError> {
        fn trim_all(name: &str, list: &mut [PoolSentence]) -> Result<(), PoolsError> {
            for (i, s) in list.iter_mut().enumerate() {
                s.text = s.text.trim().to_string();
                if s.text.is_empty() {
                    return Err(PoolsError::EmptySentence {
                        pool: name.to_string(),
                        index: i,
                    });
                }
            }
            Ok(())
        }
        for (field, list) in &mut self.same_domain {
            trim_all(&format!("same_domain[{field}]"), list)?;
        }
        trim_all("sports_news", &mut self.sports_news)?;
        trim_all("blog_snippets", &mut self.blog_snippets)?;
        trim_all("tweets", &mut self.tweets)?;
        Ok(())
    }

    /// Populate the same-domain pool from benign syntheses, tagging every
    /// sentence with its record so self-injection can be excluded later.
    pub fn add_same_domain_from_syntheses(
        &mut self,
        records: &[QARecord],
        syntheses: &[SynthesisVariant],
    ) {
        let fields: BTreeMap<&str, &str> = records
            .iter()
            .map(|r| (r.record_id.as_str(), r.research_field.as_str()))
            .collect();
        for synth in syntheses {
            if synth.variant != Variant::Benign {
                continue;
            }
            let Some(field) = fields.get(synth.record_id.as_str()) else {
                continue;
            };
            let entry = self.same_domain.entry(field.to_string()).or_default();
            for sentence in split_sentences(&synth.text) {
                entry.push(PoolSentence::from_record(sentence, synth.record_id.clone()));
            }
        }
    }
}

/// Deterministic perturbation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub seed: u64,
    pub connectors: Vec<String>,
    pub redundancy_template: String,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            seed: 0,
            connectors: DEFAULT_CONNECTORS.iter().map(|s| s.to_string()).collect(),
            redundancy_template: format!("In other words, {TEMPLATE_SLOT}"),
        }
    }
}

impl PerturbationConfig {
    pub fn with_seed(seed: u64) -> Self {
        PerturbationConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.connectors.is_empty() {
            return Err("connector list is empty".to_string());
        }
        let slots = self.redundancy_template.matches(TEMPLATE_SLOT).count();
        if slots != 1 {
            return Err(format!(
                "redundancy template must contain exactly one {TEMPLATE_SLOT} slot (found {slots})"
            ));
        }
        Ok(())
    }
}

/// The outcome of one perturbation: the edited text plus a human-readable
/// trail of the edits applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedText {
    pub text: String,
    pub rubric: RubricId,
    pub level: Level,
    pub applied_edits: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("infeasible perturbation for {rubric}/{level}: {reason}")]
    Infeasible {
        rubric: RubricId,
        level: Level,
        reason: String,
    },
    #[error("required pool is missing or empty: {pool}")]
    EmptyPool { pool: String },
}

/// Split text into sentences.
///
/// A boundary is a run of `.`, `?` or `!` followed by whitespace and an
/// uppercase letter or digit, unless the word ending at the run is a known
/// abbreviation ("e.g.", "i.e.", "et al.", "Fig.", "Dr.", "vs.", "cf.").
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if matches!(chars[i], '.' | '?' | '!') {
            let mut end = i;
            while end + 1 < chars.len() && matches!(chars[end + 1], '.' | '?' | '!') {
                end += 1;
            }
            let mut j = end + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            let has_gap = j > end + 1;
            let next_starts_sentence =
                j < chars.len() && (chars[j].is_uppercase() || chars[j].is_ascii_digit());
            if has_gap && next_starts_sentence && !ends_with_abbreviation(&chars, end) {
                let sentence: String = chars[start..=end].iter().collect();
                let sentence = sentence.trim().to_string();
                if !sentence.is_empty() {
                    sentences.push(sentence);
                }
                start = j;
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    let tail: String = chars[start.min(chars.len())..].iter().collect();
    let tail = tail.trim().to_string();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

// The word ending at `end` (inclusive, pointing at terminal punctuation),
// compared case-insensitively against the abbreviation list.
fn ends_with_abbreviation(chars: &[char], end: usize) -> bool {
    let mut word_start = end;
    while word_start > 0 && !chars[word_start - 1].is_whitespace() {
        word_start -= 1;
    }
    let word: String = chars[word_start..=end].iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn ensure_terminal(sentence: &str) -> String {
    let s = sentence.trim_end();
    if s.ends_with(['.', '?', '!']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

fn lowercase_first(sentence: &str) -> String {
    let mut chars = sentence.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn render_redundant(template: &str, sentence: &str) -> String {
    ensure_terminal(&template.replace(TEMPLATE_SLOT, &lowercase_first(sentence)))
}

fn cell_rng(cfg: &PerturbationConfig, exclude_record: &str, rubric: RubricId, level: Level) -> ChaCha8Rng {
    let seed = hash::seed_for(
        cfg.seed,
        &[exclude_record, rubric.name(), &level.to_string()],
    );
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick_from_pool<'a>(
    pool: &'a [PoolSentence],
    pool_name: &str,
    exclude_record: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(&'a PoolSentence, usize), PerturbError> {
    let eligible: Vec<(usize, &PoolSentence)> = pool
        .iter()
        .enumerate()
        .filter(|(_, s)| s.source_record.as_deref() != Some(exclude_record))
        .collect();
    if eligible.is_empty() {
        return Err(PerturbError::EmptyPool {
            pool: pool_name.to_string(),
        });
    }
    let (index, sentence) = eligible[rng.random_range(0..eligible.len())];
    Ok((sentence, index))
}

/// Byte range of one connector occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConnectorHit {
    start: usize,
    end: usize,
}

// Whole-word, case-insensitive occurrences of any connector phrase, left to
// right, non-overlapping. At equal starts the longest phrase wins.
fn find_connectors(text: &str, connectors: &[String]) -> Vec<ConnectorHit> {
    let bytes = text.as_bytes();
    let mut hits = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        if !text.is_char_boundary(pos) {
            pos += 1;
            continue;
        }
        let at_word_start = pos == 0
            || text[..pos]
                .chars()
                .next_back()
                .map(|c| !c.is_alphanumeric())
                .unwrap_or(true);
        if at_word_start {
            let mut best: Option<usize> = None;
            for connector in connectors {
                let len = connector.len();
                if pos + len > bytes.len() {
                    continue;
                }
                if !text.is_char_boundary(pos + len) {
                    continue;
                }
                if !text[pos..pos + len].eq_ignore_ascii_case(connector) {
                    continue;
                }
                let boundary_after = text[pos + len..]
                    .chars()
                    .next()
                    .map(|c| !c.is_alphanumeric())
                    .unwrap_or(true);
                if boundary_after && best.is_none_or(|b| len > b) {
                    best = Some(len);
                }
            }
            if let Some(len) = best {
                hits.push(ConnectorHit {
                    start: pos,
                    end: pos + len,
                });
                pos += len;
                continue;
            }
        }
        pos += 1;
    }
    hits
}

// Remove the given connector occurrences. A comma directly after a connector
// goes with it, and when the deletion site is a sentence start the next word
// is capitalized.
fn delete_connectors(text: &str, hits: &[ConnectorHit]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0usize;
    for hit in hits {
        out.push_str(&text[cursor..hit.start]);
        let mut rest = &text[hit.end..];
        if let Some(stripped) = rest.strip_prefix(',') {
            rest = stripped;
        }
        let trimmed = rest.trim_start();
        let skipped_ws = rest.len() - trimmed.len();
        cursor = text.len() - rest.len() + skipped_ws;

        let at_sentence_start = {
            let before = out.trim_end();
            before.is_empty() || before.ends_with(['.', '?', '!'])
        };
        if at_sentence_start {
            // Capitalize the first alphabetic char of what follows.
            let mut chars = text[cursor..].chars();
            if let Some(c) = chars.next() {
                if c.is_alphabetic() && c.is_lowercase() {
                    out.extend(c.to_uppercase());
                    cursor += c.len_utf8();
                }
            }
        }
    }
    out.push_str(&text[cursor..]);
    out
}

/// Apply the heuristic for one (rubric, level) cell to a benign text.
///
/// `field` selects the same-domain pool and `exclude_record` both keys the
/// deterministic RNG and prevents a record's own sentences from being
/// injected back into it.
pub fn perturb(
    text: &str,
    rubric: RubricId,
    level: Level,
    pools: &InjectionPools,
    cfg: &PerturbationConfig,
    field: &str,
    exclude_record: &str,
) -> Result<PerturbedText, PerturbError> {
    let infeasible = |reason: &str| PerturbError::Infeasible {
        rubric,
        level,
        reason: reason.to_string(),
    };
    let mut rng = cell_rng(cfg, exclude_record, rubric, level);
    let mut edits = Vec::new();

    let append_from = |pool: &[PoolSentence],
                       pool_name: &str,
                       base: &str,
                       rng: &mut ChaCha8Rng,
                       edits: &mut Vec<String>|
     -> Result<String, PerturbError> {
        let (sentence, index) = pick_from_pool(pool, pool_name, exclude_record, rng)?;
        edits.push(format!("appended {pool_name} sentence #{index}"));
        Ok(format!("{base} {}", ensure_terminal(&sentence.text)))
    };

    let text_out = match (rubric, level) {
        (
            RubricId::Relevancy | RubricId::Correctness | RubricId::Informativeness | RubricId::Coherence,
            Level::Subtle,
        ) => {
            let pool = pools.same_domain.get(field).map(Vec::as_slice).unwrap_or(&[]);
            append_from(pool, &format!("same_domain[{field}]"), text, &mut rng, &mut edits)?
        }
        (
            RubricId::Relevancy | RubricId::Correctness | RubricId::Informativeness | RubricId::Coherence,
            Level::Extreme,
        ) => append_from(&pools.sports_news, "sports_news", text, &mut rng, &mut edits)?,

        (RubricId::Completeness, lvl) => {
            let sentences = split_sentences(text);
            if sentences.len() < 2 {
                return Err(infeasible("needs at least 2 sentences to drop the last one"));
            }
            let truncated = sentences[..sentences.len() - 1].join(" ");
            edits.push("removed last sentence".to_string());
            match lvl {
                Level::Subtle => truncated,
                Level::Extreme => {
                    append_from(&pools.sports_news, "sports_news", &truncated, &mut rng, &mut edits)?
                }
            }
        }

        (RubricId::Integration, lvl) => {
            let hits = find_connectors(text, &cfg.connectors);
            if hits.is_empty() {
                return Err(infeasible("no logical connector present"));
            }
            let selected: &[ConnectorHit] = match lvl {
                Level::Subtle => &hits[..1],
                Level::Extreme => &hits,
            };
            for hit in selected {
                edits.push(format!("removed connector {:?}", &text[hit.start..hit.end]));
            }
            delete_connectors(text, selected)
        }

        (RubricId::Cohesion, Level::Subtle) => {
            let mut sentences = split_sentences(text);
            let n = sentences.len();
            if n < 2 {
                return Err(infeasible("needs at least 2 sentences to swap"));
            }
            sentences.swap(n - 2, n - 1);
            edits.push("swapped last two sentences".to_string());
            sentences.join(" ")
        }
        (RubricId::Cohesion, Level::Extreme) => {
            let sentences = split_sentences(text);
            let n = sentences.len();
            if n < 2 {
                return Err(infeasible("needs at least 2 sentences to shuffle"));
            }
            let identity: Vec<usize> = (0..n).collect();
            let mut order = identity.clone();
            while order == identity {
                order.shuffle(&mut rng);
            }
            edits.push(format!("shuffled sentences into order {order:?}"));
            order
                .iter()
                .map(|&i| sentences[i].clone())
                .collect::<Vec<_>>()
                .join(" ")
        }

        (RubricId::Readability, Level::Subtle) => {
            append_from(&pools.blog_snippets, "blog_snippets", text, &mut rng, &mut edits)?
        }
        (RubricId::Readability, Level::Extreme) => {
            append_from(&pools.tweets, "tweets", text, &mut rng, &mut edits)?
        }

        (RubricId::Conciseness, Level::Subtle) => {
            let sentences = split_sentences(text);
            let Some(last) = sentences.last() else {
                return Err(infeasible("text has no sentences"));
            };
            edits.push("appended redundant version of last sentence".to_string());
            format!("{text} {}", render_redundant(&cfg.redundancy_template, last))
        }
        (RubricId::Conciseness, Level::Extreme) => {
            let sentences = split_sentences(text);
            if sentences.is_empty() {
                return Err(infeasible("text has no sentences"));
            }
            edits.push("interleaved a redundant version after every sentence".to_string());
            let mut parts = Vec::with_capacity(sentences.len() * 2);
            for sentence in &sentences {
                parts.push(ensure_terminal(sentence));
                parts.push(render_redundant(&cfg.redundancy_template, sentence));
            }
            parts.join(" ")
        }
    };

    if text_out == text {
        return Err(infeasible("perturbation left the text unchanged"));
    }

    Ok(PerturbedText {
        text: text_out,
        rubric,
        level,
        applied_edits: edits,
    })
}

/// One cell of the 9-rubric x 2-level grid produced by [`perturb_all`].
#[derive(Debug)]
pub struct PerturbCell {
    pub rubric: RubricId,
    pub level: Level,
    pub outcome: Result<PerturbedText, PerturbError>,
}

/// Produce all 18 (rubric, level) perturbations of a benign synthesis.
/// Infeasible cells are reported in place, never dropped.
pub fn perturb_all(
    synth: &SynthesisVariant,
    field: &str,
    pools: &InjectionPools,
    cfg: &PerturbationConfig,
) -> Vec<PerturbCell> {
    let mut cells = Vec::with_capacity(18);
    for rubric in RubricId::ALL {
        for level in [Level::Subtle, Level::Extreme] {
            let outcome = perturb(
                &synth.text,
                rubric,
                level,
                pools,
                cfg,
                field,
                &synth.record_id,
            );
            cells.push(PerturbCell {
                rubric,
                level,
                outcome,
            });
        }
    }
    cells
}

/// Convert the feasible cells of a grid into synthesis rows carrying the
/// seed they were generated with.
pub fn cells_to_syntheses(
    synth: &SynthesisVariant,
    cells: &[PerturbCell],
    seed: u64,
) -> Vec<SynthesisVariant> {
    cells
        .iter()
        .filter_map(|cell| {
            cell.outcome.as_ref().ok().map(|p| SynthesisVariant {
                record_id: synth.record_id.clone(),
                generator_model: synth.generator_model.clone(),
                variant: Variant::Perturbed {
                    rubric: p.rubric,
                    level: p.level,
                },
                text: p.text.clone(),
                perturbation_seed: Some(seed),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pools_with(field: &str) -> InjectionPools {
        let mut pools = InjectionPools::default();
        pools.same_domain.insert(
            field.to_string(),
            vec![
                PoolSentence::from_record("Other work in this field reports gains.", "other-1"),
                PoolSentence::from_record("A related synthesis found similar trends.", "other-2"),
            ],
        );
        pools.sports_news = vec![PoolSentence::new("The home team won the final 3-1.")];
        pools.blog_snippets = vec![PoolSentence::new("Honestly this stuff blows my mind every time.")];
        pools.tweets = vec![PoolSentence::new("#science is wild lol")];
        pools
    }

    #[test]
    fn splits_simple_sentences() {
        assert_eq!(split_sentences("A works. B fails."), vec!["A works.", "B fails."]);
    }

    #[test]
    fn empty_text_has_no_sentences() {
        assert_eq!(split_sentences(""), Vec::<String>::new());
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(split_sentences("Dr. Smith arrived. He left.").len(), 2);
        assert_eq!(split_sentences("See Fig. 3 for details. It shows the trend.").len(), 2);
        assert_eq!(
            split_sentences("Results improved, e.g. In some runs. Then they dropped.").len(),
            2
        );
        assert_eq!(split_sentences("As shown by Smith et al. And others. Done.").len(), 2);
    }

    #[test]
    fn question_and_exclamation_are_boundaries() {
        assert_eq!(split_sentences("Does it work? It does! Great.").len(), 3);
    }

    #[test]
    fn decimal_numbers_do_not_split() {
        assert_eq!(split_sentences("The rate rose 3.5 percent. It fell later.").len(), 2);
    }

    #[test]
    fn joining_preserves_token_sequence() {
        let text = "First result.  Second   result.\nThird one.";
        let joined = split_sentences(text).join(" ");
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(norm(&joined), norm(text));
    }

    #[test]
    fn cohesion_subtle_swaps_last_two() {
        let out = perturb(
            "S1. S2. S3.",
            RubricId::Cohesion,
            Level::Subtle,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(out.text, "S1. S3. S2.");
    }

    #[test]
    fn completeness_subtle_drops_last_sentence() {
        let out = perturb(
            "S1. S2.",
            RubricId::Completeness,
            Level::Subtle,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(out.text, "S1.");
    }

    #[test]
    fn integration_subtle_removes_first_connector() {
        let out = perturb(
            "X holds. However, Y fails.",
            RubricId::Integration,
            Level::Subtle,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(out.text, "X holds. Y fails.");
    }

    #[test]
    fn integration_extreme_removes_all_connectors() {
        let out = perturb(
            "However, X holds. Moreover, Y fails. Thus Z follows.",
            RubricId::Integration,
            Level::Extreme,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(out.text, "X holds. Y fails. Z follows.");
    }

    #[test]
    fn integration_capitalizes_after_sentence_start_deletion() {
        let out = perturb(
            "X holds. However, the rest fails.",
            RubricId::Integration,
            Level::Subtle,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(out.text, "X holds. The rest fails.");
    }

    #[test]
    fn integration_without_connector_is_infeasible() {
        let err = perturb(
            "X holds. Y fails.",
            RubricId::Integration,
            Level::Subtle,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap_err();
        assert!(matches!(err, PerturbError::Infeasible { .. }));
    }

    #[test]
    fn connector_match_is_whole_word_only() {
        // "thusly" must not match "thus".
        let hits = find_connectors(
            "Thusly it went on.",
            &PerturbationConfig::default().connectors,
        );
        assert!(hits.is_empty());
    }

    #[test]
    fn relevancy_extreme_appends_sports_sentence() {
        let text = "The model works well.";
        let pools = pools_with("CS");
        let out = perturb(
            text,
            RubricId::Relevancy,
            Level::Extreme,
            &pools,
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(out.text, format!("{text} The home team won the final 3-1."));
        assert!(out.text.starts_with(text));
    }

    #[test]
    fn same_domain_pick_excludes_own_record() {
        let mut pools = InjectionPools::default();
        pools.same_domain.insert(
            "CS".to_string(),
            vec![
                PoolSentence::from_record("From the same record.", "r1"),
                PoolSentence::from_record("From another record.", "r2"),
            ],
        );
        for seed in 0..20 {
            let out = perturb(
                "Base text.",
                RubricId::Relevancy,
                Level::Subtle,
                &pools,
                &PerturbationConfig::with_seed(seed),
                "CS",
                "r1",
            )
            .unwrap();
            assert!(out.text.contains("From another record."));
        }
    }

    #[test]
    fn exhausted_same_domain_pool_is_empty_pool_error() {
        let mut pools = InjectionPools::default();
        pools.same_domain.insert(
            "CS".to_string(),
            vec![PoolSentence::from_record("Own sentence.", "r1")],
        );
        let err = perturb(
            "Base text.",
            RubricId::Coherence,
            Level::Subtle,
            &pools,
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap_err();
        assert!(matches!(err, PerturbError::EmptyPool { .. }));
    }

    #[test]
    fn conciseness_extreme_doubles_sentence_count() {
        let text = "First finding. Second finding. Third finding.";
        let out = perturb(
            text,
            RubricId::Conciseness,
            Level::Extreme,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(split_sentences(&out.text).len(), 6);
    }

    #[test]
    fn conciseness_subtle_appends_template() {
        let out = perturb(
            "The method scales. It also converges.",
            RubricId::Conciseness,
            Level::Subtle,
            &pools_with("CS"),
            &PerturbationConfig::default(),
            "CS",
            "r1",
        )
        .unwrap();
        assert_eq!(
            out.text,
            "The method scales. It also converges. In other words, it also converges."
        );
    }

    #[test]
    fn cohesion_extreme_shuffle_is_never_identity() {
        let text = "S1. S2. S3. S4.";
        let original = split_sentences(text);
        for seed in 0..50 {
            let out = perturb(
                text,
                RubricId::Cohesion,
                Level::Extreme,
                &pools_with("CS"),
                &PerturbationConfig::with_seed(seed),
                "CS",
                "r1",
            )
            .unwrap();
            let shuffled = split_sentences(&out.text);
            assert_ne!(shuffled, original, "seed {seed}");
            let mut a = shuffled.clone();
            let mut b = original.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b, "multiset preserved, seed {seed}");
        }
    }

    #[test]
    fn single_sentence_marks_structural_cells_infeasible() {
        let synth = SynthesisVariant {
            record_id: "r1".into(),
            generator_model: "m".into(),
            variant: Variant::Benign,
            text: "Only one sentence here.".into(),
            perturbation_seed: None,
        };
        let cells = perturb_all(&synth, "CS", &pools_with("CS"), &PerturbationConfig::default());
        assert_eq!(cells.len(), 18);
        for cell in &cells {
            let structural = matches!(cell.rubric, RubricId::Cohesion | RubricId::Completeness);
            if structural {
                assert!(cell.outcome.is_err(), "{}/{}", cell.rubric, cell.level);
            }
        }
    }

    #[test]
    fn full_grid_is_feasible_on_multi_sentence_text() {
        let synth = SynthesisVariant {
            record_id: "r1".into(),
            generator_model: "m".into(),
            variant: Variant::Benign,
            text: "A starts. However, B continues. C follows. D ends. E wraps up.".into(),
            perturbation_seed: None,
        };
        let cells = perturb_all(&synth, "CS", &pools_with("CS"), &PerturbationConfig::default());
        assert_eq!(cells.iter().filter(|c| c.outcome.is_ok()).count(), 18);
    }

    #[test]
    fn same_seed_gives_identical_outputs() {
        let synth = SynthesisVariant {
            record_id: "r1".into(),
            generator_model: "m".into(),
            variant: Variant::Benign,
            text: "A starts. However, B continues. C follows. D ends.".into(),
            perturbation_seed: None,
        };
        let pools = pools_with("CS");
        let cfg = PerturbationConfig::with_seed(42);
        let run = |_: ()| -> Vec<String> {
            perturb_all(&synth, "CS", &pools, &cfg)
                .into_iter()
                .map(|c| match c.outcome {
                    Ok(p) => p.text,
                    Err(e) => format!("skipped: {e}"),
                })
                .collect()
        };
        assert_eq!(run(()), run(()));
    }

    #[test]
    fn pools_file_round_trip_accepts_both_entry_forms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pools.json");
        std::fs::write(
            &path,
            r#"{
                "same_domain": {"CS": ["Plain sentence.", {"text": "Tagged sentence.", "record_id": "r9"}]},
                "sports_news": ["  The striker scored twice.  "],
                "blog_snippets": ["So I tried this at home."],
                "tweets": ["big if true"]
            }"#,
        )
        .unwrap();
        let pools = InjectionPools::load(&path).unwrap();
        assert_eq!(pools.same_domain["CS"][1].source_record.as_deref(), Some("r9"));
        // Trimmed on load.
        assert_eq!(pools.sports_news[0].text, "The striker scored twice.");
    }

    #[test]
    fn empty_pool_sentence_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pools.json");
        std::fs::write(&path, r#"{"sports_news": ["  "]}"#).unwrap();
        assert!(matches!(
            InjectionPools::load(&path).unwrap_err(),
            PoolsError::EmptySentence { .. }
        ));
    }

    #[test]
    fn config_validation_catches_bad_template() {
        let mut cfg = PerturbationConfig::default();
        cfg.redundancy_template = "no slot here".to_string();
        assert!(cfg.validate().is_err());
        cfg.redundancy_template = "{sentence} and {sentence}".to_string();
        assert!(cfg.validate().is_err());
    }
}
