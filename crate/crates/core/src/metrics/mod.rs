//! Reference-free similarity metrics over token sequences, and the pairwise
//! generator-vs-generator matrices built from them.
//!
//! Shared tokenization for the text-level entry points: lowercase, then split
//! on whitespace with punctuation runs separated into their own tokens. The
//! token-level functions are generic so tests can drive them with arbitrary
//! symbols.

pub mod stem;

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use stem::porter_stem;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("empty reference sequence")]
    EmptyReference,
}

/// Lowercase and split into word and punctuation tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        let mut current_kind: Option<bool> = None;
        for c in word.chars() {
            let is_word = c.is_alphanumeric();
            if current_kind != Some(is_word) && !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            current_kind = Some(is_word);
            current.extend(c.to_lowercase());
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    counts
}

fn clipped_overlap<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refr = ngram_counts(reference, n);
    let total: usize = cand.values().sum();
    let matched: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refr.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

/// Geometric mean of clipped n-gram precisions up to `max_n`, times the
/// brevity penalty.
///
/// Without smoothing any zero n-gram precision collapses the score to 0; in
/// particular every candidate shorter than `max_n` tokens scores 0. With
/// smoothing, add-one is applied to orders n >= 2, so any nonempty unigram
/// overlap yields a positive score.
pub fn bleu<T: Eq + Hash>(
    candidate: &[T],
    reference: &[T],
    max_n: usize,
    smoothing: bool,
) -> Result<f64, MetricError> {
    assert!(max_n >= 1, "max_n must be >= 1");
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (matched, total) = clipped_overlap(candidate, reference, n);
        let precision = if smoothing && n >= 2 {
            (matched + 1) as f64 / (total + 1) as f64
        } else if total == 0 || matched == 0 {
            return Ok(0.0);
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln() / max_n as f64;
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(brevity * log_sum.exp())
}

/// Precision, recall, and balanced F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn prf(matched: usize, cand_total: usize, ref_total: usize) -> PrecisionRecallF1 {
    let precision = if cand_total > 0 {
        matched as f64 / cand_total as f64
    } else {
        0.0
    };
    let recall = if ref_total > 0 {
        matched as f64 / ref_total as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    PrecisionRecallF1 {
        precision,
        recall,
        f1,
    }
}

/// Clipped n-gram overlap scored as precision/recall/F1.
pub fn rouge_n<T: Eq + Hash>(
    candidate: &[T],
    reference: &[T],
    n: usize,
) -> Result<PrecisionRecallF1, MetricError> {
    assert!(n >= 1, "n must be >= 1");
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let (matched, cand_total) = clipped_overlap(candidate, reference, n);
    let ref_total = reference.len().saturating_sub(n - 1);
    Ok(prf(matched, cand_total, ref_total))
}

fn lcs_length<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            curr[j] = if a[i - 1] == b[j - 1] {
                prev[j - 1] + 1
            } else {
                prev[j].max(curr[j - 1])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Longest-common-subsequence precision/recall/F1 over tokens.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> Result<PrecisionRecallF1, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let lcs = lcs_length(candidate, reference);
    Ok(prf(lcs, candidate.len(), reference.len()))
}

/// Information-weighted n-gram precision with the standard brevity factor.
///
/// Information weights come from the reference in scope: an n-gram's weight
/// is log2(count of its (n-1)-prefix / its own count), with unigrams weighted
/// against the reference length.
pub fn nist<T: Eq + Hash>(
    candidate: &[T],
    reference: &[T],
    max_n: usize,
) -> Result<f64, MetricError> {
    assert!(max_n >= 1, "max_n must be >= 1");
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let ref_counts: Vec<HashMap<&[T], usize>> =
        (0..=max_n).map(|n| ngram_counts(reference, n)).collect();

    let info = |gram: &[T]| -> f64 {
        let n = gram.len();
        let denom = ref_counts[n].get(gram).copied().unwrap_or(0);
        if denom == 0 {
            return 0.0;
        }
        let numer = if n == 1 {
            reference.len()
        } else {
            ref_counts[n - 1].get(&gram[..n - 1]).copied().unwrap_or(0)
        };
        if numer == 0 {
            return 0.0;
        }
        (numer as f64 / denom as f64).log2()
    };

    let mut score = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(candidate, n);
        let total: usize = cand_counts.values().sum();
        if total == 0 {
            continue;
        }
        let weighted: f64 = cand_counts
            .iter()
            .map(|(gram, &c)| {
                let matched = c.min(ref_counts[n].get(*gram).copied().unwrap_or(0));
                matched as f64 * info(gram)
            })
            .sum();
        score += weighted / total as f64;
    }

    let ratio = candidate.len() as f64 / reference.len() as f64;
    let brevity = if ratio >= 1.0 {
        1.0
    } else {
        let beta = 0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2);
        (beta * ratio.ln().powi(2)).exp()
    };
    Ok(score * brevity)
}

/// Minimum word-level edit count (unit-cost substitutions, insertions,
/// deletions) divided by the reference length.
pub fn wer<T: Eq>(candidate: &[T], reference: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let edits = edit_distance(candidate, reference);
    Ok(edits as f64 / reference.len() as f64)
}

fn edit_distance<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        curr[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            curr[j] = sub.min(prev[j] + 1).min(curr[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

// One aligned unigram pair: candidate position -> reference position.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AlignedPair {
    cand: usize,
    refr: usize,
}

// Two-stage greedy alignment: exact matches first, then stem matches over
// the leftovers. Each candidate token takes the earliest unused compatible
// reference position, scanning candidates left to right.
fn align_unigrams<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Vec<AlignedPair> {
    let mut pairs: Vec<AlignedPair> = Vec::new();
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];

    for (ci, token) in candidate.iter().enumerate() {
        if let Some(ri) = (0..reference.len())
            .find(|&ri| !ref_used[ri] && reference[ri].as_ref() == token.as_ref())
        {
            cand_used[ci] = true;
            ref_used[ri] = true;
            pairs.push(AlignedPair { cand: ci, refr: ri });
        }
    }

    let cand_stems: Vec<String> = candidate.iter().map(|t| porter_stem(t.as_ref())).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| porter_stem(t.as_ref())).collect();
    for ci in 0..candidate.len() {
        if cand_used[ci] {
            continue;
        }
        if let Some(ri) =
            (0..reference.len()).find(|&ri| !ref_used[ri] && ref_stems[ri] == cand_stems[ci])
        {
            cand_used[ci] = true;
            ref_used[ri] = true;
            pairs.push(AlignedPair { cand: ci, refr: ri });
        }
    }

    pairs.sort_by_key(|p| p.cand);
    pairs
}

fn chunk_count(pairs: &[AlignedPair]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    let mut chunks = 1;
    for w in pairs.windows(2) {
        if w[1].cand != w[0].cand + 1 || w[1].refr != w[0].refr + 1 {
            chunks += 1;
        }
    }
    chunks
}

/// Unigram-alignment score: exact then stem matching, recall-weighted
/// harmonic mean (9:1), and the standard fragmentation penalty
/// `0.5 * (chunks / matches)^3`.
///
/// The synonym and paraphrase stages of the full metric are omitted; exact
/// and stem matching only.
pub fn meteor_lite<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Result<f64, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let pairs = align_unigrams(candidate, reference);
    let m = pairs.len() as f64;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let chunks = chunk_count(&pairs) as f64;
    let penalty = 0.5 * (chunks / m).powi(3);
    Ok(fmean * (1.0 - penalty))
}

/// Which metric to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Bleu,
    Rouge1,
    RougeL,
    MeteorLite,
    Nist,
    Wer,
}

impl MetricName {
    pub const ALL: [MetricName; 6] = [
        MetricName::Bleu,
        MetricName::Rouge1,
        MetricName::RougeL,
        MetricName::MeteorLite,
        MetricName::Nist,
        MetricName::Wer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::Bleu => "bleu",
            MetricName::Rouge1 => "rouge1",
            MetricName::RougeL => "rougel",
            MetricName::MeteorLite => "meteor_lite",
            MetricName::Nist => "nist",
            MetricName::Wer => "wer",
        }
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bleu" => Ok(MetricName::Bleu),
            "rouge1" | "rouge_1" => Ok(MetricName::Rouge1),
            "rougel" | "rouge_l" => Ok(MetricName::RougeL),
            "meteor" | "meteor_lite" => Ok(MetricName::MeteorLite),
            "nist" => Ok(MetricName::Nist),
            "wer" => Ok(MetricName::Wer),
            other => Err(format!("unknown metric: {other}")),
        }
    }
}

/// Knobs shared by the scoring entry points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricOptions {
    pub bleu_max_n: usize,
    pub bleu_smoothing: bool,
    pub nist_max_n: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            bleu_max_n: 4,
            bleu_smoothing: false,
            nist_max_n: 5,
        }
    }
}

/// Score one candidate/reference token pair with the named metric, reducing
/// precision/recall metrics to their F1.
pub fn score_tokens<T: Eq + Hash + AsRef<str>>(
    metric: MetricName,
    candidate: &[T],
    reference: &[T],
    options: &MetricOptions,
) -> Result<f64, MetricError> {
    match metric {
        MetricName::Bleu => bleu(candidate, reference, options.bleu_max_n, options.bleu_smoothing),
        MetricName::Rouge1 => rouge_n(candidate, reference, 1).map(|p| p.f1),
        MetricName::RougeL => rouge_l(candidate, reference).map(|p| p.f1),
        MetricName::MeteorLite => meteor_lite(candidate, reference),
        MetricName::Nist => nist(candidate, reference, options.nist_max_n),
        MetricName::Wer => wer(candidate, reference),
    }
}

/// Tokenize two texts and score them.
pub fn score_texts(
    metric: MetricName,
    candidate: &str,
    reference: &str,
    options: &MetricOptions,
) -> Result<f64, MetricError> {
    score_tokens(metric, &tokenize(candidate), &tokenize(reference), options)
}

/// Mean pairwise similarity between every (reference model, candidate model)
/// pair, including the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_name: String,
    /// Reference models, one per row.
    pub row_labels: Vec<String>,
    /// Candidate models, one per column.
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    /// Shared-record count behind each cell.
    pub support: Vec<Vec<usize>>,
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("reference");
        for col in &self.col_labels {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for (r, row) in self.row_labels.iter().enumerate() {
            out.push_str(row);
            for c in 0..self.col_labels.len() {
                out.push_str(&format!(",{}", self.cells[r][c]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.row_labels.iter().map(String::len).max().unwrap_or(0).max(9) + 2;
        let col_width = self.col_labels.iter().map(String::len).max().unwrap_or(0).max(8) + 2;
        let mut out = format!("{:width$}", "reference");
        for col in &self.col_labels {
            out.push_str(&format!("{col:>col_width$}"));
        }
        out.push('\n');
        for (r, row) in self.row_labels.iter().enumerate() {
            out.push_str(&format!("{row:width$}"));
            for c in 0..self.col_labels.len() {
                out.push_str(&format!("{:>col_width$.4}", self.cells[r][c]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("need at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("models {reference} and {candidate} share no records")]
    NoSharedRecords { reference: String, candidate: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Compute the full pairwise matrix from per-model outputs keyed by record.
pub fn pairwise_matrix(
    outputs: &BTreeMap<String, BTreeMap<String, String>>,
    metric: MetricName,
    options: &MetricOptions,
) -> Result<MetricReport, MatrixError> {
    if outputs.len() < 2 {
        return Err(MatrixError::TooFewModels(outputs.len()));
    }
    let models: Vec<&String> = outputs.keys().collect();
    let tokenized: BTreeMap<&String, BTreeMap<&String, Vec<String>>> = outputs
        .iter()
        .map(|(model, records)| {
            (
                model,
                records.iter().map(|(id, text)| (id, tokenize(text))).collect(),
            )
        })
        .collect();

    let mut cells = vec![vec![0.0; models.len()]; models.len()];
    let mut support = vec![vec![0usize; models.len()]; models.len()];
    for (r, reference_model) in models.iter().enumerate() {
        for (c, candidate_model) in models.iter().enumerate() {
            let ref_records = &tokenized[*reference_model];
            let cand_records = &tokenized[*candidate_model];
            let shared: Vec<&String> = ref_records
                .keys()
                .filter(|id| cand_records.contains_key(*id))
                .copied()
                .collect();
            if shared.is_empty() {
                return Err(MatrixError::NoSharedRecords {
                    reference: (*reference_model).clone(),
                    candidate: (*candidate_model).clone(),
                });
            }
            let mut sum = 0.0;
            for id in &shared {
                sum += score_tokens(metric, &cand_records[*id], &ref_records[*id], options)?;
            }
            cells[r][c] = sum / shared.len() as f64;
            support[r][c] = shared.len();
        }
    }

    Ok(MetricReport {
        metric_name: metric.to_string(),
        row_labels: models.iter().map(|m| (*m).clone()).collect(),
        col_labels: models.iter().map(|m| (*m).clone()).collect(),
        cells,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_lowercases_and_separates_punctuation() {
        assert_eq!(toks("The cat, sat."), vec!["the", "cat", ",", "sat", "."]);
        assert_eq!(toks("  spaced   out  "), vec!["spaced", "out"]);
        assert_eq!(toks("e.g. X-ray"), vec!["e", ".", "g", ".", "x", "-", "ray"]);
        assert!(toks("").is_empty());
    }

    #[test]
    fn bleu_identity_is_one() {
        let t: Vec<String> = (0..10).map(|i| format!("tok{i}")).collect();
        assert_eq!(bleu(&t, &t, 4, false).unwrap(), 1.0);
    }

    #[test]
    fn bleu_short_candidate_collapses_to_zero_without_smoothing() {
        let candidate = toks("the cat sat");
        let reference = toks("the cat sat on the mat");
        assert_eq!(bleu(&candidate, &reference, 4, false).unwrap(), 0.0);
    }

    #[test]
    fn bleu_short_candidate_with_smoothing_is_positive() {
        let candidate = toks("the cat sat");
        let reference = toks("the cat sat on the mat");
        let score = bleu(&candidate, &reference, 4, true).unwrap();
        // All clipped precisions are 1 after add-one smoothing; only the
        // brevity penalty remains: exp(1 - 6/3).
        assert!((score - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bleu_empty_inputs_error() {
        let empty: Vec<String> = vec![];
        let t = toks("a b");
        assert_eq!(bleu(&empty, &t, 4, false).unwrap_err(), MetricError::EmptyInput);
        assert_eq!(bleu(&t, &empty, 4, false).unwrap_err(), MetricError::EmptyInput);
    }

    #[test]
    fn rouge1_hand_case() {
        let candidate = toks("a b x");
        let reference = toks("a b c d");
        let r = rouge_n(&candidate, &reference, 1).unwrap();
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        let t = toks("alpha beta gamma");
        assert_eq!(rouge_n(&t, &t, 1).unwrap().f1, 1.0);
        assert_eq!(rouge_l(&t, &t).unwrap().f1, 1.0);
        let other = toks("delta epsilon");
        assert_eq!(rouge_n(&t, &other, 1).unwrap().f1, 0.0);
    }

    #[test]
    fn rouge_precision_recall_swap_under_argument_exchange() {
        let a = toks("a b c");
        let b = toks("a b c d e");
        let fwd = rouge_n(&a, &b, 1).unwrap();
        let rev = rouge_n(&b, &a, 1).unwrap();
        assert!((fwd.precision - rev.recall).abs() < 1e-12);
        assert!((fwd.recall - rev.precision).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_lcs_hand_case() {
        let candidate = toks("a c b");
        let reference = toks("a b c");
        let r = rouge_l(&candidate, &reference).unwrap();
        // LCS length 2 out of 3 tokens each side.
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wer_hand_case_is_exactly_two_fifths() {
        let candidate = toks("the cat mat");
        let reference = toks("the cat sat on mat");
        assert_eq!(wer(&candidate, &reference).unwrap(), 0.4);
    }

    #[test]
    fn wer_identity_empty_candidate_and_empty_reference() {
        let t = toks("a b c d e");
        assert_eq!(wer(&t, &t).unwrap(), 0.0);
        let empty: Vec<String> = vec![];
        assert_eq!(wer(&empty, &t).unwrap(), 1.0);
        assert_eq!(wer(&t, &empty).unwrap_err(), MetricError::EmptyReference);
    }

    #[test]
    fn wer_times_reference_length_is_integral() {
        let candidate = toks("x the cat");
        let reference = toks("the cat sat");
        let w = wer(&candidate, &reference).unwrap();
        let edits = w * 3.0;
        assert!((edits - edits.round()).abs() < 1e-12);
    }

    #[test]
    fn nist_self_match_is_positive_and_disjoint_is_zero() {
        let t = toks("alpha beta gamma delta");
        let score = nist(&t, &t, 5).unwrap();
        // Distinct unigrams: each carries log2(4) = 2 bits; higher orders
        // carry zero information on a single self-matched sentence.
        assert!((score - 2.0).abs() < 1e-12);
        let other = toks("zeta eta");
        assert_eq!(nist(&t, &other, 5).unwrap(), 0.0);
    }

    #[test]
    fn nist_two_sentence_fixture_matches_hand_computation() {
        // Reference: "the cat sat . the dog ran ." -- "the" and "."
        // each occur twice in eight tokens (info log2(8/2) = 2), the rest
        // once (log2(8) = 3). Candidate "the cat ran ." matches all four
        // unigrams: (2 + 3 + 3 + 2) / 4 = 2.5.
        // Matching bigrams: "the cat" gives log2(count(the)/count(the cat))
        // = log2(2/1) = 1; "ran ." matches but carries log2(1/1) = 0.
        // Over 3 candidate bigrams: 1/3. No higher order matches.
        // Brevity: ratio 4/8 = 0.5, factor exp(beta * ln(0.5)^2).
        let reference = toks("the cat sat . the dog ran .");
        let candidate = toks("the cat ran .");
        let beta = 0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2);
        let expected = (2.5 + 1.0 / 3.0) * (beta * 0.5f64.ln().powi(2)).exp();
        let got = nist(&candidate, &reference, 5).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn meteor_identity_reflects_single_chunk_penalty() {
        let t = toks("alpha beta gamma delta");
        let m = 4.0f64;
        let expected = 1.0 - 0.5 * (1.0 / m).powi(3);
        assert!((meteor_lite(&t, &t).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn meteor_disjoint_vocabulary_is_zero() {
        let a = toks("alpha beta");
        let b = toks("gamma delta");
        assert_eq!(meteor_lite(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn meteor_stem_matching_scores_inflected_forms() {
        let candidate = toks("cats sleeping");
        let reference = toks("cat sleeps");
        // Both tokens stem-match, one chunk of two:
        // fmean = 1, penalty = 0.5 * (1/2)^3 = 0.0625.
        let expected = 1.0 - 0.0625;
        let got = meteor_lite(&candidate, &reference).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn meteor_fragmentation_lowers_score() {
        let contiguous = meteor_lite(&toks("a b c d"), &toks("a b c d")).unwrap();
        let scattered = meteor_lite(&toks("a x b y"), &toks("a b x y")).unwrap();
        assert!(scattered < contiguous);
    }

    #[test]
    fn pairwise_matrix_shapes_and_diagonals() {
        let mut outputs: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for model in ["m1", "m2", "m3", "m4"] {
            let mut records = BTreeMap::new();
            records.insert("r1".to_string(), "the cat sat on the mat today".to_string());
            records.insert("r2".to_string(), "results improved with more data".to_string());
            outputs.insert(model.to_string(), records);
        }
        let report = pairwise_matrix(&outputs, MetricName::Bleu, &MetricOptions::default()).unwrap();
        assert_eq!(report.row_labels.len(), 4);
        assert_eq!(report.col_labels.len(), 4);
        for i in 0..4 {
            assert_eq!(report.cells[i][i], 1.0, "identical outputs, diagonal BLEU 1");
            for j in 0..4 {
                assert_eq!(report.cells[i][j], 1.0, "all models identical here");
                assert_eq!(report.support[i][j], 2);
            }
        }
    }

    #[test]
    fn wer_matrix_is_asymmetric_in_general() {
        let mut outputs: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut a = BTreeMap::new();
        a.insert("r1".to_string(), "one two three four".to_string());
        outputs.insert("a".to_string(), a);
        let mut b = BTreeMap::new();
        b.insert("r1".to_string(), "one two".to_string());
        outputs.insert("b".to_string(), b);
        let report = pairwise_matrix(&outputs, MetricName::Wer, &MetricOptions::default()).unwrap();
        let ab = report.cells[0][1];
        let ba = report.cells[1][0];
        assert_ne!(ab, ba);
        // Two deletions against a 4-token reference vs two insertions
        // against a 2-token reference.
        assert_eq!(ab, 0.5);
        assert_eq!(ba, 1.0);
    }

    #[test]
    fn pairwise_matrix_rejects_disjoint_models() {
        let mut outputs: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut a = BTreeMap::new();
        a.insert("r1".to_string(), "text".to_string());
        outputs.insert("a".to_string(), a);
        let mut b = BTreeMap::new();
        b.insert("r2".to_string(), "text".to_string());
        outputs.insert("b".to_string(), b);
        assert!(matches!(
            pairwise_matrix(&outputs, MetricName::Bleu, &MetricOptions::default()).unwrap_err(),
            MatrixError::NoSharedRecords { .. }
        ));
        let solo: BTreeMap<String, BTreeMap<String, String>> =
            outputs.into_iter().take(1).collect();
        assert!(matches!(
            pairwise_matrix(&solo, MetricName::Bleu, &MetricOptions::default()).unwrap_err(),
            MatrixError::TooFewModels(1)
        ));
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!(MetricName::from_str("BLEU").unwrap(), MetricName::Bleu);
        assert_eq!(MetricName::from_str("rouge-1").unwrap(), MetricName::Rouge1);
        assert_eq!(MetricName::from_str("rouge-l").unwrap(), MetricName::RougeL);
        assert_eq!(MetricName::from_str("meteor").unwrap(), MetricName::MeteorLite);
        assert!(MetricName::from_str("bertscore").is_err());
    }
}
