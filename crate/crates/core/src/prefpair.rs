//! Preference-pair dataset construction for alignment training, plus the
//! contrastive preference loss as a pure function.
//!
//! A pair contrasts a desirable judgment (`y_good`) with an undesirable one
//! (`y_bad`) for the same evaluation input. Desirability follows the
//! adversarial scoring rule: an extreme perturbation deserves exactly 1, a
//! subtle perturbation deserves at most 3.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Level, QARecord, SynthesisVariant, Variant};
use crate::hash;
use crate::judge::JudgmentRecord;
use crate::jsonl::{self, JsonlError};
use crate::rubric::{build_prompt, serialize_judgment, ParsedJudgment, RubricId};

/// The rating thresholds that separate good from bad adversarial judgments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesirabilityThresholds {
    /// An extreme-variant rating is desirable only when it equals this value.
    pub extreme_good: u8,
    /// A subtle-variant rating is desirable when it is at most this value.
    pub subtle_good_max: u8,
}

impl Default for DesirabilityThresholds {
    fn default() -> Self {
        DesirabilityThresholds {
            extreme_good: 1,
            subtle_good_max: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Desirability {
    Good,
    Bad,
}

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("benign judgments have no desirability label; they enter pairs via the mix builder")]
    BenignLevel,
}

/// Label one adversarial rating against the thresholds.
pub fn label_rating(
    rating: u8,
    level: Level,
    thresholds: &DesirabilityThresholds,
) -> Desirability {
    let good = match level {
        Level::Extreme => rating == thresholds.extreme_good,
        Level::Subtle => rating <= thresholds.subtle_good_max,
    };
    if good {
        Desirability::Good
    } else {
        Desirability::Bad
    }
}

/// Label a judgment of an adversarial variant. Benign judgments are an error:
/// the desirability rule is defined for perturbed texts only.
pub fn label_desirability(
    judgment: &JudgmentRecord,
    thresholds: &DesirabilityThresholds,
) -> Result<Desirability, LabelError> {
    match judgment.variant {
        Variant::Benign => Err(LabelError::BenignLevel),
        Variant::Perturbed { level, .. } => Ok(label_rating(judgment.rating, level, thresholds)),
    }
}

/// Whether pairs come from adversarial data only or also use benign
/// judgments on the good side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    AdversarialOnly,
    BenignPlusAdversarial,
}

impl std::str::FromStr for MixMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adversarial_only" => Ok(MixMode::AdversarialOnly),
            "benign_plus_adversarial" => Ok(MixMode::BenignPlusAdversarial),
            other => Err(format!("unknown mix mode: {other}")),
        }
    }
}

/// Sampling controls for pair construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPolicy {
    /// Maximum pairs kept per (rubric, evaluator) cell.
    pub per_rubric_per_evaluator_cap: usize,
    pub seed: u64,
    pub mix_mode: MixMode,
    #[serde(default)]
    pub thresholds: DesirabilityThresholds,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            per_rubric_per_evaluator_cap: 100,
            seed: 0,
            mix_mode: MixMode::AdversarialOnly,
            thresholds: DesirabilityThresholds::default(),
        }
    }
}

/// Where each side of a pair came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRef {
    pub record_id: String,
    pub generator_model: String,
    pub variant_level: String,
}

impl JobRef {
    fn of(judgment: &JudgmentRecord) -> Self {
        JobRef {
            record_id: judgment.record_id.clone(),
            generator_model: judgment.generator_model.clone(),
            variant_level: judgment.variant.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub good: JobRef,
    pub bad: JobRef,
}

/// One (input, good judgment, bad judgment) training triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub input_x: String,
    pub y_good: String,
    pub y_bad: String,
    pub rubric: RubricId,
    pub evaluator_model: String,
    pub level: Level,
    pub provenance: PairProvenance,
}

/// A (rubric, evaluator) cell for which no pair could be formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyCell {
    pub rubric: RubricId,
    pub evaluator_model: String,
    pub reason: String,
}

/// Pairs plus the cells that yielded none. An empty cell is reported, not
/// fatal.
#[derive(Debug, Clone, Default)]
pub struct PairBuildOutcome {
    pub pairs: Vec<PreferencePair>,
    pub empty_cells: Vec<EmptyCell>,
}

/// Renders the judge prompt (`x`) for a judgment's (record, variant, rubric).
pub struct PromptIndex {
    records: BTreeMap<String, QARecord>,
    texts: BTreeMap<(String, String, String), String>,
}

impl PromptIndex {
    pub fn new(records: &[QARecord], syntheses: &[SynthesisVariant]) -> Self {
        PromptIndex {
            records: records.iter().map(|r| (r.record_id.clone(), r.clone())).collect(),
            texts: syntheses
                .iter()
                .map(|s| {
                    (
                        (s.record_id.clone(), s.generator_model.clone(), s.variant.to_string()),
                        s.text.clone(),
                    )
                })
                .collect(),
        }
    }

    fn render(&self, judgment: &JudgmentRecord) -> Option<String> {
        let record = self.records.get(&judgment.record_id)?;
        let text = self.texts.get(&(
            judgment.record_id.clone(),
            judgment.generator_model.clone(),
            judgment.variant.to_string(),
        ))?;
        Some(build_prompt(record, text, judgment.rubric).rendered)
    }
}

fn serialized_y(judgment: &JudgmentRecord) -> String {
    serialize_judgment(
        &ParsedJudgment {
            rating: judgment.rating,
            rationale: judgment.rationale.clone(),
        },
        judgment.rubric,
    )
}

// Deterministic sort key so pairing is stable across runs.
fn sort_key(j: &JudgmentRecord) -> (String, String, String, u8, String) {
    (
        j.record_id.clone(),
        j.generator_model.clone(),
        j.variant.to_string(),
        j.rating,
        j.rationale.clone(),
    )
}

fn make_pair(good: &JudgmentRecord, bad: &JudgmentRecord, level: Level, x: String) -> Option<PreferencePair> {
    let y_good = serialized_y(good);
    let y_bad = serialized_y(bad);
    if y_good == y_bad {
        return None;
    }
    Some(PreferencePair {
        input_x: x,
        y_good,
        y_bad,
        rubric: bad.rubric,
        evaluator_model: bad.evaluator_model.clone(),
        level,
        provenance: PairProvenance {
            good: JobRef::of(good),
            bad: JobRef::of(bad),
        },
    })
}

// Pair goods with bads inside one (rubric, evaluator) cell: first matching on
// (record, generator, level), then falling back to same-(level) matching
// within the cell. The pair's x is the prompt the good judgment answered.
fn pair_cell(
    rubric: RubricId,
    evaluator: &str,
    goods: &[&JudgmentRecord],
    bads: &[&JudgmentRecord],
    prompts: &PromptIndex,
    policy: &SamplingPolicy,
    outcome: &mut PairBuildOutcome,
) {
    if goods.is_empty() || bads.is_empty() {
        outcome.empty_cells.push(EmptyCell {
            rubric,
            evaluator_model: evaluator.to_string(),
            reason: if goods.is_empty() {
                "no desirable judgments".to_string()
            } else {
                "no undesirable judgments".to_string()
            },
        });
        return;
    }

    let mut goods: Vec<&JudgmentRecord> = goods.to_vec();
    let mut bads: Vec<&JudgmentRecord> = bads.to_vec();
    goods.sort_by_key(|j| sort_key(j));
    bads.sort_by_key(|j| sort_key(j));

    let level_of = |j: &JudgmentRecord| match j.variant {
        Variant::Perturbed { level, .. } => Some(level),
        Variant::Benign => None,
    };

    let mut pairs: Vec<PreferencePair> = Vec::new();
    let mut used_good = vec![false; goods.len()];
    let mut used_bad = vec![false; bads.len()];

    // Fine-grained pass: same (record, generator, level). Benign goods match
    // a bad of any level on the same record and generator.
    for (bi, bad) in bads.iter().enumerate() {
        let Some(bad_level) = level_of(bad) else { continue };
        for (gi, good) in goods.iter().enumerate() {
            if used_good[gi] {
                continue;
            }
            if good.record_id != bad.record_id || good.generator_model != bad.generator_model {
                continue;
            }
            if level_of(good).is_some_and(|l| l != bad_level) {
                continue;
            }
            let Some(x) = prompts.render(good) else { continue };
            if let Some(pair) = make_pair(good, bad, bad_level, x) {
                pairs.push(pair);
                used_good[gi] = true;
                used_bad[bi] = true;
                break;
            }
        }
    }

    // Coarse pass: any same-level good in the cell.
    for (bi, bad) in bads.iter().enumerate() {
        if used_bad[bi] {
            continue;
        }
        let Some(bad_level) = level_of(bad) else { continue };
        for (gi, good) in goods.iter().enumerate() {
            if used_good[gi] {
                continue;
            }
            if level_of(good).is_some_and(|l| l != bad_level) {
                continue;
            }
            let Some(x) = prompts.render(good) else { continue };
            if let Some(pair) = make_pair(good, bad, bad_level, x) {
                pairs.push(pair);
                used_good[gi] = true;
                used_bad[bi] = true;
                break;
            }
        }
    }

    if pairs.is_empty() {
        outcome.empty_cells.push(EmptyCell {
            rubric,
            evaluator_model: evaluator.to_string(),
            reason: "no good/bad combination could be paired".to_string(),
        });
        return;
    }

    let cap = policy.per_rubric_per_evaluator_cap;
    if pairs.len() > cap {
        let seed = hash::seed_for(policy.seed, &[rubric.name(), evaluator]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairs.shuffle(&mut rng);
        pairs.truncate(cap);
        pairs.sort_by(|a, b| {
            (&a.provenance.good.record_id, &a.y_good, &a.y_bad).cmp(&(
                &b.provenance.good.record_id,
                &b.y_good,
                &b.y_bad,
            ))
        });
    }
    outcome.pairs.extend(pairs);
}

fn group_cells<'a>(
    judgments: impl Iterator<Item = &'a JudgmentRecord>,
) -> BTreeMap<(RubricId, String), Vec<&'a JudgmentRecord>> {
    let mut cells: BTreeMap<(RubricId, String), Vec<&JudgmentRecord>> = BTreeMap::new();
    for j in judgments {
        cells.entry((j.rubric, j.evaluator_model.clone())).or_default().push(j);
    }
    cells
}

/// Build pairs from adversarial judgments only: goods and bads both come
/// from perturbed-variant evaluations, split by the desirability rule.
pub fn build_adversarial_pairs(
    judgments: &[JudgmentRecord],
    prompts: &PromptIndex,
    policy: &SamplingPolicy,
) -> PairBuildOutcome {
    let mut outcome = PairBuildOutcome::default();
    let adversarial = judgments
        .iter()
        .filter(|j| matches!(j.variant, Variant::Perturbed { .. }));
    for ((rubric, evaluator), cell) in group_cells(adversarial) {
        let mut goods = Vec::new();
        let mut bads = Vec::new();
        for j in cell {
            match label_desirability(j, &policy.thresholds).expect("cell is adversarial") {
                Desirability::Good => goods.push(j),
                Desirability::Bad => bads.push(j),
            }
        }
        pair_cell(rubric, &evaluator, &goods, &bads, prompts, policy, &mut outcome);
    }
    outcome
}

/// Build pairs mixing benign and adversarial data: the good side draws from
/// benign evaluations and desirable adversarial ones, the bad side from
/// undesirable adversarial evaluations.
pub fn build_mixed_pairs(
    benign_judgments: &[JudgmentRecord],
    adversarial_judgments: &[JudgmentRecord],
    prompts: &PromptIndex,
    policy: &SamplingPolicy,
) -> PairBuildOutcome {
    let mut outcome = PairBuildOutcome::default();

    let mut cells: BTreeMap<(RubricId, String), (Vec<&JudgmentRecord>, Vec<&JudgmentRecord>)> =
        BTreeMap::new();
    for j in benign_judgments.iter().filter(|j| j.variant == Variant::Benign) {
        cells
            .entry((j.rubric, j.evaluator_model.clone()))
            .or_default()
            .0
            .push(j);
    }
    for j in adversarial_judgments
        .iter()
        .filter(|j| matches!(j.variant, Variant::Perturbed { .. }))
    {
        let entry = cells.entry((j.rubric, j.evaluator_model.clone())).or_default();
        match label_desirability(j, &policy.thresholds).expect("filtered to adversarial") {
            Desirability::Good => entry.0.push(j),
            Desirability::Bad => entry.1.push(j),
        }
    }

    for ((rubric, evaluator), (goods, bads)) in cells {
        pair_cell(rubric, &evaluator, &goods, &bads, prompts, policy, &mut outcome);
    }
    outcome
}

/// Write pairs as JSONL; returns the number written.
pub fn export_pairs(pairs: &[PreferencePair], path: &Path) -> Result<usize, JsonlError> {
    jsonl::write_jsonl(path, pairs)
}

/// Load pairs back from JSONL.
pub fn load_pairs(path: &Path) -> Result<Vec<PreferencePair>, JsonlError> {
    jsonl::read_jsonl(path)
}

/// Inputs to the contrastive preference loss: per-token log-probabilities of
/// the good and bad judgment under the policy, and the margin sharpness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpoInputs {
    pub logp_good: Vec<f64>,
    pub logp_bad: Vec<f64>,
    pub beta: f64,
}

pub const DEFAULT_CPO_BETA: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum CpoError {
    #[error("invalid log-probability: {0}")]
    InvalidLogProb(String),
}

// Numerically stable -ln(sigmoid(z)) = softplus(-z).
fn neg_log_sigmoid(z: f64) -> f64 {
    let x = -z;
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// The contrastive preference loss: a logistic margin term preferring the
/// good judgment over the bad one, plus the negative log-likelihood of the
/// good judgment.
///
/// `L = -ln sigma(beta * (sum logp_good - sum logp_bad)) - sum logp_good`
pub fn cpo_loss(inputs: &CpoInputs) -> Result<f64, CpoError> {
    if inputs.logp_good.is_empty() || inputs.logp_bad.is_empty() {
        return Err(CpoError::InvalidLogProb(
            "log-probability sequences must be nonempty".to_string(),
        ));
    }
    if !(inputs.beta > 0.0) || !inputs.beta.is_finite() {
        return Err(CpoError::InvalidLogProb(format!(
            "beta must be a positive finite real (got {})",
            inputs.beta
        )));
    }
    for (name, seq) in [("logp_good", &inputs.logp_good), ("logp_bad", &inputs.logp_bad)] {
        for &v in seq.iter() {
            if !v.is_finite() || v > 0.0 {
                return Err(CpoError::InvalidLogProb(format!(
                    "{name} entry {v} is not a finite log-probability <= 0"
                )));
            }
        }
    }
    let sum_good: f64 = inputs.logp_good.iter().sum();
    let sum_bad: f64 = inputs.logp_bad.iter().sum();
    let margin = inputs.beta * (sum_good - sum_bad);
    let l_prefer = neg_log_sigmoid(margin);
    let l_nll = -sum_good;
    Ok(l_prefer + l_nll)
}
