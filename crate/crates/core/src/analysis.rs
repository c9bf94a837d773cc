//! Aggregation of judgment records into reporting artifacts: grouped means,
//! evaluator-by-generator matrices, robustness/optimism reports, and the
//! self-preference check.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{RunLevel, Variant};
use crate::judge::JudgmentRecord;
use crate::prefpair::{label_rating, Desirability, DesirabilityThresholds};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("unknown group field: {0}")]
    UnknownGroupField(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("evaluator {0} is absent from the generator columns")]
    MissingDiagonal(String),
}

const GROUP_FIELDS: [&str; 6] = [
    "record_id",
    "generator_model",
    "variant",
    "level",
    "rubric",
    "evaluator_model",
];

fn field_value(judgment: &JudgmentRecord, field: &str) -> Result<String, AnalysisError> {
    match field {
        "record_id" => Ok(judgment.record_id.clone()),
        "generator_model" => Ok(judgment.generator_model.clone()),
        "variant" => Ok(judgment.variant.to_string()),
        "level" => Ok(judgment.variant.level_name().to_string()),
        "rubric" => Ok(judgment.rubric.to_string()),
        "evaluator_model" => Ok(judgment.evaluator_model.to_string()),
        other => Err(AnalysisError::UnknownGroupField(format!(
            "{other} (expected one of {})",
            GROUP_FIELDS.join(", ")
        ))),
    }
}

/// One row of a grouped-mean table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub key: Vec<String>,
    pub mean: f64,
    pub count: usize,
}

/// Mean rating per group, with support counts. Groups with no data are
/// simply absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub group_by: Vec<String>,
    pub rows: Vec<GroupRow>,
}

/// Exact arithmetic mean of ratings per group key.
pub fn aggregate_means(
    judgments: &[JudgmentRecord],
    group_by: &[String],
) -> Result<GroupMeans, AnalysisError> {
    for field in group_by {
        // Validate eagerly so typos fail even on empty input.
        if !GROUP_FIELDS.contains(&field.as_str()) {
            return Err(AnalysisError::UnknownGroupField(field.clone()));
        }
    }
    let mut groups: BTreeMap<Vec<String>, (u64, usize)> = BTreeMap::new();
    for judgment in judgments {
        let key = group_by
            .iter()
            .map(|f| field_value(judgment, f))
            .collect::<Result<Vec<_>, _>>()?;
        let entry = groups.entry(key).or_insert((0, 0));
        entry.0 += u64::from(judgment.rating);
        entry.1 += 1;
    }
    let rows = groups
        .into_iter()
        .map(|(key, (sum, count))| GroupRow {
            key,
            mean: sum as f64 / count as f64,
            count,
        })
        .collect();
    Ok(GroupMeans {
        group_by: group_by.to_vec(),
        rows,
    })
}

/// Mean rating per (row, column) pair with per-cell support. Cells with no
/// support are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    pub support: Vec<Vec<usize>>,
}

impl ScoreMatrix {
    pub fn cell(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        let c = self.col_labels.iter().position(|l| l == col)?;
        self.cells[r][c]
    }

    /// CSV rendering: rows are evaluators, columns are generators; empty
    /// cells stay empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("evaluator");
        for col in &self.col_labels {
            out.push(',');
            out.push_str(&csv_escape(col));
        }
        out.push('\n');
        for (r, row) in self.row_labels.iter().enumerate() {
            out.push_str(&csv_escape(row));
            for c in 0..self.col_labels.len() {
                out.push(',');
                if let Some(v) = self.cells[r][c] {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut width = self.row_labels.iter().map(String::len).max().unwrap_or(0).max(9);
        width += 2;
        let col_width = self
            .col_labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6)
            + 2;
        let mut out = format!("{:width$}", "evaluator");
        for col in &self.col_labels {
            out.push_str(&format!("{col:>col_width$}"));
        }
        out.push('\n');
        for (r, row) in self.row_labels.iter().enumerate() {
            out.push_str(&format!("{row:width$}"));
            for c in 0..self.col_labels.len() {
                match self.cells[r][c] {
                    Some(v) => out.push_str(&format!("{v:>col_width$.2}")),
                    None => out.push_str(&format!("{:>col_width$}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Mean benign rating of every (evaluator, generator) pair, over all rubrics
/// and records.
pub fn evaluator_generator_matrix(
    judgments: &[JudgmentRecord],
) -> Result<ScoreMatrix, AnalysisError> {
    let benign: Vec<&JudgmentRecord> = judgments
        .iter()
        .filter(|j| j.variant == Variant::Benign)
        .collect();
    if benign.is_empty() {
        return Err(AnalysisError::NoData(
            "no benign-level judgments present".to_string(),
        ));
    }
    let row_labels: Vec<String> = benign
        .iter()
        .map(|j| j.evaluator_model.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col_labels: Vec<String> = benign
        .iter()
        .map(|j| j.generator_model.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut sums = vec![vec![0u64; col_labels.len()]; row_labels.len()];
    let mut support = vec![vec![0usize; col_labels.len()]; row_labels.len()];
    for j in &benign {
        let r = row_labels.iter().position(|l| *l == j.evaluator_model).expect("indexed");
        let c = col_labels.iter().position(|l| *l == j.generator_model).expect("indexed");
        sums[r][c] += u64::from(j.rating);
        support[r][c] += 1;
    }
    let cells = sums
        .iter()
        .zip(&support)
        .map(|(row_sums, row_support)| {
            row_sums
                .iter()
                .zip(row_support)
                .map(|(&s, &n)| if n > 0 { Some(s as f64 / n as f64) } else { None })
                .collect()
        })
        .collect();
    Ok(ScoreMatrix {
        row_labels,
        col_labels,
        cells,
        support,
    })
}

/// Verdict thresholds for the optimism report, reported alongside results so
/// they are never implicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportThresholds {
    pub desirability: DesirabilityThresholds,
    /// Extreme-desirable rate at or above which an evaluator can be robust
    /// or pessimistic.
    pub extreme_rate_robust: f64,
    /// Extreme-desirable rate below which an evaluator is optimistic.
    pub extreme_rate_optimistic: f64,
    /// Minimum benign mean for a robust verdict.
    pub benign_mean_robust: f64,
    /// Maximum benign mean for a pessimistic verdict.
    pub benign_mean_pessimistic: f64,
}

impl Default for ReportThresholds {
    fn default() -> Self {
        ReportThresholds {
            desirability: DesirabilityThresholds::default(),
            extreme_rate_robust: 0.9,
            extreme_rate_optimistic: 0.5,
            benign_mean_robust: 4.0,
            benign_mean_pessimistic: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Robust,
    Optimistic,
    Pessimistic,
    Mixed,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Robust => "robust",
            Verdict::Optimistic => "optimistic",
            Verdict::Pessimistic => "pessimistic",
            Verdict::Mixed => "mixed",
        })
    }
}

/// Per-(evaluator, rubric) score profile across the three settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricRobustness {
    pub evaluator_model: String,
    pub rubric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benign_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtle_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extreme_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benign_minus_extreme_gap: Option<f64>,
    /// Share of subtle ratings at or below the subtle threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtle_desirable_rate: Option<f64>,
    /// Share of extreme ratings equal to the extreme threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extreme_desirable_rate: Option<f64>,
}

/// Pooled per-evaluator numbers and the verdict they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorVerdict {
    pub evaluator_model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benign_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtle_desirable_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extreme_desirable_rate: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub thresholds: ReportThresholds,
    pub cells: Vec<RubricRobustness>,
    pub verdicts: Vec<EvaluatorVerdict>,
}

#[derive(Default, Clone)]
struct LevelAccumulator {
    sum: u64,
    count: usize,
    desirable: usize,
}

impl LevelAccumulator {
    fn push(&mut self, rating: u8, desirable: bool) {
        self.sum += u64::from(rating);
        self.count += 1;
        if desirable {
            self.desirable += 1;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum as f64 / self.count as f64)
    }

    fn rate(&self) -> Option<f64> {
        (self.count > 0).then(|| self.desirable as f64 / self.count as f64)
    }
}

fn verdict_for(
    benign_mean: Option<f64>,
    extreme_rate: Option<f64>,
    thresholds: &ReportThresholds,
) -> Verdict {
    let Some(rate) = extreme_rate else {
        return Verdict::Mixed;
    };
    if rate >= thresholds.extreme_rate_robust {
        match benign_mean {
            Some(mean) if mean >= thresholds.benign_mean_robust => Verdict::Robust,
            Some(mean) if mean <= thresholds.benign_mean_pessimistic => Verdict::Pessimistic,
            _ => Verdict::Mixed,
        }
    } else if rate < thresholds.extreme_rate_optimistic {
        Verdict::Optimistic
    } else {
        Verdict::Mixed
    }
}

/// Quantify optimism bias: per-(evaluator, rubric) means across the three
/// settings, desirable-score rates, and a per-evaluator verdict.
pub fn optimism_report(
    judgments: &[JudgmentRecord],
    thresholds: &ReportThresholds,
) -> Result<RobustnessReport, AnalysisError> {
    if !judgments
        .iter()
        .any(|j| matches!(j.variant, Variant::Perturbed { .. }))
    {
        return Err(AnalysisError::NoData(
            "no adversarial-level judgments present".to_string(),
        ));
    }

    type CellKey = (String, String);
    let mut cells: BTreeMap<CellKey, [LevelAccumulator; 3]> = BTreeMap::new();
    let mut pooled: BTreeMap<String, [LevelAccumulator; 3]> = BTreeMap::new();

    for j in judgments {
        let (slot, desirable) = match j.variant {
            Variant::Benign => (0usize, false),
            Variant::Perturbed { level, .. } => {
                let idx = match j.variant.run_level() {
                    RunLevel::Subtle => 1,
                    RunLevel::Extreme => 2,
                    RunLevel::Benign => unreachable!("perturbed variant"),
                };
                let good = label_rating(j.rating, level, &thresholds.desirability)
                    == Desirability::Good;
                (idx, good)
            }
        };
        cells
            .entry((j.evaluator_model.clone(), j.rubric.to_string()))
            .or_default()[slot]
            .push(j.rating, desirable);
        pooled.entry(j.evaluator_model.clone()).or_default()[slot].push(j.rating, desirable);
    }

    let cells = cells
        .into_iter()
        .map(|((evaluator_model, rubric), [benign, subtle, extreme])| {
            let benign_mean = benign.mean();
            let extreme_mean = extreme.mean();
            RubricRobustness {
                evaluator_model,
                rubric,
                benign_mean,
                subtle_mean: subtle.mean(),
                extreme_mean,
                benign_minus_extreme_gap: benign_mean.zip(extreme_mean).map(|(b, e)| b - e),
                subtle_desirable_rate: subtle.rate(),
                extreme_desirable_rate: extreme.rate(),
            }
        })
        .collect();

    let verdicts = pooled
        .into_iter()
        .map(|(evaluator_model, [benign, subtle, extreme])| {
            let benign_mean = benign.mean();
            let extreme_rate = extreme.rate();
            EvaluatorVerdict {
                evaluator_model,
                benign_mean,
                subtle_desirable_rate: subtle.rate(),
                extreme_desirable_rate: extreme_rate,
                verdict: verdict_for(benign_mean, extreme_rate, thresholds),
            }
        })
        .collect();

    Ok(RobustnessReport {
        thresholds: *thresholds,
        cells,
        verdicts,
    })
}

impl RobustnessReport {
    /// Aligned text table, one line per (evaluator, rubric) cell, then the
    /// per-evaluator verdict block.
    pub fn to_text(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".to_string())
        }
        let eval_width = self
            .cells
            .iter()
            .map(|c| c.evaluator_model.len())
            .max()
            .unwrap_or(0)
            .max(9)
            + 2;
        let mut out = format!(
            "{:eval_width$}{:<17}{:>8}{:>8}{:>9}{:>7}{:>11}{:>12}\n",
            "evaluator", "rubric", "benign", "subtle", "extreme", "gap", "subtle_ok", "extreme_ok"
        );
        for cell in &self.cells {
            out.push_str(&format!(
                "{:eval_width$}{:<17}{:>8}{:>8}{:>9}{:>7}{:>11}{:>12}\n",
                cell.evaluator_model,
                cell.rubric,
                opt(cell.benign_mean),
                opt(cell.subtle_mean),
                opt(cell.extreme_mean),
                opt(cell.benign_minus_extreme_gap),
                opt(cell.subtle_desirable_rate),
                opt(cell.extreme_desirable_rate),
            ));
        }
        out.push('\n');
        for v in &self.verdicts {
            out.push_str(&format!(
                "{:eval_width$}verdict: {:<12} (benign mean {}, extreme desirable rate {}, subtle desirable rate {})\n",
                v.evaluator_model,
                v.verdict.to_string(),
                opt(v.benign_mean),
                opt(v.extreme_desirable_rate),
                opt(v.subtle_desirable_rate),
            ));
        }
        out
    }
}

/// One evaluator's own-output score versus the best score it gave anyone else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfPreference {
    pub evaluator_model: String,
    pub own_generator_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_other_score: Option<f64>,
    pub prefers_self: bool,
}

/// For each evaluator appearing in the matrix rows, compare the score it gave
/// its own generations against the maximum it gave any other generator.
pub fn self_preference_check(matrix: &ScoreMatrix) -> Result<Vec<SelfPreference>, AnalysisError> {
    let mut out = Vec::with_capacity(matrix.row_labels.len());
    for (r, evaluator) in matrix.row_labels.iter().enumerate() {
        let c_self = matrix
            .col_labels
            .iter()
            .position(|c| c == evaluator)
            .ok_or_else(|| AnalysisError::MissingDiagonal(evaluator.clone()))?;
        let own = matrix.cells[r][c_self]
            .ok_or_else(|| AnalysisError::MissingDiagonal(evaluator.clone()))?;
        let max_other = matrix.cells[r]
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != c_self)
            .filter_map(|(_, v)| *v)
            .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |a| a.max(v))));
        out.push(SelfPreference {
            evaluator_model: evaluator.clone(),
            own_generator_score: own,
            max_other_score: max_other,
            prefers_self: max_other.is_some_and(|m| own > m),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Level;
    use crate::rubric::RubricId;

    fn judgment(
        record: &str,
        generator: &str,
        evaluator: &str,
        rubric: RubricId,
        variant: Variant,
        rating: u8,
    ) -> JudgmentRecord {
        JudgmentRecord {
            record_id: record.to_string(),
            generator_model: generator.to_string(),
            variant,
            rubric,
            evaluator_model: evaluator.to_string(),
            rating,
            rationale: "r".into(),
            raw_response: String::new(),
            attempt_count: 1,
            timestamp: "t".into(),
        }
    }

    fn benign(evaluator: &str, generator: &str, rating: u8) -> JudgmentRecord {
        judgment("r1", generator, evaluator, RubricId::Coherence, Variant::Benign, rating)
    }

    fn leveled(evaluator: &str, level: Level, rating: u8) -> JudgmentRecord {
        judgment(
            "r1",
            "gen",
            evaluator,
            RubricId::Coherence,
            Variant::Perturbed {
                rubric: RubricId::Coherence,
                level,
            },
            rating,
        )
    }

    #[test]
    fn mean_of_two_ratings() {
        let js = vec![benign("e", "g", 4), benign("e", "g", 5)];
        let table = aggregate_means(&js, &["evaluator_model".to_string()]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!((table.rows[0].mean - 4.5).abs() < 1e-12);
        assert_eq!(table.rows[0].count, 2);
    }

    #[test]
    fn single_rubric_all_ones() {
        let js = vec![
            leveled("e", Level::Extreme, 1),
            leveled("e", Level::Extreme, 1),
            leveled("e", Level::Extreme, 1),
        ];
        let table = aggregate_means(&js, &["rubric".to_string()]).unwrap();
        assert_eq!(table.rows[0].mean, 1.0);
    }

    // Fixture built so its mean lands exactly on a published benign
    // coherence cell value (4.95): nineteen 5s and one 4.
    #[test]
    fn fixture_reproducing_published_cell_mean() {
        let mut js: Vec<JudgmentRecord> = (0..19).map(|i| {
            judgment(&format!("r{i}"), "g", "e", RubricId::Coherence, Variant::Benign, 5)
        }).collect();
        js.push(judgment("r19", "g", "e", RubricId::Coherence, Variant::Benign, 4));
        let hand_sum: u64 = js.iter().map(|j| u64::from(j.rating)).sum();
        assert_eq!(hand_sum, 99);
        let table = aggregate_means(&js, &["rubric".to_string()]).unwrap();
        assert!((table.rows[0].mean - 4.95).abs() < 1e-12);
    }

    #[test]
    fn unknown_group_field_is_an_error() {
        let js = vec![benign("e", "g", 5)];
        assert!(matches!(
            aggregate_means(&js, &["flavor".to_string()]).unwrap_err(),
            AnalysisError::UnknownGroupField(_)
        ));
    }

    #[test]
    fn means_are_permutation_invariant_and_stable_under_mean_insertion() {
        let mut js = vec![benign("e", "g", 2), benign("e", "g", 4), benign("e", "g", 3)];
        let mean1 = aggregate_means(&js, &["evaluator_model".to_string()]).unwrap().rows[0].mean;
        js.reverse();
        let mean2 = aggregate_means(&js, &["evaluator_model".to_string()]).unwrap().rows[0].mean;
        assert_eq!(mean1, mean2);
        // Adding a rating equal to the current mean leaves it unchanged.
        js.push(benign("e", "g", 3));
        let mean3 = aggregate_means(&js, &["evaluator_model".to_string()]).unwrap().rows[0].mean;
        assert!((mean3 - mean1).abs() < 1e-12);
    }

    #[test]
    fn one_by_one_matrix() {
        let js = vec![benign("e", "g", 5), benign("e", "g", 5)];
        let m = evaluator_generator_matrix(&js).unwrap();
        assert_eq!(m.row_labels, vec!["e"]);
        assert_eq!(m.col_labels, vec!["g"]);
        assert_eq!(m.cell("e", "g"), Some(5.0));
    }

    #[test]
    fn disjoint_cells_have_no_value() {
        let js = vec![benign("e1", "g1", 4), benign("e2", "g2", 2)];
        let m = evaluator_generator_matrix(&js).unwrap();
        assert_eq!(m.cell("e1", "g2"), None);
        assert_eq!(m.support[0][1], 0);
    }

    #[test]
    fn constant_ratings_give_constant_matrix() {
        let mut js = Vec::new();
        for e in ["e1", "e2"] {
            for g in ["g1", "g2"] {
                js.push(benign(e, g, 3));
            }
        }
        let m = evaluator_generator_matrix(&js).unwrap();
        for row in &m.cells {
            for cell in row {
                assert_eq!(*cell, Some(3.0));
            }
        }
    }

    #[test]
    fn adversarial_free_input_is_no_data() {
        let js = vec![benign("e", "g", 5)];
        assert!(matches!(
            optimism_report(&js, &ReportThresholds::default()).unwrap_err(),
            AnalysisError::NoData(_)
        ));
        assert!(matches!(
            evaluator_generator_matrix(&[]).unwrap_err(),
            AnalysisError::NoData(_)
        ));
    }

    #[test]
    fn robust_regime() {
        let mut js = Vec::new();
        for _ in 0..10 {
            js.push(benign("e", "g", 5));
            js.push(leveled("e", Level::Extreme, 1));
            js.push(leveled("e", Level::Subtle, 3));
        }
        let report = optimism_report(&js, &ReportThresholds::default()).unwrap();
        assert_eq!(report.verdicts.len(), 1);
        assert_eq!(report.verdicts[0].verdict, Verdict::Robust);
        assert_eq!(report.verdicts[0].extreme_desirable_rate, Some(1.0));
    }

    #[test]
    fn optimistic_regime() {
        let mut js = Vec::new();
        for _ in 0..10 {
            js.push(benign("e", "g", 5));
            js.push(leveled("e", Level::Extreme, 4));
        }
        let report = optimism_report(&js, &ReportThresholds::default()).unwrap();
        assert_eq!(report.verdicts[0].verdict, Verdict::Optimistic);
        assert_eq!(report.verdicts[0].extreme_desirable_rate, Some(0.0));
    }

    #[test]
    fn pessimistic_regime() {
        let mut js = Vec::new();
        for _ in 0..10 {
            js.push(benign("e", "g", 3));
            js.push(leveled("e", Level::Extreme, 1));
        }
        let report = optimism_report(&js, &ReportThresholds::default()).unwrap();
        assert_eq!(report.verdicts[0].verdict, Verdict::Pessimistic);
    }

    #[test]
    fn report_rates_match_brute_force_recount() {
        let mut js = Vec::new();
        let ratings = [1u8, 1, 2, 3, 1, 5, 1, 1];
        for (i, &r) in ratings.iter().enumerate() {
            let mut j = leveled("e", Level::Extreme, r);
            j.record_id = format!("r{i}");
            js.push(j);
        }
        let report = optimism_report(&js, &ReportThresholds::default()).unwrap();
        let brute = ratings.iter().filter(|&&r| r == 1).count() as f64 / ratings.len() as f64;
        assert_eq!(report.verdicts[0].extreme_desirable_rate, Some(brute));
        let cell = &report.cells[0];
        assert_eq!(cell.extreme_desirable_rate, Some(brute));
        let brute_mean =
            ratings.iter().map(|&r| f64::from(r)).sum::<f64>() / ratings.len() as f64;
        assert!((cell.extreme_mean.unwrap() - brute_mean).abs() < 1e-12);
    }

    #[test]
    fn self_preference_basic_cases() {
        let m = ScoreMatrix {
            row_labels: vec!["a".into(), "b".into()],
            col_labels: vec!["a".into(), "b".into()],
            cells: vec![vec![Some(4.0), Some(4.5)], vec![Some(4.0), Some(5.0)]],
            support: vec![vec![1, 1], vec![1, 1]],
        };
        let checks = self_preference_check(&m).unwrap();
        assert!(!checks[0].prefers_self, "4.0 vs max-other 4.5");
        assert!(checks[1].prefers_self, "5.0 vs max-other 4.0");
    }

    #[test]
    fn missing_diagonal_is_an_error() {
        let m = ScoreMatrix {
            row_labels: vec!["judge-only".into()],
            col_labels: vec!["gen-only".into()],
            cells: vec![vec![Some(4.0)]],
            support: vec![vec![1]],
        };
        assert_eq!(
            self_preference_check(&m).unwrap_err(),
            AnalysisError::MissingDiagonal("judge-only".into())
        );
    }

    #[test]
    fn self_preference_is_invariant_under_row_shift() {
        let base = ScoreMatrix {
            row_labels: vec!["a".into()],
            col_labels: vec!["a".into(), "b".into()],
            cells: vec![vec![Some(3.0), Some(4.0)]],
            support: vec![vec![1, 1]],
        };
        let shifted = ScoreMatrix {
            cells: vec![vec![Some(3.5), Some(4.5)]],
            ..base.clone()
        };
        assert_eq!(
            self_preference_check(&base).unwrap()[0].prefers_self,
            self_preference_check(&shifted).unwrap()[0].prefers_self
        );
    }

    #[test]
    fn csv_rendering_includes_all_cells() {
        let js = vec![benign("e1", "g1", 4), benign("e1", "g2", 2)];
        let m = evaluator_generator_matrix(&js).unwrap();
        let csv = m.to_csv();
        assert!(csv.starts_with("evaluator,g1,g2\n"));
        assert!(csv.contains("e1,4,2"));
    }
}
