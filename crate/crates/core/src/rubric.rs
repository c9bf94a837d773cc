//! The nine evaluation rubrics, their five-point Likert guidelines, the
//! seven-part judge prompt, and the judgment parser.
//!
//! Rubric questions and guideline texts are canonical string constants; an
//! override file can replace them for custom evaluation schemes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QARecord;

/// One of the nine quality criteria, each scored on a 1–5 Likert scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RubricId {
    Coherence,
    Cohesion,
    Completeness,
    Conciseness,
    Correctness,
    Informativeness,
    Integration,
    Readability,
    Relevancy,
}

/// The three umbrella dimensions the rubrics are organized under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    LinguisticStylistic,
    LogicalStructural,
    ContentAccuracy,
}

impl Dimension {
    pub fn label(self) -> &'static str {
        match self {
            Dimension::LinguisticStylistic => "Linguistic & Stylistic Quality",
            Dimension::LogicalStructural => "Logical & Structural Integrity",
            Dimension::ContentAccuracy => "Content Accuracy & Informativeness",
        }
    }
}

impl RubricId {
    pub const ALL: [RubricId; 9] = [
        RubricId::Coherence,
        RubricId::Cohesion,
        RubricId::Completeness,
        RubricId::Conciseness,
        RubricId::Correctness,
        RubricId::Informativeness,
        RubricId::Integration,
        RubricId::Readability,
        RubricId::Relevancy,
    ];

    /// Lowercase identifier used in file formats and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            RubricId::Coherence => "coherence",
            RubricId::Cohesion => "cohesion",
            RubricId::Completeness => "completeness",
            RubricId::Conciseness => "conciseness",
            RubricId::Correctness => "correctness",
            RubricId::Informativeness => "informativeness",
            RubricId::Integration => "integration",
            RubricId::Readability => "readability",
            RubricId::Relevancy => "relevancy",
        }
    }

    /// Capitalized name used in prompts and judgment JSON keys.
    pub fn title(self) -> &'static str {
        match self {
            RubricId::Coherence => "Coherence",
            RubricId::Cohesion => "Cohesion",
            RubricId::Completeness => "Completeness",
            RubricId::Conciseness => "Conciseness",
            RubricId::Correctness => "Correctness",
            RubricId::Informativeness => "Informativeness",
            RubricId::Integration => "Integration",
            RubricId::Readability => "Readability",
            RubricId::Relevancy => "Relevancy",
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            RubricId::Cohesion | RubricId::Conciseness | RubricId::Readability => {
                Dimension::LinguisticStylistic
            }
            RubricId::Coherence | RubricId::Integration | RubricId::Relevancy => {
                Dimension::LogicalStructural
            }
            RubricId::Correctness | RubricId::Completeness | RubricId::Informativeness => {
                Dimension::ContentAccuracy
            }
        }
    }
}

impl fmt::Display for RubricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown rubric: {0}")]
pub struct UnknownRubric(pub String);

impl FromStr for RubricId {
    type Err = UnknownRubric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        RubricId::ALL
            .into_iter()
            .find(|r| r.name() == lower)
            .ok_or_else(|| UnknownRubric(s.to_string()))
    }
}

/// A rubric's defining question plus its five Likert guideline texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSpec {
    pub id: RubricId,
    pub dimension: Dimension,
    pub question: String,
    /// Guideline for each rating; index 0 is rating 1, index 4 is rating 5.
    pub likert: [String; 5],
}

impl RubricSpec {
    /// Guideline text for a rating in 1..=5.
    pub fn guideline(&self, rating: u8) -> &str {
        &self.likert[usize::from(rating) - 1]
    }
}

struct RubricText {
    question: &'static str,
    likert: [&'static str; 5],
}

fn builtin_text(id: RubricId) -> RubricText {
    match id {
        RubricId::Cohesion => RubricText {
            question: "Are the sentences connected appropriately such that the resulting synthesis is cohesive?",
            likert: [
                "The sentences within the synthesis are disconnected, resulting in a disjointed and fragmented narrative.",
                "There are attempts at connecting sentences, but the synthesis often feels disjointed.",
                "The sentences are connected in a way that the synthesis is mostly cohesive, with some areas of improvement.",
                "The synthesis is cohesive, with sentences well-connected to form a unified narrative.",
                "The synthesis is highly cohesive, with all sentences and paragraphs logically connected, facilitating a clear and coherent narrative flow.",
            ],
        },
        RubricId::Conciseness => RubricText {
            question: "Is the answer short and clear, without redundant statements?",
            likert: [
                "The synthesis is verbose and cluttered with redundant or irrelevant information, significantly detracting from its clarity and focus.",
                "The synthesis includes some redundant or irrelevant statements, detracting from its clarity.",
                "The synthesis is relatively clear and to the point, but could be more concise by eliminating a few redundant elements.",
                "The synthesis is concise and to the point, with virtually no redundant statements or unnecessary information.",
                "The synthesis is precisely concise, delivering information clearly and directly without any superfluous details or redundancy, enhancing its clarity and impact.",
            ],
        },
        RubricId::Readability => RubricText {
            question: "Does the answer follow appropriate style and structure conventions for academic writing, particularly for readability?",
            likert: [
                "The synthesis is poorly written, with pervasive issues in style, structure, and language use, making it difficult to understand.",
                "The text has noticeable issues with style, structure, or language use, affecting clarity.",
                "The synthesis follows appropriate conventions and uses language correctly, with minor issues in style or structure.",
                "The text is well-structured and easy to read, with language that is appropriately used and only minor stylistic improvements needed.",
                "The synthesis is exceptionally well-written, following stylistic and structural conventions with precise language use, making it accessible and easy to read.",
            ],
        },
        RubricId::Coherence => RubricText {
            question: "Are the ideas connected in a sound and logical manner?",
            likert: [
                "The synthesis lacks logical connection between ideas, leading to a narrative that is confusing and difficult to follow.",
                "The ideas are not always logically connected, leading to a somewhat confusing narrative.",
                "The ideas are logically connected for the most part, but the narrative could be strengthened for better clarity.",
                "The ideas are logically and soundly connected, offering a clear and understandable narrative.",
                "The ideas within the synthesis are connected in a logical and sound manner, forming a coherent and compelling narrative that is easy to follow.",
            ],
        },
        RubricId::Integration => RubricText {
            question: "Are the sources structurally and linguistically well-integrated, using appropriate markers of provenance/quotation and logical connectors for each reference? In addition, are the sources integrated as a single paragraph?",
            likert: [
                "The synthesis fails to integrate the sources in any meaningful way. It lacks appropriate markers, connectors, or transitions between ideas and fails to combine the information into a single, cohesive paragraph.",
                "The sources are somewhat integrated but inconsistently. The use of markers and connectors is sporadic or inappropriately applied, and the information is presented in multiple paragraphs without a clear unifying structure.",
                "The sources are integrated into a coherent manner within one or multiple paragraphs. The transitions or connections could be smoother, and the text would benefit from better paragraph structure to enhance clarity and unity.",
                "The sources are well-integrated, using appropriate markers and connectors to create a seamless narrative. The information is effectively organized into a single paragraph, showing a clear, unified approach.",
                "The synthesis seamlessly integrates information from the various sources, using appropriate markers and connectors to create a smooth and unified narrative. All information is skillfully condensed into a single, well-structured paragraph, exemplifying excellent integration.",
            ],
        },
        RubricId::Relevancy => RubricText {
            question: "Is the information in the answer relevant to the question?",
            likert: [
                "The information provided does not relate to the research question, showing a lack of understanding or connection to the topic.",
                "The information occasionally relates to the research question but lacks direct and consistent relevance.",
                "The information is generally related to the research question, with occasional lapses in direct relevance.",
                "The information is consistently relevant to the research question, with only minor exceptions.",
                "The synthesis is directly and consistently relevant to the research question, demonstrating a deep understanding of the topic and its nuances.",
            ],
        },
        RubricId::Correctness => RubricText {
            question: "Is the information in the answer a correct representation of the content of the provided abstracts?",
            likert: [
                "The synthesis consistently misrepresents or inaccurately portrays the content of the provided abstracts, showing a significant deviation from the original sources.",
                "The synthesis contains several inaccuracies or misinterpretations of the source abstracts.",
                "The synthesis accurately represents most of the content from the provided abstracts but may contain minor errors.",
                "The synthesis provides an accurate representation of the content from the provided abstracts with minor exceptions.",
                "The information in the synthesis is an accurate and faithful representation of the content from the provided abstracts, without any factual errors or misinterpretations.",
            ],
        },
        RubricId::Completeness => RubricText {
            question: "Is the answer a comprehensive encapsulation of the relevant information in the provided abstracts?",
            likert: [
                "The synthesis omits most of the relevant information, failing to capture the essential points or details from the provided abstracts.",
                "Significant portions of relevant information from the provided abstracts are missing.",
                "The synthesis captures a fair amount of the relevant information, though it may overlook some details.",
                "The synthesis includes almost all relevant information, missing only minor details.",
                "The synthesis comprehensively encapsulates all relevant information from the provided abstracts, leaving no pertinent details or points unaddressed.",
            ],
        },
        RubricId::Informativeness => RubricText {
            question: "Is the answer a useful and informative reply to the question?",
            likert: [
                "The synthesis offers no valuable insights or useful information in response to the research question, lacking depth and utility.",
                "The answer provides limited new insights or useful information in response to the research question.",
                "The answer is somewhat informative, offering insights or useful information but not in a comprehensive or detailed manner.",
                "The answer is informative and insightful, providing comprehensive information in response to the research question.",
                "The synthesis is highly informative, providing valuable insights and detailed information that thoroughly addresses the research question.",
            ],
        },
    }
}

/// The canonical spec for one rubric.
pub fn rubric_spec(id: RubricId) -> RubricSpec {
    let text = builtin_text(id);
    RubricSpec {
        id,
        dimension: id.dimension(),
        question: text.question.to_string(),
        likert: text.likert.map(str::to_string),
    }
}

/// Override entry in a rubric-override file: a replacement question and/or
/// replacement guideline texts keyed by rating "1".."5".
#[derive(Debug, Clone, Deserialize)]
pub struct RubricOverride {
    pub question: Option<String>,
    #[serde(default)]
    pub likert: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum RubricSetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("override file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    UnknownRubric(#[from] UnknownRubric),
    #[error("rubric {rubric}: likert key {key:?} is not a rating in 1..=5")]
    BadLikertKey { rubric: RubricId, key: String },
}

/// All nine rubric specs, optionally with overrides applied.
#[derive(Debug, Clone)]
pub struct RubricSet {
    specs: BTreeMap<RubricId, RubricSpec>,
}

impl RubricSet {
    pub fn builtin() -> Self {
        let specs = RubricId::ALL.into_iter().map(|id| (id, rubric_spec(id))).collect();
        RubricSet { specs }
    }

    /// Builtin specs with a JSON override map (`rubric_id -> {question, likert}`)
    /// applied on top.
    pub fn with_overrides_file(path: &Path) -> Result<Self, RubricSetError> {
        let raw = std::fs::read_to_string(path)?;
        let overrides: BTreeMap<String, RubricOverride> = serde_json::from_str(&raw)?;
        let mut set = Self::builtin();
        for (key, ov) in overrides {
            let id = RubricId::from_str(&key)?;
            let spec = set.specs.get_mut(&id).expect("builtin set is complete");
            if let Some(q) = ov.question {
                spec.question = q;
            }
            for (rating_key, text) in ov.likert {
                let rating: usize = rating_key
                    .parse()
                    .ok()
                    .filter(|r| (1..=5).contains(r))
                    .ok_or_else(|| RubricSetError::BadLikertKey {
                        rubric: id,
                        key: rating_key.clone(),
                    })?;
                spec.likert[rating - 1] = text;
            }
        }
        Ok(set)
    }

    pub fn spec(&self, id: RubricId) -> &RubricSpec {
        &self.specs[&id]
    }
}

/// The ordered parts of the evaluation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Context,
    Role,
    TaskDescription,
    EvaluationCharacteristics,
    RatingScale,
    ResponseFormat,
    Notes,
}

impl SectionKind {
    pub const ORDER: [SectionKind; 7] = [
        SectionKind::Context,
        SectionKind::Role,
        SectionKind::TaskDescription,
        SectionKind::EvaluationCharacteristics,
        SectionKind::RatingScale,
        SectionKind::ResponseFormat,
        SectionKind::Notes,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            SectionKind::Context => "Context",
            SectionKind::Role => "Role",
            SectionKind::TaskDescription => "Task Description",
            SectionKind::EvaluationCharacteristics => "Evaluation Characteristics",
            SectionKind::RatingScale => "Rating Scale",
            SectionKind::ResponseFormat => "Response Format",
            SectionKind::Notes => "Notes",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptSection {
    pub kind: SectionKind,
    pub body: String,
}

/// A fully rendered judge prompt: the seven sections plus the flat text
/// actually sent to the evaluator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgePrompt {
    pub sections: Vec<PromptSection>,
    pub rendered: String,
}

/// Build the evaluation prompt for one (record, answer, rubric) triple using
/// the builtin rubric texts.
pub fn build_prompt(record: &QARecord, answer: &str, rubric: RubricId) -> JudgePrompt {
    build_prompt_with(&RubricSet::builtin(), record, answer, rubric)
}

/// As [`build_prompt`] but with a caller-supplied rubric set.
pub fn build_prompt_with(
    set: &RubricSet,
    record: &QARecord,
    answer: &str,
    rubric: RubricId,
) -> JudgePrompt {
    let spec = set.spec(rubric);

    let context = "A science question-answering system produces a synthesized summary answer \
                   to a research question, drawing only on the abstracts of the most relevant \
                   papers. You are reviewing one such synthesized answer."
        .to_string();

    let role = "You are an impartial expert evaluator of synthesized answers to research \
                questions."
        .to_string();

    let mut task = String::new();
    task.push_str(
        "Assess whether the answer accurately synthesizes the information in the provided \
         abstracts in response to the research question.\n\n",
    );
    task.push_str(&format!("Research question: {}\n", record.question));
    for (i, abs) in record.abstracts.iter().enumerate() {
        task.push_str(&format!(
            "\nPaper {n}:\nTitle: {title}\nAbstract: {body}\n",
            n = i + 1,
            title = abs.title,
            body = abs.abstract_text,
        ));
    }
    task.push_str(&format!("\nAnswer under evaluation:\n{answer}"));

    let characteristics = format!(
        "Evaluate exactly one characteristic of the answer.\nCharacteristic: {title} \
         ({dimension})\nDefining question: {question}",
        title = rubric.title(),
        dimension = spec.dimension.label(),
        question = spec.question,
    );

    let mut scale = String::from(
        "Rate the characteristic on a Likert scale from 1 (very bad) to 5 (very good):\n",
    );
    for rating in 1..=5u8 {
        scale.push_str(&format!("{rating}. {}\n", spec.guideline(rating)));
    }
    let scale = scale.trim_end().to_string();

    let response_format = format!(
        "Respond with a single JSON object of the form {{\"{title}\": {{\"rating\": \
         <integer 1-5>, \"rationale\": \"<brief justification>\"}}}}. Output only the JSON \
         object, with no surrounding text.",
        title = rubric.title(),
    );

    let notes = "Be objective. Base the rating only on the research question, the abstracts, \
                 and the answer given above; do not reward confident tone over fidelity to the \
                 sources."
        .to_string();

    let bodies = [context, role, task, characteristics, scale, response_format, notes];
    let sections: Vec<PromptSection> = SectionKind::ORDER
        .into_iter()
        .zip(bodies)
        .map(|(kind, body)| PromptSection { kind, body })
        .collect();

    let rendered = sections
        .iter()
        .map(|s| format!("## {}\n{}", s.kind.heading(), s.body))
        .collect::<Vec<_>>()
        .join("\n\n");

    JudgePrompt { sections, rendered }
}

/// The single fixed sentence appended when a judge reply could not be parsed.
pub fn format_reminder(rubric: RubricId) -> String {
    format!(
        "Reminder: reply with exactly one JSON object of the form {{\"{title}\": {{\"rating\": \
         <integer 1-5>, \"rationale\": \"<brief justification>\"}}}} and nothing else.",
        title = rubric.title(),
    )
}

/// A validated rating/rationale pair extracted from a judge reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedJudgment {
    pub rating: u8,
    pub rationale: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseJudgmentError {
    #[error("malformed judgment: {0}")]
    Malformed(String),
    #[error("rating out of range: {0} (expected 1..=5)")]
    RatingOutOfRange(i64),
    #[error("rubric mismatch: reply names {found}, expected {expected}")]
    RubricMismatch { expected: RubricId, found: RubricId },
}

/// Canonical serialized form of a judgment, the inverse of [`parse_judgment`].
pub fn serialize_judgment(judgment: &ParsedJudgment, rubric: RubricId) -> String {
    serde_json::json!({
        rubric.title(): {
            "rating": judgment.rating,
            "rationale": judgment.rationale,
        }
    })
    .to_string()
}

/// Extract a rating and rationale from a raw judge reply.
///
/// Scans for brace-balanced regions left to right and parses the first one
/// that matches either the rubric-keyed shape
/// `{"<RubricName>": {"rating": .., "rationale": ..}}` (rubric key matched
/// case-insensitively) or the flat shape `{"rating": .., "rationale": ..}`.
/// Balanced regions that parse but match neither shape are skipped, which
/// also handles replies that nest the judgment object under unrelated keys.
pub fn parse_judgment(raw: &str, rubric: RubricId) -> Result<ParsedJudgment, ParseJudgmentError> {
    for candidate in BalancedObjects::new(raw) {
        let value: serde_json::Value = match serde_json::from_str(candidate) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let obj = match value.as_object() {
            Some(o) => o,
            None => continue,
        };

        // Rubric-keyed shape, matching the requested rubric.
        if let Some((_, inner)) = obj
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(rubric.title()))
        {
            return extract_rating_rationale(inner);
        }

        // A single key naming a different rubric is an authoritative mismatch.
        if obj.len() == 1 {
            let (key, inner) = obj.iter().next().expect("len checked");
            if let Ok(found) = RubricId::from_str(key) {
                if inner.get("rating").is_some() {
                    return Err(ParseJudgmentError::RubricMismatch {
                        expected: rubric,
                        found,
                    });
                }
            }
        }

        // Flat shape.
        if obj.contains_key("rating") && obj.contains_key("rationale") {
            return extract_rating_rationale(&value);
        }
    }
    Err(ParseJudgmentError::Malformed(
        "no JSON object with rating and rationale found".to_string(),
    ))
}

fn extract_rating_rationale(value: &serde_json::Value) -> Result<ParsedJudgment, ParseJudgmentError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParseJudgmentError::Malformed("judgment value is not an object".into()))?;
    let rating_value = obj
        .get("rating")
        .ok_or_else(|| ParseJudgmentError::Malformed("missing rating".into()))?;
    let rating = rating_value
        .as_i64()
        .filter(|_| !rating_value.is_f64())
        .ok_or_else(|| ParseJudgmentError::Malformed("rating is not an integer".into()))?;
    if !(1..=5).contains(&rating) {
        return Err(ParseJudgmentError::RatingOutOfRange(rating));
    }
    let rationale = obj
        .get("rationale")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ParseJudgmentError::Malformed("missing rationale".into()))?;
    if rationale.trim().is_empty() {
        return Err(ParseJudgmentError::Malformed("rationale is empty".into()));
    }
    Ok(ParsedJudgment {
        rating: rating as u8,
        rationale: rationale.to_string(),
    })
}

/// Iterator over brace-balanced `{...}` slices of a string, ordered by the
/// position of their opening brace. String literals and escapes are honored
/// so braces inside quoted text do not end a region.
struct BalancedObjects<'a> {
    text: &'a str,
    bytes: &'a [u8],
    next_start: usize,
}

impl<'a> BalancedObjects<'a> {
    fn new(text: &'a str) -> Self {
        BalancedObjects {
            text,
            bytes: text.as_bytes(),
            next_start: 0,
        }
    }

    fn balanced_end(&self, start: usize) -> Option<usize> {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (offset, &b) in self.bytes[start..].iter().enumerate() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_string = false;
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(start + offset + 1);
                    }
                }
                _ => {}
            }
        }
        None
    }
}

impl<'a> Iterator for BalancedObjects<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        while self.next_start < self.bytes.len() {
            let rel = self.bytes[self.next_start..].iter().position(|&b| b == b'{')?;
            let start = self.next_start + rel;
            self.next_start = start + 1;
            if let Some(end) = self.balanced_end(start) {
                return Some(&self.text[start..end]);
            }
        }
        None
    }
}
