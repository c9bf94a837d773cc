//! Judge backends: an OpenAI-compatible chat-completions client, a scripted
//! deterministic mock, and the retry wrapper that turns raw replies into
//! validated judgment records.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Variant;
use crate::jsonl;
use crate::rubric::{format_reminder, parse_judgment, JudgePrompt, RubricId};

/// Connection settings for one evaluator model.
///
/// When `mock_script` is set the endpoint is served by a [`MockJudge`]
/// replaying that script instead of a live HTTP backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeEndpoint {
    #[serde(default)]
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
}

fn default_timeout() -> u64 {
    60
}

fn default_max_retries() -> u32 {
    2
}

impl JudgeEndpoint {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.timeout_secs == 0 {
            return Err(JudgeError::Config("timeout must be > 0".to_string()));
        }
        if self.temperature < 0.0 {
            return Err(JudgeError::Config("temperature must be >= 0".to_string()));
        }
        if self.base_url.trim().is_empty() && self.mock_script.is_none() {
            return Err(JudgeError::Config(format!(
                "endpoint {}: base_url empty and no mock_script given",
                self.model_name
            )));
        }
        Ok(())
    }
}

/// One validated rating with its provenance and bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub record_id: String,
    pub generator_model: String,
    pub variant: Variant,
    pub rubric: RubricId,
    pub evaluator_model: String,
    pub rating: u8,
    pub rationale: String,
    pub raw_response: String,
    pub attempt_count: u32,
    pub timestamp: String,
}

/// Load judgment records from JSONL. Extra per-line fields (such as the
/// runner's `job_key_hash`) are ignored.
pub fn load_judgments(path: &Path) -> Result<Vec<JudgmentRecord>, jsonl::JsonlError> {
    jsonl::read_jsonl(path)
}

/// Identity of one evaluation request; the mock keys its script on this.
#[derive(Debug, Clone, Copy)]
pub struct RequestContext<'a> {
    pub record_id: &'a str,
    pub generator_model: &'a str,
    pub variant: &'a Variant,
    pub rubric: RubricId,
    pub evaluator_model: &'a str,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("http error: {0}")]
    Http(#[from] reqwest::Error),
    #[error("http status {0}: {1}")]
    Status(u16, String),
    #[error("response has no message content")]
    MissingContent,
    #[error("mock script: {0}")]
    Script(String),
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("all {attempts} attempt(s) returned unparseable judgments; last error: {last_error}")]
    Unparseable {
        attempts: u32,
        last_error: String,
        last_raw: String,
    },
}

/// Anything that can answer an evaluation prompt. Implementations must be
/// shareable across concurrent in-flight requests.
#[async_trait]
pub trait JudgeBackend: Send + Sync {
    async fn complete(
        &self,
        ctx: &RequestContext<'_>,
        prompt: &str,
        temperature: f64,
    ) -> Result<String, TransportError>;
}

/// OpenAI-compatible chat-completions client.
pub struct HttpJudge {
    client: reqwest::Client,
    base_url: String,
    model: String,
    bearer: Option<String>,
}

impl HttpJudge {
    pub fn new(endpoint: &JudgeEndpoint) -> Result<Self, JudgeError> {
        endpoint.validate()?;
        let bearer = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                JudgeError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| JudgeError::Config(e.to_string()))?;
        Ok(HttpJudge {
            client,
            base_url: endpoint.base_url.trim_end_matches('/').to_string(),
            model: endpoint.model_name.clone(),
            bearer,
        })
    }
}

#[derive(Deserialize)]
struct ChatCompletionReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[async_trait]
impl JudgeBackend for HttpJudge {
    async fn complete(
        &self,
        _ctx: &RequestContext<'_>,
        prompt: &str,
        temperature: f64,
    ) -> Result<String, TransportError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        });
        let mut request = self.client.post(&url).json(&body);
        if let Some(token) = &self.bearer {
            request = request.bearer_auth(token);
        }
        let response = request.send().await?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            let prefix: String = text.chars().take(200).collect();
            return Err(TransportError::Status(status.as_u16(), prefix));
        }
        let reply: ChatCompletionReply = response.json().await?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(TransportError::MissingContent)
    }
}

// A scripted reply is either one string replayed forever or a sequence
// replayed in order, with the final entry repeating.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReplySeq {
    One(String),
    Many(Vec<String>),
}

impl ReplySeq {
    fn get(&self, call: usize) -> Option<&str> {
        match self {
            ReplySeq::One(s) => Some(s),
            ReplySeq::Many(v) => v.get(call.min(v.len().saturating_sub(1))).map(String::as_str),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            ReplySeq::One(_) => false,
            ReplySeq::Many(v) => v.is_empty(),
        }
    }
}

/// Scripted replies for a [`MockJudge`]. Lookup precedence:
/// `by_key["record_id|variant|rubric"]`, then `by_level["benign|subtle|extreme"]`,
/// then `default`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ReplySeq>,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub by_level: HashMap<String, ReplySeq>,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub by_key: HashMap<String, ReplySeq>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| JudgeError::Config(format!("mock script {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| JudgeError::Config(format!("mock script {}: {e}", path.display())))
    }

    /// Script with only a default reply.
    pub fn with_default(reply: impl Into<String>) -> Self {
        MockScript {
            default: Some(ReplySeq::One(reply.into())),
            ..Default::default()
        }
    }

    /// Script keyed on variant level.
    pub fn by_levels(benign: &str, subtle: &str, extreme: &str) -> Self {
        let mut by_level = HashMap::new();
        by_level.insert("benign".to_string(), ReplySeq::One(benign.to_string()));
        by_level.insert("subtle".to_string(), ReplySeq::One(subtle.to_string()));
        by_level.insert("extreme".to_string(), ReplySeq::One(extreme.to_string()));
        MockScript {
            by_level,
            ..Default::default()
        }
    }
}

/// Deterministic scripted judge used for tests and dry runs.
#[derive(Debug)]
pub struct MockJudge {
    script: MockScript,
    calls: Mutex<HashMap<String, usize>>,
}

impl MockJudge {
    pub fn new(script: MockScript) -> Result<Self, JudgeError> {
        let has_default = script.default.as_ref().is_some_and(|d| !d.is_empty());
        let has_entries = script.by_level.values().any(|r| !r.is_empty())
            || script.by_key.values().any(|r| !r.is_empty());
        if !has_default && !has_entries {
            return Err(JudgeError::Config(
                "mock script has no default and no entries".to_string(),
            ));
        }
        Ok(MockJudge {
            script,
            calls: Mutex::new(HashMap::new()),
        })
    }

    /// A convenient reply body: valid judgment JSON for the given rating.
    pub fn reply_json(rubric_title: &str, rating: u8, rationale: &str) -> String {
        serde_json::json!({ rubric_title: { "rating": rating, "rationale": rationale } })
            .to_string()
    }
}

#[async_trait]
impl JudgeBackend for MockJudge {
    async fn complete(
        &self,
        ctx: &RequestContext<'_>,
        _prompt: &str,
        _temperature: f64,
    ) -> Result<String, TransportError> {
        let key = format!("{}|{}|{}", ctx.record_id, ctx.variant, ctx.rubric);
        let seq = self
            .script
            .by_key
            .get(&key)
            .or_else(|| self.script.by_level.get(ctx.variant.level_name()))
            .or(self.script.default.as_ref())
            .ok_or_else(|| TransportError::Script(format!("no scripted reply for {key}")))?;
        let call = {
            let mut calls = self.calls.lock().expect("mock call counter poisoned");
            let counter = calls.entry(key.clone()).or_insert(0);
            let current = *counter;
            *counter += 1;
            current
        };
        seq.get(call)
            .map(str::to_string)
            .ok_or_else(|| TransportError::Script(format!("empty reply sequence for {key}")))
    }
}

/// Build the backend an endpoint describes: scripted mock when `mock_script`
/// is set, HTTP otherwise.
pub fn backend_for(endpoint: &JudgeEndpoint) -> Result<Box<dyn JudgeBackend>, JudgeError> {
    endpoint.validate()?;
    match &endpoint.mock_script {
        Some(path) => Ok(Box::new(MockJudge::new(MockScript::load(path)?)?)),
        None => Ok(Box::new(HttpJudge::new(endpoint)?)),
    }
}

/// Send a prompt and return a validated judgment, re-asking with a format
/// reminder on malformed replies. Total upstream calls never exceed
/// `max_retries + 1`.
pub async fn request_judgment(
    backend: &dyn JudgeBackend,
    endpoint: &JudgeEndpoint,
    prompt: &JudgePrompt,
    rubric: RubricId,
    ctx: &RequestContext<'_>,
) -> Result<JudgmentRecord, JudgeError> {
    let max_attempts = endpoint.max_retries + 1;
    let mut saw_malformed = false;
    let mut last_was_parse = false;
    let mut last_parse: Option<(String, String)> = None;
    let mut last_transport: Option<String> = None;
    let mut attempts = 0u32;

    while attempts < max_attempts {
        attempts += 1;
        let prompt_text = if saw_malformed {
            format!("{}\n\n{}", prompt.rendered, format_reminder(rubric))
        } else {
            prompt.rendered.clone()
        };
        match backend.complete(ctx, &prompt_text, endpoint.temperature).await {
            Ok(raw) => match parse_judgment(&raw, rubric) {
                Ok(parsed) => {
                    return Ok(JudgmentRecord {
                        record_id: ctx.record_id.to_string(),
                        generator_model: ctx.generator_model.to_string(),
                        variant: *ctx.variant,
                        rubric,
                        evaluator_model: ctx.evaluator_model.to_string(),
                        rating: parsed.rating,
                        rationale: parsed.rationale,
                        raw_response: raw,
                        attempt_count: attempts,
                        timestamp: chrono::Utc::now().to_rfc3339(),
                    });
                }
                Err(err) => {
                    saw_malformed = true;
                    last_was_parse = true;
                    last_parse = Some((err.to_string(), raw));
                }
            },
            Err(err) => {
                last_was_parse = false;
                last_transport = Some(err.to_string());
            }
        }
    }

    match (last_parse, last_transport) {
        (Some((last_error, last_raw)), transport) => {
            if last_was_parse || transport.is_none() {
                Err(JudgeError::Unparseable {
                    attempts,
                    last_error,
                    last_raw,
                })
            } else {
                Err(JudgeError::Transport {
                    attempts,
                    message: transport.expect("checked above"),
                })
            }
        }
        (None, Some(message)) => Err(JudgeError::Transport { attempts, message }),
        (None, None) => Err(JudgeError::Transport {
            attempts,
            message: "no attempts were made".to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AbstractRef, CorpusTag, QARecord};
    use crate::rubric::build_prompt;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn record() -> QARecord {
        QARecord {
            record_id: "r1".into(),
            question: "Q?".into(),
            research_field: "CS".into(),
            abstracts: vec![AbstractRef {
                title: "T".into(),
                abstract_text: "A".into(),
                source_id: "s".into(),
            }],
            corpus_tag: CorpusTag::Custom,
            extra: Default::default(),
        }
    }

    fn endpoint(max_retries: u32) -> JudgeEndpoint {
        JudgeEndpoint {
            base_url: String::new(),
            model_name: "mock-judge".into(),
            api_key_env: None,
            timeout_secs: 5,
            max_retries,
            temperature: 0.0,
            mock_script: Some(PathBuf::from("unused")),
        }
    }

    fn ctx<'a>(variant: &'a Variant) -> RequestContext<'a> {
        RequestContext {
            record_id: "r1",
            generator_model: "gen",
            variant,
            rubric: RubricId::Coherence,
            evaluator_model: "mock-judge",
        }
    }

    #[tokio::test]
    async fn valid_reply_succeeds_on_first_attempt() {
        let mock = MockJudge::new(MockScript::with_default(MockJudge::reply_json(
            "Coherence", 5, "clear",
        )))
        .unwrap();
        let variant = Variant::Benign;
        let prompt = build_prompt(&record(), "Answer.", RubricId::Coherence);
        let rec = request_judgment(&mock, &endpoint(2), &prompt, RubricId::Coherence, &ctx(&variant))
            .await
            .unwrap();
        assert_eq!(rec.rating, 5);
        assert_eq!(rec.attempt_count, 1);
    }

    #[tokio::test]
    async fn malformed_then_valid_takes_two_attempts() {
        let script = MockScript {
            default: Some(ReplySeq::Many(vec![
                "Sure, let me think about this.".to_string(),
                MockJudge::reply_json("Coherence", 3, "fine"),
            ])),
            ..Default::default()
        };
        let mock = MockJudge::new(script).unwrap();
        let variant = Variant::Benign;
        let prompt = build_prompt(&record(), "Answer.", RubricId::Coherence);
        let rec = request_judgment(&mock, &endpoint(2), &prompt, RubricId::Coherence, &ctx(&variant))
            .await
            .unwrap();
        assert_eq!(rec.rating, 3);
        assert_eq!(rec.attempt_count, 2);
    }

    #[tokio::test]
    async fn all_malformed_is_unparseable_with_bounded_attempts() {
        let mock = MockJudge::new(MockScript::with_default("prose only")).unwrap();
        let variant = Variant::Benign;
        let prompt = build_prompt(&record(), "Answer.", RubricId::Coherence);
        let err = request_judgment(&mock, &endpoint(2), &prompt, RubricId::Coherence, &ctx(&variant))
            .await
            .unwrap_err();
        match err {
            JudgeError::Unparseable { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected Unparseable, got {other}"),
        }
    }

    #[tokio::test]
    async fn retry_prompt_carries_the_format_reminder() {
        struct Recorder {
            calls: AtomicU32,
            saw_reminder: AtomicU32,
        }
        #[async_trait]
        impl JudgeBackend for Recorder {
            async fn complete(
                &self,
                _ctx: &RequestContext<'_>,
                prompt: &str,
                _temperature: f64,
            ) -> Result<String, TransportError> {
                let call = self.calls.fetch_add(1, Ordering::SeqCst);
                if call > 0 && prompt.contains("Reminder:") {
                    self.saw_reminder.fetch_add(1, Ordering::SeqCst);
                }
                Ok("no json here".to_string())
            }
        }
        let recorder = Recorder {
            calls: AtomicU32::new(0),
            saw_reminder: AtomicU32::new(0),
        };
        let variant = Variant::Benign;
        let prompt = build_prompt(&record(), "Answer.", RubricId::Coherence);
        let _ = request_judgment(&recorder, &endpoint(2), &prompt, RubricId::Coherence, &ctx(&variant))
            .await;
        assert_eq!(recorder.calls.load(Ordering::SeqCst), 3);
        assert_eq!(recorder.saw_reminder.load(Ordering::SeqCst), 2);
    }

    #[tokio::test]
    async fn level_keyed_script_differentiates_variants() {
        let script = MockScript::by_levels(
            &MockJudge::reply_json("Coherence", 5, "benign"),
            &MockJudge::reply_json("Coherence", 3, "subtle"),
            &MockJudge::reply_json("Coherence", 1, "extreme"),
        );
        let mock = MockJudge::new(script).unwrap();
        let prompt = build_prompt(&record(), "Answer.", RubricId::Coherence);

        let benign = Variant::Benign;
        let extreme = Variant::Perturbed {
            rubric: RubricId::Coherence,
            level: crate::corpus::Level::Extreme,
        };
        let r1 = request_judgment(&mock, &endpoint(0), &prompt, RubricId::Coherence, &ctx(&benign))
            .await
            .unwrap();
        let r2 = request_judgment(&mock, &endpoint(0), &prompt, RubricId::Coherence, &ctx(&extreme))
            .await
            .unwrap();
        assert_eq!(r1.rating, 5);
        assert_eq!(r2.rating, 1);
    }

    #[test]
    fn empty_script_is_a_construction_error() {
        let err = MockJudge::new(MockScript::default()).unwrap_err();
        assert!(matches!(err, JudgeError::Config(_)));
    }

    #[test]
    fn endpoint_validation() {
        let mut ep = endpoint(1);
        ep.mock_script = None;
        assert!(ep.validate().is_err(), "empty base_url without mock");
        ep.base_url = "http://localhost:9999".to_string();
        assert!(ep.validate().is_ok());
        ep.timeout_secs = 0;
        assert!(ep.validate().is_err());
    }
}
