//! Evaluation-run orchestration: enumerate the (record x generator x rubric
//! x level x evaluator) grid, execute it against judge backends with bounded
//! per-evaluator concurrency, and persist results to an append-only JSONL
//! file that doubles as the resume state.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::StreamExt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    self, CorpusError, CorpusTag, Level, QARecord, RunLevel, SynthesisVariant, Variant,
};
use crate::judge::{
    backend_for, request_judgment, JudgeBackend, JudgeEndpoint, JudgeError, JudgmentRecord,
    RequestContext,
};
use crate::rubric::{build_prompt, RubricId};

/// Everything needed to execute (or resume) one evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus_path: PathBuf,
    #[serde(default = "default_tag")]
    pub corpus_tag: CorpusTag,
    pub synthesis_paths: Vec<PathBuf>,
    pub rubrics: Vec<RubricId>,
    pub levels: Vec<RunLevel>,
    pub evaluators: Vec<JudgeEndpoint>,
    pub output_path: PathBuf,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_tag() -> CorpusTag {
    CorpusTag::Custom
}

fn default_concurrency() -> usize {
    4
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let raw = std::fs::read_to_string(path)?;
        let manifest: RunManifest = serde_json::from_str(&raw)
            .map_err(|e| RunnerError::InvalidManifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.rubrics.is_empty() {
            return Err(RunnerError::InvalidManifest("rubrics is empty".into()));
        }
        if self.levels.is_empty() {
            return Err(RunnerError::InvalidManifest("levels is empty".into()));
        }
        if self.evaluators.is_empty() {
            return Err(RunnerError::InvalidManifest("evaluators is empty".into()));
        }
        if self.concurrency_limit < 1 {
            return Err(RunnerError::InvalidManifest(
                "concurrency_limit must be >= 1".into(),
            ));
        }
        for endpoint in &self.evaluators {
            endpoint.validate().map_err(RunnerError::Judge)?;
        }
        Ok(())
    }
}

/// Stable identity of one evaluation job.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JobKey {
    pub record_id: String,
    pub generator_model: String,
    pub variant: Variant,
    pub rubric: RubricId,
    pub evaluator_model: String,
}

impl JobKey {
    /// Stable hex hash used for resume bookkeeping, stored in each output line.
    pub fn job_key_hash(&self) -> String {
        let canonical = format!(
            "{}\x1f{}\x1f{}\x1f{}\x1f{}",
            self.record_id, self.generator_model, self.variant, self.rubric, self.evaluator_model
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Enumerate the full evaluation grid in deterministic order.
///
/// Pairing is rubric-matched: each rubric is judged on the benign text and on
/// its own perturbations only, so the job count is exactly
/// `records x generators x rubrics x levels x evaluators`.
pub fn enumerate_jobs(
    record_ids: &[String],
    generators: &[String],
    rubrics: &[RubricId],
    levels: &[RunLevel],
    evaluators: &[String],
) -> Vec<JobKey> {
    let mut jobs =
        Vec::with_capacity(record_ids.len() * generators.len() * rubrics.len() * levels.len() * evaluators.len());
    for record_id in record_ids {
        for generator in generators {
            for &rubric in rubrics {
                for &level in levels {
                    let variant = match level {
                        RunLevel::Benign => Variant::Benign,
                        RunLevel::Subtle => Variant::Perturbed {
                            rubric,
                            level: Level::Subtle,
                        },
                        RunLevel::Extreme => Variant::Perturbed {
                            rubric,
                            level: Level::Extreme,
                        },
                    };
                    for evaluator in evaluators {
                        jobs.push(JobKey {
                            record_id: record_id.clone(),
                            generator_model: generator.clone(),
                            variant,
                            rubric,
                            evaluator_model: evaluator.clone(),
                        });
                    }
                }
            }
        }
    }
    jobs
}

/// One line of the run output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputLine {
    #[serde(flatten)]
    pub record: JudgmentRecord,
    pub job_key_hash: String,
}

/// A job that did not complete, with the reason; re-runnable on resume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobFailure {
    pub job_key_hash: String,
    pub key: JobKey,
    pub reason: String,
}

/// Counts for one `execute_run` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_jobs: usize,
    pub completed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub failures: Vec<JobFailure>,
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("output file {path} is corrupt at line {line}: {message}")]
    CorruptOutput {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

// Resume state parsed from an existing output file: the set of finished job
// hashes, plus how to continue appending safely. A trailing partial line
// (crash mid-write) is truncated away; a final line missing only its newline
// is kept and the newline is supplied on the next append.
#[derive(Debug)]
struct ResumeState {
    done: HashSet<String>,
    keep_bytes: u64,
    needs_newline: bool,
}

fn read_resume_state(path: &Path) -> Result<ResumeState, RunnerError> {
    let content = match std::fs::read_to_string(path) {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(ResumeState {
                done: HashSet::new(),
                keep_bytes: 0,
                needs_newline: false,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut done = HashSet::new();
    let mut keep_bytes = 0u64;
    let mut needs_newline = false;
    let mut line_no = 0usize;
    for line in content.split_inclusive('\n') {
        line_no += 1;
        let complete = line.ends_with('\n');
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if complete {
                keep_bytes += line.len() as u64;
            }
            continue;
        }
        match serde_json::from_str::<OutputLine>(trimmed) {
            Ok(parsed) => {
                done.insert(parsed.job_key_hash);
                keep_bytes += line.len() as u64;
                needs_newline = !complete;
            }
            Err(e) if complete => {
                return Err(RunnerError::CorruptOutput {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                });
            }
            Err(_) => {
                // Partial final line from an interrupted write: drop it.
                break;
            }
        }
    }
    Ok(ResumeState {
        done,
        keep_bytes,
        needs_newline,
    })
}

/// Execute a run, constructing backends from the manifest's endpoints.
pub async fn execute_run(manifest: &RunManifest) -> Result<RunSummary, RunnerError> {
    let mut backends: Vec<Arc<dyn JudgeBackend>> = Vec::with_capacity(manifest.evaluators.len());
    for endpoint in &manifest.evaluators {
        backends.push(Arc::from(backend_for(endpoint)?));
    }
    execute_run_with(manifest, backends).await
}

/// Execute a run against caller-supplied backends (one per evaluator, in
/// manifest order).
pub async fn execute_run_with(
    manifest: &RunManifest,
    backends: Vec<Arc<dyn JudgeBackend>>,
) -> Result<RunSummary, RunnerError> {
    manifest.validate()?;
    assert_eq!(
        backends.len(),
        manifest.evaluators.len(),
        "one backend per evaluator"
    );

    let records = corpus::load_corpus(&manifest.corpus_path, manifest.corpus_tag)?;
    let record_index: HashMap<String, QARecord> = records
        .iter()
        .map(|r| (r.record_id.clone(), r.clone()))
        .collect();
    let record_ids: Vec<String> = records.iter().map(|r| r.record_id.clone()).collect();

    let mut syntheses: Vec<SynthesisVariant> = Vec::new();
    for path in &manifest.synthesis_paths {
        syntheses.extend(corpus::load_syntheses(path)?);
    }
    let generators: Vec<String> = syntheses
        .iter()
        .map(|s| s.generator_model.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let text_index: HashMap<(String, String, Variant), String> = syntheses
        .into_iter()
        .map(|s| ((s.record_id.clone(), s.generator_model.clone(), s.variant), s.text))
        .collect();

    let evaluator_names: Vec<String> = manifest
        .evaluators
        .iter()
        .map(|e| e.model_name.clone())
        .collect();
    let jobs = enumerate_jobs(
        &record_ids,
        &generators,
        &manifest.rubrics,
        &manifest.levels,
        &evaluator_names,
    );
    let total_jobs = jobs.len();

    let resume = read_resume_state(&manifest.output_path)?;
    let existing_len = std::fs::metadata(&manifest.output_path).map(|m| m.len()).unwrap_or(0);
    if resume.keep_bytes < existing_len {
        // Drop a partial trailing line before appending.
        let file = OpenOptions::new().write(true).open(&manifest.output_path)?;
        file.set_len(resume.keep_bytes)?;
    }

    let (pending, skipped): (Vec<JobKey>, Vec<JobKey>) = jobs
        .into_iter()
        .partition(|job| !resume.done.contains(&job.job_key_hash()));
    let skipped = skipped.len();

    // Single writer: every completed judgment is serialized through this
    // channel and appended as one line + flush, so any file prefix is a
    // valid partial state.
    let (tx, mut rx) = tokio::sync::mpsc::unbounded_channel::<OutputLine>();
    let output_path = manifest.output_path.clone();
    let needs_newline = resume.needs_newline;
    let writer = tokio::spawn(async move {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&output_path)?;
        let mut first = true;
        let mut written = 0usize;
        while let Some(line) = rx.recv().await {
            let mut buf = String::new();
            if first && needs_newline {
                buf.push('\n');
            }
            first = false;
            buf.push_str(&serde_json::to_string(&line).expect("judgment serializes"));
            buf.push('\n');
            file.write_all(buf.as_bytes())?;
            file.flush()?;
            written += 1;
        }
        Ok::<usize, std::io::Error>(written)
    });

    let failures = Arc::new(std::sync::Mutex::new(Vec::<JobFailure>::new()));
    let record_index = Arc::new(record_index);
    let text_index = Arc::new(text_index);

    let mut evaluator_tasks = Vec::new();
    for (endpoint, backend) in manifest.evaluators.iter().zip(backends) {
        let endpoint = endpoint.clone();
        let evaluator_jobs: Vec<JobKey> = pending
            .iter()
            .filter(|j| j.evaluator_model == endpoint.model_name)
            .cloned()
            .collect();
        let tx = tx.clone();
        let failures = Arc::clone(&failures);
        let record_index = Arc::clone(&record_index);
        let text_index = Arc::clone(&text_index);
        let limit = manifest.concurrency_limit;

        evaluator_tasks.push(tokio::spawn(async move {
            futures::stream::iter(evaluator_jobs)
                .for_each_concurrent(limit, |job| {
                    let endpoint = endpoint.clone();
                    let backend = Arc::clone(&backend);
                    let tx = tx.clone();
                    let failures = Arc::clone(&failures);
                    let record_index = Arc::clone(&record_index);
                    let text_index = Arc::clone(&text_index);
                    async move {
                        let outcome = run_one_job(
                            &job,
                            &endpoint,
                            backend.as_ref(),
                            &record_index,
                            &text_index,
                        )
                        .await;
                        match outcome {
                            Ok(record) => {
                                let line = OutputLine {
                                    job_key_hash: job.job_key_hash(),
                                    record,
                                };
                                // Receiver outlives senders; ignore close races.
                                let _ = tx.send(line);
                            }
                            Err(reason) => {
                                failures.lock().expect("failure list poisoned").push(JobFailure {
                                    job_key_hash: job.job_key_hash(),
                                    key: job,
                                    reason,
                                });
                            }
                        }
                    }
                })
                .await;
        }));
    }
    drop(tx);

    for task in evaluator_tasks {
        task.await.expect("evaluator task panicked");
    }
    let completed = writer.await.expect("writer task panicked")?;

    let mut failures = Arc::try_unwrap(failures)
        .expect("all workers finished")
        .into_inner()
        .expect("failure list poisoned");
    failures.sort_by(|a, b| a.job_key_hash.cmp(&b.job_key_hash));

    let summary = RunSummary {
        total_jobs,
        completed,
        failed: failures.len(),
        skipped,
        failures,
    };
    write_failures_sidecar(&manifest.output_path, &summary.failures)?;
    Ok(summary)
}

async fn run_one_job(
    job: &JobKey,
    endpoint: &JudgeEndpoint,
    backend: &dyn JudgeBackend,
    record_index: &HashMap<String, QARecord>,
    text_index: &HashMap<(String, String, Variant), String>,
) -> Result<JudgmentRecord, String> {
    let record = record_index
        .get(&job.record_id)
        .ok_or_else(|| format!("record {} not in corpus", job.record_id))?;
    let text_key = (job.record_id.clone(), job.generator_model.clone(), job.variant);
    let text = text_index
        .get(&text_key)
        .ok_or_else(|| format!("missing synthesis variant {}", job.variant))?;
    let prompt = build_prompt(record, text, job.rubric);
    let ctx = RequestContext {
        record_id: &job.record_id,
        generator_model: &job.generator_model,
        variant: &job.variant,
        rubric: job.rubric,
        evaluator_model: &job.evaluator_model,
    };
    request_judgment(backend, endpoint, &prompt, job.rubric, &ctx)
        .await
        .map_err(|e| e.to_string())
}

fn write_failures_sidecar(output_path: &Path, failures: &[JobFailure]) -> Result<(), RunnerError> {
    let sidecar = sidecar_path(output_path);
    if failures.is_empty() {
        if sidecar.exists() {
            std::fs::remove_file(&sidecar)?;
        }
        return Ok(());
    }
    crate::jsonl::write_jsonl(&sidecar, failures).map_err(CorpusError::from)?;
    Ok(())
}

/// Path of the failures sidecar written next to the run output.
pub fn sidecar_path(output_path: &Path) -> PathBuf {
    let mut name = output_path.file_name().unwrap_or_default().to_os_string();
    name.push(".failures.jsonl");
    output_path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn job_count_matches_published_grid_sizes() {
        let rubrics = RubricId::ALL.to_vec();
        let levels = vec![RunLevel::Benign, RunLevel::Subtle, RunLevel::Extreme];
        let jobs = enumerate_jobs(&ids("r", 348), &ids("g", 1), &rubrics, &levels, &ids("e", 4));
        assert_eq!(jobs.len(), 37_584);
        let jobs = enumerate_jobs(&ids("r", 73), &ids("g", 1), &rubrics, &levels, &ids("e", 4));
        assert_eq!(jobs.len(), 7_884);
    }

    #[test]
    fn singleton_grid_has_one_job() {
        let jobs = enumerate_jobs(
            &ids("r", 1),
            &ids("g", 1),
            &[RubricId::Coherence],
            &[RunLevel::Benign],
            &ids("e", 1),
        );
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].variant, Variant::Benign);
    }

    #[test]
    fn non_benign_jobs_are_rubric_matched() {
        let rubrics = vec![RubricId::Coherence, RubricId::Cohesion];
        let jobs = enumerate_jobs(
            &ids("r", 1),
            &ids("g", 1),
            &rubrics,
            &[RunLevel::Subtle, RunLevel::Extreme],
            &ids("e", 1),
        );
        for job in &jobs {
            assert_eq!(job.variant.rubric(), Some(job.rubric));
        }
    }

    #[test]
    fn enumeration_is_deterministic_and_unique() {
        let rubrics = RubricId::ALL.to_vec();
        let levels = vec![RunLevel::Benign, RunLevel::Subtle, RunLevel::Extreme];
        let a = enumerate_jobs(&ids("r", 5), &ids("g", 2), &rubrics, &levels, &ids("e", 2));
        let b = enumerate_jobs(&ids("r", 5), &ids("g", 2), &rubrics, &levels, &ids("e", 2));
        assert_eq!(a, b);
        let hashes: HashSet<String> = a.iter().map(JobKey::job_key_hash).collect();
        assert_eq!(hashes.len(), a.len(), "hashes are collision-free on this grid");
    }

    #[test]
    fn job_key_hash_is_stable() {
        let key = JobKey {
            record_id: "r0".into(),
            generator_model: "gen".into(),
            variant: Variant::Benign,
            rubric: RubricId::Coherence,
            evaluator_model: "eval".into(),
        };
        // Pinned: resume state depends on this value not drifting.
        assert_eq!(key.job_key_hash(), key.job_key_hash());
        assert_eq!(key.job_key_hash().len(), 16);
    }

    #[test]
    fn resume_state_tolerates_partial_trailing_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let record = JudgmentRecord {
            record_id: "r".into(),
            generator_model: "g".into(),
            variant: Variant::Benign,
            rubric: RubricId::Coherence,
            evaluator_model: "e".into(),
            rating: 5,
            rationale: "ok".into(),
            raw_response: "{}".into(),
            attempt_count: 1,
            timestamp: "t".into(),
        };
        let line = serde_json::to_string(&OutputLine {
            record,
            job_key_hash: "abc".into(),
        })
        .unwrap();
        std::fs::write(&path, format!("{line}\n{{\"record_id\": \"trunc")).unwrap();
        let state = read_resume_state(&path).unwrap();
        assert_eq!(state.done.len(), 1);
        assert_eq!(state.keep_bytes as usize, line.len() + 1);
    }

    #[test]
    fn resume_state_rejects_corrupt_middle_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        std::fs::write(&path, "garbage\n{\"also\": \"bad\"}\n").unwrap();
        assert!(matches!(
            read_resume_state(&path).unwrap_err(),
            RunnerError::CorruptOutput { line: 1, .. }
        ));
    }
}
