//! `critiq` command line: validate corpora, generate adversarial variants,
//! drive judge runs, aggregate results, build preference pairs, and compute
//! pairwise similarity matrices.
//!
//! Exit codes: 0 success, 1 validation/domain errors, 2 usage errors.
//! Diagnostics go to stderr; data goes to files or stdout.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use critiq_core::analysis::{
    aggregate_means, evaluator_generator_matrix, optimism_report, self_preference_check,
    AnalysisError, ReportThresholds,
};
use critiq_core::corpus::{
    corpus_stats, load_corpus, load_syntheses, write_syntheses, CorpusTag, Level, RunLevel,
    SynthesisVariant, Variant,
};
use critiq_core::judge::{load_judgments, JudgeEndpoint};
use critiq_core::metrics::{pairwise_matrix, MetricName, MetricOptions};
use critiq_core::perturb::{
    perturb_all, cells_to_syntheses, InjectionPools, PerturbationConfig,
};
use critiq_core::prefpair::{
    build_adversarial_pairs, build_mixed_pairs, export_pairs, MixMode, PromptIndex,
    SamplingPolicy,
};
use critiq_core::rubric::RubricId;
use critiq_core::runner::{execute_run, RunManifest};

use config::Config;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "critiq",
    version,
    about = "Rubric-based LLM-as-a-judge evaluation harness"
)]
struct Cli {
    /// JSON config file supplying defaults for any flag; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus (and optionally synthesis files) and print stats.
    Validate(ValidateArgs),
    /// Generate rubric-targeted adversarial variants of benign syntheses.
    Perturb(PerturbArgs),
    /// Run the evaluation grid against judge endpoints; resumable.
    Judge(JudgeArgs),
    /// Aggregate judgment records into matrices and robustness reports.
    Analyze(AnalyzeArgs),
    /// Build preference pairs from judgments for alignment training.
    Prefpairs(PrefpairsArgs),
    /// Compute pairwise generator-vs-generator similarity matrices.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus JSONL file.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Corpus family: orkgsyn, bioasq, or custom.
    #[arg(long, value_name = "TAG")]
    tag: Option<String>,
    /// Synthesis JSONL file(s) to validate against the corpus.
    #[arg(long, value_name = "FILE", action = clap::ArgAction::Append)]
    synth: Vec<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "TAG")]
    tag: Option<String>,
    /// Benign synthesis JSONL file(s).
    #[arg(long, value_name = "FILE", action = clap::ArgAction::Append)]
    synth: Vec<PathBuf>,
    /// Injection pools JSON file.
    #[arg(long, value_name = "FILE")]
    pools: Option<PathBuf>,
    /// Deterministic seed for pool picks and shuffles.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated rubric subset (default: all nine).
    #[arg(long, value_name = "LIST")]
    rubrics: Option<String>,
    /// Comma-separated level subset of subtle,extreme (default: both).
    #[arg(long, value_name = "LIST")]
    levels: Option<String>,
    /// Output synthesis JSONL file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JudgeArgs {
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "TAG")]
    tag: Option<String>,
    /// Synthesis JSONL file(s), benign and/or perturbed.
    #[arg(long, value_name = "FILE", action = clap::ArgAction::Append)]
    synth: Vec<PathBuf>,
    /// JSON file with the evaluator endpoint list.
    #[arg(long = "endpoint-config", value_name = "FILE")]
    endpoint_config: Option<PathBuf>,
    /// Output judgments JSONL file (append; already-done jobs are skipped).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Comma-separated rubric subset (default: all nine).
    #[arg(long, value_name = "LIST")]
    rubrics: Option<String>,
    /// Comma-separated subset of benign,subtle,extreme (default: all three).
    #[arg(long, value_name = "LIST")]
    levels: Option<String>,
    /// Maximum in-flight requests per evaluator.
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Judgments JSONL file (runner output).
    #[arg(long, value_name = "FILE")]
    judgments: Option<PathBuf>,
    /// Comma-separated grouping fields for a mean-rating table.
    #[arg(long = "group-by", value_name = "LIST")]
    group_by: Option<String>,
    /// Directory for report artifacts (report.json, matrix.csv, ...).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PrefpairsArgs {
    #[arg(long, value_name = "FILE")]
    judgments: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "TAG")]
    tag: Option<String>,
    /// Synthesis JSONL file(s) used to render each pair's input prompt.
    #[arg(long, value_name = "FILE", action = clap::ArgAction::Append)]
    synth: Vec<PathBuf>,
    /// Maximum pairs per (rubric, evaluator) cell.
    #[arg(long)]
    cap: Option<usize>,
    /// adversarial_only or benign_plus_adversarial.
    #[arg(long = "mix-mode", value_name = "MODE")]
    mix_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output pairs JSONL file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Synthesis JSONL file(s); benign rows are compared across generators.
    #[arg(long, value_name = "FILE", action = clap::ArgAction::Append)]
    synth: Vec<PathBuf>,
    /// bleu, rouge1, rougel, meteor, nist, or wer.
    #[arg(long, value_name = "NAME")]
    metric: Option<String>,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// Enable add-one smoothing for BLEU orders n >= 2.
    #[arg(long)]
    smoothing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("critiq: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let code = match cli.command {
        Command::Validate(args) => cmd_validate(args, &config),
        Command::Perturb(args) => cmd_perturb(args, &config),
        Command::Judge(args) => cmd_judge(args, &config),
        Command::Analyze(args) => cmd_analyze(args, &config),
        Command::Prefpairs(args) => cmd_prefpairs(args, &config),
        Command::Metrics(args) => cmd_metrics(args, &config),
    };
    ExitCode::from(code)
}

// A missing required flag is a usage error (exit 2), like any clap error.
struct Usage(String);

fn require<T>(value: Option<T>, flag: &str, subcommand: &str) -> Result<T, Usage> {
    value.ok_or_else(|| {
        Usage(format!(
            "missing required flag --{flag}\n\nUsage: critiq {subcommand} --{flag} <VALUE> ...\nRun `critiq {subcommand} --help` for details."
        ))
    })
}

fn usage_exit(u: Usage) -> u8 {
    eprintln!("critiq: {}", u.0);
    EXIT_USAGE
}

fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("critiq: {message}");
    EXIT_FAILURE
}

fn parse_tag(tag: Option<String>, config: &Config) -> Result<CorpusTag, String> {
    let tag = tag.or_else(|| config.string("tag"));
    match tag {
        None => Ok(CorpusTag::Custom),
        Some(t) => CorpusTag::from_str(&t),
    }
}

fn parse_rubrics(spec: Option<String>, config: &Config) -> Result<Vec<RubricId>, String> {
    let spec = spec.or_else(|| config.string("rubrics"));
    match spec {
        None => Ok(RubricId::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| RubricId::from_str(p).map_err(|e| e.to_string()))
            .collect(),
    }
}

fn parse_levels(spec: Option<String>, config: &Config, default: &[RunLevel]) -> Result<Vec<RunLevel>, String> {
    let spec = spec.or_else(|| config.string("levels"));
    match spec {
        None => Ok(default.to_vec()),
        Some(s) => s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(RunLevel::from_str)
            .collect(),
    }
}

fn cmd_validate(args: ValidateArgs, config: &Config) -> u8 {
    let corpus_path = match require(
        args.corpus.or_else(|| config.path("corpus")),
        "corpus",
        "validate",
    ) {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let tag = match parse_tag(args.tag, config) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };

    let records = match load_corpus(&corpus_path, tag) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let stats = corpus_stats(&records);
    println!("records: {}", stats.record_count);
    let mut fields: Vec<(&String, &usize)> = stats.field_frequencies.iter().collect();
    fields.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    println!("research fields ({}):", fields.len());
    for (field, count) in fields.iter().take(10) {
        println!("  {count:>6}  {field}");
    }
    if fields.len() > 10 {
        println!("  ... {} more", fields.len() - 10);
    }
    println!("abstracts per record:");
    for (n, count) in &stats.abstract_count_histogram {
        println!("  N={n:<3} x{count}");
    }

    let synth_paths: Vec<PathBuf> = if args.synth.is_empty() {
        config.paths("synth")
    } else {
        args.synth
    };
    let known_ids: std::collections::HashSet<&str> =
        records.iter().map(|r| r.record_id.as_str()).collect();
    for path in &synth_paths {
        let synths = match load_syntheses(path) {
            Ok(s) => s,
            Err(e) => return fail(format!("{}: {e}", path.display())),
        };
        let orphans: Vec<&SynthesisVariant> = synths
            .iter()
            .filter(|s| !known_ids.contains(s.record_id.as_str()))
            .collect();
        if !orphans.is_empty() {
            return fail(format!(
                "{}: {} syntheses reference records missing from the corpus (first: {})",
                path.display(),
                orphans.len(),
                orphans[0].record_id
            ));
        }
        println!("{}: {} syntheses ok", path.display(), synths.len());
    }
    EXIT_OK
}

fn cmd_perturb(args: PerturbArgs, config: &Config) -> u8 {
    let corpus_path = match require(args.corpus.or_else(|| config.path("corpus")), "corpus", "perturb") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let synth_paths = if args.synth.is_empty() { config.paths("synth") } else { args.synth };
    if synth_paths.is_empty() {
        return usage_exit(Usage("missing required flag --synth\n\nRun `critiq perturb --help` for details.".into()));
    }
    let pools_path = match require(args.pools.or_else(|| config.path("pools")), "pools", "perturb") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let out_path = match require(args.out.or_else(|| config.path("out")), "out", "perturb") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let tag = match parse_tag(args.tag, config) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let seed = args.seed.or_else(|| config.u64("seed")).unwrap_or(0);
    let rubrics = match parse_rubrics(args.rubrics, config) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let levels = match parse_levels(args.levels, config, &[RunLevel::Subtle, RunLevel::Extreme]) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    if levels.contains(&RunLevel::Benign) {
        return fail("perturb generates subtle/extreme variants; benign is the input");
    }

    let records = match load_corpus(&corpus_path, tag) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut synths = Vec::new();
    for path in &synth_paths {
        match load_syntheses(path) {
            Ok(s) => synths.extend(s),
            Err(e) => return fail(format!("{}: {e}", path.display())),
        }
    }
    let benign: Vec<&SynthesisVariant> =
        synths.iter().filter(|s| s.variant == Variant::Benign).collect();
    if benign.is_empty() {
        return fail("no benign syntheses in input");
    }

    let mut pools = match InjectionPools::load(&pools_path) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    // Same-domain material comes from the benign syntheses themselves,
    // tagged by record so self-injection is excluded.
    let benign_owned: Vec<SynthesisVariant> = benign.iter().map(|s| (*s).clone()).collect();
    pools.add_same_domain_from_syntheses(&records, &benign_owned);

    let cfg = PerturbationConfig::with_seed(seed);
    if let Err(e) = cfg.validate() {
        return fail(e);
    }
    let fields: BTreeMap<&str, &str> = records
        .iter()
        .map(|r| (r.record_id.as_str(), r.research_field.as_str()))
        .collect();

    let wanted_levels: Vec<Level> = levels
        .iter()
        .filter_map(|l| match l {
            RunLevel::Subtle => Some(Level::Subtle),
            RunLevel::Extreme => Some(Level::Extreme),
            RunLevel::Benign => None,
        })
        .collect();

    let mut out_rows: Vec<SynthesisVariant> = Vec::new();
    let mut skipped = 0usize;
    for synth in &benign {
        let Some(field) = fields.get(synth.record_id.as_str()) else {
            eprintln!("critiq: skipping {}: record not in corpus", synth.record_id);
            continue;
        };
        let cells = perturb_all(synth, field, &pools, &cfg);
        let selected: Vec<_> = cells
            .into_iter()
            .filter(|c| rubrics.contains(&c.rubric) && wanted_levels.contains(&c.level))
            .collect();
        for cell in &selected {
            if let Err(e) = &cell.outcome {
                eprintln!(
                    "critiq: {} {}/{}: skipped: {e}",
                    synth.record_id, cell.rubric, cell.level
                );
                skipped += 1;
            }
        }
        out_rows.extend(cells_to_syntheses(synth, &selected, seed));
    }

    match write_syntheses(&out_path, &out_rows) {
        Ok(n) => {
            eprintln!("critiq: wrote {n} variants to {} ({skipped} cells skipped)", out_path.display());
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

fn cmd_judge(args: JudgeArgs, config: &Config) -> u8 {
    let corpus_path = match require(args.corpus.or_else(|| config.path("corpus")), "corpus", "judge") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let synth_paths = if args.synth.is_empty() { config.paths("synth") } else { args.synth };
    if synth_paths.is_empty() {
        return usage_exit(Usage("missing required flag --synth\n\nRun `critiq judge --help` for details.".into()));
    }
    let endpoint_config = match require(
        args.endpoint_config.or_else(|| config.path("endpoint-config")),
        "endpoint-config",
        "judge",
    ) {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let out_path = match require(args.out.or_else(|| config.path("out")), "out", "judge") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let tag = match parse_tag(args.tag, config) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let rubrics = match parse_rubrics(args.rubrics, config) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let levels = match parse_levels(
        args.levels,
        config,
        &[RunLevel::Benign, RunLevel::Subtle, RunLevel::Extreme],
    ) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };

    let endpoints: Vec<JudgeEndpoint> = match std::fs::read_to_string(&endpoint_config)
        .map_err(|e| e.to_string())
        .and_then(|raw| serde_json::from_str(&raw).map_err(|e| e.to_string()))
    {
        Ok(e) => e,
        Err(e) => return fail(format!("{}: {e}", endpoint_config.display())),
    };

    let manifest = RunManifest {
        corpus_path,
        corpus_tag: tag,
        synthesis_paths: synth_paths,
        rubrics,
        levels,
        evaluators: endpoints,
        output_path: out_path,
        concurrency_limit: args
            .concurrency
            .or_else(|| config.usize("concurrency"))
            .unwrap_or(4),
        seed: args.seed.or_else(|| config.u64("seed")).unwrap_or(0),
    };

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(e),
    };
    match runtime.block_on(execute_run(&manifest)) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::json!({
                    "total_jobs": summary.total_jobs,
                    "completed": summary.completed,
                    "failed": summary.failed,
                    "skipped": summary.skipped,
                })
            );
            for failure in summary.failures.iter().take(10) {
                eprintln!(
                    "critiq: job {} failed: {}",
                    failure.job_key_hash, failure.reason
                );
            }
            if summary.failed > 10 {
                eprintln!("critiq: ... {} more failures in sidecar", summary.failed - 10);
            }
            if summary.failed > 0 {
                EXIT_FAILURE
            } else {
                EXIT_OK
            }
        }
        Err(e) => fail(e),
    }
}

fn cmd_analyze(args: AnalyzeArgs, config: &Config) -> u8 {
    let judgments_path = match require(
        args.judgments.or_else(|| config.path("judgments")),
        "judgments",
        "analyze",
    ) {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let judgments = match load_judgments(&judgments_path) {
        Ok(j) => j,
        Err(e) => return fail(e),
    };
    if judgments.is_empty() {
        return fail("no judgments in input");
    }

    let out_dir = args.out.or_else(|| config.path("out"));
    if let Some(dir) = &out_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail(format!("{}: {e}", dir.display()));
        }
    }
    let mut wrote_anything = false;
    let mut report_json = serde_json::Map::new();

    let group_by = args.group_by.or_else(|| config.string("group-by"));
    if let Some(spec) = group_by {
        let fields: Vec<String> = spec
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        match aggregate_means(&judgments, &fields) {
            Ok(table) => {
                println!("mean rating by {}:", table.group_by.join(", "));
                for row in &table.rows {
                    println!("  {:<50} {:>6.3}  (n={})", row.key.join(" / "), row.mean, row.count);
                }
                report_json.insert("group_means".into(), serde_json::to_value(&table).unwrap());
                wrote_anything = true;
            }
            Err(e) => return fail(e),
        }
    }

    match evaluator_generator_matrix(&judgments) {
        Ok(matrix) => {
            println!("\nbenign evaluator x generator means:");
            print!("{}", matrix.to_text());
            if let Some(dir) = &out_dir {
                if let Err(e) = std::fs::write(dir.join("matrix.csv"), matrix.to_csv()) {
                    return fail(e);
                }
            }
            match self_preference_check(&matrix) {
                Ok(checks) => {
                    println!("\nself-preference:");
                    for c in &checks {
                        println!(
                            "  {:<24} own {:.2} vs best-other {}  prefers_self={}",
                            c.evaluator_model,
                            c.own_generator_score,
                            c.max_other_score.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
                            c.prefers_self
                        );
                    }
                    report_json.insert("self_preference".into(), serde_json::to_value(&checks).unwrap());
                }
                Err(AnalysisError::MissingDiagonal(model)) => {
                    eprintln!("critiq: self-preference skipped: evaluator {model} not among generators");
                }
                Err(e) => return fail(e),
            }
            report_json.insert("matrix".into(), serde_json::to_value(&matrix).unwrap());
            wrote_anything = true;
        }
        Err(AnalysisError::NoData(reason)) => {
            eprintln!("critiq: matrix skipped: {reason}");
        }
        Err(e) => return fail(e),
    }

    match optimism_report(&judgments, &ReportThresholds::default()) {
        Ok(report) => {
            println!("\nrobustness report:");
            print!("{}", report.to_text());
            report_json.insert("robustness".into(), serde_json::to_value(&report).unwrap());
            wrote_anything = true;
        }
        Err(AnalysisError::NoData(reason)) => {
            eprintln!("critiq: robustness report skipped: {reason}");
        }
        Err(e) => return fail(e),
    }

    if let Some(dir) = &out_dir {
        let path = dir.join("report.json");
        if let Err(e) = std::fs::write(
            &path,
            serde_json::to_string_pretty(&serde_json::Value::Object(report_json)).unwrap(),
        ) {
            return fail(e);
        }
        eprintln!("critiq: wrote {}", path.display());
    }

    if wrote_anything {
        EXIT_OK
    } else {
        fail("nothing to report (no benign or adversarial judgments)")
    }
}

fn cmd_prefpairs(args: PrefpairsArgs, config: &Config) -> u8 {
    let judgments_path = match require(
        args.judgments.or_else(|| config.path("judgments")),
        "judgments",
        "prefpairs",
    ) {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let corpus_path = match require(args.corpus.or_else(|| config.path("corpus")), "corpus", "prefpairs") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let synth_paths = if args.synth.is_empty() { config.paths("synth") } else { args.synth };
    if synth_paths.is_empty() {
        return usage_exit(Usage("missing required flag --synth\n\nRun `critiq prefpairs --help` for details.".into()));
    }
    let out_path = match require(args.out.or_else(|| config.path("out")), "out", "prefpairs") {
        Ok(p) => p,
        Err(u) => return usage_exit(u),
    };
    let tag = match parse_tag(args.tag, config) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let mix_mode = match args
        .mix_mode
        .or_else(|| config.string("mix-mode"))
        .map(|m| MixMode::from_str(&m))
        .transpose()
    {
        Ok(m) => m.unwrap_or(MixMode::AdversarialOnly),
        Err(e) => return fail(e),
    };
    let policy = SamplingPolicy {
        per_rubric_per_evaluator_cap: args.cap.or_else(|| config.usize("cap")).unwrap_or(100),
        seed: args.seed.or_else(|| config.u64("seed")).unwrap_or(0),
        mix_mode,
        thresholds: Default::default(),
    };

    let judgments = match load_judgments(&judgments_path) {
        Ok(j) => j,
        Err(e) => return fail(e),
    };
    let records = match load_corpus(&corpus_path, tag) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut synths = Vec::new();
    for path in &synth_paths {
        match load_syntheses(path) {
            Ok(s) => synths.extend(s),
            Err(e) => return fail(format!("{}: {e}", path.display())),
        }
    }
    let prompts = PromptIndex::new(&records, &synths);

    let outcome = match policy.mix_mode {
        MixMode::AdversarialOnly => build_adversarial_pairs(&judgments, &prompts, &policy),
        MixMode::BenignPlusAdversarial => {
            let (benign, adversarial): (Vec<_>, Vec<_>) = judgments
                .into_iter()
                .partition(|j| j.variant == Variant::Benign);
            build_mixed_pairs(&benign, &adversarial, &prompts, &policy)
        }
    };

    for cell in &outcome.empty_cells {
        eprintln!(
            "critiq: no pairs for ({}, {}): {}",
            cell.rubric, cell.evaluator_model, cell.reason
        );
    }
    match export_pairs(&outcome.pairs, &out_path) {
        Ok(n) => {
            eprintln!("critiq: wrote {n} pairs to {}", out_path.display());
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

fn cmd_metrics(args: MetricsArgs, config: &Config) -> u8 {
    let synth_paths = if args.synth.is_empty() { config.paths("synth") } else { args.synth };
    if synth_paths.is_empty() {
        return usage_exit(Usage("missing required flag --synth\n\nRun `critiq metrics --help` for details.".into()));
    }
    let metric = match require(args.metric.or_else(|| config.string("metric")), "metric", "metrics") {
        Ok(m) => m,
        Err(u) => return usage_exit(u),
    };
    let metric = match MetricName::from_str(&metric) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let options = MetricOptions {
        bleu_smoothing: args.smoothing || config.bool("smoothing").unwrap_or(false),
        ..Default::default()
    };

    let mut outputs: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for path in &synth_paths {
        let synths = match load_syntheses(path) {
            Ok(s) => s,
            Err(e) => return fail(format!("{}: {e}", path.display())),
        };
        for s in synths {
            if s.variant != Variant::Benign {
                continue;
            }
            outputs
                .entry(s.generator_model)
                .or_default()
                .insert(s.record_id, s.text);
        }
    }

    let report = match pairwise_matrix(&outputs, metric, &options) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    print!("{}", report.to_text());
    if let Some(prefix) = args.out.or_else(|| config.path("out")) {
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("json");
        if let Err(e) = std::fs::write(&csv_path, report.to_csv()) {
            return fail(e);
        }
        if let Err(e) = std::fs::write(&json_path, serde_json::to_string_pretty(&report).unwrap()) {
            return fail(e);
        }
        eprintln!("critiq: wrote {} and {}", csv_path.display(), json_path.display());
    }
    EXIT_OK
}
