//! Stage orchestration over a run directory.
//!
//! Each stage reads its predecessor's outputs, writes its own directory and
//! finishes by dropping a `_COMPLETE` marker. Work inside a stage is
//! recorded per item under `items/`, so an interrupted stage resumes where
//! it stopped and a repeated stage does no new work.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BackendKind, ConfigError, PipelineConfig};
use crate::corpus::{self, corpus_stats, CorpusError, RecordSchema};
use crate::inputgen::{self, AcquireOptions, InputGenError, InputGenOptions};
use crate::llm::{extract_code_blocks, Backend, ChatRequest, Gateway, LiveBackend, LlmError};
use crate::postproc::{
    self, decontaminate, export_dataset, DatasetRecord, ExportManifest, NGramIndex, PostprocError, VerificationOrigin,
    VerificationSummary,
};
use crate::problem::{CaseOutcome, Problem, Solution};
use crate::sandbox::{Sandbox, SandboxConfig, SandboxError};
use crate::synth::{self, ParseMode, SynthError};
use crate::verify::{self, Decision, VerifyError};

pub const SYNTH_TAG: &str = "synthesize";
pub const SOLVE_TAG: &str = "solve";
const COMPLETE: &str = "_COMPLETE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Synthesize,
    GenInputs,
    Label,
    Sample,
    Verify,
    Postprocess,
    Decontaminate,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Synthesize,
        Stage::GenInputs,
        Stage::Label,
        Stage::Sample,
        Stage::Verify,
        Stage::Postprocess,
        Stage::Decontaminate,
        Stage::Export,
    ];

    pub fn command(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Synthesize => "synthesize",
            Stage::GenInputs => "gen-inputs",
            Stage::Label => "label",
            Stage::Sample => "sample",
            Stage::Verify => "verify",
            Stage::Postprocess => "postprocess",
            Stage::Decontaminate => "decontaminate",
            Stage::Export => "export",
        }
    }

    pub fn dir_name(self) -> String {
        format!("{:02}-{}", self as usize + 1, self.command())
    }

    pub fn predecessor(self) -> Option<Stage> {
        (self as usize).checked_sub(1).map(|i| Stage::ALL[i])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dir_name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.command() == s || st.dir_name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {missing} has not completed in {run_dir}; run `cpverify {command}` first")]
    MissingStage {
        missing: Stage,
        command: &'static str,
        run_dir: PathBuf,
    },
    #[error("no benchmark file given; pass --benchmark or set benchmark_path")]
    NoBenchmark,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    InputGen(#[from] InputGenError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes via a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).expect("value serializes"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| PipelineError::Decode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Item ids become file names; keep them tame.
fn item_file(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

/// The synthesis request for a seed, built from its first oracle.
pub fn synthesis_request(cfg: &PipelineConfig, seed: &Problem) -> Result<ChatRequest, SynthError> {
    let oracle = seed
        .oracle_solutions
        .first()
        .ok_or_else(|| SynthError::MissingOracle(seed.id.clone()))?;
    let mut req = ChatRequest::new(synth::build_synthesis_prompt(seed, oracle)?, SYNTH_TAG)
        .samples(cfg.samples_per_seed)
        .temperature(cfg.llm.temperature);
    req.max_tokens = cfg.llm.max_tokens;
    Ok(req)
}

/// The candidate-sampling request for a problem.
pub fn solve_request(cfg: &PipelineConfig, problem: &Problem) -> Result<ChatRequest, SynthError> {
    let mut req = ChatRequest::new(synth::build_solve_prompt(problem)?, SOLVE_TAG)
        .samples(cfg.n_candidates)
        .temperature(cfg.llm.temperature);
    req.max_tokens = cfg.llm.max_tokens;
    Ok(req)
}

/// The program in a solving completion: the last Python (or untagged)
/// fenced block.
pub fn extract_solution(completion: &str) -> Option<String> {
    extract_code_blocks(completion)
        .into_iter()
        .rev()
        .find(|b| matches!(b.language.to_ascii_lowercase().as_str(), "" | "python" | "py" | "python3"))
        .map(|b| b.code)
        .filter(|c| !c.trim().is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Ok,
    Failed,
    Skipped,
    Quarantined,
    Accepted,
    Rejected,
    Excluded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SynthItem {
    seed_id: String,
    problems: Vec<Problem>,
    failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InputsItem {
    problem_id: String,
    status: ItemStatus,
    inputs: usize,
    attempts: u32,
    exponent: u32,
    validation_rate: f64,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelItem {
    problem_id: String,
    status: ItemStatus,
    cases: usize,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleItem {
    problem_id: String,
    status: ItemStatus,
    candidates: Vec<String>,
    unparsed: usize,
    reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VerifyItem {
    problem_id: String,
    status: ItemStatus,
    /// Annotated solutions: every candidate for synthetic problems, the kept
    /// ones for seeds.
    solutions: Vec<Solution>,
    accepted: Vec<usize>,
    agreement: Option<f64>,
    threshold: Option<f64>,
    reason: Option<String>,
}

/// One postprocessed problem: the chosen solution and where its tests live.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selected {
    pub problem: Problem,
    pub solution: Solution,
    pub verification: VerificationSummary,
    pub cases_stage: String,
}

/// What a stage did, for logging.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub counts: BTreeMap<String, usize>,
}

impl StageReport {
    fn new(stage: Stage) -> Self {
        Self {
            stage: stage.dir_name(),
            counts: BTreeMap::new(),
        }
    }

    fn bump(&mut self, key: &str) {
        *self.counts.entry(key.to_string()).or_default() += 1;
    }
}

impl fmt::Display for StageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.stage)?;
        for (k, v) in &self.counts {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub run_dir: PathBuf,
    sandbox: Sandbox,
    generator: Gateway,
    solver: Gateway,
}

/// Extra runtime switches that are not part of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Serve completions from this directory and never call the network.
    pub replay_dir: Option<PathBuf>,
    pub keep_failed: bool,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, run_dir: impl Into<PathBuf>, opts: &RunOptions) -> Result<Self> {
        cfg.validate()?;
        let run_dir = run_dir.into();
        fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;
        let sandbox = Sandbox::new(SandboxConfig {
            workers: cfg.workers,
            keep_failed: opts.keep_failed,
            ..Default::default()
        })?;
        let gateway = |model: &str| -> Result<Gateway> {
            let (backend, dir) = match (&opts.replay_dir, &cfg.llm.backend) {
                (Some(dir), _) => (
                    Backend::Replay {
                        backend_id: model.to_string(),
                    },
                    dir.clone(),
                ),
                (None, BackendKind::Replay) => (
                    Backend::Replay {
                        backend_id: model.to_string(),
                    },
                    run_dir.join(&cfg.llm.cache_dir),
                ),
                (None, BackendKind::Live) => {
                    (Backend::Live(LiveBackend::from_env(model)?), run_dir.join(&cfg.llm.cache_dir))
                }
            };
            Ok(Gateway::new(backend, dir)
                .with_retries(cfg.llm.retries, Duration::from_millis(500))
                .with_in_flight_limit(cfg.llm.max_in_flight))
        };
        let generator = gateway(&cfg.llm.generator_model)?;
        let solver = gateway(&cfg.llm.solver_model)?;
        Ok(Self {
            cfg,
            run_dir,
            sandbox,
            generator,
            solver,
        })
    }

    pub fn sandbox(&self) -> &Sandbox {
        &self.sandbox
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.run_dir.join(stage.dir_name())
    }

    fn item_path(&self, stage: Stage, id: &str) -> PathBuf {
        self.stage_dir(stage).join("items").join(item_file(id))
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.stage_dir(stage).join(COMPLETE).exists()
    }

    fn require(&self, stage: Stage) -> Result<()> {
        match stage.predecessor() {
            Some(prev) if !self.is_complete(prev) => Err(PipelineError::MissingStage {
                missing: prev,
                command: prev.command(),
                run_dir: self.run_dir.clone(),
            }),
            _ => Ok(()),
        }
    }

    fn finish(&self, stage: Stage, report: StageReport) -> Result<StageReport> {
        write_json(&self.stage_dir(stage).join(COMPLETE), &report)?;
        info!("{report}");
        Ok(report)
    }

    fn seeds(&self) -> Result<Vec<Problem>> {
        read_jsonl(&self.stage_dir(Stage::Ingest).join("problems.jsonl"))
    }

    fn synthetic(&self) -> Result<Vec<Problem>> {
        read_jsonl(&self.stage_dir(Stage::Synthesize).join("problems.jsonl"))
    }

    /// Seeds then synthetic problems, each sorted by id.
    pub fn all_problems(&self) -> Result<Vec<Problem>> {
        let mut all = self.seeds()?;
        all.extend(self.synthetic()?);
        Ok(all)
    }

    fn load_item<T: DeserializeOwned>(&self, stage: Stage, id: &str) -> Result<Option<T>> {
        let path = self.item_path(stage, id);
        if path.exists() {
            read_json(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn ingest(&self, input: &Path, schema: RecordSchema) -> Result<StageReport> {
        let stage = Stage::Ingest;
        let mut report = StageReport::new(stage);
        let ingested = corpus::ingest_problems(input, schema)?;
        let deduped = corpus::dedupe(ingested.problems);
        let before = deduped.kept.len();
        let mut seeds = corpus::filter_missing_oracle(deduped.kept);
        seeds.sort_by(|a, b| a.id.cmp(&b.id));
        report.counts.insert("rejected".into(), ingested.rejects.len());
        report.counts.insert("duplicates".into(), deduped.dropped.len());
        report.counts.insert("missing_oracle".into(), before - seeds.len());
        report.counts.insert("seeds".into(), seeds.len());
        let dir = self.stage_dir(stage);
        write_jsonl(&dir.join("problems.jsonl"), &seeds)?;
        write_jsonl(&dir.join("rejects.jsonl"), &ingested.rejects)?;
        write_jsonl(&dir.join("duplicates.jsonl"), &deduped.dropped)?;
        write_json(&dir.join("stats.json"), &corpus_stats(&seeds))?;
        self.finish(stage, report)
    }

    pub fn synthesize(&self) -> Result<StageReport> {
        let stage = Stage::Synthesize;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        let seeds = self.seeds()?;
        let mut items = Vec::new();
        for seed in &seeds {
            if let Some(item) = self.load_item::<SynthItem>(stage, &seed.id)? {
                report.bump("resumed");
                items.push(item);
                continue;
            }
            let req = synthesis_request(&self.cfg, seed)?;
            let response = self.generator.complete(&req)?;
            let mut item = SynthItem {
                seed_id: seed.id.clone(),
                problems: Vec::new(),
                failures: Vec::new(),
            };
            for text in &response.completions {
                match synth::parse_synthesis_response(text, &seed.id, ParseMode::Strict) {
                    Ok(parsed) => item.problems.push(parsed.problem.to_problem(seed)),
                    Err(e) => item.failures.push(e.to_string()),
                }
            }
            write_json(&self.item_path(stage, &seed.id), &item)?;
            items.push(item);
        }
        let mut taken: BTreeSet<String> = seeds.iter().map(|s| s.id.clone()).collect();
        let mut synthetic = Vec::new();
        for item in items {
            report.counts.entry("parse_failures".into()).or_default();
            *report.counts.get_mut("parse_failures").expect("inserted") += item.failures.len();
            for p in item.problems {
                if taken.insert(p.id.clone()) {
                    synthetic.push(p);
                } else {
                    report.bump("duplicates");
                }
            }
        }
        synthetic.sort_by(|a, b| a.id.cmp(&b.id));
        report.counts.insert("synthesized".into(), synthetic.len());
        write_jsonl(&self.stage_dir(stage).join("problems.jsonl"), &synthetic)?;
        self.finish(stage, report)
    }

    fn acquire_options(&self) -> AcquireOptions {
        AcquireOptions {
            gen: InputGenOptions {
                copies_per_point: self.cfg.copies_per_point,
                rng_seed: self.cfg.rng_seed,
                generator_limits: self.cfg.generator_limits(),
                validator_limits: self.cfg.limits,
                revalidate_every: 10,
            },
            e_default: self.cfg.e_default,
            grid_cap: self.cfg.grid_cap,
            max_regenerations: self.cfg.max_regenerations,
            temperature: self.cfg.llm.temperature,
        }
    }

    fn inputs_dir(&self) -> PathBuf {
        self.stage_dir(Stage::GenInputs).join("inputs")
    }

    pub fn gen_inputs(&self) -> Result<StageReport> {
        let stage = Stage::GenInputs;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        let opts = self.acquire_options();
        for problem in self.all_problems()? {
            if self.load_item::<InputsItem>(stage, &problem.id)?.is_some() {
                report.bump("resumed");
                continue;
            }
            let item = match inputgen::acquire_inputs(&problem, &self.generator, &self.sandbox, &opts) {
                Ok(acq) => {
                    inputgen::write_inputs(&self.inputs_dir(), &problem.id, &acq.report.inputs)?;
                    report.bump("ok");
                    InputsItem {
                        problem_id: problem.id.clone(),
                        status: ItemStatus::Ok,
                        inputs: acq.report.inputs.len(),
                        attempts: acq.attempts,
                        exponent: acq.pair.exponent_limit_e,
                        validation_rate: acq.report.validation_rate(),
                        error: None,
                    }
                }
                Err(e @ (InputGenError::Defect { .. }
                | InputGenError::EmptyStatement(_)
                | InputGenError::MissingStarterCode(_))) => {
                    warn!("input generation failed for {}: {e}", problem.id);
                    report.bump("failed");
                    InputsItem {
                        problem_id: problem.id.clone(),
                        status: ItemStatus::Failed,
                        inputs: 0,
                        attempts: 0,
                        exponent: 0,
                        validation_rate: 0.0,
                        error: Some(e.to_string()),
                    }
                }
                Err(e) => return Err(e.into()),
            };
            write_json(&self.item_path(stage, &problem.id), &item)?;
        }
        self.finish(stage, report)
    }

    fn inputs_for(&self, id: &str) -> Result<Option<InputsItem>> {
        Ok(self
            .load_item::<InputsItem>(Stage::GenInputs, id)?
            .filter(|i| i.status == ItemStatus::Ok))
    }

    fn label_cases_dir(&self) -> PathBuf {
        self.stage_dir(Stage::Label).join("cases")
    }

    fn mutual_cases_dir(&self) -> PathBuf {
        self.stage_dir(Stage::Verify).join("cases")
    }

    pub fn label(&self) -> Result<StageReport> {
        let stage = Stage::Label;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        for seed in self.seeds()? {
            if self.load_item::<LabelItem>(stage, &seed.id)?.is_some() {
                report.bump("resumed");
                continue;
            }
            let item = if self.inputs_for(&seed.id)?.is_none() {
                report.bump("skipped");
                LabelItem {
                    problem_id: seed.id.clone(),
                    status: ItemStatus::Skipped,
                    cases: 0,
                    error: Some("no test inputs".into()),
                }
            } else {
                let inputs = inputgen::read_inputs(&self.inputs_dir(), &seed.id)?;
                match verify::label_with_oracle(
                    &seed,
                    &inputs,
                    &self.sandbox,
                    &self.cfg.limits,
                    self.cfg.cross_check_oracles,
                ) {
                    Ok(cases) => {
                        verify::write_cases(&self.label_cases_dir(), &seed.id, &cases)?;
                        report.bump("ok");
                        LabelItem {
                            problem_id: seed.id.clone(),
                            status: ItemStatus::Ok,
                            cases: cases.len(),
                            error: None,
                        }
                    }
                    Err(e @ (VerifyError::OracleFailure { .. } | VerifyError::OracleDisagreement { .. })) => {
                        warn!("quarantined {}: {e}", seed.id);
                        report.bump("quarantined");
                        LabelItem {
                            problem_id: seed.id.clone(),
                            status: ItemStatus::Quarantined,
                            cases: 0,
                            error: Some(e.to_string()),
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            write_json(&self.item_path(stage, &seed.id), &item)?;
        }
        self.finish(stage, report)
    }

    /// Why a problem gets no candidates, if it doesn't.
    fn sampling_block(&self, problem: &Problem) -> Result<Option<String>> {
        if problem.is_synthetic() {
            return Ok(match self.inputs_for(&problem.id)? {
                None => Some("no test inputs".into()),
                Some(i) if i.inputs < self.cfg.min_inputs => Some(format!(
                    "{} valid inputs, mutual verification needs {}",
                    i.inputs, self.cfg.min_inputs
                )),
                Some(_) => None,
            });
        }
        Ok(match self.load_item::<LabelItem>(Stage::Label, &problem.id)? {
            Some(l) if l.status == ItemStatus::Ok => None,
            _ => Some("no labeled test cases".into()),
        })
    }

    pub fn sample(&self) -> Result<StageReport> {
        let stage = Stage::Sample;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        for problem in self.all_problems()? {
            if self.load_item::<SampleItem>(stage, &problem.id)?.is_some() {
                report.bump("resumed");
                continue;
            }
            let item = if let Some(reason) = self.sampling_block(&problem)? {
                report.bump("skipped");
                SampleItem {
                    problem_id: problem.id.clone(),
                    status: ItemStatus::Skipped,
                    candidates: Vec::new(),
                    unparsed: 0,
                    reason: Some(reason),
                }
            } else {
                let response = self.solver.complete(&solve_request(&self.cfg, &problem)?)?;
                let extracted: Vec<Option<String>> = response.completions.iter().map(|c| extract_solution(c)).collect();
                report.bump("sampled");
                SampleItem {
                    problem_id: problem.id.clone(),
                    status: ItemStatus::Ok,
                    unparsed: extracted.iter().filter(|c| c.is_none()).count(),
                    candidates: extracted.into_iter().flatten().collect(),
                    reason: None,
                }
            };
            write_json(&self.item_path(stage, &problem.id), &item)?;
        }
        self.finish(stage, report)
    }

    pub fn verify(&self) -> Result<StageReport> {
        let stage = Stage::Verify;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        let thresholds = self.cfg.thresholds();
        for problem in self.all_problems()? {
            if self.load_item::<VerifyItem>(stage, &problem.id)?.is_some() {
                report.bump("resumed");
                continue;
            }
            let sampled = self
                .load_item::<SampleItem>(Stage::Sample, &problem.id)?
                .filter(|s| s.status == ItemStatus::Ok);
            let Some(sampled) = sampled else {
                report.bump("skipped");
                let item = VerifyItem {
                    problem_id: problem.id.clone(),
                    status: ItemStatus::Skipped,
                    solutions: Vec::new(),
                    accepted: Vec::new(),
                    agreement: None,
                    threshold: None,
                    reason: Some("not sampled".into()),
                };
                write_json(&self.item_path(stage, &problem.id), &item)?;
                continue;
            };
            let candidates: Vec<Solution> = sampled.candidates.iter().map(Solution::model).collect();
            let item = if problem.is_synthetic() {
                let inputs = inputgen::read_inputs(&self.inputs_dir(), &problem.id)?;
                let threshold = thresholds.for_problem(&problem);
                match verify::mutual_verify(
                    &problem,
                    &candidates,
                    &inputs,
                    threshold,
                    self.cfg.min_inputs,
                    &self.sandbox,
                    &self.cfg.limits,
                ) {
                    Ok(outcome) => {
                        let r = &outcome.report;
                        write_json(&self.stage_dir(stage).join("reports").join(item_file(&problem.id)), r)?;
                        let status = if r.decision == Decision::Accept {
                            verify::write_cases(&self.mutual_cases_dir(), &problem.id, &r.labeled_cases)?;
                            report.bump("accepted");
                            ItemStatus::Accepted
                        } else {
                            report.bump("rejected");
                            ItemStatus::Rejected
                        };
                        VerifyItem {
                            problem_id: problem.id.clone(),
                            status,
                            accepted: r.accepted_solutions.clone(),
                            agreement: Some(r.agreement_fraction),
                            threshold: Some(threshold),
                            solutions: outcome.solutions,
                            reason: None,
                        }
                    }
                    Err(e @ (VerifyError::TooFewInputs { .. } | VerifyError::TooFewSolutions(_))) => {
                        report.bump("excluded");
                        VerifyItem {
                            problem_id: problem.id.clone(),
                            status: ItemStatus::Excluded,
                            solutions: candidates,
                            accepted: Vec::new(),
                            agreement: None,
                            threshold: Some(threshold),
                            reason: Some(e.to_string()),
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                let cases = verify::read_cases(&self.label_cases_dir(), &problem.id)?;
                let kept = if candidates.is_empty() {
                    Vec::new()
                } else {
                    verify::augment_seed_solutions(&problem, &cases, &candidates, &self.sandbox, &self.cfg.limits)?
                };
                let verified = kept.iter().filter(|s| !s.unverified).count();
                report.bump(if verified > 0 { "augmented" } else { "unverified_fallback" });
                VerifyItem {
                    problem_id: problem.id.clone(),
                    status: ItemStatus::Accepted,
                    accepted: (0..kept.len()).collect(),
                    agreement: None,
                    threshold: None,
                    solutions: kept,
                    reason: None,
                }
            };
            write_json(&self.item_path(stage, &problem.id), &item)?;
        }
        self.finish(stage, report)
    }

    /// The solution a seed problem contributes: the fastest kept candidate,
    /// or its oracle when sampling produced nothing.
    fn choose_seed_solution(&self, problem: &Problem, item: &VerifyItem, n_cases: usize) -> Result<(Solution, VerificationOrigin)> {
        if item.solutions.is_empty() {
            let mut oracle = problem.oracle_solutions[0].clone();
            oracle.verdicts = Some(vec![CaseOutcome::Passed; n_cases]);
            return Ok((oracle, VerificationOrigin::Oracle));
        }
        let timed: Vec<Solution> = item
            .solutions
            .iter()
            .filter(|s| s.cpu_time_total_seconds.is_some())
            .cloned()
            .collect();
        let chosen = if timed.is_empty() {
            item.solutions
                .iter()
                .min_by_key(|s| s.source_hash())
                .cloned()
                .expect("non-empty")
        } else {
            timed[postproc::select_fastest(&timed)?].clone()
        };
        let origin = if chosen.unverified {
            VerificationOrigin::Unverified
        } else {
            VerificationOrigin::Oracle
        };
        Ok((chosen, origin))
    }

    pub fn postprocess(&self) -> Result<StageReport> {
        let stage = Stage::Postprocess;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        let mut selected = Vec::new();
        for problem in self.all_problems()? {
            let Some(item) = self.load_item::<VerifyItem>(Stage::Verify, &problem.id)? else {
                continue;
            };
            if item.status != ItemStatus::Accepted {
                report.bump("dropped");
                continue;
            }
            let (solution, verification, cases_stage) = if problem.is_synthetic() {
                let accepted: Vec<Solution> = item.accepted.iter().map(|&i| item.solutions[i].clone()).collect();
                let best = accepted[postproc::select_fastest(&accepted)?].clone();
                let summary = VerificationSummary {
                    origin: VerificationOrigin::Mutual,
                    agreement: item.agreement,
                    threshold: item.threshold,
                };
                (best, summary, Stage::Verify)
            } else {
                let n_cases = verify::read_cases(&self.label_cases_dir(), &problem.id)?.len();
                let (best, origin) = self.choose_seed_solution(&problem, &item, n_cases)?;
                let summary = VerificationSummary {
                    origin,
                    agreement: None,
                    threshold: None,
                };
                (best, summary, Stage::Label)
            };
            report.bump(match verification.origin {
                VerificationOrigin::Mutual => "mutual",
                VerificationOrigin::Oracle => "oracle",
                VerificationOrigin::Unverified => "unverified",
            });
            selected.push(Selected {
                problem,
                solution,
                verification,
                cases_stage: cases_stage.dir_name(),
            });
        }
        write_jsonl(&self.stage_dir(stage).join("selected.jsonl"), &selected)?;
        self.finish(stage, report)
    }

    pub fn decontaminate(&self, benchmark: Option<&Path>) -> Result<StageReport> {
        let stage = Stage::Decontaminate;
        self.require(stage)?;
        let mut report = StageReport::new(stage);
        let selected: Vec<Selected> = read_jsonl(&self.stage_dir(Stage::Postprocess).join("selected.jsonl"))?;
        let bench_path = benchmark
            .map(Path::to_path_buf)
            .or_else(|| self.cfg.benchmark_path.clone())
            .ok_or(PipelineError::NoBenchmark)?;
        let docs = load_benchmark(&bench_path)?;
        let index = NGramIndex::build(&docs, self.cfg.ngram_n);
        let problems: Vec<Problem> = selected.iter().map(|s| s.problem.clone()).collect();
        let outcome = decontaminate(problems, &index);
        let kept_ids: BTreeSet<&str> = outcome.kept.iter().map(|p| p.id.as_str()).collect();
        let kept: Vec<&Selected> = selected.iter().filter(|s| kept_ids.contains(s.problem.id.as_str())).collect();
        report.counts.insert("benchmark_docs".into(), docs.len());
        report.counts.insert("kept".into(), kept.len());
        report.counts.insert("removed".into(), outcome.removed.len());
        let dir = self.stage_dir(stage);
        write_jsonl(&dir.join("kept.jsonl"), &kept)?;
        write_jsonl(&dir.join("removed.jsonl"), &outcome.removed)?;
        self.finish(stage, report)
    }

    pub fn export_path(&self) -> PathBuf {
        self.stage_dir(Stage::Export).join("dataset.jsonl")
    }

    pub fn export(&self) -> Result<(StageReport, ExportManifest)> {
        let stage = Stage::Export;
        self.require(stage)?;
        let kept: Vec<Selected> = read_jsonl(&self.stage_dir(Stage::Decontaminate).join("kept.jsonl"))?;
        let mut records = Vec::with_capacity(kept.len());
        for s in kept {
            let cases_dir = self.run_dir.join(&s.cases_stage).join("cases");
            let test_cases = verify::read_cases(&cases_dir, &s.problem.id)?;
            records.push(DatasetRecord {
                problem: s.problem,
                solution: s.solution,
                test_cases,
                verification: s.verification,
            });
        }
        let manifest = export_dataset(&records, &self.export_path())?;
        let mut report = StageReport::new(stage);
        report.counts.insert("records".into(), manifest.records);
        Ok((self.finish(stage, report)?, manifest))
    }

    /// Every stage in order, skipping completed ones.
    pub fn run_all(&self, input: &Path, schema: RecordSchema, benchmark: Option<&Path>) -> Result<ExportManifest> {
        if !self.is_complete(Stage::Ingest) {
            self.ingest(input, schema)?;
        }
        for stage in &Stage::ALL[1..Stage::ALL.len() - 1] {
            if self.is_complete(*stage) {
                continue;
            }
            match stage {
                Stage::Synthesize => self.synthesize()?,
                Stage::GenInputs => self.gen_inputs()?,
                Stage::Label => self.label()?,
                Stage::Sample => self.sample()?,
                Stage::Verify => self.verify()?,
                Stage::Postprocess => self.postprocess()?,
                Stage::Decontaminate => self.decontaminate(benchmark)?,
                Stage::Ingest | Stage::Export => unreachable!(),
            };
        }
        Ok(self.export()?.1)
    }
}

#[derive(Deserialize)]
struct BenchmarkDoc {
    id: String,
    #[serde(alias = "statement", alias = "question", alias = "prompt")]
    text: String,
}

/// Benchmark statements as JSONL records `{"id", "text"}`.
pub fn load_benchmark(path: &Path) -> Result<Vec<(String, String)>> {
    let docs: Vec<BenchmarkDoc> = read_jsonl(path)?;
    Ok(docs.into_iter().map(|d| (d.id, d.text)).collect())
}

/// Copies an export as labeled problems for `eval`: problem, tests.
pub fn read_export(path: &Path) -> Result<Vec<(Problem, Vec<verify::TestCase>)>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        source: crate::problem::Source,
        seed_id: Option<String>,
        statement: String,
        kind: crate::problem::ProblemKind,
        fn_name: Option<String>,
        tests: Vec<TestLine>,
    }
    #[derive(Deserialize)]
    struct TestLine {
        input: String,
        output: String,
        scale: inputgen::ScalePoint,
    }
    let lines: Vec<Line> = read_jsonl(path)?;
    Ok(lines
        .into_iter()
        .map(|l| {
            let mut p = Problem::stdio(l.id, l.statement, l.source);
            p.kind = l.kind;
            p.fn_name = l.fn_name;
            p.seed_id = l.seed_id;
            let cases = l
                .tests
                .into_iter()
                .map(|t| verify::TestCase {
                    input: inputgen::TestInput {
                        input_text: t.input,
                        scale: t.scale,
                        validated: true,
                        copy: 0,
                    },
                    expected_output: t.output,
                    label_origin: verify::LabelOrigin::Oracle,
                })
                .collect();
            (p, cases)
        })
        .collect())
}

#[derive(Debug, Deserialize)]
struct SamplesLine {
    id: String,
    samples: Vec<String>,
}

/// Sampled programs for `eval`: JSONL records `{"id", "samples": [...]}`.
pub fn read_samples(path: &Path) -> Result<BTreeMap<String, Vec<Solution>>> {
    let lines: Vec<SamplesLine> = read_jsonl(path)?;
    Ok(lines
        .into_iter()
        .map(|l| (l.id, l.samples.into_iter().map(Solution::model).collect()))
        .collect())
}
