//! Scale-controlled test input generation.
//!
//! The model writes a generator/validator pair for each problem. The
//! generator is run once per point of a grid over its scale parameters and
//! every produced input is kept only if the validator accepts it.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::llm::{extract_code_blocks, ChatRequest, Gateway, LlmError};
use crate::problem::{sha256_hex, Problem, ProblemKind};
use crate::sandbox::{ResourceLimits, Sandbox, SandboxError, ShimMode};
use crate::synth::{fill_template, question_text};

pub const UTILGEN_STDIO_TEMPLATE: &str = include_str!("../templates/utilgen_stdio.txt");
pub const UTILGEN_FUNCTION_TEMPLATE: &str = include_str!("../templates/utilgen_function.txt");

pub const GENERATOR_ENTRY: &str = "generate_test_input";
pub const VALIDATOR_ENTRY: &str = "validate_test_input";

/// Request tag for utility-generation prompts.
pub const UTILGEN_TAG: &str = "utilgen";

/// Largest exponent used when a problem gives no tighter bound.
pub const DEFAULT_EXPONENT: u32 = 5;

#[derive(Debug, Error)]
pub enum InputGenError {
    #[error("problem {0} has an empty statement")]
    EmptyStatement(String),
    #[error("function-kind problem {0} has no starter code")]
    MissingStarterCode(String),
    #[error("expected at least 2 code blocks in the utility response, found {0}")]
    TooFewBlocks(usize),
    #[error("no code block defines {0}")]
    MissingEntryPoint(&'static str),
    #[error("{GENERATOR_ENTRY} takes no scale parameters")]
    NoParams,
    #[error("utility pair for {problem_id} is defective: {reason}")]
    Defect {
        problem_id: String,
        reason: String,
        /// Per-point failure log, appended to the regeneration prompt.
        transcript: String,
    },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad input manifest {path}: {message}")]
    Manifest { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> InputGenError + '_ {
    move |source| InputGenError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilityPair {
    pub generator_source: String,
    pub validator_source: String,
    pub param_names: Vec<String>,
    pub exponent_limit_e: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalePoint {
    pub values: Vec<u64>,
}

impl ScalePoint {
    pub fn new(values: Vec<u64>) -> Self {
        Self { values }
    }

    /// `"10x100"` style tag used in file names.
    pub fn tag(&self) -> String {
        self.values.iter().map(u64::to_string).collect::<Vec<_>>().join("x")
    }

    /// Decade (floor of log10) of the largest parameter value.
    pub fn max_decade(&self) -> u32 {
        self.values.iter().map(|&v| decade(v)).max().unwrap_or(0)
    }
}

impl fmt::Display for ScalePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

pub fn decade(v: u64) -> u32 {
    v.max(1).ilog10()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInput {
    pub input_text: String,
    pub scale: ScalePoint,
    pub validated: bool,
    /// Index among the inputs drawn at the same scale point.
    #[serde(default)]
    pub copy: u32,
}

pub fn build_utilgen_prompt(problem: &Problem) -> Result<String, InputGenError> {
    if problem.statement.trim().is_empty() {
        return Err(InputGenError::EmptyStatement(problem.id.clone()));
    }
    let question = question_text(problem);
    Ok(match problem.kind {
        ProblemKind::Stdio => fill_template(UTILGEN_STDIO_TEMPLATE, &[("question", &question)]),
        ProblemKind::Function => {
            let starter = problem
                .starter_code
                .as_deref()
                .filter(|s| !s.trim().is_empty())
                .ok_or_else(|| InputGenError::MissingStarterCode(problem.id.clone()))?;
            fill_template(
                UTILGEN_FUNCTION_TEMPLATE,
                &[("question", &question), ("starter_code", starter.trim_end())],
            )
        }
    })
}

/// The first utility-generation request for a problem.
pub fn utilgen_request(problem: &Problem, temperature: f64) -> Result<ChatRequest, InputGenError> {
    Ok(ChatRequest::new(build_utilgen_prompt(problem)?, UTILGEN_TAG).temperature(temperature))
}

fn def_re(name: &str) -> Regex {
    Regex::new(&format!(r"(?m)^\s*def\s+{name}\s*\(")).expect("valid regex")
}

fn import_lines(code: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^(import\s|from\s+\S+\s+import\s)").expect("valid regex"));
    code.lines()
        .filter(|l| re.is_match(l))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Parameter names of `def generate_test_input(...)`, without defaults,
/// annotations or star-parameters.
fn generator_params(code: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(&format!(r"(?ms)^\s*def\s+{GENERATOR_ENTRY}\s*\((.*?)\)\s*(->[^:]*)?:")).expect("valid regex")
    });
    let Some(c) = re.captures(code) else {
        return Vec::new();
    };
    let mut depth = 0i32;
    let mut parts = vec![String::new()];
    for ch in c[1].chars() {
        match ch {
            '[' | '(' | '{' => depth += 1,
            ']' | ')' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(String::new());
                continue;
            }
            _ => {}
        }
        parts.last_mut().expect("non-empty").push(ch);
    }
    parts
        .iter()
        .map(|p| p.split(['=', ':']).next().unwrap_or("").trim().to_string())
        .filter(|p| !p.is_empty() && !p.starts_with('*') && p != "/" && p != "self")
        .collect()
}

/// Extracts the generator and validator from a utility-generation response.
/// The first block defining each entry point wins. The validator inherits
/// the generator block's imports, since responses often import once.
pub fn parse_utility_pair(text: &str) -> Result<UtilityPair, InputGenError> {
    let blocks = extract_code_blocks(text);
    if blocks.len() < 2 {
        return Err(InputGenError::TooFewBlocks(blocks.len()));
    }
    let find = |name: &'static str| {
        let re = def_re(name);
        blocks
            .iter()
            .find(|b| re.is_match(&b.code))
            .map(|b| b.code.clone())
            .ok_or(InputGenError::MissingEntryPoint(name))
    };
    let generator_source = find(GENERATOR_ENTRY)?;
    let validator_block = find(VALIDATOR_ENTRY)?;
    let param_names = generator_params(&generator_source);
    if param_names.is_empty() {
        return Err(InputGenError::NoParams);
    }
    let validator_source = if validator_block == generator_source {
        validator_block
    } else {
        format!("{}{}", import_lines(&generator_source), validator_block)
    };
    Ok(UtilityPair {
        generator_source,
        validator_source,
        param_names,
        exponent_limit_e: DEFAULT_EXPONENT,
    })
}

/// Largest power-of-ten exponent mentioned in a constraints text, capped at
/// `e_default`; `e_default` when nothing is found.
pub fn exponent_from_constraints(text: &str, e_default: u32) -> u32 {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"10\s*(?:\^|\*\*)\s*\{?\s*(\d+)|\b\d(?:\.\d+)?[eE](\d+)\b|10([⁰¹²³⁴⁵⁶⁷⁸⁹]+)|\b(\d{1,3}(?:,\d{3})+|\d+)\b")
            .expect("valid regex")
    });
    let sup = |s: &str| -> Option<u32> {
        s.chars()
            .map(|c| "⁰¹²³⁴⁵⁶⁷⁸⁹".chars().position(|d| d == c).map(|d| d as u32))
            .try_fold(0u32, |acc, d| d.map(|d| acc.saturating_mul(10).saturating_add(d)))
    };
    let mut best: Option<u32> = None;
    for c in re.captures_iter(text) {
        let exp = if let Some(m) = c.get(1).or(c.get(2)) {
            m.as_str().parse().ok()
        } else if let Some(m) = c.get(3) {
            sup(m.as_str())
        } else {
            c.get(4)
                .and_then(|m| m.as_str().replace(',', "").parse::<u64>().ok())
                .filter(|&v| v >= 10)
                .map(decade)
        };
        if let Some(e) = exp {
            best = Some(best.map_or(e, |b| b.max(e)));
        }
    }
    best.map_or(e_default, |b| b.min(e_default))
}

/// The candidate parameter values {1..9} ∪ {10^i : 0 ≤ i ≤ e}, ascending.
pub fn candidate_values(e: u32) -> Vec<u64> {
    let set: BTreeSet<u64> = (1..=9).chain((0..=e).map(|i| 10u64.pow(i))).collect();
    set.into_iter().collect()
}

/// The n-fold product of [`candidate_values`], sorted. When it has more than
/// `cap` points, a deterministic subset of exactly `cap` points is drawn:
/// first a stratum in which every candidate value of every parameter appears,
/// then uniform random fill.
pub fn scale_grid(n_params: usize, e: u32, cap: usize, rng_seed: u64) -> Vec<ScalePoint> {
    assert!(n_params >= 1, "scale_grid needs at least one parameter");
    let values = candidate_values(e);
    let m = values.len();
    let total = u32::try_from(n_params)
        .ok()
        .and_then(|n| m.checked_pow(n))
        .filter(|t| *t <= cap.max(1));
    if let Some(total) = total {
        let points = (0..total).map(|mut idx| {
            let mut v = vec![0; n_params];
            for slot in v.iter_mut().rev() {
                *slot = values[idx % m];
                idx /= m;
            }
            ScalePoint::new(v)
        });
        return points.collect();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut chosen: BTreeSet<Vec<u64>> = BTreeSet::new();
    // Stratum: a per-parameter shuffled diagonal covers every value of every
    // parameter in m points; if even that exceeds cap, fall back to one value
    // per decade.
    let stratum_values: Vec<u64> = if m <= cap {
        values.clone()
    } else {
        (0..=e).map(|i| 10u64.pow(i)).collect()
    };
    let perms: Vec<Vec<u64>> = (0..n_params)
        .map(|_| {
            let mut p = stratum_values.clone();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    for k in 0..stratum_values.len() {
        if chosen.len() >= cap {
            break;
        }
        chosen.insert(perms.iter().map(|p| p[k]).collect());
    }
    while chosen.len() < cap {
        chosen.insert((0..n_params).map(|_| values[rng.random_range(0..m)]).collect());
    }
    chosen.into_iter().map(ScalePoint::new).collect()
}

#[derive(Debug, Clone)]
pub struct InputGenOptions {
    /// Inputs drawn per scale point, each with its own sub-seed.
    pub copies_per_point: u32,
    pub rng_seed: u64,
    pub generator_limits: ResourceLimits,
    pub validator_limits: ResourceLimits,
    /// Every n-th retained input is validated a second time.
    pub revalidate_every: usize,
}

impl Default for InputGenOptions {
    fn default() -> Self {
        Self {
            copies_per_point: 1,
            rng_seed: 0,
            generator_limits: ResourceLimits::default().with_timeout(30.0),
            validator_limits: ResourceLimits::default(),
            revalidate_every: 10,
        }
    }
}

/// Everything that happened while running a utility pair over a grid.
#[derive(Debug, Clone, Default)]
pub struct GenerationReport {
    pub inputs: Vec<TestInput>,
    pub attempted: usize,
    /// Points where the generator declined (out-of-constraint parameters).
    pub declined: usize,
    pub generator_failures: usize,
    /// Generated inputs the validator rejected or crashed on.
    pub rejected: usize,
    pub transcript: Vec<String>,
}

impl GenerationReport {
    /// Share of generated inputs that passed validation.
    pub fn validation_rate(&self) -> f64 {
        let generated = self.inputs.len() + self.rejected;
        if generated == 0 {
            0.0
        } else {
            self.inputs.len() as f64 / generated as f64
        }
    }
}

/// Seed handed to the generator for one (point, copy).
pub fn sub_seed(rng_seed: u64, point: &ScalePoint, copy: u32) -> u64 {
    let digest = sha256_hex(format!("{rng_seed}/{}/{copy}", point.tag()).as_bytes());
    u64::from_str_radix(&digest[..15], 16).expect("hex digits")
}

enum PointOutcome {
    Declined,
    GeneratorFailed(String),
    Rejected(String),
    Valid(String),
}

fn shim_error(call: &crate::sandbox::ShimCall) -> String {
    match call.response.as_ref().and_then(|r| r.get("error")).and_then(Value::as_str) {
        Some(e) => e.to_string(),
        None => {
            let tail: String = call.exec.stderr_text.chars().rev().take(300).collect::<Vec<_>>().into_iter().rev().collect();
            format!("{:?}: {}", call.exec.verdict, tail.trim())
        }
    }
}

/// Runs the validator once. `Ok(verdict)` or `Err(reason)` on a crash.
pub fn run_validator(
    sandbox: &Sandbox,
    pair: &UtilityPair,
    input_text: &str,
    limits: &ResourceLimits,
) -> Result<Result<bool, String>, SandboxError> {
    let call = sandbox.run_shim(
        ShimMode::Validate,
        &pair.validator_source,
        &json!({ "input_string": input_text }),
        limits,
    )?;
    Ok(match call.ok_response() {
        Some(r) => Ok(r.get("valid") == Some(&Value::Bool(true))),
        None => Err(shim_error(&call)),
    })
}

/// Runs the generator once. `Ok(None)` when it declines the point.
pub fn run_generator(
    sandbox: &Sandbox,
    pair: &UtilityPair,
    point: &ScalePoint,
    seed: u64,
    limits: &ResourceLimits,
) -> Result<Result<Option<String>, String>, SandboxError> {
    let call = sandbox.run_shim(
        ShimMode::Generate,
        &pair.generator_source,
        &json!({ "params": point.values, "seed": seed }),
        limits,
    )?;
    Ok(match call.ok_response() {
        Some(r) => Ok(r.get("input_string").and_then(Value::as_str).map(str::to_string)),
        None => Err(shim_error(&call)),
    })
}

fn defect(problem: &Problem, reason: String, report: &GenerationReport) -> InputGenError {
    InputGenError::Defect {
        problem_id: problem.id.clone(),
        reason,
        transcript: report.transcript.join("\n"),
    }
}

/// Runs generator then validator for every grid point (and copy) through
/// the sandbox pool and keeps validator-accepted inputs, sorted by scale.
pub fn generate_inputs(
    problem: &Problem,
    pair: &UtilityPair,
    grid: &[ScalePoint],
    sandbox: &Sandbox,
    opts: &InputGenOptions,
) -> Result<GenerationReport, InputGenError> {
    opts.generator_limits.validate()?;
    opts.validator_limits.validate()?;
    let jobs: Vec<(ScalePoint, u32)> = grid
        .iter()
        .flat_map(|p| (0..opts.copies_per_point.max(1)).map(move |c| (p.clone(), c)))
        .collect();

    let outcomes = sandbox.parallel_map(&jobs, |(point, copy)| -> Result<PointOutcome, SandboxError> {
        let seed = sub_seed(opts.rng_seed, point, *copy);
        let text = match run_generator(sandbox, pair, point, seed, &opts.generator_limits)? {
            Err(e) => return Ok(PointOutcome::GeneratorFailed(e)),
            Ok(None) => return Ok(PointOutcome::Declined),
            Ok(Some(text)) => text,
        };
        Ok(match run_validator(sandbox, pair, &text, &opts.validator_limits)? {
            Ok(true) => PointOutcome::Valid(text),
            Ok(false) => PointOutcome::Rejected("validator returned False".into()),
            Err(e) => PointOutcome::Rejected(format!("validator failed: {e}")),
        })
    });

    let mut report = GenerationReport {
        attempted: jobs.len(),
        ..Default::default()
    };
    for ((point, copy), outcome) in jobs.iter().zip(outcomes) {
        match outcome? {
            PointOutcome::Declined => report.declined += 1,
            PointOutcome::GeneratorFailed(e) => {
                report.generator_failures += 1;
                report.transcript.push(format!("generator at {point} (copy {copy}): {e}"));
            }
            PointOutcome::Rejected(e) => {
                report.rejected += 1;
                report.transcript.push(format!("input at {point} (copy {copy}) rejected: {e}"));
            }
            PointOutcome::Valid(input_text) => report.inputs.push(TestInput {
                input_text,
                scale: point.clone(),
                validated: true,
                copy: *copy,
            }),
        }
    }

    if report.generator_failures * 2 > report.attempted {
        let reason = format!(
            "generator failed on {} of {} points",
            report.generator_failures, report.attempted
        );
        return Err(defect(problem, reason, &report));
    }
    if report.inputs.is_empty() {
        return Err(defect(problem, "no generated input passed validation".into(), &report));
    }
    report.inputs.sort_by(|a, b| (&a.scale, a.copy).cmp(&(&b.scale, b.copy)));

    let every = opts.revalidate_every.max(1);
    let sample: Vec<&TestInput> = report.inputs.iter().step_by(every).collect();
    let rechecks = sandbox.parallel_map(&sample, |t| run_validator(sandbox, pair, &t.input_text, &opts.validator_limits));
    for (t, r) in sample.iter().zip(rechecks) {
        if r? != Ok(true) {
            let reason = format!("validator is not deterministic: input at {} flipped on re-check", t.scale);
            return Err(defect(problem, reason, &report));
        }
    }
    Ok(report)
}

/// Outcome of [`acquire_inputs`].
#[derive(Debug, Clone)]
pub struct AcquiredInputs {
    pub pair: UtilityPair,
    pub report: GenerationReport,
    /// Number of utility-generation prompts sent (1 + regenerations).
    pub attempts: u32,
}

#[derive(Debug, Clone)]
pub struct AcquireOptions {
    pub gen: InputGenOptions,
    pub e_default: u32,
    pub grid_cap: usize,
    pub max_regenerations: u32,
    pub temperature: f64,
}

impl Default for AcquireOptions {
    fn default() -> Self {
        Self {
            gen: InputGenOptions::default(),
            e_default: DEFAULT_EXPONENT,
            grid_cap: 200,
            max_regenerations: 3,
            temperature: 0.6,
        }
    }
}

/// Prompt for a utility pair and run it; on a defective pair, re-prompt with
/// the failure transcript appended, up to `max_regenerations` times.
pub fn acquire_inputs(
    problem: &Problem,
    gateway: &Gateway,
    sandbox: &Sandbox,
    opts: &AcquireOptions,
) -> Result<AcquiredInputs, InputGenError> {
    let base = build_utilgen_prompt(problem)?;
    let e = exponent_from_constraints(&problem.constraints_text, opts.e_default);
    let mut prompt = base.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let req = ChatRequest::new(prompt.clone(), UTILGEN_TAG).temperature(opts.temperature);
        let response = gateway.complete(&req)?;
        let text = response.completions.first().map(String::as_str).unwrap_or("");
        let failure = match parse_utility_pair(text) {
            Ok(mut pair) => {
                pair.exponent_limit_e = e;
                let grid = scale_grid(pair.param_names.len(), e, opts.grid_cap, opts.gen.rng_seed);
                match generate_inputs(problem, &pair, &grid, sandbox, &opts.gen) {
                    Ok(report) => return Ok(AcquiredInputs { pair, report, attempts }),
                    Err(InputGenError::Defect { reason, transcript, .. }) => format!("{reason}\n{transcript}"),
                    Err(other) => return Err(other),
                }
            }
            Err(e @ (InputGenError::TooFewBlocks(_) | InputGenError::MissingEntryPoint(_) | InputGenError::NoParams)) => {
                e.to_string()
            }
            Err(other) => return Err(other),
        };
        if attempts > opts.max_regenerations {
            return Err(InputGenError::Defect {
                problem_id: problem.id.clone(),
                reason: format!("input generation failed after {attempts} attempts"),
                transcript: failure,
            });
        }
        let excerpt: String = failure.lines().take(40).collect::<Vec<_>>().join("\n");
        prompt = format!(
            "{base}\n\nA previous answer to this request was unusable:\n{excerpt}\n\nWrite both functions again and fix the problem."
        );
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLine {
    file: String,
    scale: ScalePoint,
    copy: u32,
    validated: bool,
}

/// Writes `<dir>/<problem-id>/<scale-tag>-<copy>.in` plus `manifest.jsonl`.
pub fn write_inputs(dir: &Path, problem_id: &str, inputs: &[TestInput]) -> Result<(), InputGenError> {
    let pdir = dir.join(problem_id);
    fs::create_dir_all(&pdir).map_err(io_err(&pdir))?;
    let mut manifest = String::new();
    for t in inputs {
        let file = format!("{}-{}.in", t.scale.tag(), t.copy);
        let path = pdir.join(&file);
        fs::write(&path, &t.input_text).map_err(io_err(&path))?;
        let line = ManifestLine {
            file,
            scale: t.scale.clone(),
            copy: t.copy,
            validated: t.validated,
        };
        manifest.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
        manifest.push('\n');
    }
    let path = pdir.join("manifest.jsonl");
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(manifest.as_bytes()).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_inputs(dir: &Path, problem_id: &str) -> Result<Vec<TestInput>, InputGenError> {
    let pdir = dir.join(problem_id);
    let path = pdir.join("manifest.jsonl");
    let f = fs::File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for line in io::BufReader::new(f).lines() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestLine = serde_json::from_str(&line).map_err(|e| InputGenError::Manifest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let file = pdir.join(&entry.file);
        let input_text = fs::read_to_string(&file).map_err(io_err(&file))?;
        out.push(TestInput {
            input_text,
            scale: entry.scale,
            validated: entry.validated,
            copy: entry.copy,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Source;
    use crate::sandbox::SandboxConfig;

    #[test]
    fn candidate_set_is_a_union() {
        assert_eq!(candidate_values(5), vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 100, 1000, 10000, 100000]);
        assert_eq!(candidate_values(0), (1..=9).collect::<Vec<_>>());
        assert_eq!(candidate_values(1).len(), 10);
    }

    #[test]
    fn grid_small_cases() {
        let g = scale_grid(1, 5, 200, 7);
        assert_eq!(g.iter().map(|p| p.values[0]).collect::<Vec<_>>(), candidate_values(5));
        assert_eq!(scale_grid(2, 1, 10_000, 0).len(), 100);
        assert_eq!(scale_grid(2, 5, 10_000, 0).len(), 196);
    }

    #[test]
    fn capped_grid_covers_every_value() {
        let g = scale_grid(3, 5, 200, 42);
        assert_eq!(g.len(), 200);
        for i in 0..3 {
            let seen: BTreeSet<u64> = g.iter().map(|p| p.values[i]).collect();
            assert_eq!(seen.into_iter().collect::<Vec<_>>(), candidate_values(5));
        }
        assert_eq!(g, scale_grid(3, 5, 200, 42));
        assert_ne!(g, scale_grid(3, 5, 200, 43));
        // cap smaller than the candidate set still hits every decade
        let tiny = scale_grid(2, 5, 6, 1);
        assert_eq!(tiny.len(), 6);
        for i in 0..2 {
            let decades: BTreeSet<u32> = tiny.iter().map(|p| decade(p.values[i])).collect();
            assert_eq!(decades.len(), 6);
        }
    }

    #[test]
    fn scale_tags() {
        assert_eq!(ScalePoint::new(vec![10, 100]).tag(), "10x100");
        assert_eq!(ScalePoint::new(vec![7]).max_decade(), 0);
        assert_eq!(ScalePoint::new(vec![3, 100000]).max_decade(), 5);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(exponent_from_constraints("1 ≤ n ≤ 10^5", 5), 5);
        assert_eq!(exponent_from_constraints("1 <= n <= 1000", 5), 3);
        assert_eq!(exponent_from_constraints("n up to 2*10^3, a_i <= 100", 5), 3);
        assert_eq!(exponent_from_constraints("1 ≤ a_i ≤ 10⁹", 5), 5);
        assert_eq!(exponent_from_constraints("n ≤ 1e4", 5), 4);
        assert_eq!(exponent_from_constraints("n ≤ 100,000", 6), 5);
        assert_eq!(exponent_from_constraints("", 5), 5);
        assert_eq!(exponent_from_constraints("1 ≤ t ≤ 5", 5), 5);
    }

    const FIG3_STYLE: &str = "\
Part 1: constraints are 1 <= n, m <= 10^5.

```python
import random
def generate_test_input(n, m):
    if not (1 <= n <= 10**5) or not (1 <= m <= 10**5):
        return None
    return f\"{n} {m}\"
```

```python
def validate_test_input(input_string):
    a, b = map(int, input_string.split())
    return 1 <= a <= 10**5 and 1 <= b <= 10**5
```
";

    #[test]
    fn parses_pair() {
        let pair = parse_utility_pair(FIG3_STYLE).unwrap();
        assert_eq!(pair.param_names, vec!["n", "m"]);
        assert!(pair.generator_source.contains("def generate_test_input"));
        assert!(pair.validator_source.starts_with("import random\n"));
        assert!(pair.validator_source.contains("def validate_test_input"));
    }

    #[test]
    fn pair_parse_errors() {
        let only_validator = "```python\ndef validate_test_input(s):\n    return True\n```\n";
        assert!(matches!(parse_utility_pair(only_validator), Err(InputGenError::TooFewBlocks(1))));
        let two_validators = format!("{only_validator}{only_validator}");
        assert!(matches!(
            parse_utility_pair(&two_validators),
            Err(InputGenError::MissingEntryPoint(GENERATOR_ENTRY))
        ));
        let no_params = "```python\ndef generate_test_input():\n    return '1'\n```\n```python\ndef validate_test_input(s):\n    return True\n```\n";
        assert!(matches!(parse_utility_pair(no_params), Err(InputGenError::NoParams)));
    }

    #[test]
    fn first_defining_block_wins() {
        let text = "```python\ndef helper():\n    pass\n```\n```python\ndef generate_test_input(n: int, k=3, *rest):\n    return str(n)\n```\n```python\ndef generate_test_input(x):\n    return 'x'\n```\n```python\ndef validate_test_input(s):\n    return True\n```\n";
        let pair = parse_utility_pair(text).unwrap();
        assert_eq!(pair.param_names, vec!["n", "k"]);
        assert!(pair.generator_source.contains("return str(n)"));
    }

    #[test]
    fn utilgen_prompt_variants() {
        let mut p = Problem::stdio("p", "Sum an array.", Source::Codeforces);
        let stdio = build_utilgen_prompt(&p).unwrap();
        assert!(stdio.contains("generate_test_input"));
        assert!(stdio.contains("Sum an array."));
        assert!(stdio.contains("return `None`"));
        p.kind = ProblemKind::Function;
        p.fn_name = Some("solve".into());
        assert!(matches!(build_utilgen_prompt(&p), Err(InputGenError::MissingStarterCode(_))));
        p.starter_code = Some("class Solution:\n    def solve(self, nums):\n        ".into());
        let func = build_utilgen_prompt(&p).unwrap();
        assert!(func.contains("def solve(self, nums):"));
        assert!(func.contains("json.dumps(input_dict)"));
        assert_ne!(func, stdio);
        p.statement = "  ".into();
        assert!(matches!(build_utilgen_prompt(&p), Err(InputGenError::EmptyStatement(_))));
    }

    const ARRAY_PAIR_GEN: &str = "\
import random
def generate_test_input(n):
    if not (1 <= n <= 1000):
        return None
    return str(n) + '\\n' + ' '.join(str(random.randint(1, 100)) for _ in range(n))
";
    const ARRAY_PAIR_VAL: &str = "\
def validate_test_input(s):
    lines = s.split('\\n')
    n = int(lines[0])
    vals = lines[1].split()
    return 1 <= n <= 1000 and len(vals) == n and all(1 <= int(v) <= 100 for v in vals)
";

    fn array_pair() -> UtilityPair {
        UtilityPair {
            generator_source: ARRAY_PAIR_GEN.into(),
            validator_source: ARRAY_PAIR_VAL.into(),
            param_names: vec!["n".into()],
            exponent_limit_e: 5,
        }
    }

    fn sandbox() -> Sandbox {
        Sandbox::new(SandboxConfig::default()).unwrap()
    }

    #[test]
    fn in_bound_points_only() {
        let p = Problem::stdio("arr", "array", Source::Codeforces);
        let grid = scale_grid(1, 5, 200, 0);
        let report = generate_inputs(&p, &array_pair(), &grid, &sandbox(), &InputGenOptions::default()).unwrap();
        let scales: Vec<u64> = report.inputs.iter().map(|t| t.scale.values[0]).collect();
        assert_eq!(scales, vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 100, 1000]);
        assert_eq!(report.declined, 2);
        assert!(report.inputs.iter().all(|t| t.validated));
        let last = &report.inputs.last().unwrap().input_text;
        assert_eq!(last.lines().next(), Some("1000"));

        let again = generate_inputs(&p, &array_pair(), &grid, &sandbox(), &InputGenOptions::default()).unwrap();
        assert_eq!(report.inputs, again.inputs);
    }

    #[test]
    fn copies_use_distinct_seeds() {
        let p = Problem::stdio("arr", "array", Source::Codeforces);
        let grid = vec![ScalePoint::new(vec![50])];
        let opts = InputGenOptions {
            copies_per_point: 3,
            ..Default::default()
        };
        let report = generate_inputs(&p, &array_pair(), &grid, &sandbox(), &opts).unwrap();
        assert_eq!(report.inputs.len(), 3);
        assert_ne!(report.inputs[0].input_text, report.inputs[1].input_text);
        assert_eq!(report.inputs.iter().map(|t| t.copy).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn rejecting_validator_is_a_defect() {
        let p = Problem::stdio("arr", "array", Source::Codeforces);
        let mut pair = array_pair();
        pair.validator_source = "def validate_test_input(s):\n    return False\n".into();
        let grid = scale_grid(1, 1, 200, 0);
        let err = generate_inputs(&p, &pair, &grid, &sandbox(), &InputGenOptions::default()).unwrap_err();
        assert!(matches!(err, InputGenError::Defect { .. }));
    }

    #[test]
    fn crashing_generator_is_a_defect() {
        let p = Problem::stdio("arr", "array", Source::Codeforces);
        let mut pair = array_pair();
        pair.generator_source = "def generate_test_input(n):\n    if n > 2:\n        raise ValueError('boom')\n    return str(n)\n".into();
        let grid = scale_grid(1, 1, 200, 0);
        match generate_inputs(&p, &pair, &grid, &sandbox(), &InputGenOptions::default()) {
            Err(InputGenError::Defect { transcript, .. }) => assert!(transcript.contains("boom")),
            other => panic!("expected defect, got {other:?}"),
        }
    }

    #[test]
    fn inputs_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = vec![
            TestInput {
                input_text: "3\n1 2 3".into(),
                scale: ScalePoint::new(vec![3]),
                validated: true,
                copy: 0,
            },
            TestInput {
                input_text: "{\"n\": 10}".into(),
                scale: ScalePoint::new(vec![10, 100]),
                validated: true,
                copy: 2,
            },
        ];
        write_inputs(dir.path(), "p-1", &inputs).unwrap();
        assert!(dir.path().join("p-1/10x100-2.in").exists());
        assert_eq!(read_inputs(dir.path(), "p-1").unwrap(), inputs);
    }
}
