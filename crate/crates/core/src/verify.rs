//! Output labeling: oracle execution for seed problems and mutual
//! verification over sampled candidate solutions for synthetic ones.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inputgen::{ScalePoint, TestInput};
use crate::problem::{sha256_hex, CaseOutcome, Problem, ProblemKind, Solution};
use crate::sandbox::{ExecutionResult, Job, JobInput, ResourceLimits, Sandbox, SandboxError, Verdict};

/// Inputs required before mutual verification is attempted.
pub const MIN_INPUTS: usize = 50;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("problem {0} has no oracle solution")]
    NoOracle(String),
    #[error("oracle for {problem_id} ended with {verdict:?} on the input at scale {scale}: {detail}")]
    OracleFailure {
        problem_id: String,
        scale: ScalePoint,
        verdict: Verdict,
        detail: String,
    },
    #[error("oracles for {problem_id} disagree on the input at scale {scale}")]
    OracleDisagreement { problem_id: String, scale: ScalePoint },
    #[error("problem {problem_id} has {have} valid inputs, mutual verification needs {need}")]
    TooFewInputs { problem_id: String, have: usize, need: usize },
    #[error("mutual verification needs at least 2 solutions, got {0}")]
    TooFewSolutions(usize),
    #[error("threshold {0} is outside (0, 1]")]
    BadThreshold(f64),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad case manifest {path}: {message}")]
    Manifest { path: String, message: String },
}

/// Trailing whitespace off every line, CRLF/CR to LF, trailing blank lines
/// dropped, no final newline. Nothing else changes.
pub fn canonicalize_output(raw: &str) -> String {
    let unified = raw.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    let end = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines[..end].join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LabelOrigin {
    Oracle,
    Mutual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: TestInput,
    pub expected_output: String,
    pub label_origin: LabelOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputGroup {
    pub output_vector_hash: String,
    /// Indices into the solution list, ascending.
    pub members: Vec<usize>,
}

/// Result of grouping output vectors, independent of how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    /// Largest first; equal sizes ordered by vector hash.
    pub groups: Vec<OutputGroup>,
    pub winning_group: Option<usize>,
    /// Largest group over the solutions that completed every input.
    pub agreement_fraction: f64,
    /// Largest group over all solutions, crashes included.
    pub agreement_fraction_all: f64,
    pub n_solutions: usize,
    pub n_complete: usize,
    pub decision: Decision,
}

fn vector_hash(outputs: &[String]) -> String {
    let mut buf = Vec::new();
    for o in outputs {
        buf.extend_from_slice(&(o.len() as u64).to_le_bytes());
        buf.extend_from_slice(o.as_bytes());
    }
    sha256_hex(&buf)
}

/// Groups complete output vectors (`None` marks a solution with a failed
/// run) by exact equality. ACCEPT iff a unique largest group reaches
/// `threshold` of the complete solutions.
pub fn group_output_vectors(vectors: &[Option<Vec<String>>], threshold: f64) -> Grouping {
    let mut by_vector: BTreeMap<&[String], Vec<usize>> = BTreeMap::new();
    for (i, v) in vectors.iter().enumerate() {
        if let Some(v) = v {
            by_vector.entry(v.as_slice()).or_default().push(i);
        }
    }
    let mut groups: Vec<OutputGroup> = by_vector
        .into_iter()
        .map(|(v, members)| OutputGroup {
            output_vector_hash: vector_hash(v),
            members,
        })
        .collect();
    groups.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.output_vector_hash.cmp(&b.output_vector_hash))
    });
    let n_complete = vectors.iter().filter(|v| v.is_some()).count();
    let largest = groups.first().map_or(0, |g| g.members.len());
    let tied = groups.get(1).is_some_and(|g| g.members.len() == largest);
    let frac = |d: usize| if d == 0 { 0.0 } else { largest as f64 / d as f64 };
    let agreement_fraction = frac(n_complete);
    let accept = largest > 0 && !tied && agreement_fraction + 1e-12 >= threshold;
    Grouping {
        groups,
        winning_group: accept.then_some(0),
        agreement_fraction,
        agreement_fraction_all: frac(vectors.len()),
        n_solutions: vectors.len(),
        n_complete,
        decision: if accept { Decision::Accept } else { Decision::Reject },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub problem_id: String,
    pub groups: Vec<OutputGroup>,
    pub winning_group: Option<usize>,
    pub agreement_fraction: f64,
    pub agreement_fraction_all: f64,
    pub n_solutions: usize,
    pub n_complete: usize,
    pub threshold: f64,
    pub decision: Decision,
    /// Indices of the accepted solutions (the winning group).
    pub accepted_solutions: Vec<usize>,
    pub labeled_cases: Vec<TestCase>,
}

/// A report plus the candidate solutions annotated with their per-input
/// outcomes and total CPU time.
#[derive(Debug, Clone)]
pub struct MutualOutcome {
    pub report: VerificationReport,
    pub solutions: Vec<Solution>,
}

impl MutualOutcome {
    pub fn accepted(&self) -> Vec<&Solution> {
        self.report.accepted_solutions.iter().map(|&i| &self.solutions[i]).collect()
    }
}

fn job_for(problem: &Problem, program: &Solution, input: &TestInput, limits: &ResourceLimits) -> Job {
    let input = match (problem.kind, problem.fn_name.as_deref()) {
        (ProblemKind::Function, Some(fn_name)) => JobInput::Call {
            fn_name: fn_name.to_string(),
            args_record: input.input_text.clone(),
        },
        _ => JobInput::Stdin(input.input_text.clone()),
    };
    Job {
        program: program.clone(),
        input,
        limits: limits.clone(),
    }
}

/// Runs every program on every input; result `[p][i]`.
pub fn run_matrix(
    problem: &Problem,
    programs: &[Solution],
    inputs: &[TestInput],
    sandbox: &Sandbox,
    limits: &ResourceLimits,
) -> Result<Vec<Vec<ExecutionResult>>, SandboxError> {
    let jobs: Vec<Job> = programs
        .iter()
        .flat_map(|p| inputs.iter().map(move |i| job_for(problem, p, i, limits)))
        .collect();
    let mut flat = sandbox.batch_run(&jobs)?.into_iter();
    Ok(programs
        .iter()
        .map(|_| flat.by_ref().take(inputs.len()).collect())
        .collect())
}

fn complete_vector(runs: &[ExecutionResult]) -> Option<Vec<String>> {
    runs.iter()
        .map(|r| r.is_ok().then(|| canonicalize_output(&r.stdout_text)))
        .collect()
}

fn annotate(solution: &Solution, runs: &[ExecutionResult], expected: Option<&[String]>) -> Solution {
    let mut s = solution.clone();
    let all_ok = runs.iter().all(ExecutionResult::is_ok);
    s.cpu_time_total_seconds = all_ok.then(|| runs.iter().map(|r| r.cpu_time_seconds).sum());
    s.verdicts = expected.map(|exp| {
        runs.iter()
            .zip(exp)
            .map(|(r, e)| {
                if !r.is_ok() {
                    CaseOutcome::Failed(r.verdict)
                } else if canonicalize_output(&r.stdout_text) == *e {
                    CaseOutcome::Passed
                } else {
                    CaseOutcome::WrongAnswer
                }
            })
            .collect()
    });
    s
}

/// Labels every input with the output of the problem's first oracle. With
/// `cross_check`, all other oracles must agree on every input.
pub fn label_with_oracle(
    problem: &Problem,
    inputs: &[TestInput],
    sandbox: &Sandbox,
    limits: &ResourceLimits,
    cross_check: bool,
) -> Result<Vec<TestCase>, VerifyError> {
    if problem.oracle_solutions.is_empty() {
        return Err(VerifyError::NoOracle(problem.id.clone()));
    }
    let oracles = if cross_check {
        &problem.oracle_solutions[..]
    } else {
        &problem.oracle_solutions[..1]
    };
    let matrix = run_matrix(problem, oracles, inputs, sandbox, limits)?;
    for (i, input) in inputs.iter().enumerate() {
        for runs in &matrix {
            let r = &runs[i];
            if !r.is_ok() {
                return Err(VerifyError::OracleFailure {
                    problem_id: problem.id.clone(),
                    scale: input.scale.clone(),
                    verdict: r.verdict,
                    detail: r.stderr_text.lines().last().unwrap_or("").to_string(),
                });
            }
        }
        let first = canonicalize_output(&matrix[0][i].stdout_text);
        if matrix[1..].iter().any(|runs| canonicalize_output(&runs[i].stdout_text) != first) {
            return Err(VerifyError::OracleDisagreement {
                problem_id: problem.id.clone(),
                scale: input.scale.clone(),
            });
        }
    }
    Ok(inputs
        .iter()
        .enumerate()
        .map(|(i, input)| TestCase {
            input: input.clone(),
            expected_output: canonicalize_output(&matrix[0][i].stdout_text),
            label_origin: LabelOrigin::Oracle,
        })
        .collect())
}

/// Runs every candidate on every input, groups identical output vectors and
/// accepts the problem when the largest group reaches `threshold`.
pub fn mutual_verify(
    problem: &Problem,
    solutions: &[Solution],
    inputs: &[TestInput],
    threshold: f64,
    min_inputs: usize,
    sandbox: &Sandbox,
    limits: &ResourceLimits,
) -> Result<MutualOutcome, VerifyError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(VerifyError::BadThreshold(threshold));
    }
    if inputs.len() < min_inputs.max(1) {
        return Err(VerifyError::TooFewInputs {
            problem_id: problem.id.clone(),
            have: inputs.len(),
            need: min_inputs.max(1),
        });
    }
    if solutions.len() < 2 {
        return Err(VerifyError::TooFewSolutions(solutions.len()));
    }
    let matrix = run_matrix(problem, solutions, inputs, sandbox, limits)?;
    let vectors: Vec<Option<Vec<String>>> = matrix.iter().map(|runs| complete_vector(runs)).collect();
    let grouping = group_output_vectors(&vectors, threshold);

    let winner: Option<&[String]> = grouping
        .winning_group
        .map(|g| vectors[grouping.groups[g].members[0]].as_deref().expect("winning vector is complete"));
    let labeled_cases = winner.map_or_else(Vec::new, |w| {
        inputs
            .iter()
            .zip(w)
            .map(|(input, out)| TestCase {
                input: input.clone(),
                expected_output: out.clone(),
                label_origin: LabelOrigin::Mutual,
            })
            .collect()
    });
    let annotated = solutions
        .iter()
        .zip(&matrix)
        .map(|(s, runs)| annotate(s, runs, winner))
        .collect();
    let accepted_solutions = grouping
        .winning_group
        .map_or_else(Vec::new, |g| grouping.groups[g].members.clone());
    Ok(MutualOutcome {
        report: VerificationReport {
            problem_id: problem.id.clone(),
            groups: grouping.groups,
            winning_group: grouping.winning_group,
            agreement_fraction: grouping.agreement_fraction,
            agreement_fraction_all: grouping.agreement_fraction_all,
            n_solutions: grouping.n_solutions,
            n_complete: grouping.n_complete,
            threshold,
            decision: grouping.decision,
            accepted_solutions,
            labeled_cases,
        },
        solutions: annotated,
    })
}

/// Keeps the candidates that pass every labeled case. When none do, all of
/// them are returned flagged unverified.
pub fn augment_seed_solutions(
    problem: &Problem,
    cases: &[TestCase],
    candidates: &[Solution],
    sandbox: &Sandbox,
    limits: &ResourceLimits,
) -> Result<Vec<Solution>, VerifyError> {
    let inputs: Vec<TestInput> = cases.iter().map(|c| c.input.clone()).collect();
    let expected: Vec<String> = cases.iter().map(|c| c.expected_output.clone()).collect();
    let matrix = run_matrix(problem, candidates, &inputs, sandbox, limits)?;
    let annotated: Vec<Solution> = candidates
        .iter()
        .zip(&matrix)
        .map(|(s, runs)| annotate(s, runs, Some(&expected)))
        .collect();
    let passing: Vec<Solution> = annotated.iter().filter(|s| s.passed_all()).cloned().collect();
    if !passing.is_empty() {
        return Ok(passing);
    }
    Ok(annotated
        .into_iter()
        .map(|mut s| {
            s.unverified = true;
            s
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseManifestLine {
    input_file: String,
    output_file: String,
    scale: ScalePoint,
    copy: u32,
    label_origin: LabelOrigin,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> VerifyError + '_ {
    move |source| VerifyError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<dir>/<problem-id>/<n>.in` / `<n>.out` pairs plus `manifest.jsonl`.
pub fn write_cases(dir: &Path, problem_id: &str, cases: &[TestCase]) -> Result<(), VerifyError> {
    let pdir = dir.join(problem_id);
    fs::create_dir_all(&pdir).map_err(io_err(&pdir))?;
    let mut manifest = String::new();
    for (k, case) in cases.iter().enumerate() {
        let stem = format!("{k:04}-{}-{}", case.input.scale.tag(), case.input.copy);
        let (input_file, output_file) = (format!("{stem}.in"), format!("{stem}.out"));
        let ip = pdir.join(&input_file);
        fs::write(&ip, &case.input.input_text).map_err(io_err(&ip))?;
        let op = pdir.join(&output_file);
        fs::write(&op, &case.expected_output).map_err(io_err(&op))?;
        let line = CaseManifestLine {
            input_file,
            output_file,
            scale: case.input.scale.clone(),
            copy: case.input.copy,
            label_origin: case.label_origin,
        };
        manifest.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
        manifest.push('\n');
    }
    let mp = pdir.join("manifest.jsonl");
    fs::write(&mp, manifest).map_err(io_err(&mp))
}

pub fn read_cases(dir: &Path, problem_id: &str) -> Result<Vec<TestCase>, VerifyError> {
    let pdir = dir.join(problem_id);
    let mp = pdir.join("manifest.jsonl");
    let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let entry: CaseManifestLine = serde_json::from_str(line).map_err(|e| VerifyError::Manifest {
            path: mp.display().to_string(),
            message: e.to_string(),
        })?;
        let ip = pdir.join(&entry.input_file);
        let op = pdir.join(&entry.output_file);
        out.push(TestCase {
            input: TestInput {
                input_text: fs::read_to_string(&ip).map_err(io_err(&ip))?,
                scale: entry.scale,
                validated: true,
                copy: entry.copy,
            },
            expected_output: fs::read_to_string(&op).map_err(io_err(&op))?,
            label_origin: entry.label_origin,
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
    fn canonical_form() {
        assert_eq!(canonicalize_output("4 \n9\n\n"), "4\n9");
        assert_eq!(canonicalize_output(""), "");
        assert_eq!(canonicalize_output("a\r\nb"), "a\nb");
        assert_eq!(canonicalize_output("a\rb\n"), "a\nb");
        assert_eq!(canonicalize_output("\n\nx\t\n \n"), "\n\nx");
        assert_eq!(canonicalize_output("  lead"), "  lead");
    }

    fn vecs(groups: &[(usize, &str)], failed: usize) -> Vec<Option<Vec<String>>> {
        let mut v: Vec<Option<Vec<String>>> = groups
            .iter()
            .flat_map(|(n, out)| std::iter::repeat_n(Some(vec![out.to_string()]), *n))
            .collect();
        v.extend(std::iter::repeat_n(None, failed));
        v
    }

    #[test]
    fn threshold_arithmetic() {
        let g = group_output_vectors(&vecs(&[(10, "a"), (3, "b"), (3, "c")], 0), 0.6);
        assert_eq!(g.decision, Decision::Accept);
        assert_eq!(g.agreement_fraction, 0.625);
        let g = group_output_vectors(&vecs(&[(9, "a"), (4, "b"), (3, "c")], 0), 0.6);
        assert_eq!(g.decision, Decision::Reject);
        assert_eq!(g.agreement_fraction, 0.5625);
        let g = group_output_vectors(&vecs(&[(7, "a"), (5, "b"), (4, "c")], 0), 0.4);
        assert_eq!(g.decision, Decision::Accept);
        assert_eq!(g.agreement_fraction, 0.4375);
        let g = group_output_vectors(&vecs(&[(16, "a")], 0), 0.6);
        assert_eq!((g.decision, g.agreement_fraction), (Decision::Accept, 1.0));
    }

    #[test]
    fn failures_leave_the_denominator() {
        let g = group_output_vectors(&vecs(&[(7, "a"), (3, "b")], 6), 0.6);
        assert_eq!(g.n_complete, 10);
        assert_eq!(g.agreement_fraction, 0.7);
        assert_eq!(g.agreement_fraction_all, 7.0 / 16.0);
        assert_eq!(g.decision, Decision::Accept);
        let none = group_output_vectors(&vecs(&[], 16), 0.6);
        assert_eq!(none.decision, Decision::Reject);
        assert!(none.groups.is_empty());
        assert_eq!(none.agreement_fraction, 0.0);
    }

    #[test]
    fn ties_reject() {
        let g = group_output_vectors(&vecs(&[(5, "a"), (5, "b")], 0), 0.4);
        assert_eq!(g.decision, Decision::Reject);
        assert_eq!(g.winning_group, None);
    }

    fn sandbox() -> Sandbox {
        Sandbox::new(SandboxConfig::default()).unwrap()
    }

    fn inputs(n: usize) -> Vec<TestInput> {
        (1..=n as u64)
            .map(|k| TestInput {
                input_text: format!("{k}\n"),
                scale: ScalePoint::new(vec![k]),
                validated: true,
                copy: 0,
            })
            .collect()
    }

    #[test]
    fn oracle_labeling_and_failures() {
        let mut p = Problem::stdio("sq", "square", Source::Codeforces);
        p.oracle_solutions.push(Solution::oracle("n = int(input())\nprint(n * n, ' ')\n"));
        let cases = label_with_oracle(&p, &inputs(3), &sandbox(), &ResourceLimits::default(), false).unwrap();
        let outs: Vec<&str> = cases.iter().map(|c| c.expected_output.as_str()).collect();
        assert_eq!(outs, vec!["1", "4", "9"]);
        assert!(cases.iter().all(|c| c.label_origin == LabelOrigin::Oracle));

        p.oracle_solutions.push(Solution::oracle("n = int(input())\nprint(n * n if n < 3 else 0)\n"));
        let err = label_with_oracle(&p, &inputs(3), &sandbox(), &ResourceLimits::default(), true).unwrap_err();
        assert!(matches!(err, VerifyError::OracleDisagreement { ref scale, .. } if scale.values == vec![3]));
        assert!(label_with_oracle(&p, &inputs(3), &sandbox(), &ResourceLimits::default(), false).is_ok());

        p.oracle_solutions = vec![Solution::oracle("n = int(input())\nassert n < 2\nprint(n)\n")];
        let err = label_with_oracle(&p, &inputs(3), &sandbox(), &ResourceLimits::default(), false).unwrap_err();
        assert!(matches!(err, VerifyError::OracleFailure { verdict: Verdict::Re, .. }));

        p.oracle_solutions.clear();
        assert!(matches!(
            label_with_oracle(&p, &inputs(3), &sandbox(), &ResourceLimits::default(), false),
            Err(VerifyError::NoOracle(_))
        ));
    }

    #[test]
    fn mutual_on_small_pool() {
        let p = Problem::stdio("dbl", "double", Source::Synthetic);
        let good = "print(2 * int(input()))\n";
        let mut pool: Vec<Solution> = (0..3).map(|i| Solution::model(format!("{good}# v{i}\n"))).collect();
        pool.push(Solution::model("print(2 * int(input()) + 1)\n"));
        pool.push(Solution::model("raise SystemExit(3)\n"));
        let out = mutual_verify(&p, &pool, &inputs(4), 0.6, 4, &sandbox(), &ResourceLimits::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.decision, Decision::Accept);
        assert_eq!(r.n_complete, 4);
        assert_eq!(r.agreement_fraction, 0.75);
        assert_eq!(r.accepted_solutions, vec![0, 1, 2]);
        let labels: Vec<&str> = r.labeled_cases.iter().map(|c| c.expected_output.as_str()).collect();
        assert_eq!(labels, vec!["2", "4", "6", "8"]);
        assert!(out.solutions[0].passed_all());
        assert!(out.solutions[0].cpu_time_total_seconds.is_some());
        assert_eq!(out.solutions[3].verdicts.as_ref().unwrap()[0], CaseOutcome::WrongAnswer);
        assert_eq!(out.solutions[4].verdicts.as_ref().unwrap()[0], CaseOutcome::Failed(Verdict::Re));
        assert_eq!(out.solutions[4].cpu_time_total_seconds, None);

        let err = mutual_verify(&p, &pool, &inputs(4), 0.6, 50, &sandbox(), &ResourceLimits::default()).unwrap_err();
        assert!(matches!(err, VerifyError::TooFewInputs { have: 4, need: 50, .. }));
    }

    #[test]
    fn augmentation_keeps_passers_or_flags_all() {
        let p = Problem::stdio("inc", "increment", Source::Codeforces);
        let cases: Vec<TestCase> = inputs(5)
            .into_iter()
            .map(|i| {
                let n: u64 = i.input_text.trim().parse().unwrap();
                TestCase {
                    expected_output: (n + 1).to_string(),
                    input: i,
                    label_origin: LabelOrigin::Oracle,
                }
            })
            .collect();
        let right = Solution::model("print(int(input()) + 1)\n");
        let almost = Solution::model("n = int(input())\nprint(n + 1 if n < 5 else n)\n");
        let kept = augment_seed_solutions(&p, &cases, &[right.clone(), almost.clone()], &sandbox(), &ResourceLimits::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].source_text, right.source_text);
        assert!(!kept[0].unverified);

        let kept = augment_seed_solutions(&p, &cases, &[almost.clone(), almost], &sandbox(), &ResourceLimits::default()).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|s| s.unverified));
    }

    #[test]
    fn function_kind_runs_through_shim() {
        let mut p = Problem::stdio("mn", "min number", Source::LeetCode);
        p.kind = ProblemKind::Function;
        p.fn_name = Some("f".into());
        p.oracle_solutions.push(Solution::oracle("class Solution:\n    def f(self, a, b):\n        return [a + b]\n"));
        let ins = vec![TestInput {
            input_text: "{\"a\": 2, \"b\": 3}".into(),
            scale: ScalePoint::new(vec![1]),
            validated: true,
            copy: 0,
        }];
        let cases = label_with_oracle(&p, &ins, &sandbox(), &ResourceLimits::default(), false).unwrap();
        assert_eq!(cases[0].expected_output, "[5]");
    }

    #[test]
    fn cases_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let cases: Vec<TestCase> = inputs(3)
            .into_iter()
            .map(|i| TestCase {
                expected_output: format!("out\n{}", i.input_text.trim()),
                input: i,
                label_origin: LabelOrigin::Mutual,
            })
            .collect();
        write_cases(dir.path(), "p", &cases).unwrap();
        assert_eq!(read_cases(dir.path(), "p").unwrap(), cases);
    }
}
