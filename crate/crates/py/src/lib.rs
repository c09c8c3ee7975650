//! Python bindings for the cpverify library.
//!
//! The module is importable as `cpverify`. Long-running calls (sandboxed
//! execution, verification, the toy pipeline) release the interpreter lock.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cpverify::config::PipelineConfig;
use cpverify::inputgen::{self, ScalePoint, TestInput};
use cpverify::llm;
use cpverify::postproc::{self, Thresholds};
use cpverify::problem::{Problem, Solution, Source};
use cpverify::sandbox::{self, ResourceLimits, SandboxConfig, Verdict};
use cpverify::verify::{self, Decision};

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Normalizes program output: LF line endings, no trailing whitespace per
/// line, no trailing blank lines.
#[pyfunction]
fn canonicalize_output(text: &str) -> String {
    verify::canonicalize_output(text)
}

/// The sorted per-parameter value set {1..9} plus the powers of ten up to 10^e.
#[pyfunction]
fn candidate_values(e: u32) -> Vec<u64> {
    inputgen::candidate_values(e)
}

#[pyfunction]
#[pyo3(signature = (n_params, e = 5, cap = 200, seed = 0))]
fn scale_grid(n_params: usize, e: u32, cap: usize, seed: u64) -> PyResult<Vec<Vec<u64>>> {
    if n_params == 0 {
        return Err(value_err("n_params must be at least 1"));
    }
    Ok(inputgen::scale_grid(n_params, e, cap, seed)
        .into_iter()
        .map(|p| p.values)
        .collect())
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    postproc::tokenize(text)
}

/// Agreement threshold for a problem with the given rating.
#[pyfunction]
#[pyo3(signature = (cf_rating = None))]
fn threshold_for(cf_rating: Option<i64>) -> f64 {
    let mut p = Problem::stdio("", "", Source::Synthetic);
    p.cf_rating = cf_rating;
    Thresholds::default().for_problem(&p)
}

/// `(language, code)` for every fenced block in a completion.
#[pyfunction]
fn extract_code_blocks(text: &str) -> Vec<(String, String)> {
    llm::extract_code_blocks(text)
        .into_iter()
        .map(|b| (b.language, b.code))
        .collect()
}

#[pyfunction]
fn default_config_toml() -> &'static str {
    cpverify::config::DEFAULT_CONFIG_TOML
}

/// Parses and validates a TOML config; returns it with defaults filled in.
#[pyfunction]
fn load_config(text: &str) -> PyResult<String> {
    PipelineConfig::from_toml(text).map(|c| c.to_toml()).map_err(value_err)
}

#[pyclass(module = "cpverify", name = "Grouping", skip_from_py_object)]
struct PyGrouping {
    #[pyo3(get)]
    decision: String,
    #[pyo3(get)]
    agreement_fraction: f64,
    #[pyo3(get)]
    agreement_fraction_all: f64,
    #[pyo3(get)]
    n_solutions: usize,
    #[pyo3(get)]
    n_complete: usize,
    /// Members of each group, largest group first.
    #[pyo3(get)]
    groups: Vec<Vec<usize>>,
    #[pyo3(get)]
    winning_group: Option<usize>,
}

#[pymethods]
impl PyGrouping {
    fn __repr__(&self) -> String {
        format!(
            "Grouping(decision={}, agreement={:.4}, groups={})",
            self.decision,
            self.agreement_fraction,
            self.groups.len()
        )
    }
}

fn decision_str(d: Decision) -> String {
    match d {
        Decision::Accept => "ACCEPT",
        Decision::Reject => "REJECT",
    }
    .to_string()
}

/// Groups per-solution output vectors; `None` marks a solution with a
/// failed run, which is left out of the denominator.
#[pyfunction]
fn group_outputs(vectors: Vec<Option<Vec<String>>>, threshold: f64) -> PyResult<PyGrouping> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(value_err(format!("threshold must be in (0, 1], got {threshold}")));
    }
    let canonical: Vec<Option<Vec<String>>> = vectors
        .into_iter()
        .map(|v| v.map(|v| v.iter().map(|o| verify::canonicalize_output(o)).collect()))
        .collect();
    let g = verify::group_output_vectors(&canonical, threshold);
    Ok(PyGrouping {
        decision: decision_str(g.decision),
        agreement_fraction: g.agreement_fraction,
        agreement_fraction_all: g.agreement_fraction_all,
        n_solutions: g.n_solutions,
        n_complete: g.n_complete,
        groups: g.groups.into_iter().map(|g| g.members).collect(),
        winning_group: g.winning_group,
    })
}

#[pyclass(module = "cpverify", name = "NGramIndex", skip_from_py_object)]
struct PyNGramIndex {
    inner: postproc::NGramIndex,
}

#[pymethods]
impl PyNGramIndex {
    /// `docs` is a list of `(benchmark_id, text)`.
    #[new]
    #[pyo3(signature = (docs, n = 16))]
    fn new(py: Python<'_>, docs: Vec<(String, String)>, n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(value_err("n must be positive"));
        }
        let inner = py.detach(|| postproc::NGramIndex::build(&docs, n));
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(matched_gram, benchmark_ids)` for the first shared window, if any.
    fn first_match(&self, text: &str) -> Option<(String, Vec<String>)> {
        self.inner.first_match(text).map(|(g, ids)| (g, ids.to_vec()))
    }

    /// Splits `(id, statement)` pairs into kept ids and
    /// `(id, benchmark_id, matched_gram)` removals.
    fn decontaminate(
        &self,
        py: Python<'_>,
        problems: Vec<(String, String)>,
    ) -> (Vec<String>, Vec<(String, String, String)>) {
        let problems: Vec<Problem> = problems
            .into_iter()
            .map(|(id, s)| Problem::stdio(id, s, Source::Synthetic))
            .collect();
        let out = py.detach(|| postproc::decontaminate(problems, &self.inner));
        (
            out.kept.into_iter().map(|p| p.id).collect(),
            out.removed
                .into_iter()
                .map(|r| (r.problem_id, r.benchmark_id, r.matched_gram))
                .collect(),
        )
    }
}

#[pyclass(module = "cpverify", name = "ExecutionResult", skip_from_py_object)]
struct PyExecutionResult {
    #[pyo3(get)]
    verdict: String,
    #[pyo3(get)]
    stdout: String,
    #[pyo3(get)]
    stderr: String,
    #[pyo3(get)]
    exit_code: Option<i32>,
    #[pyo3(get)]
    cpu_time: f64,
    #[pyo3(get)]
    wall_time: f64,
}

#[pymethods]
impl PyExecutionResult {
    #[getter]
    fn ok(&self) -> bool {
        self.verdict == "OK"
    }

    fn __repr__(&self) -> String {
        format!("ExecutionResult(verdict={}, wall_time={:.3})", self.verdict, self.wall_time)
    }
}

impl From<sandbox::ExecutionResult> for PyExecutionResult {
    fn from(r: sandbox::ExecutionResult) -> Self {
        let verdict = match r.verdict {
            Verdict::Ok => "OK",
            Verdict::Tle => "TLE",
            Verdict::Mle => "MLE",
            Verdict::Re => "RE",
            Verdict::OutputLimit => "OUTPUT_LIMIT",
        }
        .to_string();
        Self {
            verdict,
            stdout: r.stdout_text,
            stderr: r.stderr_text,
            exit_code: r.exit_code,
            cpu_time: r.cpu_time_seconds,
            wall_time: r.wall_time_seconds,
        }
    }
}

#[pyclass(module = "cpverify", name = "VerificationReport", skip_from_py_object)]
struct PyVerificationReport {
    #[pyo3(get)]
    decision: String,
    #[pyo3(get)]
    agreement_fraction: f64,
    #[pyo3(get)]
    threshold: f64,
    #[pyo3(get)]
    accepted: Vec<usize>,
    /// `(input, expected_output)` pairs, empty on rejection.
    #[pyo3(get)]
    labels: Vec<(String, String)>,
}

#[pymethods]
impl PyVerificationReport {
    fn __repr__(&self) -> String {
        format!(
            "VerificationReport(decision={}, agreement={:.4}, labels={})",
            self.decision,
            self.agreement_fraction,
            self.labels.len()
        )
    }
}

fn limits(timeout: f64, memory_bytes: u64) -> PyResult<ResourceLimits> {
    let l = ResourceLimits {
        wall_timeout_seconds: timeout,
        address_space_bytes: memory_bytes,
        ..Default::default()
    };
    l.validate().map_err(value_err)?;
    Ok(l)
}

const DEFAULT_MEMORY: u64 = 4 << 30;

#[pyclass(module = "cpverify", name = "Sandbox", skip_from_py_object)]
struct PySandbox {
    inner: sandbox::Sandbox,
}

#[pymethods]
impl PySandbox {
    #[new]
    #[pyo3(signature = (workers = None))]
    fn new(workers: Option<usize>) -> PyResult<Self> {
        let mut cfg = SandboxConfig::default();
        if let Some(w) = workers {
            cfg.workers = w;
        }
        Ok(Self {
            inner: sandbox::Sandbox::new(cfg).map_err(runtime_err)?,
        })
    }

    /// Runs a Python program with `input` on standard input.
    #[pyo3(signature = (code, input, timeout = 10.0, memory_bytes = DEFAULT_MEMORY))]
    fn run_stdio(
        &self,
        py: Python<'_>,
        code: &str,
        input: &str,
        timeout: f64,
        memory_bytes: u64,
    ) -> PyResult<PyExecutionResult> {
        let l = limits(timeout, memory_bytes)?;
        let prog = Solution::model(code);
        py.detach(|| self.inner.run_stdio(&prog, input, &l))
            .map(Into::into)
            .map_err(runtime_err)
    }

    /// Calls `fn_name` with a JSON argument record; `stdout` holds the JSON
    /// encoding of the return value.
    #[pyo3(signature = (code, fn_name, args_json, timeout = 10.0, memory_bytes = DEFAULT_MEMORY))]
    fn run_function(
        &self,
        py: Python<'_>,
        code: &str,
        fn_name: &str,
        args_json: &str,
        timeout: f64,
        memory_bytes: u64,
    ) -> PyResult<PyExecutionResult> {
        let l = limits(timeout, memory_bytes)?;
        let prog = Solution::model(code);
        py.detach(|| self.inner.run_function(&prog, fn_name, args_json, &l))
            .map(Into::into)
            .map_err(runtime_err)
    }

    /// Runs every candidate on every stdin input and votes on the outputs.
    #[pyo3(signature = (candidates, inputs, threshold = 0.6, min_inputs = 50, timeout = 10.0))]
    fn mutual_verify(
        &self,
        py: Python<'_>,
        candidates: Vec<String>,
        inputs: Vec<String>,
        threshold: f64,
        min_inputs: usize,
        timeout: f64,
    ) -> PyResult<PyVerificationReport> {
        let l = limits(timeout, DEFAULT_MEMORY)?;
        let problem = Problem::stdio("python", "Candidate programs supplied from Python.", Source::Synthetic);
        let solutions: Vec<Solution> = candidates.into_iter().map(Solution::model).collect();
        let inputs: Vec<TestInput> = inputs
            .into_iter()
            .enumerate()
            .map(|(i, text)| TestInput {
                input_text: text,
                scale: ScalePoint {
                    values: vec![i as u64 + 1],
                },
                validated: true,
                copy: 0,
            })
            .collect();
        let out = py
            .detach(|| verify::mutual_verify(&problem, &solutions, &inputs, threshold, min_inputs, &self.inner, &l))
            .map_err(value_err)?;
        let r = out.report;
        Ok(PyVerificationReport {
            decision: decision_str(r.decision),
            agreement_fraction: r.agreement_fraction,
            threshold: r.threshold,
            accepted: r.accepted_solutions,
            labels: r
                .labeled_cases
                .into_iter()
                .map(|c| (c.input.input_text, c.expected_output))
                .collect(),
        })
    }
}

/// Builds the toy fixture and runs the whole pipeline offline. Returns the
/// record count, the export digest and the export path.
#[pyfunction]
fn run_toy_pipeline(py: Python<'_>, work_dir: PathBuf, run_dir: PathBuf) -> PyResult<(usize, String, String)> {
    let cfg = cpverify::fixture::toy_config();
    let (p, manifest) = py
        .detach(|| cpverify::fixture::run_toy_pipeline(&work_dir, &run_dir, &cfg))
        .map_err(runtime_err)?;
    Ok((manifest.records, manifest.sha256, p.export_path().display().to_string()))
}

#[pymodule]
#[pyo3(name = "cpverify")]
fn cpverify_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(canonicalize_output, m)?)?;
    m.add_function(wrap_pyfunction!(candidate_values, m)?)?;
    m.add_function(wrap_pyfunction!(scale_grid, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_for, m)?)?;
    m.add_function(wrap_pyfunction!(extract_code_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(group_outputs, m)?)?;
    m.add_function(wrap_pyfunction!(run_toy_pipeline, m)?)?;
    m.add_class::<PyGrouping>()?;
    m.add_class::<PyNGramIndex>()?;
    m.add_class::<PyExecutionResult>()?;
    m.add_class::<PyVerificationReport>()?;
    m.add_class::<PySandbox>()?;
    Ok(())
}
