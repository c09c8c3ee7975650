//! Resource-limited execution of untrusted programs.
//!
//! Every job runs as a fresh child process in its own process group and its
//! own scratch directory. The child gets an address-space rlimit; the parent
//! enforces the wall-clock limit and the output cap, and kills the whole
//! process group when the job ends, whichever way it ends.
//!
//! Function-mode programs and generated test utilities run behind the runner
//! shim, which speaks one JSON line in and one JSON line out.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::problem::Solution;

pub const DEFAULT_LANGUAGE: &str = "python3";

/// Source of the runner shim, written once per [`Sandbox`].
pub const RUNNER_SHIM: &str = include_str!("../shim/runner_shim.py");

const KILL_GRACE: Duration = Duration::from_millis(500);

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("no runner recipe registered for runtime tag '{0}'")]
    UnknownRuntime(String),
    #[error("runtime '{0}' has no function-mode recipe")]
    NoFunctionMode(String),
    #[error("invalid resource limits: {0}")]
    InvalidLimits(String),
    #[error("failed to prepare job: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceLimits {
    pub wall_timeout_seconds: f64,
    pub address_space_bytes: u64,
    pub max_output_bytes: usize,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        Self {
            wall_timeout_seconds: 10.0,
            address_space_bytes: 4 << 30,
            max_output_bytes: 16 << 20,
        }
    }
}

impl ResourceLimits {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if !(self.wall_timeout_seconds > 0.0 && self.wall_timeout_seconds.is_finite()) {
            return Err(SandboxError::InvalidLimits("wall timeout must be positive".into()));
        }
        if self.address_space_bytes == 0 || self.max_output_bytes == 0 {
            return Err(SandboxError::InvalidLimits("memory and output caps must be positive".into()));
        }
        Ok(())
    }

    pub fn with_timeout(mut self, seconds: f64) -> Self {
        self.wall_timeout_seconds = seconds;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Ok,
    Tle,
    Mle,
    Re,
    OutputLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub verdict: Verdict,
    pub stdout_text: String,
    pub stderr_text: String,
    pub exit_code: Option<i32>,
    pub cpu_time_seconds: f64,
    pub wall_time_seconds: f64,
}

impl ExecutionResult {
    pub fn is_ok(&self) -> bool {
        self.verdict == Verdict::Ok
    }

    fn internal_failure(msg: String) -> Self {
        Self {
            verdict: Verdict::Re,
            stdout_text: String::new(),
            stderr_text: msg,
            exit_code: None,
            cpu_time_seconds: 0.0,
            wall_time_seconds: 0.0,
        }
    }
}

/// How to run programs of one runtime tag. `{file}` expands to the program
/// path, `{shim}` to the runner shim and `{mode}` to the shim mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerRecipe {
    pub extension: String,
    pub argv: Vec<String>,
    #[serde(default)]
    pub function_argv: Option<Vec<String>>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

pub fn default_recipes() -> BTreeMap<String, RunnerRecipe> {
    let python_env: BTreeMap<String, String> = [("PYTHONHASHSEED", "0"), ("PYTHONDONTWRITEBYTECODE", "1")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let python = |flags: &[&str]| {
        let mut argv = vec!["python3".to_string()];
        argv.extend(flags.iter().map(|s| s.to_string()));
        let mut function_argv = argv.clone();
        argv.push("{file}".into());
        function_argv.extend(["{shim}", "{mode}", "{file}"].map(String::from));
        RunnerRecipe {
            extension: "py".into(),
            argv,
            function_argv: Some(function_argv),
            env: python_env.clone(),
        }
    };
    let mut recipes = BTreeMap::new();
    // -S skips site initialisation: ~5x faster start-up, stdlib still available
    recipes.insert("python3".to_string(), python(&["-S"]));
    recipes.insert("python3-site".to_string(), python(&[]));
    recipes.insert(
        "bash".to_string(),
        RunnerRecipe {
            extension: "sh".into(),
            argv: vec!["bash".into(), "{file}".into()],
            function_argv: None,
            env: BTreeMap::new(),
        },
    );
    recipes
}

/// Shim entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShimMode {
    Function,
    Generate,
    Validate,
}

impl ShimMode {
    fn as_str(self) -> &'static str {
        match self {
            ShimMode::Function => "function",
            ShimMode::Generate => "generate",
            ShimMode::Validate => "validate",
        }
    }
}

/// Outcome of a shim invocation: the raw execution plus the decoded
/// response record, when the shim produced one.
#[derive(Debug, Clone)]
pub struct ShimCall {
    pub exec: ExecutionResult,
    pub response: Option<serde_json::Map<String, Value>>,
}

impl ShimCall {
    /// The response, if the process succeeded and the shim reported `ok`.
    pub fn ok_response(&self) -> Option<&serde_json::Map<String, Value>> {
        self.response
            .as_ref()
            .filter(|r| self.exec.is_ok() && r.get("ok") == Some(&Value::Bool(true)))
    }
}

/// What a job feeds to its program.
#[derive(Debug, Clone, PartialEq)]
pub enum JobInput {
    Stdin(String),
    Call { fn_name: String, args_record: String },
}

#[derive(Debug, Clone)]
pub struct Job {
    pub program: Solution,
    pub input: JobInput,
    pub limits: ResourceLimits,
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    pub workers: usize,
    pub recipes: BTreeMap<String, RunnerRecipe>,
    /// Keep scratch directories of non-OK jobs for inspection.
    pub keep_failed: bool,
    /// Run children in a fresh network namespace (needs unprivileged user
    /// namespaces or CAP_SYS_ADMIN).
    pub no_network: bool,
    pub scratch_root: Option<PathBuf>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            workers: thread::available_parallelism().map_or(1, |n| n.get()),
            recipes: default_recipes(),
            keep_failed: false,
            no_network: false,
            scratch_root: None,
        }
    }
}

/// Executor with a bounded worker pool. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Sandbox {
    config: Arc<SandboxConfig>,
    shim_path: Arc<ShimFile>,
}

#[derive(Debug)]
struct ShimFile {
    _dir: tempfile::TempDir,
    path: PathBuf,
}

struct Prepared<'a> {
    recipe: &'a RunnerRecipe,
    argv: Vec<String>,
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Result<Self, SandboxError> {
        let dir = tempfile::Builder::new().prefix("cpverify-shim").tempdir()?;
        let path = dir.path().join("runner_shim.py");
        std::fs::write(&path, RUNNER_SHIM)?;
        Ok(Self {
            config: Arc::new(SandboxConfig {
                workers: config.workers.max(1),
                ..config
            }),
            shim_path: Arc::new(ShimFile { _dir: dir, path }),
        })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn shim_path(&self) -> &Path {
        &self.shim_path.path
    }

    fn recipe(&self, tag: &str) -> Result<&RunnerRecipe, SandboxError> {
        self.config
            .recipes
            .get(tag)
            .ok_or_else(|| SandboxError::UnknownRuntime(tag.to_string()))
    }

    fn prepare(&self, tag: &str, mode: Option<ShimMode>) -> Result<Prepared<'_>, SandboxError> {
        let recipe = self.recipe(tag)?;
        let template = match mode {
            None => &recipe.argv,
            Some(_) => recipe
                .function_argv
                .as_ref()
                .ok_or_else(|| SandboxError::NoFunctionMode(tag.to_string()))?,
        };
        let shim = self.shim_path().to_string_lossy().into_owned();
        let mode = mode.map_or("", ShimMode::as_str);
        let argv = template
            .iter()
            .map(|a| a.replace("{shim}", &shim).replace("{mode}", mode))
            .collect();
        Ok(Prepared { recipe, argv })
    }

    /// Runs `program` with `input_text` on standard input.
    pub fn run_stdio(
        &self,
        program: &Solution,
        input_text: &str,
        limits: &ResourceLimits,
    ) -> Result<ExecutionResult, SandboxError> {
        limits.validate()?;
        let prepared = self.prepare(&program.language, None)?;
        self.execute(&prepared, &program.source_text, input_text.as_bytes(), limits)
    }

    /// Calls `fn_name` from `program` with a serialized argument record (a
    /// JSON array for positional arguments or an object for named ones). On
    /// success `stdout_text` holds the JSON encoding of the return value.
    pub fn run_function(
        &self,
        program: &Solution,
        fn_name: &str,
        args_record: &str,
        limits: &ResourceLimits,
    ) -> Result<ExecutionResult, SandboxError> {
        limits.validate()?;
        let args: Value = match serde_json::from_str(args_record) {
            Ok(v) => v,
            Err(e) => {
                return Ok(ExecutionResult::internal_failure(format!(
                    "argument record is not valid JSON: {e}"
                )))
            }
        };
        let request = serde_json::json!({ "fn_name": fn_name, "args": args });
        let call = self.shim_call(&program.language, ShimMode::Function, &program.source_text, &request, limits)?;
        Ok(function_result(call))
    }

    /// Runs a shim entry point against `source` with a one-line request.
    pub fn run_shim(
        &self,
        mode: ShimMode,
        source: &str,
        request: &Value,
        limits: &ResourceLimits,
    ) -> Result<ShimCall, SandboxError> {
        limits.validate()?;
        self.shim_call(DEFAULT_LANGUAGE, mode, source, request, limits)
    }

    fn shim_call(
        &self,
        tag: &str,
        mode: ShimMode,
        source: &str,
        request: &Value,
        limits: &ResourceLimits,
    ) -> Result<ShimCall, SandboxError> {
        let prepared = self.prepare(tag, Some(mode))?;
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        let exec = self.execute(&prepared, source, line.as_bytes(), limits)?;
        let response = exec
            .stdout_text
            .lines()
            .find(|l| !l.trim().is_empty())
            .and_then(|l| serde_json::from_str::<Value>(l).ok())
            .and_then(|v| match v {
                Value::Object(map) => Some(map),
                _ => None,
            });
        Ok(ShimCall { exec, response })
    }

    /// Runs every job through the worker pool. Results are positionally
    /// aligned with `jobs`; only configuration problems fail the batch.
    pub fn batch_run(&self, jobs: &[Job]) -> Result<Vec<ExecutionResult>, SandboxError> {
        for job in jobs {
            job.limits.validate()?;
            let mode = match job.input {
                JobInput::Stdin(_) => None,
                JobInput::Call { .. } => Some(ShimMode::Function),
            };
            self.prepare(&job.program.language, mode)?;
        }
        Ok(self.parallel_map(jobs, |job| {
            let run = match &job.input {
                JobInput::Stdin(text) => self.run_stdio(&job.program, text, &job.limits),
                JobInput::Call { fn_name, args_record } => {
                    self.run_function(&job.program, fn_name, args_record, &job.limits)
                }
            };
            run.unwrap_or_else(|e| ExecutionResult::internal_failure(e.to_string()))
        }))
    }

    /// Maps `f` over `items` on at most `workers` threads, preserving order.
    pub fn parallel_map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let workers = self.config.workers.min(items.len());
        if workers <= 1 {
            return items.iter().map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<R>> = Vec::with_capacity(items.len());
        slots.resize_with(items.len(), || None);
        let results = std::sync::Mutex::new(slots);
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= items.len() {
                        break;
                    }
                    let r = f(&items[i]);
                    results.lock().expect("result slots poisoned")[i] = Some(r);
                });
            }
        });
        results
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|r| r.expect("every job produced a result"))
            .collect()
    }

    fn execute(
        &self,
        prepared: &Prepared<'_>,
        source: &str,
        stdin_bytes: &[u8],
        limits: &ResourceLimits,
    ) -> Result<ExecutionResult, SandboxError> {
        let mut builder = tempfile::Builder::new();
        builder.prefix("cpverify-job");
        let dir = match &self.config.scratch_root {
            Some(root) => builder.tempdir_in(root)?,
            None => builder.tempdir()?,
        };
        let file = dir.path().join(format!("main.{}", prepared.recipe.extension));
        std::fs::write(&file, source)?;
        let file = file.to_string_lossy().into_owned();
        let argv: Vec<String> = prepared.argv.iter().map(|a| a.replace("{file}", &file)).collect();

        let result = spawn_and_wait(
            &argv,
            &prepared.recipe.env,
            dir.path(),
            stdin_bytes,
            limits,
            self.config.no_network,
        );
        if self.config.keep_failed && !result.is_ok() {
            let kept = dir.keep();
            log::warn!("kept scratch directory of failed job: {}", kept.display());
        }
        Ok(result)
    }
}

fn function_result(call: ShimCall) -> ExecutionResult {
    let ShimCall { mut exec, response } = call;
    if exec.verdict != Verdict::Ok {
        return exec;
    }
    match response {
        Some(map) if map.get("ok") == Some(&Value::Bool(true)) => {
            let result = map.get("result").cloned().unwrap_or(Value::Null);
            exec.stdout_text = serde_json::to_string(&result).expect("value serializes");
        }
        Some(map) => {
            let error = map
                .get("error")
                .and_then(Value::as_str)
                .unwrap_or("shim reported failure")
                .to_string();
            exec.verdict = if error.starts_with("MemoryError") { Verdict::Mle } else { Verdict::Re };
            exec.stdout_text.clear();
            exec.stderr_text = format!("{error}\n{}", exec.stderr_text);
        }
        None => {
            exec.verdict = Verdict::Re;
            exec.stderr_text = format!(
                "shim protocol violation: stdout is not a response record: {:?}\n{}",
                exec.stdout_text.chars().take(200).collect::<String>(),
                exec.stderr_text
            );
            exec.stdout_text.clear();
        }
    }
    exec
}

const MEMORY_SIGNATURES: &[&str] = &[
    "MemoryError",
    "std::bad_alloc",
    "Cannot allocate memory",
    "out of memory",
    "memory allocation of",
    "failed to allocate",
];

fn looks_like_oom(stderr: &str) -> bool {
    MEMORY_SIGNATURES.iter().any(|sig| stderr.contains(sig))
}

/// Reads up to `cap` bytes, raising `exceeded` when the stream holds more.
/// When `group` is set, the process group is killed on overflow.
fn capped_reader<R: Read + Send + 'static>(
    mut stream: R,
    cap: usize,
    exceeded: Arc<AtomicBool>,
    group: Option<libc::pid_t>,
) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut out = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(out.len());
                    out.extend_from_slice(&buf[..n.min(room)]);
                    if n > room {
                        exceeded.store(true, Ordering::SeqCst);
                        if let Some(pgid) = group {
                            kill_group(pgid, libc::SIGKILL);
                        }
                        break;
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
        out
    })
}

fn kill_group(pgid: libc::pid_t, signal: libc::c_int) {
    // SAFETY: plain syscall; ESRCH when the group is already gone is fine.
    unsafe {
        libc::killpg(pgid, signal);
    }
}

struct Reaped {
    status: ExitStatus,
    cpu_seconds: f64,
}

fn try_reap(pid: libc::pid_t, block: bool) -> Option<Reaped> {
    let mut status: libc::c_int = 0;
    // SAFETY: zeroed rusage is a valid value for the out-parameter.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let flags = if block { 0 } else { libc::WNOHANG };
    loop {
        // SAFETY: pid is our own unreaped child; pointers are valid.
        let r = unsafe { libc::wait4(pid, &mut status, flags, &mut usage) };
        if r == pid {
            let tv = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 / 1e6;
            return Some(Reaped {
                status: ExitStatus::from_raw(status),
                cpu_seconds: tv(usage.ru_utime) + tv(usage.ru_stime),
            });
        }
        if r == -1 && io::Error::last_os_error().raw_os_error() == Some(libc::EINTR) {
            continue;
        }
        return None;
    }
}

fn spawn_and_wait(
    argv: &[String],
    env: &BTreeMap<String, String>,
    cwd: &Path,
    stdin_bytes: &[u8],
    limits: &ResourceLimits,
    no_network: bool,
) -> ExecutionResult {
    let address_space = limits.address_space_bytes;
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .envs(env)
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    // SAFETY: only async-signal-safe libc calls between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            let rl = libc::rlimit {
                rlim_cur: address_space as libc::rlim_t,
                rlim_max: address_space as libc::rlim_t,
            };
            if libc::setrlimit(libc::RLIMIT_AS, &rl) != 0 {
                return Err(io::Error::last_os_error());
            }
            let no_core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
            libc::setrlimit(libc::RLIMIT_CORE, &no_core);
            if no_network && libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) != 0 {
                return Err(io::Error::last_os_error());
            }
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return ExecutionResult::internal_failure(format!("failed to spawn {:?}: {e}", argv[0])),
    };
    let pid = child.id() as libc::pid_t;

    let exceeded = Arc::new(AtomicBool::new(false));
    let stdout = capped_reader(
        child.stdout.take().expect("piped"),
        limits.max_output_bytes,
        exceeded.clone(),
        Some(pid),
    );
    let stderr = capped_reader(
        child.stderr.take().expect("piped"),
        limits.max_output_bytes.min(1 << 20),
        Arc::new(AtomicBool::new(false)),
        None,
    );
    let mut stdin = child.stdin.take().expect("piped");
    let input = stdin_bytes.to_vec();
    let writer = thread::spawn(move || {
        // EPIPE is expected when the child ignores its input
        let _ = stdin.write_all(&input);
    });

    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(try_reap(pid, true));
    });
    let timeout = Duration::from_secs_f64(limits.wall_timeout_seconds);
    let mut timed_out = false;
    let reaped = match rx.recv_timeout(timeout.saturating_sub(start.elapsed())) {
        Ok(r) => r,
        Err(RecvTimeoutError::Timeout) => {
            timed_out = true;
            kill_group(pid, libc::SIGTERM);
            match rx.recv_timeout(KILL_GRACE) {
                Ok(r) => r,
                Err(RecvTimeoutError::Timeout) => {
                    kill_group(pid, libc::SIGKILL);
                    rx.recv().ok().flatten()
                }
                Err(RecvTimeoutError::Disconnected) => None,
            }
        }
        Err(RecvTimeoutError::Disconnected) => None,
    };
    let Some(reaped) = reaped else {
        kill_group(pid, libc::SIGKILL);
        return ExecutionResult::internal_failure("lost track of child process".into());
    };
    let output_limited = exceeded.load(Ordering::SeqCst);
    let signalled_by_us = timed_out || output_limited;
    // descendants that outlived the main process
    kill_group(pid, libc::SIGKILL);
    let wall = start.elapsed().as_secs_f64();

    let _ = writer.join();
    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();
    let stdout_text = String::from_utf8_lossy(&stdout).into_owned();
    let stderr_text = String::from_utf8_lossy(&stderr).into_owned();
    let status = reaped.status;

    let verdict = if output_limited {
        Verdict::OutputLimit
    } else if timed_out {
        Verdict::Tle
    } else if status.success() {
        Verdict::Ok
    } else if looks_like_oom(&stderr_text) || (status.signal() == Some(libc::SIGKILL) && !signalled_by_us) {
        Verdict::Mle
    } else {
        Verdict::Re
    };

    ExecutionResult {
        verdict,
        stdout_text,
        stderr_text,
        exit_code: status.code(),
        cpu_time_seconds: reaped.cpu_seconds,
        wall_time_seconds: wall,
    }
}
