//! Verified competitive-programming dataset construction.
//!
//! The pipeline ingests seed problems, synthesizes new ones with an LLM,
//! generates scale-controlled test inputs from LLM-written generator and
//! validator programs, executes solutions in a resource-limited sandbox and
//! labels outputs by oracle execution or by mutual verification among
//! sampled solutions. The result is filtered, decontaminated and exported
//! as JSONL.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod fixture;
pub mod inputgen;
pub mod llm;
pub mod pipeline;
pub mod postproc;
pub mod problem;
pub mod sandbox;
pub mod synth;
pub mod toy;
pub mod verify;

pub use problem::{CaseOutcome, ExampleCase, Problem, ProblemKind, Solution, SolutionOrigin, Source};
pub use sandbox::{ExecutionResult, ResourceLimits, Sandbox, SandboxConfig, Verdict};
