//! pass@1 over labeled problems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Problem, Solution};
use crate::sandbox::{ResourceLimits, Sandbox, SandboxError};
use crate::verify::{canonicalize_output, run_matrix, TestCase};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be positive")]
    ZeroK,
    #[error("problem {problem_id} has {have} samples, k = {k}")]
    NotEnoughSamples { problem_id: String, have: usize, k: usize },
    #[error("problem {0} has no test cases")]
    NoTests(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemScore {
    pub problem_id: String,
    pub passed: usize,
    pub k: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub pass_at_1: f64,
    pub problems: Vec<ProblemScore>,
}

/// Mean over problems of the passing fraction among the first `k` samples.
/// `outcomes[p][s]` says whether sample `s` of problem `p` passed every test.
pub fn pass_at_1(ids: &[String], outcomes: &[Vec<bool>], k: usize) -> Result<EvalReport, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let mut problems = Vec::with_capacity(outcomes.len());
    for (id, o) in ids.iter().zip(outcomes) {
        if o.len() < k {
            return Err(EvalError::NotEnoughSamples {
                problem_id: id.clone(),
                have: o.len(),
                k,
            });
        }
        let passed = o[..k].iter().filter(|b| **b).count();
        problems.push(ProblemScore {
            problem_id: id.clone(),
            passed,
            k,
            rate: passed as f64 / k as f64,
        });
    }
    let pass_at_1 = if problems.is_empty() {
        0.0
    } else {
        problems.iter().map(|p| p.rate).sum::<f64>() / problems.len() as f64
    };
    Ok(EvalReport { k, pass_at_1, problems })
}

/// Judges the first `k` samples of every problem against its tests.
pub fn evaluate(
    items: &[(Problem, Vec<Solution>, Vec<TestCase>)],
    k: usize,
    sandbox: &Sandbox,
    limits: &ResourceLimits,
) -> Result<EvalReport, EvalError> {
    let mut ids = Vec::new();
    let mut outcomes = Vec::new();
    for (problem, samples, cases) in items {
        if cases.is_empty() {
            return Err(EvalError::NoTests(problem.id.clone()));
        }
        if samples.len() < k || k == 0 {
            // let pass_at_1 report the shortage
            ids.push(problem.id.clone());
            outcomes.push(vec![false; samples.len()]);
            continue;
        }
        let inputs: Vec<_> = cases.iter().map(|c| c.input.clone()).collect();
        let matrix = run_matrix(problem, &samples[..k], &inputs, sandbox, limits)?;
        let row = matrix
            .iter()
            .map(|runs| {
                runs.iter()
                    .zip(cases)
                    .all(|(r, c)| r.is_ok() && canonicalize_output(&r.stdout_text) == c.expected_output)
            })
            .collect();
        ids.push(problem.id.clone());
        outcomes.push(row);
    }
    pass_at_1(&ids, &outcomes, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn definition() {
        let r = pass_at_1(&ids(1), &[vec![true, false, true, false]], 4).unwrap();
        assert_eq!(r.pass_at_1, 0.5);
        let r = pass_at_1(&ids(1), &[vec![true; 4]], 4).unwrap();
        assert_eq!(r.pass_at_1, 1.0);
        let r = pass_at_1(&ids(2), &[vec![true; 4], vec![true, false, false, false]], 4).unwrap();
        assert_eq!(r.pass_at_1, 0.625);
        // only the first k samples count
        let r = pass_at_1(&ids(1), &[vec![false, true, true]], 1).unwrap();
        assert_eq!(r.pass_at_1, 0.0);
    }

    #[test]
    fn k_bounds() {
        assert!(matches!(
            pass_at_1(&ids(1), &[vec![true; 3]], 4),
            Err(EvalError::NotEnoughSamples { have: 3, k: 4, .. })
        ));
        assert!(matches!(pass_at_1(&ids(1), &[vec![true]], 0), Err(EvalError::ZeroK)));
    }
}
