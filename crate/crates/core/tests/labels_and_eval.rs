use proptest::prelude::*;

use cpverify::eval::evaluate;
use cpverify::inputgen::{ScalePoint, TestInput};
use cpverify::toy::{Family, ToyProblem};
use cpverify::verify::{label_with_oracle, LabelOrigin, VerifyError};
use cpverify::{ResourceLimits, Sandbox, SandboxConfig, Solution, Source};

fn sandbox() -> Sandbox {
    Sandbox::new(SandboxConfig::default()).unwrap()
}

fn input(a: &[u64]) -> TestInput {
    TestInput {
        input_text: format!("{}\n{}\n", a.len(), a.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")),
        scale: ScalePoint { values: vec![a.len() as u64] },
        validated: true,
        copy: 0,
    }
}

fn seed_problem(toy: &ToyProblem) -> cpverify::Problem {
    let mut p = toy.problem(toy.id(), Source::Codeforces, Some(1200));
    p.oracle_solutions.push(Solution::oracle(toy.reference()));
    p
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    // oracle labels agree with the in-process answer for every family
    #[test]
    fn oracle_labels_match_ground_truth(
        family in prop::sample::select(Family::ALL.to_vec()),
        arrays in prop::collection::vec(prop::collection::vec(1u64..=10, 1..30), 1..6),
    ) {
        let toy = ToyProblem::new(family, family.params()[1]);
        let (lo, hi) = toy.value_range();
        let arrays: Vec<Vec<u64>> = arrays
            .into_iter()
            .map(|a| a.into_iter().map(|v| lo + (v - 1) % (hi - lo + 1)).collect())
            .collect();
        let inputs: Vec<TestInput> = arrays.iter().map(|a| input(a)).collect();
        let cases = label_with_oracle(&seed_problem(&toy), &inputs, &sandbox(), &ResourceLimits::default(), false).unwrap();
        prop_assert_eq!(cases.len(), arrays.len());
        for (case, a) in cases.iter().zip(&arrays) {
            prop_assert_eq!(&case.expected_output, &toy.answer(a).to_string());
            prop_assert_eq!(case.label_origin, LabelOrigin::Oracle);
        }
    }
}

#[test]
fn crashing_oracle_is_reported() {
    let toy = ToyProblem::new(Family::SumMod, 7);
    let mut p = seed_problem(&toy);
    p.oracle_solutions[0] = Solution::oracle("raise SystemExit(3)\n");
    let err = label_with_oracle(&p, &[input(&[1, 2])], &sandbox(), &ResourceLimits::default(), false).unwrap_err();
    assert!(matches!(err, VerifyError::OracleFailure { .. }), "{err}");
}

#[test]
fn eval_scores_correct_and_faulty_samples() {
    let sb = sandbox();
    let limits = ResourceLimits::default();
    let toy = ToyProblem::new(Family::DistinctCount, 100);
    let problem = seed_problem(&toy);
    let arrays: Vec<Vec<u64>> = vec![vec![5], vec![1, 2, 2], vec![7, 7, 7, 100], (1..=60).map(|v| v % 13 + 1).collect()];
    let inputs: Vec<TestInput> = arrays.iter().map(|a| input(a)).collect();
    let cases = label_with_oracle(&problem, &inputs, &sb, &limits, true).unwrap();

    let correct: Vec<Solution> = toy.correct_variants(4).into_iter().map(Solution::model).collect();
    let report = evaluate(&[(problem.clone(), correct.clone(), cases.clone())], 4, &sb, &limits).unwrap();
    assert_eq!(report.pass_at_1, 1.0);

    let robust = toy.robust_mutants();
    let mixed = vec![
        correct[0].clone(),
        Solution::model(toy.mutant(robust[0], 0)),
        correct[1].clone(),
        Solution::model(toy.mutant(robust[1], 0)),
    ];
    let report = evaluate(&[(problem, mixed, cases)], 4, &sb, &limits).unwrap();
    assert_eq!(report.pass_at_1, 0.5);
    assert_eq!(report.problems[0].passed, 2);
}
