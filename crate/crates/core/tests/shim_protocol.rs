use std::io::Write;
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use cpverify::inputgen::{candidate_values, ScalePoint};
use cpverify::sandbox::{ResourceLimits, ShimMode, RUNNER_SHIM};
use cpverify::toy::{ToyProblem, MAX_N};
use cpverify::{Sandbox, SandboxConfig, Solution};

const MINIMUM_NUMBER: &str = include_str!("fixtures/minimum_number.py");

fn sandbox() -> Sandbox {
    Sandbox::new(SandboxConfig::default()).unwrap()
}

fn raw_shim(dir: &std::path::Path, mode: &str, program: &str, stdin: &[u8]) -> (String, bool) {
    let shim = dir.join("runner_shim.py");
    if !shim.exists() {
        std::fs::write(&shim, RUNNER_SHIM).unwrap();
    }
    let prog = dir.join("prog.py");
    std::fs::write(&prog, program).unwrap();
    let mut child = Command::new("python3")
        .args(["-S", shim.to_str().unwrap(), mode, prog.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let _ = child.stdin.take().unwrap().write_all(stdin);
    let out = child.wait_with_output().unwrap();
    (String::from_utf8_lossy(&out.stdout).into_owned(), out.status.success())
}

fn malformed_line(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let shapes: [&dyn Fn(&mut ChaCha8Rng) -> Vec<u8>; 9] = [
        &|r| (0..r.random_range(0..40)).map(|_| r.random::<u8>()).collect(),
        &|r| {
            let full = json!({"fn_name": "f", "args": [1, 2]}).to_string();
            full.as_bytes()[..r.random_range(0..full.len())].to_vec()
        },
        &|r| format!("[{}]", r.random::<u32>()).into_bytes(),
        &|r| format!("{}", r.random::<i64>()).into_bytes(),
        &|_| b"null".to_vec(),
        &|r| json!({"fn_name": r.random::<u8>(), "args": "x"}).to_string().into_bytes(),
        &|r| json!({"params": r.random::<u16>().to_string(), "seed": "s"}).to_string().into_bytes(),
        &|r| json!({"input_string": r.random::<u16>()}).to_string().into_bytes(),
        &|r| {
            let mut v = json!({"fn_name": "no_such_fn", "args": [r.random::<u8>()]}).to_string().into_bytes();
            v.extend(b"\n{\"second\": 1}");
            v
        },
    ];
    let i = rng.random_range(0..shapes.len());
    shapes[i](rng)
}

#[test]
fn every_malformed_request_gets_exactly_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let program = "def f(a, b):\n    print('noise')\n    return a + b\n\ndef generate_test_input(n):\n    return 'x' * n\n\ndef validate_test_input(s):\n    return s == 'x'\n";
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let modes = ["function", "generate", "validate"];
    for case in 0..1000 {
        let line = malformed_line(&mut rng);
        let mode = modes[case % 3];
        let (stdout, exited_cleanly) = raw_shim(dir.path(), mode, program, &line);
        assert!(exited_cleanly, "case {case} ({mode}) exited non-zero on {line:?}");
        let lines: Vec<&str> = stdout.lines().collect();
        assert_eq!(lines.len(), 1, "case {case} ({mode}) printed {stdout:?} for {line:?}");
        let v: Value = serde_json::from_str(lines[0]).unwrap_or_else(|_| panic!("non-JSON {stdout:?}"));
        assert!(v.get("ok").is_some_and(Value::is_boolean), "case {case}: {v}");
    }
}

#[test]
fn bad_usage_still_answers() {
    let dir = tempfile::tempdir().unwrap();
    let (stdout, ok) = raw_shim(dir.path(), "explode", "", b"{}\n");
    assert!(ok);
    let v: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["ok"], false);
}

#[test]
fn function_mode_reproduces_worked_examples() {
    let sb = sandbox();
    let prog = Solution::oracle(MINIMUM_NUMBER);
    for (arg, want) in [("846903", "304689"), ("55010", "10055")] {
        let r = sb
            .run_function(&prog, "minimum_Number", &json!([arg]).to_string(), &ResourceLimits::default())
            .unwrap();
        assert!(r.is_ok(), "{}", r.stderr_text);
        assert_eq!(r.stdout_text, want);
        // named arguments bind too
        let r = sb
            .run_function(&prog, "minimum_Number", &json!({"s": arg}).to_string(), &ResourceLimits::default())
            .unwrap();
        assert_eq!(r.stdout_text, want);
    }
}

#[test]
fn function_mode_failures() {
    let sb = sandbox();
    let limits = ResourceLimits::default();
    let run = |src: &str, args: &str| sb.run_function(&Solution::model(src), "f", args, &limits).unwrap();

    let r = run("def f():\n    return {1, 2}\n", "[]");
    assert!(!r.is_ok());
    assert!(r.stderr_text.contains("not JSON serializable"), "{}", r.stderr_text);

    let r = run("def g():\n    return 1\n", "[]");
    assert!(!r.is_ok());
    assert!(r.stderr_text.contains("no attribute 'f'"), "{}", r.stderr_text);

    let r = run("def f(x):\n    return x\n", "not json");
    assert!(!r.is_ok());

    let r = run("def f(x):\n    print('chatter')\n    return [x, None, 1.5]\n", "[\"a\"]");
    assert!(r.is_ok(), "{}", r.stderr_text);
    assert_eq!(r.stdout_text, "[\"a\",null,1.5]");
}

#[test]
fn generator_seed_makes_inputs_reproducible() {
    let sb = sandbox();
    let toy = ToyProblem::all()[0];
    let call = |seed: u64| {
        sb.run_shim(
            ShimMode::Generate,
            &toy.generator(),
            &json!({"params": [50], "seed": seed}),
            &ResourceLimits::default(),
        )
        .unwrap()
        .ok_response()
        .unwrap()["input_string"]
            .clone()
    };
    assert_eq!(call(1), call(1));
    assert_ne!(call(1), call(2));
    let declined = sb
        .run_shim(
            ShimMode::Generate,
            &toy.generator(),
            &json!({"params": [MAX_N + 1], "seed": 0}),
            &ResourceLimits::default(),
        )
        .unwrap();
    assert_eq!(declined.ok_response().unwrap()["input_string"], Value::Null);
}

#[test]
fn reference_utilities_round_trip() {
    let sb = sandbox();
    let limits = ResourceLimits::default();
    for toy in ToyProblem::all() {
        for v in candidate_values(5) {
            let point = ScalePoint { values: vec![v] };
            let gen = sb
                .run_shim(ShimMode::Generate, &toy.generator(), &json!({"params": point.values, "seed": v}), &limits)
                .unwrap();
            let text = gen.ok_response().unwrap_or_else(|| panic!("{} at {point}", toy.id()))["input_string"]
                .as_str()
                .unwrap()
                .to_string();
            let val = sb
                .run_shim(ShimMode::Validate, &toy.validator(), &json!({"input_string": text}), &limits)
                .unwrap();
            assert_eq!(val.ok_response().unwrap()["valid"], true, "{} at {point}", toy.id());
        }
    }
}
