//! Difficulty thresholds, fastest-solution selection, n-gram
//! decontamination and dataset export.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{corpus_stats_with, CorpusStats};
use crate::inputgen::ScalePoint;
use crate::problem::{sha256_hex, Problem, ProblemKind, Solution, SolutionOrigin, Source};
use crate::verify::{LabelOrigin, TestCase};

#[derive(Debug, Error)]
pub enum PostprocError {
    #[error("no accepted solutions to select from")]
    NoAccepted,
    #[error("solution {0} has no total CPU time")]
    MissingCpuTime(String),
    #[error("record {id} is invalid: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Acceptance thresholds by difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub default: f64,
    pub hard: f64,
    /// Ratings strictly above this count as hard.
    pub hard_rating_cutoff: i64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            default: 0.60,
            hard: 0.40,
            hard_rating_cutoff: 1600,
        }
    }
}

impl Thresholds {
    pub fn for_problem(&self, problem: &Problem) -> f64 {
        match problem.cf_rating {
            Some(r) if r > self.hard_rating_cutoff => self.hard,
            _ => self.default,
        }
    }
}

/// Threshold under the default settings. Synthetic problems carry their
/// seed's rating, so they are judged by it.
pub fn threshold_for(problem: &Problem) -> f64 {
    Thresholds::default().for_problem(problem)
}

/// Index of the accepted solution with the least total CPU time; exact ties
/// go to the smaller source hash.
pub fn select_fastest(accepted: &[Solution]) -> Result<usize, PostprocError> {
    let mut best: Option<(f64, String, usize)> = None;
    for (i, s) in accepted.iter().enumerate() {
        let t = s
            .cpu_time_total_seconds
            .ok_or_else(|| PostprocError::MissingCpuTime(s.source_hash()))?;
        let h = s.source_hash();
        let better = match &best {
            None => true,
            Some((bt, bh, _)) => t < *bt || (t == *bt && h < *bh),
        };
        if better {
            best = Some((t, h, i));
        }
    }
    best.map(|(_, _, i)| i).ok_or(PostprocError::NoAccepted)
}

pub const TOKENIZER_ID: &str = "lower-alnum-ws/1";

/// Lowercases, maps every non-alphanumeric character to a separator and
/// splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

type GramKey = [u8; 32];

fn gram_key(tokens: &[String]) -> GramKey {
    let mut h = Sha256::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            h.update(b" ");
        }
        h.update(t.as_bytes());
    }
    h.finalize().into()
}

#[derive(Debug, Clone)]
pub struct NGramIndex {
    pub n: usize,
    pub tokenizer_id: String,
    entries: HashMap<GramKey, Vec<String>>,
}

impl NGramIndex {
    /// Indexes every contiguous `n`-token window of each document.
    pub fn build(docs: &[(String, String)], n: usize) -> Self {
        assert!(n >= 1, "n-gram size must be positive");
        let per_doc: Vec<Vec<(GramKey, &str)>> = docs
            .par_iter()
            .map(|(id, text)| {
                tokenize(text)
                    .windows(n)
                    .map(|w| (gram_key(w), id.as_str()))
                    .collect()
            })
            .collect();
        let mut entries: HashMap<GramKey, BTreeSet<&str>> = HashMap::new();
        for grams in per_doc {
            for (k, id) in grams {
                entries.entry(k).or_default().insert(id);
            }
        }
        Self {
            n,
            tokenizer_id: TOKENIZER_ID.to_string(),
            entries: entries
                .into_iter()
                .map(|(k, ids)| (k, ids.into_iter().map(str::to_string).collect()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Benchmark ids containing this exact window, sorted.
    pub fn lookup(&self, window: &[String]) -> &[String] {
        if window.len() != self.n {
            return &[];
        }
        self.entries.get(&gram_key(window)).map_or(&[], Vec::as_slice)
    }

    /// First window of `text` found in the index, with its benchmark ids.
    pub fn first_match(&self, text: &str) -> Option<(String, &[String])> {
        tokenize(text).windows(self.n).find_map(|w| {
            let ids = self.lookup(w);
            (!ids.is_empty()).then(|| (w.join(" "), ids))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub problem_id: String,
    pub benchmark_id: String,
    pub matched_gram: String,
}

#[derive(Debug, Clone)]
pub struct Decontaminated {
    pub kept: Vec<Problem>,
    pub removed: Vec<Removal>,
}

/// Drops every problem whose statement shares an n-token window with the
/// index.
pub fn decontaminate(problems: Vec<Problem>, index: &NGramIndex) -> Decontaminated {
    let hits: Vec<Option<Removal>> = problems
        .par_iter()
        .map(|p| {
            index.first_match(&p.statement).map(|(gram, ids)| Removal {
                problem_id: p.id.clone(),
                benchmark_id: ids[0].clone(),
                matched_gram: gram,
            })
        })
        .collect();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (p, hit) in problems.into_iter().zip(hits) {
        match hit {
            Some(r) => removed.push(r),
            None => kept.push(p),
        }
    }
    Decontaminated { kept, removed }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationOrigin {
    Oracle,
    Mutual,
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub origin: VerificationOrigin,
    pub agreement: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub problem: Problem,
    pub solution: Solution,
    pub test_cases: Vec<TestCase>,
    pub verification: VerificationSummary,
}

impl DatasetRecord {
    pub fn check(&self) -> Result<(), PostprocError> {
        let bad = |reason: &str| {
            Err(PostprocError::InvalidRecord {
                id: self.problem.id.clone(),
                reason: reason.to_string(),
            })
        };
        if let Err(e) = self.problem.validate() {
            return bad(&e);
        }
        if self.test_cases.is_empty() {
            return bad("no test cases");
        }
        let unverified = self.verification.origin == VerificationOrigin::Unverified;
        if unverified != self.solution.unverified {
            return bad("unverified flag disagrees with the verification origin");
        }
        if !unverified {
            if !self.solution.passed_all() {
                return bad("solution does not pass all test cases");
            }
            if self.solution.verdicts.as_ref().map_or(0, Vec::len) != self.test_cases.len() {
                return bad("solution verdicts do not cover the test cases");
            }
            let expected = match self.verification.origin {
                VerificationOrigin::Mutual => LabelOrigin::Mutual,
                _ => LabelOrigin::Oracle,
            };
            if self.test_cases.iter().any(|c| c.label_origin != expected) {
                return bad("test case label origin disagrees with the verification origin");
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ExportTest<'a> {
    input: &'a str,
    output: &'a str,
    scale: &'a ScalePoint,
}

#[derive(Serialize)]
struct ExportLine<'a> {
    id: &'a str,
    source: Source,
    seed_id: Option<&'a str>,
    statement: &'a str,
    input_format: &'a str,
    output_format: &'a str,
    kind: ProblemKind,
    fn_name: Option<&'a str>,
    starter_code: Option<&'a str>,
    solution: &'a str,
    solution_origin: SolutionOrigin,
    verification: &'a VerificationSummary,
    tests: Vec<ExportTest<'a>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub records: usize,
    pub by_source: CorpusStats,
    pub sha256: String,
}

/// Path of the manifest written next to an export file.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Writes one JSON line per record in a fixed field order, plus a manifest
/// with counts by source and the file digest.
pub fn export_dataset(records: &[DatasetRecord], path: &Path) -> Result<ExportManifest, PostprocError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PostprocError::Io { path, source }
    };
    let mut body = String::new();
    for r in records {
        r.check()?;
        let line = ExportLine {
            id: &r.problem.id,
            source: r.problem.source,
            seed_id: r.problem.seed_id.as_deref(),
            statement: &r.problem.statement,
            input_format: &r.problem.input_format,
            output_format: &r.problem.output_format,
            kind: r.problem.kind,
            fn_name: r.problem.fn_name.as_deref(),
            starter_code: r.problem.starter_code.as_deref(),
            solution: &r.solution.source_text,
            solution_origin: r.solution.origin,
            verification: &r.verification,
            tests: r
                .test_cases
                .iter()
                .map(|c| ExportTest {
                    input: &c.input.input_text,
                    output: &c.expected_output,
                    scale: &c.input.scale,
                })
                .collect(),
        };
        body.push_str(&serde_json::to_string(&line).expect("record serializes"));
        body.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(body.as_bytes()).map_err(io_err(path))?;

    let problems: Vec<Problem> = records.iter().map(|r| r.problem.clone()).collect();
    let unverified: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.verification.origin == VerificationOrigin::Unverified)
        .map(|r| r.problem.id.as_str())
        .collect();
    let manifest = ExportManifest {
        records: records.len(),
        by_source: corpus_stats_with(&problems, |p| !unverified.contains(p.id.as_str())),
        sha256: sha256_hex(body.as_bytes()),
    };
    let mp = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mp, text + "\n").map_err(io_err(&mp))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inputgen::TestInput;
    use crate::problem::CaseOutcome;

    fn rated(r: Option<i64>) -> Problem {
        let mut p = Problem::stdio("p", "s", Source::Codeforces);
        p.cf_rating = r;
        p
    }

    #[test]
    fn thresholds() {
        assert_eq!(threshold_for(&rated(Some(1700))), 0.40);
        assert_eq!(threshold_for(&rated(Some(1600))), 0.60);
        assert_eq!(threshold_for(&rated(None)), 0.60);
    }

    fn timed(src: &str, t: Option<f64>) -> Solution {
        let mut s = Solution::model(src);
        s.cpu_time_total_seconds = t;
        s
    }

    #[test]
    fn fastest() {
        let pool = vec![timed("a", Some(3.1)), timed("b", Some(2.0)), timed("c", Some(2.9))];
        assert_eq!(select_fastest(&pool).unwrap(), 1);
        assert_eq!(select_fastest(&pool[..1]).unwrap(), 0);
        assert!(matches!(select_fastest(&[]), Err(PostprocError::NoAccepted)));
        assert!(matches!(
            select_fastest(&[timed("a", None)]),
            Err(PostprocError::MissingCpuTime(_))
        ));
        let (x, y) = (timed("x", Some(1.0)), timed("y", Some(1.0)));
        let winner_hash = x.source_hash().min(y.source_hash());
        let i = select_fastest(&[x.clone(), y.clone()]).unwrap();
        let j = select_fastest(&[y, x]).unwrap();
        let pick = |k: usize, flip: bool| if (k == 0) != flip { "x" } else { "y" };
        assert_eq!(pick(i, false), pick(j, true));
        assert_eq!(Solution::model(pick(i, false)).source_hash(), winner_hash);
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Hello, World! a_b 3.14"), vec!["hello", "world", "a", "b", "3", "14"]);
        assert!(tokenize("  ,.; ").is_empty());
    }

    fn words(n: usize, prefix: &str) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn window_counts() {
        let docs = vec![("b16".to_string(), words(16, "w")), ("b15".to_string(), words(15, "v"))];
        let idx = NGramIndex::build(&docs, 16);
        assert_eq!(idx.len(), 1);
        let docs = vec![("a".to_string(), words(17, "w")), ("b".to_string(), words(16, "w"))];
        let idx = NGramIndex::build(&docs, 16);
        assert_eq!(idx.len(), 2);
        let shared: Vec<String> = tokenize(&words(16, "w"));
        assert_eq!(idx.lookup(&shared), ["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn planted_spans() {
        let bench = words(40, "bench");
        let idx = NGramIndex::build(&[("he-1".to_string(), bench)], 16);
        let span16 = (10..26).map(|i| format!("bench{i}")).collect::<Vec<_>>().join(" ");
        let span15 = (10..25).map(|i| format!("bench{i}")).collect::<Vec<_>>().join(" ");
        let mut a = Problem::stdio("a", format!("Intro text. {} Outro.", span16.to_uppercase()), Source::Codeforces);
        a.statement = a.statement.replace(' ', "  ,");
        let b = Problem::stdio("b", format!("Intro text. {span15} Outro."), Source::Codeforces);
        let out = decontaminate(vec![a, b], &idx);
        assert_eq!(out.kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), vec!["b"]);
        assert_eq!(
            out.removed,
            vec![Removal {
                problem_id: "a".into(),
                benchmark_id: "he-1".into(),
                matched_gram: span16,
            }]
        );
    }

    fn record(id: &str, origin: VerificationOrigin) -> DatasetRecord {
        let mut problem = Problem::stdio(id, format!("statement {id}"), Source::AtCoder);
        problem.oracle_solutions.push(Solution::oracle("print(1)"));
        let mut solution = Solution::model("print(1)\n");
        solution.verdicts = Some(vec![CaseOutcome::Passed]);
        solution.unverified = origin == VerificationOrigin::Unverified;
        DatasetRecord {
            problem,
            solution,
            test_cases: vec![TestCase {
                input: TestInput {
                    input_text: "\n".into(),
                    scale: ScalePoint::new(vec![1]),
                    validated: true,
                    copy: 0,
                },
                expected_output: "1".into(),
                label_origin: LabelOrigin::Oracle,
            }],
            verification: VerificationSummary {
                origin,
                agreement: None,
                threshold: None,
            },
        }
    }

    #[test]
    fn export_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            record("r1", VerificationOrigin::Oracle),
            record("r2", VerificationOrigin::Oracle),
            record("r3", VerificationOrigin::Unverified),
        ];
        let path = dir.path().join("out/data.jsonl");
        let m1 = export_dataset(&recs, &path).unwrap();
        let bytes1 = fs::read(&path).unwrap();
        let m2 = export_dataset(&recs, &path).unwrap();
        assert_eq!(bytes1, fs::read(&path).unwrap());
        assert_eq!(m1, m2);
        assert_eq!(m1.records, 3);
        assert_eq!(m1.by_source.count(Source::AtCoder), 3);
        assert_eq!(m1.by_source.totals.original_unverified, 1);
        assert_eq!(String::from_utf8(bytes1).unwrap().lines().count(), 3);
        assert!(manifest_path(&path).ends_with("data.jsonl.manifest.json"));

        let first = fs::read_to_string(&path).unwrap();
        let keys: Vec<String> = serde_json::from_str::<serde_json::Value>(first.lines().next().unwrap())
            .unwrap()
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        assert_eq!(
            keys,
            [
                "id", "source", "seed_id", "statement", "input_format", "output_format", "kind", "fn_name",
                "starter_code", "solution", "solution_origin", "verification", "tests"
            ]
        );
    }

    #[test]
    fn empty_export_and_invalid_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        let m = export_dataset(&[], &path).unwrap();
        assert_eq!(m.records, 0);
        assert_eq!(fs::read(&path).unwrap(), b"");

        let mut bad = record("bad", VerificationOrigin::Oracle);
        bad.solution.verdicts = Some(vec![CaseOutcome::WrongAnswer]);
        match export_dataset(&[bad], &path) {
            Err(PostprocError::InvalidRecord { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("expected invalid record, got {other:?}"),
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn vocab_text(len: std::ops::Range<usize>) -> impl Strategy<Value = String> {
        prop::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c"), Just("d,"), Just("E")], len)
            .prop_map(|w| w.join(" "))
    }

    /// Quadratic reference: compare every window of the problem with every
    /// window of every benchmark.
    fn brute_force_hit(statement: &str, docs: &[(String, String)], n: usize) -> bool {
        let pt = tokenize(statement);
        docs.iter().any(|(_, d)| {
            let dt = tokenize(d);
            pt.windows(n).any(|w| dt.windows(n).any(|v| v == w))
        })
    }

    proptest! {
        #[test]
        fn index_matches_brute_force(
            docs in prop::collection::vec(vocab_text(0..30), 1..8),
            statements in prop::collection::vec(vocab_text(0..30), 1..12),
            n in 1usize..6,
        ) {
            let docs: Vec<(String, String)> = docs.into_iter().enumerate().map(|(i, d)| (format!("b{i}"), d)).collect();
            let idx = NGramIndex::build(&docs, n);
            let problems: Vec<Problem> = statements
                .iter()
                .enumerate()
                .map(|(i, s)| Problem::stdio(format!("p{i}"), s.clone(), Source::Codeforces))
                .collect();
            let out = decontaminate(problems.clone(), &idx);
            let removed: BTreeSet<String> = out.removed.iter().map(|r| r.problem_id.clone()).collect();
            let expected: BTreeSet<String> = problems
                .iter()
                .filter(|p| brute_force_hit(&p.statement, &docs, n))
                .map(|p| p.id.clone())
                .collect();
            prop_assert_eq!(&removed, &expected);

            // idempotent, and independent of order
            let again = decontaminate(out.kept.clone(), &idx);
            prop_assert!(again.removed.is_empty());
            let mut reversed = problems.clone();
            reversed.reverse();
            let rev: BTreeSet<String> = decontaminate(reversed, &idx).removed.into_iter().map(|r| r.problem_id).collect();
            prop_assert_eq!(rev, expected);
        }

        #[test]
        fn fastest_ignores_rescaling(times in prop::collection::vec(0.01f64..100.0, 1..10), k in 0.1f64..10.0) {
            let pool: Vec<Solution> = times.iter().enumerate().map(|(i, t)| {
                let mut s = Solution::model(format!("s{i}"));
                s.cpu_time_total_seconds = Some(*t);
                s
            }).collect();
            let scaled: Vec<Solution> = pool.iter().cloned().map(|mut s| {
                s.cpu_time_total_seconds = s.cpu_time_total_seconds.map(|t| t * k);
                s
            }).collect();
            let i = select_fastest(&pool).unwrap();
            prop_assert_eq!(i, select_fastest(&scaled).unwrap());
            prop_assert!(times.iter().all(|t| *t >= times[i]));
        }
    }
}
