//! Problem ingestion, exact deduplication and oracle filtering.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::problem::{sha256_hex, ExampleCase, Problem, ProblemKind, Solution, SolutionOrigin, Source};
use crate::sandbox::DEFAULT_LANGUAGE;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} contains no valid problem records ({rejected} rejected)")]
    EmptyCorpus { path: PathBuf, rejected: usize },
    #[error("problem id '{id}' appears in both {first_source} and {second_source}")]
    IdCollision {
        id: String,
        first_source: Source,
        second_source: Source,
    },
    #[error("unknown record schema '{0}' (expected 'native' or 'taco')")]
    UnknownSchema(String),
}

/// Layout of the input JSONL records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordSchema {
    /// The project's own problem record (see README).
    #[default]
    Native,
    /// TACO/APPS-style records: `question`, `solutions` (JSON-encoded list),
    /// `starter_code`, `input_output` (JSON-encoded, may carry `fn_name`).
    Taco,
}

impl FromStr for RecordSchema {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "native" => Ok(RecordSchema::Native),
            "taco" | "apps" => Ok(RecordSchema::Taco),
            other => Err(CorpusError::UnknownSchema(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub problems: Vec<Problem>,
    pub rejects: Vec<Reject>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSolution {
    Text(String),
    Full {
        source: String,
        #[serde(default)]
        language: Option<String>,
    },
}

#[derive(Deserialize)]
struct NativeRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    statement: Option<String>,
    #[serde(default)]
    input_format: String,
    #[serde(default)]
    output_format: String,
    #[serde(default)]
    kind: Option<ProblemKind>,
    #[serde(default)]
    fn_name: Option<String>,
    #[serde(default)]
    starter_code: Option<String>,
    #[serde(default)]
    constraints: String,
    source: String,
    #[serde(default)]
    cf_rating: Option<i64>,
    #[serde(default)]
    solutions: Vec<RawSolution>,
    #[serde(default)]
    seed_id: Option<String>,
    #[serde(default)]
    examples: Vec<ExampleCase>,
}

/// Reads one problem per JSONL line. Malformed records land in `rejects`.
pub fn ingest_problems(path: &Path, schema: RecordSchema) -> Result<Ingested, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut problems = Vec::new();
    let mut rejects = Vec::new();
    let mut seen: HashMap<String, Source> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(|v| match schema {
                RecordSchema::Native => parse_native(v),
                RecordSchema::Taco => parse_taco(v),
            })
            .and_then(|p| p.validate().map(|_| p));
        match parsed {
            Ok(problem) => {
                if let Some(first) = seen.get(&problem.id) {
                    return Err(CorpusError::IdCollision {
                        id: problem.id,
                        first_source: *first,
                        second_source: problem.source,
                    });
                }
                seen.insert(problem.id.clone(), problem.source);
                problems.push(problem);
            }
            Err(reason) => rejects.push(Reject { line: idx + 1, reason }),
        }
    }

    if problems.is_empty() {
        return Err(CorpusError::EmptyCorpus {
            path: path.to_path_buf(),
            rejected: rejects.len(),
        });
    }
    Ok(Ingested { problems, rejects })
}

fn parse_native(v: Value) -> Result<Problem, String> {
    let rec: NativeRecord = serde_json::from_value(v).map_err(|e| format!("schema mismatch: {e}"))?;
    let statement = rec.statement.filter(|s| !s.trim().is_empty()).ok_or("missing statement")?;
    let source: Source = rec.source.parse()?;
    let kind = rec.kind.unwrap_or(if rec.fn_name.is_some() {
        ProblemKind::Function
    } else {
        ProblemKind::Stdio
    });
    let oracle_solutions = rec
        .solutions
        .into_iter()
        .map(|s| match s {
            RawSolution::Text(text) => Solution::oracle(text),
            RawSolution::Full { source, language } => Solution::new(
                source,
                SolutionOrigin::Oracle,
                language.unwrap_or_else(|| DEFAULT_LANGUAGE.to_string()),
            ),
        })
        .filter(|s| !s.source_text.trim().is_empty())
        .collect();
    Ok(Problem {
        id: rec.id.unwrap_or_else(|| content_id(&statement)),
        statement,
        input_format: rec.input_format,
        output_format: rec.output_format,
        kind,
        fn_name: rec.fn_name,
        starter_code: rec.starter_code,
        constraints_text: rec.constraints,
        source,
        cf_rating: rec.cf_rating,
        oracle_solutions,
        seed_id: rec.seed_id,
        example_cases: rec.examples,
    })
}

/// Fields in TACO-style dumps are frequently JSON encoded inside strings.
fn decode_nested(v: Option<&Value>) -> Option<Value> {
    match v? {
        Value::String(s) if s.trim().is_empty() => None,
        Value::String(s) => serde_json::from_str(s).ok(),
        Value::Null => None,
        other => Some(other.clone()),
    }
}

fn parse_taco(v: Value) -> Result<Problem, String> {
    let obj = v.as_object().ok_or("record is not a JSON object")?;
    let statement = obj
        .get("question")
        .and_then(Value::as_str)
        .filter(|s| !s.trim().is_empty())
        .ok_or("missing statement")?
        .to_string();
    let source: Source = obj
        .get("source")
        .and_then(Value::as_str)
        .ok_or("missing source")?
        .parse()?;
    let fn_name = decode_nested(obj.get("input_output"))
        .and_then(|io| io.get("fn_name").and_then(Value::as_str).map(str::to_string));
    let oracle_solutions = match decode_nested(obj.get("solutions")) {
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(Value::as_str)
            .filter(|s| !s.trim().is_empty())
            .map(Solution::oracle)
            .collect(),
        _ => Vec::new(),
    };
    let starter_code = obj
        .get("starter_code")
        .and_then(Value::as_str)
        .filter(|s| !s.trim().is_empty())
        .map(str::to_string);
    let id = obj
        .get("id")
        .or_else(|| obj.get("name"))
        .and_then(|v| match v {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
        .unwrap_or_else(|| content_id(&statement));
    Ok(Problem {
        id,
        statement,
        input_format: String::new(),
        output_format: String::new(),
        kind: if fn_name.is_some() {
            ProblemKind::Function
        } else {
            ProblemKind::Stdio
        },
        fn_name,
        starter_code,
        constraints_text: String::new(),
        source,
        cf_rating: obj.get("cf_rating").and_then(Value::as_i64),
        oracle_solutions,
        seed_id: None,
        example_cases: Vec::new(),
    })
}

/// Lowercase, collapse whitespace runs to one space, trim.
pub fn normalize_statement(statement: &str) -> String {
    statement
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Stable id derived from the normalized statement.
pub fn content_id(statement: &str) -> String {
    let digest = sha256_hex(normalize_statement(statement).as_bytes());
    format!("p-{}", &digest[..16])
}

#[derive(Debug, Clone)]
pub struct Deduped {
    pub kept: Vec<Problem>,
    /// `(dropped id, id of the kept duplicate)`
    pub dropped: Vec<(String, String)>,
}

/// Exact deduplication on the normalized statement hash; first occurrence wins.
pub fn dedupe(problems: Vec<Problem>) -> Deduped {
    let mut first_by_hash: HashMap<String, String> = HashMap::new();
    let mut kept = Vec::with_capacity(problems.len());
    let mut dropped = Vec::new();
    for p in problems {
        let key = sha256_hex(normalize_statement(&p.statement).as_bytes());
        match first_by_hash.get(&key) {
            Some(first) => dropped.push((p.id.clone(), first.clone())),
            None => {
                first_by_hash.insert(key, p.id.clone());
                kept.push(p);
            }
        }
    }
    Deduped { kept, dropped }
}

/// Keeps problems with at least one oracle solution. Synthetic problems are
/// exempt since they get labeled by mutual verification.
pub fn filter_missing_oracle(problems: Vec<Problem>) -> Vec<Problem> {
    problems
        .into_iter()
        .filter(|p| p.is_synthetic() || !p.oracle_solutions.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub original_verified: usize,
    pub original_unverified: usize,
    pub synthetic_verified: usize,
    pub synthetic_unverified: usize,
}

impl SourceCounts {
    pub fn total(&self) -> usize {
        self.original_verified + self.original_unverified + self.synthetic_verified + self.synthetic_unverified
    }

    fn add(&mut self, other: &SourceCounts) {
        self.original_verified += other.original_verified;
        self.original_unverified += other.original_unverified;
        self.synthetic_verified += other.synthetic_verified;
        self.synthetic_unverified += other.synthetic_unverified;
    }
}

/// Per-source counts table with a totals row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: BTreeMap<Source, SourceCounts>,
    pub totals: SourceCounts,
}

impl CorpusStats {
    pub fn total(&self) -> usize {
        self.totals.total()
    }

    pub fn count(&self, source: Source) -> usize {
        self.rows.get(&source).map_or(0, SourceCounts::total)
    }
}

/// Counts where an original problem is verified when it carries an oracle
/// and a synthetic one is never verified. Use [`corpus_stats_with`] once
/// verification outcomes are known.
pub fn corpus_stats(problems: &[Problem]) -> CorpusStats {
    corpus_stats_with(problems, |p| !p.is_synthetic() && !p.oracle_solutions.is_empty())
}

pub fn corpus_stats_with(problems: &[Problem], verified: impl Fn(&Problem) -> bool) -> CorpusStats {
    let mut rows: BTreeMap<Source, SourceCounts> = Source::ALL.iter().map(|s| (*s, SourceCounts::default())).collect();
    for p in problems {
        let row = rows.entry(p.source).or_default();
        match (p.is_synthetic(), verified(p)) {
            (false, true) => row.original_verified += 1,
            (false, false) => row.original_unverified += 1,
            (true, true) => row.synthetic_verified += 1,
            (true, false) => row.synthetic_unverified += 1,
        }
    }
    let mut totals = SourceCounts::default();
    for row in rows.values() {
        totals.add(row);
    }
    CorpusStats { rows, totals }
}

/// Ids verified elsewhere (e.g. accepted by verification) as a predicate.
pub fn verified_by_ids(ids: &HashSet<String>) -> impl Fn(&Problem) -> bool + '_ {
    move |p| ids.contains(&p.id)
}


#[cfg(test)]
mod props {
    use super::*;
    use std::io::Write;
    use proptest::prelude::*;

    fn arb_problems() -> impl Strategy<Value = Vec<Problem>> {
        prop::collection::vec(("[a-c ]{1,6}", 0usize..12), 0..20).prop_map(|items| {
            items
                .into_iter()
                .enumerate()
                .map(|(i, (stmt, src))| {
                    let source = Source::ALL[src];
                    let mut p = Problem::stdio(format!("id{i}"), format!("x{stmt}"), source);
                    if source == Source::Synthetic {
                        p.seed_id = Some("s".into());
                    }
                    p
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn dedupe_is_idempotent(problems in arb_problems()) {
            let once = dedupe(problems);
            let twice = dedupe(once.kept.clone());
            prop_assert!(twice.dropped.is_empty());
            prop_assert_eq!(twice.kept, once.kept);
        }

        #[test]
        fn stats_total_matches_length(problems in arb_problems()) {
            let s = corpus_stats(&problems);
            prop_assert_eq!(s.total(), problems.len());
            let col_sum: usize = s.rows.values().map(SourceCounts::total).sum();
            prop_assert_eq!(col_sum, s.total());
        }

        #[test]
        fn ingest_accounts_for_every_record(valid in prop::collection::vec(any::<bool>(), 1..15)) {
            let mut f = tempfile::NamedTempFile::new().unwrap();
            for (i, ok) in valid.iter().enumerate() {
                if *ok {
                    writeln!(f, r#"{{"id":"r{i}","statement":"s{i}","source":"usaco"}}"#).unwrap();
                } else {
                    writeln!(f, r#"{{"id":"r{i}","source":"usaco"}}"#).unwrap();
                }
            }
            let n_valid = valid.iter().filter(|b| **b).count();
            match ingest_problems(f.path(), RecordSchema::Native) {
                Ok(out) => prop_assert_eq!(out.problems.len() + out.rejects.len(), valid.len()),
                Err(CorpusError::EmptyCorpus { rejected, .. }) => {
                    prop_assert_eq!(n_valid, 0);
                    prop_assert_eq!(rejected, valid.len());
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
