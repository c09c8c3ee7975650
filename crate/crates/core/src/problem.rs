//! Problem and solution records shared by every pipeline stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sandbox::Verdict;

/// How a solution receives its test input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Reads raw text on standard input, writes answers to standard output.
    Stdio,
    /// Completes a named entry point called with deserialized arguments.
    Function,
}

/// Platform a problem was collected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Aizu,
    AtCoder,
    CodeChef,
    CodeWars,
    GeeksForGeeks,
    HackerEarth,
    HackerRank,
    LeetCode,
    Codeforces,
    Ioi,
    Usaco,
    Synthetic,
}

impl Source {
    pub const ALL: [Source; 12] = [
        Source::Aizu,
        Source::AtCoder,
        Source::CodeChef,
        Source::CodeWars,
        Source::GeeksForGeeks,
        Source::HackerEarth,
        Source::HackerRank,
        Source::LeetCode,
        Source::Codeforces,
        Source::Ioi,
        Source::Usaco,
        Source::Synthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Aizu => "aizu",
            Source::AtCoder => "atcoder",
            Source::CodeChef => "codechef",
            Source::CodeWars => "codewars",
            Source::GeeksForGeeks => "geeksforgeeks",
            Source::HackerEarth => "hackerearth",
            Source::HackerRank => "hackerrank",
            Source::LeetCode => "leetcode",
            Source::Codeforces => "codeforces",
            Source::Ioi => "ioi",
            Source::Usaco => "usaco",
            Source::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    /// Accepts the canonical lowercase names plus the spellings used by the
    /// common public datasets ("CodeForces", "USA Computing Olympiad", ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let source = match key.as_str() {
            "aizu" => Source::Aizu,
            "atcoder" => Source::AtCoder,
            "codechef" => Source::CodeChef,
            "codewars" => Source::CodeWars,
            "geeksforgeeks" | "gfg" => Source::GeeksForGeeks,
            "hackerearth" => Source::HackerEarth,
            "hackerrank" => Source::HackerRank,
            "leetcode" => Source::LeetCode,
            "codeforces" | "cf" => Source::Codeforces,
            "ioi" | "internationalolympiadinformatics"
            | "internationalolympiadininformatics" => Source::Ioi,
            "usaco" | "usacomputingolympiad" => Source::Usaco,
            "synthetic" => Source::Synthetic,
            _ => return Err(format!("unknown problem source '{s}'")),
        };
        Ok(source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionOrigin {
    Oracle,
    Model,
}

/// Per-test outcome recorded on a solution after judging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseOutcome {
    Passed,
    WrongAnswer,
    Failed(Verdict),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub source_text: String,
    pub origin: SolutionOrigin,
    /// Selects the sandbox runner recipe.
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_time_total_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<CaseOutcome>>,
    /// Set by the seed-augmentation fallback when no candidate passed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unverified: bool,
}

impl Solution {
    pub fn new(source_text: impl Into<String>, origin: SolutionOrigin, language: impl Into<String>) -> Self {
        Self {
            source_text: source_text.into(),
            origin,
            language: language.into(),
            cpu_time_total_seconds: None,
            verdicts: None,
            unverified: false,
        }
    }

    pub fn oracle(source_text: impl Into<String>) -> Self {
        Self::new(source_text, SolutionOrigin::Oracle, crate::sandbox::DEFAULT_LANGUAGE)
    }

    pub fn model(source_text: impl Into<String>) -> Self {
        Self::new(source_text, SolutionOrigin::Model, crate::sandbox::DEFAULT_LANGUAGE)
    }

    /// Hex SHA-256 of the program text.
    pub fn source_hash(&self) -> String {
        sha256_hex(self.source_text.as_bytes())
    }

    pub fn passed_all(&self) -> bool {
        matches!(&self.verdicts, Some(v) if v.iter().all(|o| *o == CaseOutcome::Passed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleCase {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub input_format: String,
    #[serde(default)]
    pub output_format: String,
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fn_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starter_code: Option<String>,
    #[serde(default)]
    pub constraints_text: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cf_rating: Option<i64>,
    #[serde(default)]
    pub oracle_solutions: Vec<Solution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_id: Option<String>,
    /// Worked examples shipped with the statement. Never used as labels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub example_cases: Vec<ExampleCase>,
}

impl Problem {
    pub fn stdio(id: impl Into<String>, statement: impl Into<String>, source: Source) -> Self {
        Self {
            id: id.into(),
            statement: statement.into(),
            input_format: String::new(),
            output_format: String::new(),
            kind: ProblemKind::Stdio,
            fn_name: None,
            starter_code: None,
            constraints_text: String::new(),
            source,
            cf_rating: None,
            oracle_solutions: Vec::new(),
            seed_id: None,
            example_cases: Vec::new(),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.source == Source::Synthetic
    }

    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.statement.trim().is_empty() {
            return Err("statement is empty".into());
        }
        if self.kind == ProblemKind::Function && self.fn_name.as_deref().map_or(true, str::is_empty) {
            return Err("function-kind problem without fn_name".into());
        }
        if self.seed_id.is_some() != self.is_synthetic() {
            return Err("seed_id must be present exactly when source is synthetic".into());
        }
        if self.is_synthetic() && !self.oracle_solutions.is_empty() {
            return Err("synthetic problem carries oracle solutions".into());
        }
        if self.oracle_solutions.iter().any(|s| s.origin != SolutionOrigin::Oracle) {
            return Err("oracle_solutions contains a non-oracle solution".into());
        }
        Ok(())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_parses_dataset_spellings() {
        assert_eq!("CodeForces".parse::<Source>().unwrap(), Source::Codeforces);
        assert_eq!("USA Computing Olympiad".parse::<Source>().unwrap(), Source::Usaco);
        assert_eq!("GeeksForGeeks".parse::<Source>().unwrap(), Source::GeeksForGeeks);
        assert!("topcoder".parse::<Source>().is_err());
        for s in Source::ALL {
            assert_eq!(s.as_str().parse::<Source>().unwrap(), s);
        }
    }

    #[test]
    fn invariants() {
        let mut p = Problem::stdio("a", "sum two numbers", Source::AtCoder);
        assert!(p.validate().is_ok());
        p.kind = ProblemKind::Function;
        assert!(p.validate().is_err());
        p.fn_name = Some("solve".into());
        assert!(p.validate().is_ok());
        p.source = Source::Synthetic;
        assert!(p.validate().is_err());
        p.seed_id = Some("s".into());
        assert!(p.validate().is_ok());
        p.oracle_solutions.push(Solution::oracle("print(1)"));
        assert!(p.validate().is_err());
        let blank = Problem::stdio("b", "  \n", Source::Aizu);
        assert!(blank.validate().is_err());
    }
}
