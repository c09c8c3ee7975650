//! Prompt construction for problem synthesis and the direct-prompting
//! baselines, and parsing of structured synthesis responses.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::content_id;
use crate::problem::{ExampleCase, Problem, ProblemKind, Solution, SolutionOrigin, Source};

pub const SYNTHESIS_TEMPLATE: &str = include_str!("../templates/synthesis.txt");
pub const DIRECT_IO_PAIRS_TEMPLATE: &str = include_str!("../templates/direct_io_pairs.txt");
pub const DIRECT_INPUTS_TEMPLATE: &str = include_str!("../templates/direct_inputs.txt");
pub const SOLVE_STDIO_TEMPLATE: &str = include_str!("../templates/solve_stdio.txt");
pub const SOLVE_FUNCTION_TEMPLATE: &str = include_str!("../templates/solve_function.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("problem {0} has an empty statement")]
    EmptyStatement(String),
    #[error("synthesis needs an oracle solution for seed {0}; statement-only prompting is not supported")]
    MissingOracle(String),
    #[error("the given solution is not an oracle of seed {0}")]
    ForeignOracle(String),
}

/// Fills `{name}` slots in a single left-to-right pass. Slot text that
/// appears inside substituted values is left untouched.
pub fn fill_template(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + slots.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (name, value) in slots {
            let token_len = name.len() + 2;
            if tail.len() >= token_len
                && tail.as_bytes()[token_len - 1] == b'}'
                && &tail[1..token_len - 1] == *name
            {
                out.push_str(value);
                rest = &tail[token_len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// The problem text handed to prompts: statement plus the format sections
/// when they are stored separately.
pub fn question_text(problem: &Problem) -> String {
    let mut q = problem.statement.trim_end().to_string();
    for (label, body) in [
        ("Input Format", &problem.input_format),
        ("Output Format", &problem.output_format),
        ("Constraints", &problem.constraints_text),
    ] {
        if !body.trim().is_empty() && !problem.statement.contains(body.trim()) {
            q.push_str(&format!("\n\n{label}:\n{}", body.trim_end()));
        }
    }
    q
}

fn require_statement(problem: &Problem) -> Result<(), SynthError> {
    if problem.statement.trim().is_empty() {
        Err(SynthError::EmptyStatement(problem.id.clone()))
    } else {
        Ok(())
    }
}

pub fn build_synthesis_prompt(seed: &Problem, oracle: &Solution) -> Result<String, SynthError> {
    require_statement(seed)?;
    if oracle.origin != SolutionOrigin::Oracle || oracle.source_text.trim().is_empty() {
        return Err(SynthError::MissingOracle(seed.id.clone()));
    }
    if !seed.oracle_solutions.iter().any(|s| s.source_text == oracle.source_text) {
        return Err(SynthError::ForeignOracle(seed.id.clone()));
    }
    Ok(fill_template(
        SYNTHESIS_TEMPLATE,
        &[("question", &question_text(seed)), ("solution", &oracle.source_text)],
    ))
}

/// Ablation baseline: ask the model for 50 input/output pairs directly.
pub fn build_direct_io_pair_prompt(problem: &Problem) -> Result<String, SynthError> {
    require_statement(problem)?;
    Ok(fill_template(DIRECT_IO_PAIRS_TEMPLATE, &[("question", &question_text(problem))]))
}

/// Ablation baseline: ask the model for 50 test inputs directly.
pub fn build_direct_input_prompt(problem: &Problem) -> Result<String, SynthError> {
    require_statement(problem)?;
    Ok(fill_template(DIRECT_INPUTS_TEMPLATE, &[("question", &question_text(problem))]))
}

/// Prompt used to sample candidate solutions.
pub fn build_solve_prompt(problem: &Problem) -> Result<String, SynthError> {
    require_statement(problem)?;
    let q = question_text(problem);
    Ok(match (problem.kind, problem.starter_code.as_deref()) {
        (ProblemKind::Function, Some(starter)) => {
            fill_template(SOLVE_FUNCTION_TEMPLATE, &[("question", &q), ("starter_code", starter)])
        }
        _ => fill_template(SOLVE_STDIO_TEMPLATE, &[("question", &q)]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedProblem {
    pub analysis: String,
    pub knowledge_points: Vec<String>,
    pub statement: String,
    pub input_format: String,
    pub output_format: String,
    pub example_cases: Vec<ExampleCase>,
    #[serde(default)]
    pub starter_code: Option<String>,
    pub seed_id: String,
}

impl SynthesizedProblem {
    /// The candidate problem derived from `seed`. Stdio unless starter code
    /// was supplied; the seed's rating is inherited for thresholding.
    pub fn to_problem(&self, seed: &Problem) -> Problem {
        let fn_name = self.starter_code.as_deref().and_then(entry_point_name);
        let kind = if fn_name.is_some() {
            ProblemKind::Function
        } else {
            ProblemKind::Stdio
        };
        Problem {
            id: content_id(&self.statement),
            statement: self.statement.clone(),
            input_format: self.input_format.clone(),
            output_format: self.output_format.clone(),
            kind,
            fn_name,
            starter_code: if kind == ProblemKind::Function {
                self.starter_code.clone()
            } else {
                None
            },
            constraints_text: self.input_format.clone(),
            source: Source::Synthetic,
            cf_rating: seed.cf_rating,
            oracle_solutions: Vec::new(),
            seed_id: Some(seed.id.clone()),
            example_cases: self.example_cases.clone(),
        }
    }
}

/// First `def name(` that is not a dunder.
fn entry_point_name(code: &str) -> Option<String> {
    static DEF: OnceLock<Regex> = OnceLock::new();
    let re = DEF.get_or_init(|| Regex::new(r"(?m)^\s*def\s+([A-Za-z_]\w*)\s*\(").expect("valid regex"));
    re.captures_iter(code)
        .map(|c| c[1].to_string())
        .find(|n| !n.starts_with("__"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSynthesis {
    pub problem: SynthesizedProblem,
    /// Names of required pieces that were absent (lenient mode only).
    pub missing: Vec<&'static str>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("cannot parse synthesis response: {reason} (near {excerpt:?})")]
pub struct SynthParseError {
    pub reason: String,
    /// First 80 characters of the offending region.
    pub excerpt: String,
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:#{1,6}\s*)?\**\s*part\s*([123])\s*[:.\-]").expect("valid regex"))
}

fn field_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*\**\s*(problem description|input format|output format|starter code)\s*\**\s*:\s*\**\s*(.*)$")
            .expect("valid regex")
    })
}

fn example_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*\**\s*(input|output)\s*\d*\s*\**\s*:\s*\**\s*(.*)$").expect("valid regex"))
}

fn knowledge_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*\**\s*knowledge points\s*\**\s*:\s*\**\s*(.*)$").expect("valid regex"))
}

fn excerpt(text: &str) -> String {
    text.trim_start().chars().take(80).collect()
}

/// Drops surrounding blank lines and wrapping code fences; internal lines
/// are kept byte-for-byte apart from trailing whitespace at the very end.
fn clean_block(lines: &[&str]) -> String {
    let mut lines: Vec<&str> = lines.to_vec();
    let is_blank = |l: &&str| l.trim().is_empty();
    while lines.first().is_some_and(is_blank) {
        lines.remove(0);
    }
    while lines.last().is_some_and(is_blank) {
        lines.pop();
    }
    if lines.len() >= 2 && lines[0].trim_start().starts_with("```") && lines[lines.len() - 1].trim() == "```" {
        lines = lines[1..lines.len() - 1].to_vec();
    }
    lines.join("\n").trim_end().to_string()
}

/// Splits labelled fields: each label line starts a field that runs until
/// the next label. Returns `(label, content)` in order.
fn labelled_fields<'a>(lines: &[&'a str], re: &Regex) -> Vec<(String, String)> {
    let mut out: Vec<(String, Vec<&'a str>)> = Vec::new();
    for line in lines {
        if let Some(c) = re.captures(line) {
            let first = c.get(2).map_or("", |m| m.as_str());
            let first = first.trim_end_matches('*').trim_end();
            let mut body = Vec::new();
            if !first.is_empty() {
                body.push(first);
            }
            out.push((c[1].to_ascii_lowercase(), body));
        } else if let Some((_, body)) = out.last_mut() {
            body.push(line);
        }
    }
    out.into_iter().map(|(l, body)| (l, clean_block(&body))).collect()
}

pub fn parse_synthesis_response(text: &str, seed_id: &str, mode: ParseMode) -> Result<ParsedSynthesis, SynthParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut starts: [Option<usize>; 3] = [None; 3];
    for (i, line) in lines.iter().enumerate() {
        if let Some(c) = heading_re().captures(line) {
            let part: usize = c[1].parse().expect("digit");
            starts[part - 1].get_or_insert(i);
        }
    }
    let region = |part: usize| -> Option<Vec<&str>> {
        let start = starts[part]?;
        let end = starts
            .iter()
            .flatten()
            .copied()
            .filter(|s| *s > start)
            .min()
            .unwrap_or(lines.len());
        Some(lines[start + 1..end].to_vec())
    };

    let mut missing: Vec<&'static str> = Vec::new();
    let strict = mode == ParseMode::Strict;
    let fail = |reason: &str, region: &str| SynthParseError {
        reason: reason.to_string(),
        excerpt: excerpt(region),
    };

    // Part 1: free-form reasoning steps plus the knowledge-point list
    let (analysis, knowledge_points) = match region(0) {
        Some(body) => {
            let k_idx = body.iter().position(|l| knowledge_re().is_match(l));
            let (steps, kp) = match k_idx {
                Some(k) => {
                    let first = knowledge_re().captures(body[k]).expect("matched")[1].to_string();
                    let mut rest = vec![first.as_str()];
                    rest.extend(body[k + 1..].iter().copied());
                    let joined = clean_block(&rest);
                    let points = joined
                        .split([',', '\n'])
                        .map(|s| s.trim().trim_start_matches(['-', '*']).trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    (clean_block(&body[..k]), points)
                }
                None => (clean_block(&body), Vec::new()),
            };
            (steps, kp)
        }
        None => {
            if strict {
                return Err(fail("missing '## Part 1' heading", text));
            }
            missing.push("part1");
            (String::new(), Vec::new())
        }
    };

    let mut statement = String::new();
    let mut input_format = String::new();
    let mut output_format = String::new();
    let mut starter_code = None;
    match region(1) {
        Some(body) => {
            for (label, content) in labelled_fields(&body, field_re()) {
                let slot = match label.as_str() {
                    "problem description" => &mut statement,
                    "input format" => &mut input_format,
                    "output format" => &mut output_format,
                    _ => {
                        if !content.is_empty() {
                            starter_code = Some(content);
                        }
                        continue;
                    }
                };
                if slot.is_empty() {
                    *slot = content;
                }
            }
            for (name, value) in [
                ("problem description", &statement),
                ("input format", &input_format),
                ("output format", &output_format),
            ] {
                if value.is_empty() {
                    if strict {
                        return Err(fail(&format!("Part 2 lacks '{name}'"), &body.join("\n")));
                    }
                    missing.push(name);
                }
            }
        }
        None => {
            let after_part1 = starts[0].map_or(text.to_string(), |s| lines[s..].join("\n"));
            if strict {
                return Err(fail("missing '## Part 2' heading", &after_part1));
            }
            missing.push("part2");
        }
    }

    let mut example_cases = Vec::new();
    match region(2) {
        Some(body) => {
            let mut pending: Option<String> = None;
            for (label, content) in labelled_fields(&body, example_re()) {
                match (label.as_str(), pending.take()) {
                    ("input", prev) => {
                        if prev.is_some() && strict {
                            return Err(fail("example input without output", &body.join("\n")));
                        }
                        pending = Some(content);
                    }
                    ("output", Some(input)) => example_cases.push(ExampleCase { input, output: content }),
                    _ => {
                        if strict {
                            return Err(fail("example output without input", &body.join("\n")));
                        }
                    }
                }
            }
            if example_cases.len() < 2 {
                if strict {
                    return Err(fail(
                        &format!("expected at least 2 example cases, found {}", example_cases.len()),
                        &body.join("\n"),
                    ));
                }
                missing.push("example cases");
            }
        }
        None => {
            if strict {
                let tail = starts[1].map_or(text.to_string(), |s| lines[s..].join("\n"));
                return Err(fail("missing '## Part 3' heading", &tail));
            }
            missing.push("part3");
        }
    }

    Ok(ParsedSynthesis {
        problem: SynthesizedProblem {
            analysis,
            knowledge_points,
            statement,
            input_format,
            output_format,
            example_cases,
            starter_code,
            seed_id: seed_id.to_string(),
        },
        missing,
    })
}

/// Mechanical rendering in the response layout the synthesis prompt asks for.
pub fn render_synthesis_response(p: &SynthesizedProblem) -> String {
    let mut s = String::new();
    s.push_str("## Part 1: Original Problem and Solution Analysis\n");
    s.push_str(&p.analysis);
    s.push_str("\nKnowledge Points: ");
    s.push_str(&p.knowledge_points.join(", "));
    s.push_str("\n\n## Part 2: New Problem\nProblem Description: ");
    s.push_str(&p.statement);
    s.push_str("\n\nInput Format:\n");
    s.push_str(&p.input_format);
    s.push_str("\n\nOutput Format:\n");
    s.push_str(&p.output_format);
    if let Some(code) = &p.starter_code {
        s.push_str("\n\nStarter Code:\n```python\n");
        s.push_str(code);
        s.push_str("\n```");
    }
    s.push_str("\n\n## Part 3: Example Test Cases\n");
    for case in &p.example_cases {
        s.push_str("Input:\n");
        s.push_str(&case.input);
        s.push_str("\nOutput:\n");
        s.push_str(&case.output);
        s.push_str("\n\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed() -> Problem {
        let mut p = Problem::stdio("seed-1", "Given a and b, print a+b.", Source::AtCoder);
        p.oracle_solutions.push(Solution::oracle("a, b = map(int, input().split())\nprint(a + b)"));
        p
    }

    #[test]
    fn synthesis_prompt_carries_question_and_solution() {
        let s = seed();
        let prompt = build_synthesis_prompt(&s, &s.oracle_solutions[0]).unwrap();
        assert!(prompt.contains("## Part 1: Original Problem and Solution Analysis"));
        assert!(prompt.contains("Given a and b, print a+b."));
        assert!(prompt.contains("print(a + b)"));
        assert!(prompt.starts_with("I will provide you with a programming problem along with its solution."));
        assert!(!prompt.contains("{question}") && !prompt.contains("{solution}"));
    }

    #[test]
    fn synthesis_prompt_requires_oracle() {
        let s = seed();
        let empty = Solution::oracle("   ");
        assert_eq!(
            build_synthesis_prompt(&s, &empty),
            Err(SynthError::MissingOracle("seed-1".into()))
        );
        let foreign = Solution::oracle("print(0)");
        assert!(matches!(build_synthesis_prompt(&s, &foreign), Err(SynthError::ForeignOracle(_))));
        let model = Solution::model("print(1)");
        assert!(build_synthesis_prompt(&s, &model).is_err());
    }

    #[test]
    fn braces_in_inputs_are_preserved() {
        let mut s = seed();
        s.statement = "Print {solution} and {question} literally, plus {x}.".into();
        s.oracle_solutions[0].source_text = "print('{question}')".into();
        let prompt = build_synthesis_prompt(&s, &s.oracle_solutions[0].clone()).unwrap();
        assert!(prompt.contains("Print {solution} and {question} literally, plus {x}."));
        assert!(prompt.contains("print('{question}')"));
    }

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill_template("{a}-{b}", &[("a", "{b}"), ("b", "x")]), "{b}-x");
        assert_eq!(fill_template("{ {a} }", &[("a", "1")]), "{ 1 }");
        assert_eq!(fill_template("tail {", &[("a", "1")]), "tail {");
    }

    #[test]
    fn direct_prompts() {
        let mut p = seed();
        p.statement = "Sort the list.\n```\n3\n1 2 3\n```\n".into();
        let io = build_direct_io_pair_prompt(&p).unwrap();
        assert!(io.contains("\"test_inputs\""));
        assert!(io.contains("50 test inputs and outputs pair"));
        assert!(io.contains("Sort the list.\n```\n3\n1 2 3\n```"));
        let inputs = build_direct_input_prompt(&p).unwrap();
        assert!(inputs.contains("50 test inputs"));
        assert!(!inputs.contains("output_string"));
        assert_eq!(inputs, build_direct_input_prompt(&p).unwrap());

        p.statement = String::new();
        assert!(build_direct_io_pair_prompt(&p).is_err());
        assert!(build_direct_input_prompt(&p).is_err());
    }

    const WELL_FORMED: &str = "\
## Part 1: Original Problem and Solution Analysis
Step 1: Read the pairs.
Step 2: Simulate the division with increments.
Knowledge Points: greedy, brute force, math

## Part 2: New Problem
Problem Description: Given n numbers, output their sum modulo 7.

Input Format:
The first line contains n.
The second line contains n integers.

Output Format:
A single integer.

## Part 3: Example Test Cases
Input:
3
1 2 3
Output:
6

Input:
2
5 5
Output:
3
";

    #[test]
    fn parses_well_formed_response() {
        let parsed = parse_synthesis_response(WELL_FORMED, "seed-1", ParseMode::Strict).unwrap();
        let p = parsed.problem;
        assert!(parsed.missing.is_empty());
        assert_eq!(p.knowledge_points, vec!["greedy", "brute force", "math"]);
        assert!(p.analysis.starts_with("Step 1: Read the pairs."));
        assert_eq!(p.statement, "Given n numbers, output their sum modulo 7.");
        assert_eq!(p.input_format, "The first line contains n.\nThe second line contains n integers.");
        assert_eq!(p.output_format, "A single integer.");
        assert_eq!(p.example_cases.len(), 2);
        // multi-line inputs keep their internal newline
        assert_eq!(p.example_cases[0].input, "3\n1 2 3");
        assert_eq!(p.example_cases[0].output, "6");
        assert_eq!(p.example_cases[1].input, "2\n5 5");

        let problem = p.to_problem(&seed());
        assert_eq!(problem.kind, ProblemKind::Stdio);
        assert_eq!(problem.seed_id.as_deref(), Some("seed-1"));
        assert!(problem.validate().is_ok());
    }

    #[test]
    fn missing_part3_strict_vs_lenient() {
        let cut = WELL_FORMED.split("## Part 3").next().unwrap();
        let err = parse_synthesis_response(cut, "s", ParseMode::Strict).unwrap_err();
        assert!(err.reason.contains("Part 3"));
        let lenient = parse_synthesis_response(cut, "s", ParseMode::Lenient).unwrap();
        assert_eq!(lenient.missing, vec!["part3"]);
        assert_eq!(lenient.problem.statement, "Given n numbers, output their sum modulo 7.");
    }

    #[test]
    fn missing_part2_reports_excerpt() {
        let text = "## Part 1: Analysis\nStep 1: think very hard about the problem and its solution in great detail indeed.\n";
        let err = parse_synthesis_response(text, "s", ParseMode::Strict).unwrap_err();
        assert!(err.reason.contains("Part 2"));
        assert_eq!(err.excerpt, text.chars().take(80).collect::<String>());
        assert!(err.excerpt.chars().count() <= 80);
    }

    #[test]
    fn starter_code_makes_function_problem() {
        let text = WELL_FORMED.replace(
            "Output Format:\nA single integer.\n",
            "Output Format:\nA single integer.\n\nStarter Code:\n```python\nclass Solution:\n    def sum_mod(self, nums):\n        pass\n```\n",
        );
        let parsed = parse_synthesis_response(&text, "seed-1", ParseMode::Strict).unwrap();
        let p = parsed.problem.to_problem(&seed());
        assert_eq!(p.kind, ProblemKind::Function);
        assert_eq!(p.fn_name.as_deref(), Some("sum_mod"));
        assert_eq!(parsed.problem.output_format, "A single integer.");
    }

    #[test]
    fn bold_markdown_labels() {
        let text = WELL_FORMED
            .replace("Problem Description:", "**Problem Description:**")
            .replace("## Part 2: New Problem", "### **Part 2: New Problem**");
        let parsed = parse_synthesis_response(&text, "s", ParseMode::Strict).unwrap();
        assert_eq!(parsed.problem.statement, "Given n numbers, output their sum modulo 7.");
    }
}
