//! Small parametric problem families with known-correct programs, seeded
//! faults and reference test utilities. They stand in for model output in
//! the end-to-end pipeline run and in verification experiments.
//!
//! Every family reads `n` and then `n` integers, so one generator parameter
//! (the array length) controls scale.

use crate::problem::{ExampleCase, Problem, Source};
use crate::synth::SynthesizedProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SumMod,
    CountGreater,
    MaxMinusMin,
    LongestRun,
    DistinctCount,
    SecondLargest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutantKind {
    OffByOne,
    WrongComparison,
    OverflowAtScale,
    MissingEdgeCase,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::SumMod,
        Family::CountGreater,
        Family::MaxMinusMin,
        Family::LongestRun,
        Family::DistinctCount,
        Family::SecondLargest,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Family::SumMod => "sum-mod",
            Family::CountGreater => "count-greater",
            Family::MaxMinusMin => "max-minus-min",
            Family::LongestRun => "longest-run",
            Family::DistinctCount => "distinct-count",
            Family::SecondLargest => "second-largest",
        }
    }

    /// The family's four parameter settings: the modulus, the threshold or
    /// the value bound, depending on the family.
    pub fn params(self) -> [u64; 4] {
        match self {
            Family::SumMod => [7, 1000, 998_244_353, 1_000_000_007],
            Family::CountGreater => [5, 50, 1000, 1_000_000],
            Family::MaxMinusMin => [10, 1000, 1_000_000, 1_000_000_000],
            Family::LongestRun => [2, 3, 10, 100],
            Family::DistinctCount => [5, 100, 10_000, 1_000_000_000],
            Family::SecondLargest => [3, 10, 1000, 1_000_000_000],
        }
    }
}

/// Largest array length accepted by every family.
pub const MAX_N: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyProblem {
    pub family: Family,
    pub param: u64,
}

const READERS: [&str; 2] = [
    "n = int(input())\na = list(map(int, input().split()))\n",
    "import sys\ndata = sys.stdin.read().split()\nn = int(data[0])\na = [int(x) for x in data[1:1 + n]]\n",
];

const WRITERS: [&str; 2] = ["print(ans)\n", "import sys\nsys.stdout.write(str(ans) + \"\\n\")\n"];

fn program(reader: usize, body: &str, writer: usize) -> String {
    let mut s = String::from(READERS[reader]);
    s.push_str(body);
    if !body.ends_with('\n') {
        s.push('\n');
    }
    s.push_str(WRITERS[writer]);
    s
}

impl ToyProblem {
    pub fn new(family: Family, param: u64) -> Self {
        Self { family, param }
    }

    /// All 24 family/parameter combinations.
    pub fn all() -> Vec<ToyProblem> {
        Family::ALL
            .iter()
            .flat_map(|f| f.params().into_iter().map(move |p| ToyProblem::new(*f, p)))
            .collect()
    }

    pub fn id(&self) -> String {
        format!("toy-{}-{}", self.family.slug(), self.param)
    }

    /// Inclusive bounds on the array values.
    pub fn value_range(&self) -> (u64, u64) {
        match self.family {
            Family::SumMod => (1, 1_000_000_000),
            Family::CountGreater => (1, 2 * self.param),
            _ => (1, self.param),
        }
    }

    pub fn statement(&self) -> String {
        let p = self.param;
        let task = match self.family {
            Family::SumMod => format!("Print the sum of all elements modulo {p}."),
            Family::CountGreater => format!("Print how many elements are strictly greater than {p}."),
            Family::MaxMinusMin => "Print the difference between the largest and the smallest element.".to_string(),
            Family::LongestRun => {
                "A run is a maximal block of consecutive equal elements. Print the length of the longest run."
                    .to_string()
            }
            Family::DistinctCount => "Print how many different values occur in the array.".to_string(),
            Family::SecondLargest => {
                "Print the second largest distinct value of the array, or -1 if all elements are equal.".to_string()
            }
        };
        let (lo, hi) = self.value_range();
        format!("You are given an array of n integers, each between {lo} and {hi}. {task}")
    }

    pub fn input_format(&self) -> String {
        let (lo, hi) = self.value_range();
        format!(
            "The first line contains one integer n (1 <= n <= {MAX_N}).\nThe second line contains n integers a_1, ..., a_n ({lo} <= a_i <= {hi})."
        )
    }

    pub fn output_format(&self) -> String {
        "Print one integer.".to_string()
    }

    pub fn constraints(&self) -> String {
        let (lo, hi) = self.value_range();
        format!("1 <= n <= {MAX_N}; {lo} <= a_i <= {hi}")
    }

    /// The problem record, without oracle solutions.
    pub fn problem(&self, id: impl Into<String>, source: Source, cf_rating: Option<i64>) -> Problem {
        let mut p = Problem::stdio(id, self.statement(), source);
        p.input_format = self.input_format();
        p.output_format = self.output_format();
        p.constraints_text = self.constraints();
        p.cf_rating = cf_rating;
        p
    }

    /// The answer for an array, used for example cases.
    pub fn answer(&self, a: &[u64]) -> i64 {
        let p = self.param;
        match self.family {
            Family::SumMod => (a.iter().map(|&x| x as u128).sum::<u128>() % p as u128) as i64,
            Family::CountGreater => a.iter().filter(|&&x| x > p).count() as i64,
            Family::MaxMinusMin => (a.iter().max().unwrap() - a.iter().min().unwrap()) as i64,
            Family::LongestRun => a.chunk_by(|x, y| x == y).map(<[u64]>::len).max().unwrap_or(0) as i64,
            Family::DistinctCount => a.iter().collect::<std::collections::BTreeSet<_>>().len() as i64,
            Family::SecondLargest => {
                let s: std::collections::BTreeSet<_> = a.iter().collect();
                s.iter().rev().nth(1).map_or(-1, |v| **v as i64)
            }
        }
    }

    fn bodies(&self) -> [String; 3] {
        let p = self.param.to_string();
        let b: [&str; 3] = match self.family {
            Family::SumMod => [
                "ans = sum(a) % @P@\n",
                "s = 0\nfor x in a:\n    s = (s + x) % @P@\nans = s\n",
                "from functools import reduce\nans = reduce(lambda s, x: (s + x) % @P@, a, 0)\n",
            ],
            Family::CountGreater => [
                "ans = sum(1 for x in a if x > @P@)\n",
                "ans = 0\nfor x in a:\n    if x > @P@:\n        ans += 1\n",
                "import bisect\nb = sorted(a)\nans = n - bisect.bisect_right(b, @P@)\n",
            ],
            Family::MaxMinusMin => [
                "ans = max(a) - min(a)\n",
                "hi = lo = a[0]\nfor x in a:\n    if x > hi:\n        hi = x\n    if x < lo:\n        lo = x\nans = hi - lo\n",
                "b = sorted(a)\nans = b[-1] - b[0]\n",
            ],
            Family::LongestRun => [
                "from itertools import groupby\nans = max(len(list(g)) for _, g in groupby(a))\n",
                "best = cur = 1\nfor i in range(1, n):\n    cur = cur + 1 if a[i] == a[i - 1] else 1\n    best = max(best, cur)\nans = best\n",
                "i = 0\nans = 0\nwhile i < n:\n    j = i\n    while j < n and a[j] == a[i]:\n        j += 1\n    ans = max(ans, j - i)\n    i = j\n",
            ],
            Family::DistinctCount => [
                "ans = len(set(a))\n",
                "b = sorted(a)\nans = 1 + sum(1 for i in range(1, n) if b[i] != b[i - 1])\n",
                "seen = {}\nfor x in a:\n    seen[x] = True\nans = len(seen)\n",
            ],
            Family::SecondLargest => [
                "s = sorted(set(a))\nans = s[-2] if len(s) >= 2 else -1\n",
                "first = second = -1\nfor x in a:\n    if x > first:\n        second = first\n        first = x\n    elif first > x > second:\n        second = x\nans = second\n",
                "m = max(a)\nrest = [x for x in a if x != m]\nans = max(rest) if rest else -1\n",
            ],
        };
        b.map(|s| s.replace("@P@", &p))
    }

    fn mutant_bodies(&self) -> [(MutantKind, String); 4] {
        use MutantKind::*;
        let p = self.param.to_string();
        let m: [(MutantKind, &str); 4] = match self.family {
            Family::SumMod => [
                (OffByOne, "ans = sum(a[1:]) % @P@\n"),
                (WrongComparison, "s = 0\nfor x in a:\n    s += x % @P@\n    if s > @P@:\n        s -= @P@\nans = s\n"),
                (OverflowAtScale, "ans = (sum(a) & 0xFFFFFFFF) % @P@\n"),
                (MissingEdgeCase, "ans = 0 if n == 1 else sum(a) % @P@\n"),
            ],
            Family::CountGreater => [
                (OffByOne, "ans = sum(1 for x in a[1:] if x > @P@)\n"),
                (WrongComparison, "ans = sum(1 for x in a if x < @P@)\n"),
                (OverflowAtScale, "ans = sum(1 for x in a if x > @P@) & 0x7FFF\n"),
                (MissingEdgeCase, "c = sum(1 for x in a if x > @P@)\nans = 0 if c == n else c\n"),
            ],
            Family::MaxMinusMin => [
                (OffByOne, "ans = max(a[:-1] or a) - min(a)\n"),
                (WrongComparison, "hi = lo = a[0]\nfor x in a:\n    if x < hi:\n        hi = x\n    if x < lo:\n        lo = x\nans = hi - lo\n"),
                (OverflowAtScale, "lo = 1000\nfor x in a:\n    lo = min(lo, x)\nans = max(a) - lo\n"),
                (MissingEdgeCase, "ans = a[0] if n == 1 else max(a) - min(a)\n"),
            ],
            Family::LongestRun => [
                (OffByOne, "best, cur = 0, 1\nfor i in range(1, n):\n    if a[i] == a[i - 1]:\n        cur += 1\n    else:\n        best = max(best, cur)\n        cur = 1\nans = best\n"),
                (WrongComparison, "best = cur = 1\nfor i in range(1, n):\n    cur = cur + 1 if a[i] >= a[i - 1] else 1\n    best = max(best, cur)\nans = best\n"),
                (OverflowAtScale, "a = a[:1 << 15]\nn = len(a)\nbest = cur = 1\nfor i in range(1, n):\n    cur = cur + 1 if a[i] == a[i - 1] else 1\n    best = max(best, cur)\nans = best\n"),
                (MissingEdgeCase, "best = cur = 1\nfor i in range(1, n):\n    cur = cur + 1 if a[i] == a[i - 1] else 1\n    best = max(best, cur)\nans = 0 if n == 1 else best\n"),
            ],
            Family::DistinctCount => [
                (OffByOne, "ans = len(set(a[1:]))\n"),
                (WrongComparison, "ans = 1 + sum(1 for i in range(1, n) if a[i] != a[i - 1])\n"),
                (OverflowAtScale, "ans = len(set(x & 0xFFFF for x in a))\n"),
                (MissingEdgeCase, "ans = 0 if n == 1 else len(set(a))\n"),
            ],
            Family::SecondLargest => [
                (OffByOne, "s = sorted(set(a))\nans = s[1] if len(s) >= 2 else -1\n"),
                (WrongComparison, "s = sorted(set(a))\nans = s[-2] if len(s) > 2 else -1\n"),
                (OverflowAtScale, "s = sorted(set(a))\nans = s[-2] % 65536 if len(s) >= 2 else -1\n"),
                (MissingEdgeCase, "s = sorted(set(a))\nans = s[-2] if len(s) >= 2 else 0\n"),
            ],
        };
        m.map(|(k, s)| (k, s.replace("@P@", &p)))
    }

    /// Mutant kinds that are wrong on every single-element input or on
    /// nearly every random input.
    pub fn robust_mutants(&self) -> [MutantKind; 2] {
        use MutantKind::*;
        match self.family {
            Family::SumMod => [OffByOne, MissingEdgeCase],
            Family::CountGreater => [OffByOne, WrongComparison],
            Family::MaxMinusMin => [WrongComparison, MissingEdgeCase],
            Family::LongestRun => [OffByOne, MissingEdgeCase],
            Family::DistinctCount => [OffByOne, MissingEdgeCase],
            Family::SecondLargest => [OffByOne, MissingEdgeCase],
        }
    }

    /// The plainest correct program.
    pub fn reference(&self) -> String {
        program(0, &self.bodies()[0], 0)
    }

    /// `count` textually distinct correct programs (3 algorithms x 2 readers
    /// x 2 writers, then repeated with a marker comment).
    pub fn correct_variants(&self, count: usize) -> Vec<String> {
        let bodies = self.bodies();
        (0..count)
            .map(|i| {
                let combo = i % 12;
                let mut s = program(combo / 3 % 2, &bodies[combo % 3], combo / 6);
                if i >= 12 {
                    s.push_str(&format!("# copy {}\n", i / 12));
                }
                s
            })
            .collect()
    }

    pub fn mutant(&self, kind: MutantKind, copy: usize) -> String {
        let body = &self.mutant_bodies().into_iter().find(|(k, _)| *k == kind).expect("every kind defined").1;
        let mut s = program(copy % 2, body, (copy / 2) % 2);
        if copy >= 4 {
            s.push_str(&format!("# copy {}\n", copy / 4));
        }
        s
    }

    pub fn mutants(&self) -> Vec<(MutantKind, String)> {
        self.mutant_bodies()
            .iter()
            .map(|(k, _)| (*k, self.mutant(*k, 0)))
            .collect()
    }

    pub fn generator(&self) -> String {
        let (lo, hi) = self.value_range();
        format!(
            "import random\n\ndef generate_test_input(n):\n    if not (1 <= n <= {MAX_N}):\n        return None\n    values = [random.randint({lo}, {hi}) for _ in range(n)]\n    return str(n) + \"\\n\" + \" \".join(map(str, values))\n"
        )
    }

    pub fn validator(&self) -> String {
        let (lo, hi) = self.value_range();
        format!(
            "def validate_test_input(input_string):\n    lines = input_string.strip().split(\"\\n\")\n    if len(lines) != 2:\n        return False\n    try:\n        n = int(lines[0])\n        values = [int(x) for x in lines[1].split()]\n    except ValueError:\n        return False\n    if not (1 <= n <= {MAX_N}) or len(values) != n:\n        return False\n    return all({lo} <= v <= {hi} for v in values)\n"
        )
    }

    /// A utility-generation completion in the layout the prompt asks for.
    pub fn utility_response(&self) -> String {
        let (lo, hi) = self.value_range();
        format!(
            "Part 1: Parse Input Constraints\n\n- 1 <= n <= {MAX_N}\n- {lo} <= a_i <= {hi}\n\nPart 2: Code for Test Input Generation\n```python\n{}```\n\nPart 3: Code to Validate Test Input\n```python\n{}```\n",
            self.generator(),
            self.validator()
        )
    }

    fn example_cases(&self) -> Vec<ExampleCase> {
        let (_, hi) = self.value_range();
        [vec![1u64, 2, 2], vec![hi.min(7), 1, hi.min(7), hi.min(7)]]
            .into_iter()
            .map(|a| {
                let a: Vec<u64> = a.into_iter().map(|x| x.min(hi)).collect();
                ExampleCase {
                    input: format!("{}\n{}", a.len(), a.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")),
                    output: self.answer(&a).to_string(),
                }
            })
            .collect()
    }

    /// This problem written as a synthesis result derived from `seed_id`.
    pub fn as_synthesized(&self, seed_id: &str) -> SynthesizedProblem {
        SynthesizedProblem {
            analysis: "Step 1: The original problem reads an array and aggregates it in one pass.\nStep 2: The solution keeps a running value while scanning.".into(),
            knowledge_points: vec!["arrays".into(), "implementation".into()],
            statement: self.statement(),
            input_format: self.input_format(),
            output_format: self.output_format(),
            example_cases: self.example_cases(),
            starter_code: None,
            seed_id: seed_id.to_string(),
        }
    }
}

/// Wraps a program as a model completion.
pub fn as_completion(code: &str) -> String {
    format!("Here is my solution.\n\n```python\n{code}```\n")
}
