//! The ten-problem toy run: seed records, a benchmark file and a replay
//! cache holding every completion the pipeline will ask for.
//!
//! Requests are built with the same functions the pipeline uses, so cache
//! keys line up by construction.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::PipelineConfig;
use crate::corpus::{self, RecordSchema};
use crate::inputgen;
use crate::llm::Gateway;
use crate::pipeline::{self, PipelineError};
use crate::problem::{Problem, Source};
use crate::synth::{self, ParseMode};
use crate::toy::{as_completion, Family, ToyProblem};

/// What kind of candidate pool a toy problem gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    /// Correct variants plus a few mutants.
    Healthy { correct: usize, mutants: usize },
    /// Only robust mutants; no candidate survives the oracle's tests.
    AllMutants,
    /// Correct variants in the minority against robust mutants.
    Minority { correct: usize },
}

pub struct ToySeed {
    pub toy: ToyProblem,
    pub source: Source,
    pub cf_rating: Option<i64>,
    pub pool: Pool,
    /// The problem synthesized from this seed, and its pool.
    pub derived: ToyProblem,
    pub derived_pool: Pool,
}

pub fn toy_seeds() -> Vec<ToySeed> {
    let seed = Pool::Healthy { correct: 10, mutants: 6 };
    let synth = Pool::Healthy { correct: 12, mutants: 4 };
    let t = ToyProblem::new;
    vec![
        ToySeed {
            toy: t(Family::SumMod, 7),
            source: Source::Codeforces,
            cf_rating: Some(800),
            pool: seed,
            derived: t(Family::SecondLargest, 1000),
            derived_pool: synth,
        },
        ToySeed {
            toy: t(Family::CountGreater, 50),
            source: Source::AtCoder,
            cf_rating: None,
            pool: seed,
            derived: t(Family::CountGreater, 1000),
            derived_pool: synth,
        },
        ToySeed {
            toy: t(Family::MaxMinusMin, 1000),
            source: Source::Codeforces,
            cf_rating: Some(1700),
            pool: seed,
            derived: t(Family::LongestRun, 10),
            derived_pool: synth,
        },
        ToySeed {
            toy: t(Family::LongestRun, 3),
            source: Source::CodeChef,
            cf_rating: None,
            pool: Pool::AllMutants,
            derived: t(Family::DistinctCount, 10_000),
            derived_pool: Pool::Minority { correct: 6 },
        },
        ToySeed {
            toy: t(Family::DistinctCount, 100),
            source: Source::Codeforces,
            cf_rating: Some(1900),
            pool: seed,
            derived: t(Family::MaxMinusMin, 1_000_000),
            derived_pool: synth,
        },
    ]
}

/// Fixed part of the padding loop for candidates other than the first.
pub const PAD_ITERATIONS: u64 = 100_000;

/// Appends a busy loop that grows with the input length `n`, so a padded
/// candidate is measurably slower at every scale.
pub fn padded(code: &str, iterations: u64) -> String {
    format!("{code}for _ in range({iterations} + 20 * n):  # pad\n    pass\n")
}

/// The candidate programs for `toy` under `pool`. Candidates after the first
/// are padded so fastest-solution selection does not depend on timing noise.
pub fn candidates(toy: &ToyProblem, pool: Pool) -> Vec<String> {
    let mut out = match pool {
        Pool::Healthy { correct, mutants } => {
            let mut v = toy.correct_variants(correct);
            let kinds = toy.mutants();
            v.extend((0..mutants).map(|i| toy.mutant(kinds[i % kinds.len()].0, i / kinds.len())));
            v
        }
        Pool::AllMutants => {
            let robust = toy.robust_mutants();
            (0..16).map(|i| toy.mutant(robust[i % 2], i / 2)).collect()
        }
        Pool::Minority { correct } => {
            let mut v = toy.correct_variants(correct);
            let robust = toy.robust_mutants();
            v.extend((0..16 - correct).map(|i| toy.mutant(robust[i % 2], i / 2)));
            v
        }
    };
    for c in out.iter_mut().skip(1) {
        *c = padded(c, PAD_ITERATIONS);
    }
    out
}

/// Statement planted in the benchmark file; its problem must be removed.
pub fn planted_benchmark_text() -> String {
    let toy = toy_seeds()[0].derived;
    format!("Benchmark task 17. {} Print the answer.", toy.statement())
}

#[derive(Debug, Clone)]
pub struct ToyFixture {
    pub seeds_path: PathBuf,
    pub benchmark_path: PathBuf,
    pub replay_dir: PathBuf,
    /// The config the fixture's cache was built for.
    pub config: PipelineConfig,
}

/// The pipeline settings for toy runs: four copies per scale point so the
/// single-parameter grid yields 56 inputs.
pub fn toy_config() -> PipelineConfig {
    PipelineConfig {
        copies_per_point: 4,
        rng_seed: 20_250_101,
        ..PipelineConfig::default()
    }
}

fn seed_record(s: &ToySeed) -> serde_json::Value {
    json!({
        "id": s.toy.id(),
        "statement": s.toy.statement(),
        "input_format": s.toy.input_format(),
        "output_format": s.toy.output_format(),
        "constraints": s.toy.constraints(),
        "source": s.source.as_str(),
        "cf_rating": s.cf_rating,
        "solutions": [s.toy.reference()],
    })
}

/// Writes the fixture under `dir` for the model names and sampling settings
/// in `cfg`.
pub fn write_toy_fixture(dir: &Path, cfg: &PipelineConfig) -> Result<ToyFixture, PipelineError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let seeds = toy_seeds();

    let seeds_path = dir.join("seeds.jsonl");
    let body: String = seeds.iter().map(|s| format!("{}\n", seed_record(s))).collect();
    fs::write(&seeds_path, body).map_err(io(&seeds_path))?;

    let benchmark_path = dir.join("benchmark.jsonl");
    let bench = [
        json!({"id": "bench-0017", "text": planted_benchmark_text()}),
        json!({"id": "bench-0042", "text": "Given a weighted tree, answer path maximum queries online."}),
    ];
    let body: String = bench.iter().map(|b| format!("{b}\n")).collect();
    fs::write(&benchmark_path, body).map_err(io(&benchmark_path))?;

    let replay_dir = dir.join("replay");
    let generator = Gateway::replay(&replay_dir, &cfg.llm.generator_model);
    let solver = Gateway::replay(&replay_dir, &cfg.llm.solver_model);

    // Problems exactly as ingestion will produce them.
    let ingested = corpus::ingest_problems(&seeds_path, RecordSchema::Native)?;
    let by_id = |id: &str| -> Problem {
        ingested
            .problems
            .iter()
            .find(|p| p.id == id)
            .cloned()
            .expect("fixture seed ingests")
    };

    let pool_completions = |toy: &ToyProblem, pool: Pool| -> Vec<String> {
        let mut c: Vec<String> = candidates(toy, pool).iter().map(|c| as_completion(c)).collect();
        c.resize(cfg.n_candidates as usize, as_completion(&toy.reference()));
        c
    };

    for s in &seeds {
        let seed = by_id(&s.toy.id());
        let synth_text = synth::render_synthesis_response(&s.derived.as_synthesized(&seed.id));
        let req = pipeline::synthesis_request(cfg, &seed)?;
        generator.store(&req, &vec![synth_text.clone(); cfg.samples_per_seed as usize])?;
        let derived = synth::parse_synthesis_response(&synth_text, &seed.id, ParseMode::Strict)
            .map_err(|e| PipelineError::Decode {
                path: seeds_path.clone(),
                message: e.to_string(),
            })?
            .problem
            .to_problem(&seed);

        for (problem, toy, pool) in [(&seed, &s.toy, s.pool), (&derived, &s.derived, s.derived_pool)] {
            let req = inputgen::utilgen_request(problem, cfg.llm.temperature)?;
            generator.store(&req, &[toy.utility_response()])?;
            let req = pipeline::solve_request(cfg, problem)?;
            solver.store(&req, &pool_completions(toy, pool))?;
        }
    }
    Ok(ToyFixture {
        seeds_path,
        benchmark_path,
        replay_dir,
        config: cfg.clone(),
    })
}

/// Builds a fixture in `work_dir` and runs every stage into `run_dir`.
pub fn run_toy_pipeline(
    work_dir: &Path,
    run_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<(pipeline::Pipeline, crate::postproc::ExportManifest), PipelineError> {
    let fx = write_toy_fixture(work_dir, cfg)?;
    let p = pipeline::Pipeline::new(
        cfg.clone(),
        run_dir,
        &pipeline::RunOptions {
            replay_dir: Some(fx.replay_dir.clone()),
            keep_failed: false,
        },
    )?;
    let manifest = p.run_all(&fx.seeds_path, RecordSchema::Native, Some(&fx.benchmark_path))?;
    Ok((p, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_have_sixteen_distinct_programs() {
        for s in toy_seeds() {
            for (toy, pool) in [(s.toy, s.pool), (s.derived, s.derived_pool)] {
                let c = candidates(&toy, pool);
                assert_eq!(c.len(), 16, "{}", toy.id());
                let distinct: std::collections::BTreeSet<_> = c.iter().collect();
                assert_eq!(distinct.len(), 16, "{}", toy.id());
            }
        }
    }

    #[test]
    fn fixture_writes_cache_entries() {
        let dir = tempfile::tempdir().unwrap();
        let fx = write_toy_fixture(dir.path(), &toy_config()).unwrap();
        let count = |tag: &str| fs::read_dir(fx.replay_dir.join(tag)).unwrap().count();
        assert_eq!(count(pipeline::SYNTH_TAG), 5);
        assert_eq!(count(inputgen::UTILGEN_TAG), 10);
        assert_eq!(count(pipeline::SOLVE_TAG), 10);
    }
}
