use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use cpverify::config::PipelineConfig;
use cpverify::corpus::RecordSchema;
use cpverify::eval;
use cpverify::fixture;
use cpverify::pipeline::{read_export, read_samples, Pipeline, RunOptions};

#[derive(Parser)]
#[command(name = "cpverify", version, about = "Build verified competitive-programming datasets")]
struct Cli {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding every stage's outputs.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    /// Override the number of sandbox workers.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Serve model completions from this cache and never call the network.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    /// Keep scratch directories of failed executions.
    #[arg(long, global = true)]
    keep_failed: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schema {
    Native,
    Taco,
}

impl From<Schema> for RecordSchema {
    fn from(s: Schema) -> Self {
        match s {
            Schema::Native => RecordSchema::Native,
            Schema::Taco => RecordSchema::Taco,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load, deduplicate and filter seed problems.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "native")]
        schema: Schema,
    },
    /// Write new problems from seeds.
    Synthesize,
    /// Obtain generator/validator pairs and produce scaled test inputs.
    GenInputs,
    /// Label seed-problem inputs with their oracle solutions.
    Label,
    /// Sample candidate solutions.
    Sample,
    /// Mutual verification for synthetic problems; candidate checks for seeds.
    Verify,
    /// Pick one solution per problem.
    Postprocess,
    /// Drop problems overlapping a benchmark.
    Decontaminate {
        /// JSONL with `id` and `text` per benchmark problem.
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
    /// Write the dataset JSONL and its manifest.
    Export,
    /// Every stage in order, skipping completed ones.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "native")]
        schema: Schema,
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
    /// pass@1 of sampled programs against an exported dataset.
    Eval {
        /// JSONL with `id` and `samples` (program texts).
        #[arg(long)]
        solutions: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Build the toy fixture and run the full pipeline on it offline.
    Toy {
        /// Where to write the fixture (seeds, benchmark, replay cache).
        #[arg(long, default_value = "toy-fixture")]
        fixture_dir: PathBuf,
    },
}

fn load_config(cli: &Cli, base: PipelineConfig) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => base,
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pipeline(cli: &Cli, cfg: PipelineConfig, replay: Option<&Path>) -> anyhow::Result<Pipeline> {
    let opts = RunOptions {
        replay_dir: replay.map(Path::to_path_buf).or_else(|| cli.replay.clone()),
        keep_failed: cli.keep_failed,
    };
    Ok(Pipeline::new(cfg, &cli.run_dir, &opts)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Toy { fixture_dir } = &cli.command {
        let cfg = load_config(&cli, fixture::toy_config())?;
        let fx = fixture::write_toy_fixture(fixture_dir, &cfg)?;
        let p = pipeline(&cli, cfg, Some(&fx.replay_dir))?;
        let manifest = p.run_all(&fx.seeds_path, RecordSchema::Native, Some(&fx.benchmark_path))?;
        println!("{} records, sha256 {}", manifest.records, manifest.sha256);
        println!("{}", p.export_path().display());
        return Ok(());
    }
    let cfg = load_config(&cli, PipelineConfig::default())?;
    if let Command::Eval { solutions, dataset, k } = &cli.command {
        let p = pipeline(&cli, cfg, None)?;
        let mut samples = read_samples(solutions)?;
        let mut items = Vec::new();
        for (problem, cases) in read_export(dataset)? {
            let Some(s) = samples.remove(&problem.id) else {
                bail!("no samples for problem {}", problem.id);
            };
            items.push((problem, s, cases));
        }
        let report = eval::evaluate(&items, *k, p.sandbox(), &p.cfg.limits)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let p = pipeline(&cli, cfg, None)?;
    let report = match &cli.command {
        Command::Ingest { input, schema } => p.ingest(input, (*schema).into())?,
        Command::Synthesize => p.synthesize()?,
        Command::GenInputs => p.gen_inputs()?,
        Command::Label => p.label()?,
        Command::Sample => p.sample()?,
        Command::Verify => p.verify()?,
        Command::Postprocess => p.postprocess()?,
        Command::Decontaminate { benchmark } => p.decontaminate(benchmark.as_deref())?,
        Command::Export => {
            let (report, manifest) = p.export()?;
            println!("{} records, sha256 {}", manifest.records, manifest.sha256);
            report
        }
        Command::Run {
            input,
            schema,
            benchmark,
        } => {
            let manifest = p
                .run_all(input, (*schema).into(), benchmark.as_deref())
                .context("pipeline run failed")?;
            println!("{} records, sha256 {}", manifest.records, manifest.sha256);
            return Ok(());
        }
        Command::Eval { .. } | Command::Toy { .. } => unreachable!(),
    };
    println!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
