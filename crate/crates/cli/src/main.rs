use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use delayrc::experiment::{
    capacity_report, run_sweep, validate, write_capacity_csv, write_results_csv, write_results_jsonl,
    Experiment, Overrides, ResultRecord,
};
use delayrc::par::{with_threads, Execution};
use delayrc::reservoir::Engine;
use log::info;

#[derive(Parser)]
#[command(name = "delayrc", version, about = "Delay-based reservoir computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every point of an experiment file.
    Run(Common),
    /// Parse and resolve an experiment without running it.
    Validate(Common),
    /// Run a parameter sweep; the file must declare a `[sweep]` grid.
    Sweep(Common),
    /// Linear, quadratic and cross memory capacity of the first point.
    Mc(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "DELAYRC_OUT_DIR")]
    out: Option<PathBuf>,
    /// Master seed, overriding the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Reservoir engine, overriding the file.
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Dde,
    Map,
    Elm,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Dde => Engine::ContinuousDde,
            EngineArg::Map => Engine::DiscreteMap,
            EngineArg::Elm => Engine::Elm,
        }
    }
}

impl Common {
    fn load(&self) -> Result<Experiment> {
        let mut exp = Experiment::from_path(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        exp.apply(&Overrides {
            seed: self.seed,
            engine: self.engine.map(Engine::from),
            out: self.out.clone(),
        });
        Ok(exp)
    }
}

fn output_dir(exp: &Experiment) -> PathBuf {
    exp.base.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_results(exp: &Experiment, records: &[ResultRecord]) -> Result<()> {
    let dir = output_dir(exp);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_results_csv(records, create(&dir, "results.csv")?)?;
    if exp.base.output.log {
        write_results_jsonl(records, create(&dir, "results.jsonl")?)?;
    }
    info!("wrote {} rows to {}", records.len(), dir.display());
    Ok(())
}

fn run(args: &Common, require_grid: bool) -> Result<bool> {
    let exp = args.load()?;
    if require_grid && exp.axes.is_empty() {
        bail!("{} has no [sweep] grid", args.config.display());
    }
    let records = run_sweep(&exp, Execution::default(), args.threads)?;
    write_results(&exp, &records)?;
    let failed: Vec<&ResultRecord> = records.iter().filter(|r| !r.ok()).collect();
    for r in &failed {
        eprintln!("point {} failed: {}", r.index, r.failure.as_deref().unwrap_or(""));
    }
    println!("{} points, {} failed", records.len(), failed.len());
    Ok(failed.is_empty())
}

fn check(args: &Common) -> Result<bool> {
    let exp = args.load()?;
    let report = validate(&exp)?;
    println!("{}: {} points", args.config.display(), report.points);
    for note in &report.notes {
        println!("  {note}");
    }
    Ok(true)
}

fn capacity(args: &Common) -> Result<bool> {
    let exp = args.load()?;
    let mc = with_threads(args.threads, || capacity_report(&exp, Execution::default()))?;
    let dir = output_dir(&exp);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_capacity_csv(&mc, create(&dir, "mc.csv")?)?;
    println!(
        "MC linear {:.4}  quadratic {:.4}  cross {:.4}  total {:.4}",
        mc.linear_total, mc.quadratic_total, mc.cross_total, mc.total
    );
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::Validate(a) => check(a),
        Command::Mc(a) => capacity(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
