use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npplab::error::exit;
use npplab::experiment::{self, RunOptions};
use npplab::instances::sample_instance;
use npplab::io::{read_instance_file, write_instances};
use npplab::rng::{self, purpose};
use npplab::solvers::Solver;
use npplab::{Caps, Dist, NppError, Result};
use serde_json::json;

/// Exact number-partitioning experiments.
#[derive(Parser)]
#[command(name = "npplab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample instances into a JSON Lines file.
    Gen(GenArgs),
    /// Solve every instance of a file and print one JSON result per line.
    Solve(SolveArgs),
    /// Run an experiment config, writing CSVs, summary.json and manifest.json.
    Run(RunArgs),
    /// Recompute summary.json of a finished run from its CSVs.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// gaussian or uniform_pm1.
    #[arg(long, default_value = "gaussian")]
    dist: String,
    #[arg(long, default_value_t = 64)]
    scale_bits: u32,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (JSON Lines).
    instances: PathBuf,
    /// bf, mitm, greedy, kk, hybrid:<j> or improve:<r>.
    #[arg(long, default_value = "bf")]
    solver: String,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON), or a manifest.json to replay.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Record per-trial wall times in obstruction CSVs.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Run directory holding manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn gen(a: &GenArgs) -> Result<()> {
    let dist = Dist::parse(&a.dist)?;
    let instances = (0..a.count)
        .map(|i| sample_instance(a.n, dist, a.scale_bits, rng::derive(a.seed, &[purpose::BATCH, i])))
        .collect::<Result<Vec<_>>>()?;
    match &a.out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| NppError::Io(format!("{}: {e}", path.display())))?;
            write_instances(io::BufWriter::new(f), &instances)
                .map_err(|e| NppError::Io(format!("{}: {e}", path.display())))
        }
        None => write_instances(io::stdout().lock(), &instances),
    }
}

fn solve(a: &SolveArgs, caps: &Caps) -> Result<()> {
    let solver: Solver = a.solver.parse()?;
    let instances = read_instance_file(&a.instances)?;
    let mut out = io::stdout().lock();
    for g in &instances {
        let r = solver.solve(g, caps)?;
        let energy = if r.energy.is_finite() { json!(r.energy) } else { json!("inf") };
        let line = json!({
            "solver": solver.to_string(),
            "n": g.n(),
            "x": r.x.to_string(),
            "disc_q": npplab::wide::to_hex(r.disc_q),
            "energy": energy,
            "work": r.work,
            "elapsed_ms": r.elapsed.as_secs_f64() * 1e3,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// A manifest is accepted in place of a config and replays its resolved form.
fn load_config(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| NppError::Parse(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| NppError::Parse(format!("{}: {e}", path.display())))?;
    Ok(match v.get("resolved") {
        Some(r) if v.get("artifact_version").is_some() => r.clone(),
        _ => v,
    })
}

fn run(a: &RunArgs, caps: Caps) -> Result<()> {
    let config = load_config(&a.config)?;
    if a.workers == Some(0) {
        return Err(NppError::Schema {
            field: "--workers".into(),
            reason: "must be at least 1".into(),
        });
    }
    let opts = RunOptions {
        out_dir: a.out.clone(),
        seed: a.seed,
        workers: a.workers,
        timings: a.timings,
        caps,
    };
    let report = experiment::run(&config, &opts)?;
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn summarize(a: &SummarizeArgs) -> Result<()> {
    let summary = experiment::summarize(&a.out)?;
    let path = a.out.join(experiment::SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("json values serialize") + "\n";
    fs::write(&path, text).map_err(|e| NppError::Io(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Caps::from_env().and_then(|caps| match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a, &caps),
        Command::Run(a) => run(a, caps),
        Command::Summarize(a) => summarize(a),
    });
    match result {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("npplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
