use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rsos_core::dual::{default_box, run_dual};
use rsos_core::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use rsos_core::{EventSet, Result};

#[derive(Parser)]
#[command(name = "rsos", version, about = "RSOS surface growth experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `replications`.
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dynamics, path DP and path enumeration give the same heights.
    MinpathCheck(Common),
    /// Heights equal the dual minimum on the reversed rings.
    DualityCheck(Common),
    /// Pyramid heights, pushdown and reversal on small lattices.
    PyramidCheck(Common),
    /// Height variance, mean growth and ring-count dominance over a time grid.
    Variance(Common),
    /// Growth rate from dual hitting times.
    Growth(Common),
    /// Interface edge gaps, width and arrival counts in one dimension.
    InterfaceStats(Common),
    /// Hitting times after a restart against fresh runs.
    CoupledRestart(Common),
    /// Effect of one inserted ring on the heights.
    Perturbation(Common),
    /// Hitting times rebuilt from interface widths.
    BerryEsseen(Common),
    /// One dual run from the well; writes the trajectory and hitting table.
    DualRun {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 50.0)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn experiment(kind: ExperimentKind, common: Common) -> Result<bool> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_file(path, Some(kind))?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(out) = common.out {
        config.output_dir = out;
    }
    if let Some(n) = common.replications {
        config.replications = n;
    }
    config.validate()?;
    let (manifest, _) = run_experiment(&config, common.jobs)?;
    for c in &manifest.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for n in &manifest.notes {
        println!("note: {n}");
    }
    println!(
        "{} replications ({} certified, {} not) in {:.1} s; reports in {}",
        manifest.seeds.len(),
        manifest.exact.exact,
        manifest.exact.inexact,
        manifest.wall_clock_seconds,
        config.output_dir.display()
    );
    Ok(manifest.passed)
}

fn dual_run(d: usize, t: f64, seed: u64, out: PathBuf) -> Result<bool> {
    let bx = default_box(d, t)?;
    let set = EventSet::generate(&bx, 1.0, seed)?;
    let traj = run_dual(&set, t)?;
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let path = out.join("dual-trajectory.csv");
    traj.write_csv(BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?))
        .map_err(|e| io_err(&path, e))?;
    let path = out.join("dual-hitting.csv");
    traj.write_hitting_csv(BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?))
        .map_err(|e| io_err(&path, e))?;
    println!(
        "M_t = {} at t = {t} on radius {} ({})",
        traj.final_min(),
        bx.radius,
        if traj.exact { "certified" } else { "face touched" }
    );
    Ok(traj.exact)
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> rsos_core::Error {
    rsos_core::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn main() -> ExitCode {
    use ExperimentKind as K;
    let result = match Cli::parse().command {
        Command::MinpathCheck(c) => experiment(K::MinpathCheck, c),
        Command::DualityCheck(c) => experiment(K::DualityCheck, c),
        Command::PyramidCheck(c) => experiment(K::PyramidCheck, c),
        Command::Variance(c) => experiment(K::Variance, c),
        Command::Growth(c) => experiment(K::Growth, c),
        Command::InterfaceStats(c) => experiment(K::InterfaceStats, c),
        Command::CoupledRestart(c) => experiment(K::CoupledRestart, c),
        Command::Perturbation(c) => experiment(K::Perturbation, c),
        Command::BerryEsseen(c) => experiment(K::BerryEsseen, c),
        Command::DualRun { d, t, seed, out } => dual_run(d, t, seed, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
