//! Reproducible Monte Carlo experiments.
//!
//! [`execute`] runs an [`ExperimentConfig`] in memory; [`run_experiment`]
//! also writes every report table as CSV and JSONL plus a JSON
//! [`RunManifest`] into the configured output directory. Replication `r` is
//! driven only by `child_seed(master_seed, r)` and results are gathered in
//! replication order, so reports do not depend on the number of workers.

mod config;
mod report;
mod runs;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, ExperimentKind, InitChoice, RadiusSpec};
pub use report::{emit_report, Cell, Check, Format, Report, Table};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactCounts {
    pub exact: usize,
    pub inexact: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub master_seed: u64,
    /// `child_seed(master_seed, r)` for every replication `r`.
    pub seeds: Vec<u64>,
    pub exact: ExactCounts,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputDigest>,
}

/// Runs the experiment without touching the filesystem. `jobs = 0` uses one
/// worker per available core.
pub fn execute(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    config.validate()?;
    use ExperimentKind as K;
    let run = match config.experiment {
        K::MinpathCheck => runs::minpath_check,
        K::DualityCheck => runs::duality_check,
        K::PyramidCheck => runs::pyramid_check,
        K::Variance => runs::variance,
        K::Growth => runs::growth,
        K::InterfaceStats => runs::interface_stats,
        K::CoupledRestart => runs::coupled_restart,
        K::Perturbation => runs::perturbation,
        K::BerryEsseen => runs::berry_esseen,
    };
    run(config, jobs).map_err(|e| match e {
        e @ (Error::Config { .. } | Error::Io { .. }) => e,
        e => Error::InvalidArgument(format!("{}: {e}", config.experiment)),
    })
}

/// Exactness flags of the per-replication table: the first table with an
/// `exact` column and a `replication` column, counted once per replication.
pub fn exact_counts(report: &Report) -> ExactCounts {
    let mut counts = ExactCounts { exact: 0, inexact: 0 };
    let Some(t) = report
        .tables
        .iter()
        .find(|t| t.column("exact").is_some() && t.column("replication").is_some())
    else {
        return counts;
    };
    let (rc, ec) = (t.column("replication").unwrap(), t.column("exact").unwrap());
    let mut seen: BTreeMap<i64, bool> = BTreeMap::new();
    for row in &t.rows {
        if let (Cell::Int(r), Cell::Bool(e)) = (&row[rc], &row[ec]) {
            let v = seen.entry(*r).or_insert(true);
            *v &= *e;
        }
    }
    for e in seen.values() {
        if *e {
            counts.exact += 1;
        } else {
            counts.inexact += 1;
        }
    }
    counts
}

fn digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Runs the experiment and writes `<table>.csv`, `<table>.jsonl` for every
/// report table and `<experiment>-manifest.json` into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<(RunManifest, Report)> {
    let started = Instant::now();
    let report = execute(config, jobs)?;
    let dir = &config.output_dir;
    let mut outputs = Vec::new();
    for table in &report.tables {
        for format in [Format::Csv, Format::Jsonl] {
            let path = emit_report(table, format, dir)?;
            outputs.push(OutputDigest {
                sha256: digest(&path)?,
                path,
            });
        }
    }
    let manifest = RunManifest {
        experiment: config.experiment,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.echo(),
        master_seed: config.master_seed,
        seeds: (0..config.replications).map(|r| runs::rep_seed(config, r)).collect(),
        exact: exact_counts(&report),
        checks: report.checks.clone(),
        notes: report.notes.clone(),
        passed: report.passed(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    let path = dir.join(format!("{}-manifest.json", config.experiment));
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((manifest, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Model;

    fn tiny(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn single_replication_minpath_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(ExperimentKind::MinpathCheck, dir.path());
        c.replications = 1;
        c.init = InitChoice::Zero;
        c.radius = RadiusSpec::Fixed(1);
        c.horizon = 1.0;
        let (m, r) = run_experiment(&c, 1).unwrap();
        let t = r.table("minpath-check").unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.values("agree")[0].as_bool(), Some(true));
        assert!(m.passed);
        assert_eq!(m.seeds.len(), 1);
        assert!(dir.path().join("minpath-check.csv").exists());
        assert!(dir.path().join("minpath-check-manifest.json").exists());
    }

    #[test]
    fn reports_do_not_depend_on_workers() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut c = tiny(ExperimentKind::Variance, a.path());
        c.replications = 40;
        c.t_grid = vec![2.0, 4.0];
        let (ma, _) = run_experiment(&c, 1).unwrap();
        c.output_dir = b.path().to_path_buf();
        let (mb, _) = run_experiment(&c, 3).unwrap();
        let da: Vec<&str> = ma.outputs.iter().map(|o| o.sha256.as_str()).collect();
        let db: Vec<&str> = mb.outputs.iter().map(|o| o.sha256.as_str()).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn undersized_box_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(ExperimentKind::Variance, dir.path());
        c.replications = 20;
        c.t_grid = vec![3.0, 8.0];
        c.radius = RadiusSpec::Fixed(1);
        let r = execute(&c, 1).unwrap();
        let counts = exact_counts(&r);
        assert!(counts.inexact > 0, "{counts:?}");
        let t = r.table("variance-replications").unwrap();
        assert!(t.values("exact").iter().any(|e| e.as_bool() == Some(false)));
        c.radius = RadiusSpec::Auto;
        assert_eq!(exact_counts(&execute(&c, 1).unwrap()).inexact, 0);
    }

    #[test]
    fn model_comparison_runs_for_bd_and_krsos() {
        let dir = tempfile::tempdir().unwrap();
        for model in [Model::Bd, Model::KRsos(2)] {
            let mut c = tiny(ExperimentKind::MinpathCheck, dir.path());
            c.replications = 6;
            c.explicit_inits = 2;
            c.model = model;
            assert!(execute(&c, 1).unwrap().passed());
        }
    }
}
