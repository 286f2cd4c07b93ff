//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Every key must be known and may appear once. Keys left out take the
//! per-experiment defaults of [`ExperimentConfig::defaults`].
//!
//! | key | value |
//! |-----|-------|
//! | `experiment` | one of the [`ExperimentKind`] names |
//! | `d` | dimension, at least 1 |
//! | `L` | box radius, or `auto` |
//! | `T` | time horizon (for `minpath-check` with `L = auto`, the expected number of rings per lattice) |
//! | `t_grid` | comma-separated observation times |
//! | `u_grid` | comma-separated positive levels |
//! | `k` | slope bound used when `model = krsos` |
//! | `model` | `rsos`, `krsos`, `krsos(k)` or `bd` |
//! | `replications` | at least 1 |
//! | `master_seed` | unsigned 64-bit integer |
//! | `alpha` | test level in (0, 1) |
//! | `output_dir` | directory for reports and the manifest |
//! | `rate` | clock rate, default 1 |
//! | `boundary` | `free` or `periodic` |
//! | `init` | `zero`, `well` or `all` (zero, well and random explicit surfaces) |
//! | `explicit_inits` | number of random explicit surfaces under `init = all` |
//! | `width_convention` | `exposed` or `literal` |
//! | `samples` | pooled sample size for distributional checks |
//!
//! `variance` runs to the largest entry of `t_grid`; `growth` reads `M_t / t`
//! at the first entry of `t_grid` (or at `T` if empty).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dual::WidthConvention;
use crate::error::{Error, Result};
use crate::lattice::Boundary;
use crate::surface::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MinpathCheck,
    DualityCheck,
    PyramidCheck,
    Variance,
    Growth,
    InterfaceStats,
    CoupledRestart,
    Perturbation,
    BerryEsseen,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::MinpathCheck,
        ExperimentKind::DualityCheck,
        ExperimentKind::PyramidCheck,
        ExperimentKind::Variance,
        ExperimentKind::Growth,
        ExperimentKind::InterfaceStats,
        ExperimentKind::CoupledRestart,
        ExperimentKind::Perturbation,
        ExperimentKind::BerryEsseen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MinpathCheck => "minpath-check",
            ExperimentKind::DualityCheck => "duality-check",
            ExperimentKind::PyramidCheck => "pyramid-check",
            ExperimentKind::Variance => "variance",
            ExperimentKind::Growth => "growth",
            ExperimentKind::InterfaceStats => "interface-stats",
            ExperimentKind::CoupledRestart => "coupled-restart",
            ExperimentKind::Perturbation => "perturbation",
            ExperimentKind::BerryEsseen => "berry-esseen",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusSpec {
    /// Chosen per replication so that the exactness certificate holds.
    Auto,
    Fixed(i32),
}

impl fmt::Display for RadiusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusSpec::Auto => f.write_str("auto"),
            RadiusSpec::Fixed(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitChoice {
    Zero,
    Well,
    /// Zero, well and `explicit_inits` random admissible surfaces.
    All,
}

impl fmt::Display for InitChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitChoice::Zero => "zero",
            InitChoice::Well => "well",
            InitChoice::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    pub radius: RadiusSpec,
    pub horizon: f64,
    pub t_grid: Vec<f64>,
    pub u_grid: Vec<u64>,
    pub model: Model,
    pub replications: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub rate: f64,
    pub boundary: Boundary,
    pub init: InitChoice,
    pub explicit_inits: usize,
    pub width_convention: WidthConvention,
    pub samples: usize,
}

const KEYS: [&str; 18] = [
    "experiment",
    "d",
    "L",
    "T",
    "t_grid",
    "u_grid",
    "k",
    "model",
    "replications",
    "master_seed",
    "alpha",
    "output_dir",
    "rate",
    "boundary",
    "init",
    "explicit_inits",
    "width_convention",
    "samples",
];

fn field_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(field: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e: T::Err| field_err(field, format!("`{v}`: {e}")))
}

fn parse_list<T: FromStr>(field: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(field, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            d: 1,
            radius: RadiusSpec::Auto,
            horizon: 10.0,
            t_grid: Vec::new(),
            u_grid: Vec::new(),
            model: Model::Rsos,
            replications: 100,
            master_seed: 1,
            alpha: 0.01,
            output_dir: PathBuf::from("out"),
            rate: 1.0,
            boundary: Boundary::Free,
            init: InitChoice::Zero,
            explicit_inits: 20,
            width_convention: WidthConvention::Exposed,
            samples: 10_000,
        };
        match kind {
            ExperimentKind::MinpathCheck => {
                c.horizon = 8.0;
                c.init = InitChoice::All;
            }
            ExperimentKind::DualityCheck => c.horizon = 3.0,
            ExperimentKind::PyramidCheck => {
                c.radius = RadiusSpec::Fixed(2);
                c.horizon = 2.0;
            }
            ExperimentKind::Variance => {
                c.t_grid = vec![5.0, 10.0, 20.0, 40.0];
                c.replications = 1000;
            }
            ExperimentKind::Growth => {
                c.horizon = 180.0;
                c.t_grid = vec![100.0];
                c.u_grid = vec![20, 30, 40, 50, 60];
            }
            ExperimentKind::InterfaceStats => {
                c.horizon = 50.0;
                c.replications = 1000;
            }
            ExperimentKind::CoupledRestart => {
                c.horizon = 60.0;
                c.u_grid = vec![5, 5];
                c.replications = 1000;
            }
            ExperimentKind::Perturbation => c.replications = 1000,
            ExperimentKind::BerryEsseen => {
                c.horizon = 100.0;
                c.u_grid = vec![10, 15, 20, 25, 30, 35, 40];
                c.replications = 1000;
            }
        }
        c
    }

    /// Parses a config file. `fallback` names the experiment when the file
    /// has no `experiment` key; when both are present they must agree.
    pub fn parse(text: &str, fallback: Option<ExperimentKind>) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(field_err(k, "unknown key"));
            }
            if pairs.insert(k.to_string(), v.to_string()).is_some() {
                return Err(field_err(k, "given more than once"));
            }
        }
        let kind = match (pairs.get("experiment"), fallback) {
            (Some(v), Some(f)) => {
                let k: ExperimentKind = parse_value("experiment", v)?;
                if k != f {
                    return Err(field_err("experiment", format!("file says `{k}`, command says `{f}`")));
                }
                k
            }
            (Some(v), None) => parse_value("experiment", v)?,
            (None, Some(f)) => f,
            (None, None) => return Err(field_err("experiment", "missing")),
        };
        let mut c = ExperimentConfig::defaults(kind);
        let mut k_override = None;
        for (key, v) in &pairs {
            let key = key.as_str();
            match key {
                "experiment" => {}
                "d" => c.d = parse_value(key, v)?,
                "L" => {
                    c.radius = if v == "auto" {
                        RadiusSpec::Auto
                    } else {
                        RadiusSpec::Fixed(parse_value(key, v)?)
                    }
                }
                "T" => c.horizon = parse_value(key, v)?,
                "t_grid" => c.t_grid = parse_list(key, v)?,
                "u_grid" => c.u_grid = parse_list(key, v)?,
                "k" => k_override = Some(parse_value::<u32>(key, v)?),
                "model" => {
                    c.model = if v == "krsos" {
                        Model::KRsos(1)
                    } else {
                        parse_value(key, v)?
                    }
                }
                "replications" => c.replications = parse_value(key, v)?,
                "master_seed" => c.master_seed = parse_value(key, v)?,
                "alpha" => c.alpha = parse_value(key, v)?,
                "output_dir" => c.output_dir = PathBuf::from(v),
                "rate" => c.rate = parse_value(key, v)?,
                "boundary" => c.boundary = parse_value(key, v)?,
                "init" => {
                    c.init = match v.as_str() {
                        "zero" => InitChoice::Zero,
                        "well" => InitChoice::Well,
                        "all" => InitChoice::All,
                        _ => return Err(field_err(key, format!("`{v}` is not zero, well or all"))),
                    }
                }
                "explicit_inits" => c.explicit_inits = parse_value(key, v)?,
                "width_convention" => c.width_convention = parse_value(key, v)?,
                "samples" => c.samples = parse_value(key, v)?,
                _ => unreachable!("key list checked above"),
            }
        }
        if let Some(k) = k_override {
            match c.model {
                Model::KRsos(_) => c.model = Model::KRsos(k),
                _ => return Err(field_err("k", "only meaningful with model = krsos")),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path, fallback: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, fallback)
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind as K;
        if self.d == 0 {
            return Err(field_err("d", "must be at least 1"));
        }
        if let RadiusSpec::Fixed(l) = self.radius {
            if l < 1 {
                return Err(field_err("L", "must be at least 1"));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(field_err("T", "must be positive and finite"));
        }
        if self.replications == 0 {
            return Err(field_err("replications", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(field_err("alpha", "must lie in (0, 1)"));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(field_err("rate", "must be positive and finite"));
        }
        if let Model::KRsos(0) = self.model {
            return Err(field_err("k", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(field_err("samples", "must be at least 1"));
        }
        if matches!(self.experiment, K::Variance) {
            if self.replications < 2 {
                return Err(field_err("replications", "a variance needs at least 2"));
            }
            if self.t_grid.is_empty() {
                return Err(field_err("t_grid", "must be nonempty"));
            }
            if self.t_grid.iter().any(|&t| !(t.is_finite() && t > 1.0)) {
                return Err(field_err("t_grid", "times must exceed 1 (var/log t is reported)"));
            }
        }
        if matches!(self.experiment, K::Growth | K::CoupledRestart | K::BerryEsseen) {
            if self.u_grid.is_empty() {
                return Err(field_err("u_grid", "must be nonempty"));
            }
            if self.u_grid.contains(&0) {
                return Err(field_err("u_grid", "levels must be positive"));
            }
        }
        if self.experiment == K::CoupledRestart && self.u_grid.len() > 2 {
            return Err(field_err("u_grid", "coupled-restart takes `u` or `u,v`"));
        }
        if self.experiment == K::Growth && self.t_grid.iter().any(|&t| !(t > 0.0 && t <= self.horizon)) {
            return Err(field_err("t_grid", "growth reads M_t/t at times in (0, T]"));
        }
        if self.experiment == K::Growth && self.u_grid.len() < 2 {
            return Err(field_err("u_grid", "growth needs at least two levels"));
        }
        if self.experiment == K::BerryEsseen && self.u_grid.len() < 3 {
            return Err(field_err("u_grid", "berry-esseen needs at least three levels"));
        }
        if matches!(self.experiment, K::InterfaceStats | K::BerryEsseen) && self.d != 1 {
            return Err(field_err("d", "this experiment is one-dimensional"));
        }
        if !matches!(self.experiment, K::MinpathCheck) && self.model != Model::Rsos {
            return Err(field_err("model", "only minpath-check compares other models"));
        }
        Ok(())
    }

    /// Effective configuration, one entry per key.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let k = match self.model {
            Model::KRsos(k) => k.to_string(),
            _ => String::new(),
        };
        let conv = match self.width_convention {
            WidthConvention::Exposed => "exposed",
            WidthConvention::Literal => "literal",
        };
        let boundary = match self.boundary {
            Boundary::Free => "free",
            Boundary::Periodic => "periodic",
        };
        [
            ("experiment", self.experiment.to_string()),
            ("d", self.d.to_string()),
            ("L", self.radius.to_string()),
            ("T", self.horizon.to_string()),
            ("t_grid", join(&self.t_grid)),
            ("u_grid", join(&self.u_grid)),
            ("k", k),
            ("model", self.model.to_string()),
            ("replications", self.replications.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("alpha", self.alpha.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("rate", self.rate.to_string()),
            ("boundary", boundary.to_string()),
            ("init", self.init.to_string()),
            ("explicit_inits", self.explicit_inits.to_string()),
            ("width_convention", conv.to_string()),
            ("samples", self.samples.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Renders the effective configuration in the file format.
    pub fn to_text(&self) -> String {
        self.echo()
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
