use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, InitChoice, RadiusSpec};
use super::report::{Cell, Check, Report, Table};
use crate::dual::{self, WidthConvention};
use crate::error::{Error, Result};
use crate::lattice::{EventSet, LatticeBox, Site, SpaceTimePoint};
use crate::minpath::{self, DEFAULT_PATH_CAP};
use crate::pyramid::{self, HeightMethod, PyramidKind, RadiusLaw, BRUTE_FORCE_CAP};
use crate::rng::{child_seed, stream};
use crate::stats;
use crate::surface::{evolve, evolve_with_snapshots, InitialCondition, Model, Surface};

const SIDE_BASE: u64 = 1 << 48;
const MAX_ATTEMPTS: u64 = 100_000;
const MAX_GROWTH: usize = 8;

pub(crate) fn rep_seed(c: &ExperimentConfig, r: usize) -> u64 {
    child_seed(c.master_seed, r as u64)
}

/// Seed of replication `r` in an auxiliary ensemble independent of the main one.
fn side_seed(c: &ExperimentConfig, tag: u64, r: usize) -> u64 {
    child_seed(child_seed(c.master_seed, SIDE_BASE + tag), r as u64)
}

fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    if attempt == 0 {
        seed
    } else {
        child_seed(seed, attempt)
    }
}

pub(crate) fn par_reps<T, F>(jobs: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Draws rings until the set has at most `cap` of them.
fn small_set(bx: &LatticeBox, rate: f64, seed: u64, cap: usize) -> Result<(EventSet, u64)> {
    for a in 0..MAX_ATTEMPTS {
        let s = attempt_seed(seed, a);
        let set = EventSet::generate(bx, rate, s)?;
        if set.len() <= cap {
            return Ok((set, s));
        }
    }
    Err(Error::InvalidArgument(format!(
        "no lattice with at most {cap} rings after {MAX_ATTEMPTS} draws; lower T or L"
    )))
}

/// Random admissible surface built from one random walk per axis.
fn random_surface<R: Rng>(bx: &LatticeBox, rng: &mut R) -> InitialCondition {
    let side = bx.side();
    let walks: Vec<Vec<i64>> = (0..bx.dim)
        .map(|_| {
            let mut w = vec![0i64; side];
            for j in 1..side {
                w[j] = w[j - 1] + rng.random_range(-1..=1);
            }
            w
        })
        .collect();
    let raw: Vec<i64> = (0..bx.num_sites())
        .map(|i| {
            let x = bx.site_of(i);
            x.iter()
                .enumerate()
                .map(|(a, &c)| walks[a][(c + bx.radius) as usize])
                .sum()
        })
        .collect();
    let lo = raw.iter().copied().min().unwrap_or(0);
    let lift = rng.random_range(0..=2);
    InitialCondition::Explicit(raw.into_iter().map(|h| h - lo + lift).collect())
}

/// Best model weight of the enumerated paths from `(t, x)`, per end site.
/// `None` where no path ends.
fn enumerated_ends(set: &EventSet, t: f64, x: &Site, model: Model) -> Result<Vec<Option<i64>>> {
    let bx = set.bx();
    let mut best: Vec<Option<i64>> = vec![None; bx.num_sites()];
    for p in minpath::enumerate_paths(set, t, x, 0.0)? {
        let end = bx.index_of(&p.end_site).expect("paths stay in the box");
        let w = match model {
            Model::KRsos(k) => p.weight_k(k as u64),
            _ => p.weight,
        } as i64;
        best[end] = Some(match (best[end], model) {
            (None, _) => w,
            (Some(b), Model::Bd) => b.max(w),
            (Some(b), _) => b.min(w),
        });
    }
    Ok(best)
}

fn enumerated_value(ends: &[Option<i64>], h: &[i64], model: Model) -> i64 {
    let vals = ends.iter().zip(h).filter_map(|(w, &h)| w.map(|w| w + h));
    match model {
        Model::Bd => vals.max(),
        _ => vals.min(),
    }
    .expect("at least one path")
}

fn exact_count(rows: impl IntoIterator<Item = bool>) -> (usize, usize) {
    rows.into_iter()
        .fold((0, 0), |(e, n), x| if x { (e + 1, n) } else { (e, n + 1) })
}

fn dkw_check(name: &str, a: &[f64], b: &[f64], alpha: f64, notes: &mut Vec<String>) -> Result<Option<Check>> {
    if a.len() < stats::KS_MIN_SAMPLE || b.len() < stats::KS_MIN_SAMPLE {
        notes.push(format!(
            "{name}: skipped, samples of {} and {} are below {}",
            a.len(),
            b.len(),
            stats::KS_MIN_SAMPLE
        ));
        return Ok(None);
    }
    let ks = stats::ks_two_sample(a, b, alpha)?;
    Ok(Some(Check::new(
        name,
        ks.within_band,
        format!(
            "D = {:.5}, band = {:.5}, n = ({}, {}), asymptotic p = {:.4}",
            ks.d,
            ks.dkw_epsilon,
            a.len(),
            b.len(),
            ks.p_asymptotic
        ),
    )))
}

/// Box radius for a growth run from zero to `t` at the origin: a first guess
/// from the growth speed, enlarged until the certificate holds.
fn certified_run<T>(
    c: &ExperimentConfig,
    seed: u64,
    t: f64,
    guess: i32,
    run: impl Fn(&EventSet) -> Result<(i64, T)>,
) -> Result<(i32, bool, EventSet, T)> {
    let mut l = match c.radius {
        RadiusSpec::Fixed(l) => l,
        RadiusSpec::Auto => guess,
    };
    let mut tries = 0;
    loop {
        let bx = LatticeBox::new(c.d, l, t, c.boundary)?;
        let set = EventSet::generate(&bx, c.rate, seed)?;
        let (value, out) = run(&set)?;
        let ok = minpath::certificate(&bx, bx.origin_index(), value, 0, Model::Rsos);
        if ok || c.radius != RadiusSpec::Auto || tries == MAX_GROWTH {
            return Ok((l, ok, set, out));
        }
        l = (value as i32).max(l + 1) + 1;
        tries += 1;
    }
}

fn growth_guess(d: usize, t: f64) -> i32 {
    let speed = if d == 1 { 0.7 } else { 0.8 };
    (speed * t).ceil() as i32 + 2
}

fn dual_radius(c: &ExperimentConfig, t: f64) -> i32 {
    match c.radius {
        RadiusSpec::Fixed(l) => l,
        RadiusSpec::Auto => dual::default_radius(t),
    }
}

/// Dual run from the well on a box of the configured (or default) radius,
/// doubling the radius while a face was touched.
fn certified_dual(c: &ExperimentConfig, seed: u64, t: f64) -> Result<(i32, EventSet, dual::DualTrajectory)> {
    let mut l = dual_radius(c, t);
    let mut tries = 0;
    loop {
        let bx = LatticeBox::new(c.d, l, t, c.boundary)?;
        let set = EventSet::generate(&bx, c.rate, seed)?;
        let traj = dual::run_dual(&set, t)?;
        if traj.exact || c.radius != RadiusSpec::Auto || tries == MAX_GROWTH {
            return Ok((l, set, traj));
        }
        l *= 2;
        tries += 1;
    }
}

pub(crate) fn minpath_check(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    struct Row {
        seed: u64,
        l: i32,
        events: usize,
        init: String,
        evolve: i64,
        dp: i64,
        enumerated: i64,
        agree: bool,
        exact: bool,
    }
    let reps = par_reps(jobs, c.replications, |r| -> Result<Vec<Row>> {
        let (l, horizon) = match c.radius {
            RadiusSpec::Fixed(l) => (l, c.horizon),
            RadiusSpec::Auto => {
                let l = 1 + (r % 3) as i32;
                let sites = (2 * l + 1).pow(c.d as u32) as f64;
                (l, c.horizon / (c.rate * sites))
            }
        };
        let bx = LatticeBox::new(c.d, l, horizon, c.boundary)?;
        let (set, seed) = small_set(&bx, c.rate, rep_seed(c, r), DEFAULT_PATH_CAP)?;
        let mut inits = Vec::new();
        if matches!(c.init, InitChoice::Zero | InitChoice::All) {
            inits.push(("zero".to_string(), InitialCondition::Zero));
        }
        if matches!(c.init, InitChoice::Well | InitChoice::All) {
            inits.push(("well".to_string(), InitialCondition::Well));
        }
        if c.init == InitChoice::All {
            let mut rng = stream(seed, 3);
            for j in 0..c.explicit_inits {
                inits.push((format!("explicit{j}"), random_surface(&bx, &mut rng)));
            }
        }
        let origin = bx.origin_index();
        let t = horizon;
        let ends = (0..bx.num_sites())
            .map(|i| enumerated_ends(&set, t, &bx.site_of(i), c.model))
            .collect::<Result<Vec<_>>>()?;
        inits
            .into_iter()
            .map(|(name, init)| {
                let h = init.heights(&bx)?;
                let ev = evolve(&set, &init, c.model, t)?.field.heights;
                let dp = minpath::weight_field(&set, t, &init, 0.0, c.model)?;
                let mut agree = ev == dp;
                let mut en_origin = 0;
                for i in 0..bx.num_sites() {
                    let v = enumerated_value(&ends[i], &h, c.model);
                    agree &= v == dp[i];
                    if i == origin {
                        en_origin = v;
                    }
                }
                Ok(Row {
                    seed,
                    l,
                    events: set.len(),
                    init: name,
                    evolve: ev[origin],
                    dp: dp[origin],
                    enumerated: en_origin,
                    agree,
                    exact: minpath::certificate(&bx, origin, dp[origin], init.floor(), c.model),
                })
            })
            .collect()
    })?;
    let mut table = Table::new(
        "minpath-check",
        &[
            "replication", "seed", "L", "events", "init", "evolve_height", "dp_height", "enum_height", "agree",
            "exact",
        ],
    );
    let mut all = true;
    for (r, rows) in reps.into_iter().enumerate() {
        for row in rows {
            all &= row.agree;
            table.push(vec![
                r.into(),
                row.seed.into(),
                (row.l as i64).into(),
                row.events.into(),
                row.init.into(),
                row.evolve.into(),
                row.dp.into(),
                row.enumerated.into(),
                row.agree.into(),
                row.exact.into(),
            ]);
        }
    }
    let n = table.rows.len();
    Ok(Report {
        checks: vec![Check::new(
            "evolve = dp = enumeration",
            all,
            format!("{n} (lattice, init) pairs, model {}, every site compared", c.model),
        )],
        tables: vec![table],
        notes: Vec::new(),
    })
}

pub(crate) fn duality_check(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let t = c.horizon;
    let reps = par_reps(jobs, c.replications, |r| {
        let seed = rep_seed(c, r);
        let l = dual_radius(c, t);
        let bx = LatticeBox::new(c.d, l, t, c.boundary)?;
        let set = EventSet::generate(&bx, c.rate, seed)?;
        let rsos = evolve(&set, &InitialCondition::Zero, Model::Rsos, t)?.field.at_origin();
        let traj = dual::run_dual(&set.reverse(), t)?;
        let exact = traj.exact && minpath::certificate(&bx, bx.origin_index(), rsos, 0, Model::Rsos);
        let fresh = if c.replications >= stats::KS_MIN_SAMPLE {
            let bx = LatticeBox::new(c.d, l, t, c.boundary)?;
            let other = EventSet::generate(&bx, c.rate, side_seed(c, 1, r))?;
            let tr = dual::run_dual(&other, t)?;
            Some((tr.final_min(), tr.exact))
        } else {
            None
        };
        Ok((seed, l, rsos, traj.final_min(), exact, fresh))
    })?;
    let mut table = Table::new(
        "duality-check",
        &["replication", "seed", "L", "rsos_height", "dual_min", "agree", "exact"],
    );
    let mut agree_all = true;
    for (r, &(seed, l, a, b, exact, _)) in reps.iter().enumerate() {
        agree_all &= a == b;
        table.push(vec![
            r.into(),
            seed.into(),
            (l as i64).into(),
            a.into(),
            b.into(),
            (a == b).into(),
            exact.into(),
        ]);
    }
    let (exact, inexact) = exact_count(reps.iter().map(|r| r.4));
    let mut checks = vec![Check::new(
        "pathwise duality",
        agree_all,
        format!("{} lattices, {exact} certified, {inexact} not", reps.len()),
    )];
    let mut notes = Vec::new();
    if reps.iter().any(|r| r.5.is_some()) {
        let a: Vec<f64> = reps.iter().filter(|r| r.4).map(|r| r.2 as f64).collect();
        let b: Vec<f64> = reps
            .iter()
            .filter_map(|r| r.5.filter(|f| f.1).map(|f| f.0 as f64))
            .collect();
        checks.extend(dkw_check("independent ensembles DKW", &a, &b, c.alpha, &mut notes)?);
    }
    Ok(Report {
        tables: vec![table],
        checks,
        notes,
    })
}

pub(crate) fn pyramid_check(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let t = c.horizon;
    let l = match c.radius {
        RadiusSpec::Fixed(l) => l,
        RadiusSpec::Auto => 2,
    };
    let law = RadiusLaw::FoundationConsistent;
    let reps = par_reps(jobs, c.replications, |r| -> Result<Vec<Cell>> {
        let bx = LatticeBox::new(c.d, l, t, c.boundary)?;
        let (set, seed) = small_set(&bx, c.rate, rep_seed(c, r), BRUTE_FORCE_CAP)?;
        let rev = set.reverse();
        let mut heights_agree = true;
        let mut dual_agree = true;
        for i in 0..bx.num_sites() {
            let x = bx.site_of(i);
            let a = pyramid::max_pyramid_height(&set, &x, t, HeightMethod::ViaProcess)?;
            let b = pyramid::max_pyramid_height(&set, &x, t, HeightMethod::BruteForce)?;
            let d = pyramid::max_dual_pyramid_height(&rev, &x, t, HeightMethod::BruteForce)?;
            heights_agree &= a == b;
            dual_agree &= a == d;
        }
        let origin = Site::origin(c.d);
        let log = evolve(&set, &InitialCondition::Zero, Model::Rsos, t)?.log;
        let ups = pyramid::enumerate_pyramids(&set, PyramidKind::Upright, &origin, t)?;
        let mut pushdown_ok = true;
        let mut reversal_ok = true;
        for p in &ups {
            let q = pyramid::pushdown(&set, p)?;
            pushdown_ok &= q.height() == p.height() && pyramid::lies_in_log(&q, &log);
            let back = p.reverse(&bx);
            reversal_ok &= back.validate_against(&rev, law) && back.reverse(&bx) == *p;
        }
        let well = InitialCondition::well_at(&bx, &origin);
        let dlog = evolve(&set, &well, Model::Rsos, t)?.log;
        let duals = pyramid::enumerate_pyramids(&set, PyramidKind::Dual, &origin, t)?;
        for p in &duals {
            let q = pyramid::pushdown(&set, p)?;
            pushdown_ok &= q.height() == p.height() && pyramid::lies_in_log(&q, &dlog);
        }
        let max_h = ups.iter().map(|p| p.height()).max().unwrap_or(0);
        let ok = heights_agree && dual_agree && pushdown_ok && reversal_ok;
        Ok(vec![
            r.into(),
            seed.into(),
            set.len().into(),
            max_h.into(),
            ups.len().into(),
            duals.len().into(),
            heights_agree.into(),
            dual_agree.into(),
            pushdown_ok.into(),
            reversal_ok.into(),
            ok.into(),
        ])
    })?;
    let mut table = Table::new(
        "pyramid-check",
        &[
            "replication", "seed", "events", "max_height", "upright_pyramids", "dual_pyramids", "brute_force_agrees",
            "dual_agrees", "pushdown_in_log", "reversal_ok", "pass",
        ],
    );
    let col = |name: &str, row: &[Cell]| row[table.column(name).unwrap()].as_bool().unwrap();
    let mut agg = [true; 4];
    for row in &reps {
        for (k, name) in ["brute_force_agrees", "dual_agrees", "pushdown_in_log", "reversal_ok"]
            .iter()
            .enumerate()
        {
            agg[k] &= col(name, row);
        }
    }
    let n = reps.len();
    for row in reps {
        table.push(row);
    }
    let checks = vec![
        Check::new("via process = brute force", agg[0], format!("{n} lattices, every site")),
        Check::new("reversed dual brute force agrees", agg[1], format!("{n} lattices, every site")),
        Check::new("pushdown lands in the log", agg[2], format!("{n} lattices, all pyramids at the origin")),
        Check::new("reversal maps upright to dual", agg[3], format!("{n} lattices")),
    ];
    Ok(Report {
        tables: vec![table],
        checks,
        notes: vec![format!("radius law {law:?}, box radius {l}")],
    })
}

pub(crate) fn variance(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let mut grid = c.t_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let tmax = *grid.last().expect("validated nonempty");
    let reps = par_reps(jobs, c.replications, |r| {
        let seed = rep_seed(c, r);
        let (l, exact, _, (heights, dominated)) =
            certified_run(c, seed, tmax, growth_guess(c.d, tmax), |set: &EventSet| {
                let ev = evolve_with_snapshots(set, &InitialCondition::Zero, Model::Rsos, tmax, &grid)?;
                let mut dominated = true;
                for snap in &ev.snapshots {
                    for (i, &h) in snap.heights.iter().enumerate() {
                        dominated &= h <= set.count_at(i, snap.clock) as i64;
                    }
                }
                let heights: Vec<i64> = ev.snapshots.iter().map(|s| s.at_origin()).collect();
                Ok((*heights.last().unwrap(), (heights, dominated)))
            })?;
        Ok((seed, l, exact, heights, dominated))
    })?;
    let mut per_rep = Table::new(
        "variance-replications",
        &["replication", "seed", "L", "t", "height", "dominated", "exact"],
    );
    for (r, (seed, l, exact, heights, dominated)) in reps.iter().enumerate() {
        for (t, h) in grid.iter().zip(heights) {
            per_rep.push(vec![
                r.into(),
                (*seed).into(),
                (*l as i64).into(),
                (*t).into(),
                (*h).into(),
                (*dominated).into(),
                (*exact).into(),
            ]);
        }
    }
    let samples: Vec<(f64, Vec<f64>)> = grid
        .iter()
        .enumerate()
        .map(|(j, &t)| (t, reps.iter().map(|r| r.3[j] as f64).collect()))
        .collect();
    let level = 1.0 - c.alpha;
    let rows = stats::variance_summary(&samples, level, stream(c.master_seed, 0xa11).random())?;
    let (exact, _) = exact_count(reps.iter().map(|r| r.2));
    let d = c.d as f64;
    let mut summary = Table::new(
        "variance",
        &[
            "t", "n", "mean", "mean_over_t", "var", "ci_level", "ci_lo", "ci_hi", "var_over_t", "var_over_log_t",
            "p_low", "union_bound", "exact_replications",
        ],
    );
    let mut var_ok = true;
    let mut mean_ok = true;
    let mut tail_ok = true;
    let mut tail_detail = Vec::new();
    for (row, (t, x)) in rows.iter().zip(&samples) {
        let m = stats::mean(x);
        let cut = t / (10.0 * d);
        let p_low = x.iter().filter(|&&h| h <= cut).count() as f64 / x.len() as f64;
        let bound = stats::path_union_bound(*t, c.d);
        var_ok &= row.ci.hi <= *t;
        mean_ok &= m / t > 1.0 / (10.0 * d) && m / t <= 1.0;
        if cut >= 1.0 {
            // Allow three binomial standard errors of sampling noise above the bound.
            let margin = 3.0 * (bound * (1.0 - bound) / x.len() as f64).sqrt();
            tail_ok &= p_low <= bound + margin;
            tail_detail.push(format!("t={t}: {p_low:.3e} vs {bound:.3e} (+{margin:.1e})"));
        }
        summary.push(vec![
            (*t).into(),
            row.n.into(),
            m.into(),
            (m / t).into(),
            row.var.into(),
            row.ci.level.into(),
            row.ci.lo.into(),
            row.ci.hi.into(),
            row.var_over_t.into(),
            row.var_over_log_t.into(),
            p_low.into(),
            bound.into(),
            exact.into(),
        ]);
    }
    let dominated = reps.iter().all(|r| r.4);
    let mut checks = vec![
        Check::new(
            "var <= t",
            var_ok,
            rows.iter()
                .map(|r| format!("t={}: ci_hi={:.3}", r.t, r.ci.hi))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        Check::new("f(t,x) <= |U_x| pathwise", dominated, format!("{} replications, every site and time", reps.len())),
        Check::new(
            "mean f(t,0)/t in (1/(10d), 1]",
            mean_ok,
            summary
                .values("mean_over_t")
                .iter()
                .zip(&grid)
                .map(|(v, t)| format!("t={t}: {:.4}", v.as_f64().unwrap()))
                .collect::<Vec<_>>()
                .join(", "),
        ),
    ];
    if !tail_detail.is_empty() {
        checks.push(Check::new("P(f <= t/(10d)) <= union bound", tail_ok, tail_detail.join(", ")));
    }
    let mut notes = Vec::new();
    if c.d == 1 && grid.len() >= 2 {
        let nondecreasing = rows.windows(2).all(|w| w[1].var >= w[0].var);
        let floor = rows.iter().map(|r| r.var_over_log_t).fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            "var nondecreasing, var/log t bounded below",
            nondecreasing && floor > 0.0,
            format!("min var/log t = {floor:.4}"),
        ));
    }
    if exact < reps.len() {
        notes.push(format!("{} replications without an exactness certificate", reps.len() - exact));
    }
    Ok(Report {
        tables: vec![summary, per_rep],
        checks,
        notes,
    })
}

pub(crate) fn growth(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let t = c.horizon;
    let u_lo = *c.u_grid.iter().min().unwrap();
    let u_hi = *c.u_grid.iter().max().unwrap();
    let reps = par_reps(jobs, c.replications, |r| {
        let seed = rep_seed(c, r);
        let (l, _, traj) = certified_dual(c, seed, t)?;
        Ok((seed, l, traj))
    })?;
    let mut table = Table::new(
        "growth",
        &["replication", "seed", "L", "u", "T_u", "M_T", "exact"],
    );
    for (r, (seed, l, traj)) in reps.iter().enumerate() {
        for &u in &c.u_grid {
            table.push(vec![
                r.into(),
                (*seed).into(),
                (*l as i64).into(),
                u.into(),
                dual::hitting_time(traj, u).into(),
                traj.final_min().into(),
                traj.exact.into(),
            ]);
        }
    }
    let exact: Vec<&dual::DualTrajectory> = reps.iter().map(|r| &r.2).filter(|tr| tr.exact).collect();
    let tables: Vec<Vec<f64>> = exact
        .iter()
        .filter(|tr| tr.final_min() as u64 >= u_hi)
        .map(|tr| {
            std::iter::once(0.0)
                .chain(tr.min_jumps.iter().copied())
                .take(u_hi as usize + 1)
                .collect()
        })
        .collect();
    let est = stats::growth_rate_estimate(&tables, u_lo, u_hi)?;
    let t_m = c.t_grid.first().copied().unwrap_or(t);
    let ratios: Vec<f64> = exact.iter().map(|tr| tr.min_at(t_m) as f64 / t_m).collect();
    let m_mean = stats::mean(&ratios);
    let m_se = stats::std_error(&ratios);
    let combined = (est.stderr_inv.powi(2) + m_se.powi(2)).sqrt();
    let z = (est.rho_inv_hat - m_mean) / combined;
    let mut summary = Table::new(
        "growth-summary",
        &[
            "replications", "u_lo", "u_hi", "rho_hat", "stderr", "rho_inv_hat", "stderr_inv", "t", "m_over_t",
            "m_over_t_stderr", "z",
        ],
    );
    summary.push(vec![
        est.replications.into(),
        u_lo.into(),
        u_hi.into(),
        est.rho_hat.into(),
        est.stderr.into(),
        est.rho_inv_hat.into(),
        est.stderr_inv.into(),
        t_m.into(),
        m_mean.into(),
        m_se.into(),
        z.into(),
    ]);
    let lower = 1.0 / (10.0 * c.d as f64);
    let checks = vec![
        Check::new(
            "rho_inv_hat in (1/(10d), 1]",
            est.rho_inv_hat > lower && est.rho_inv_hat <= 1.0,
            format!("rho_inv_hat = {:.4} +- {:.4}", est.rho_inv_hat, est.stderr_inv),
        ),
        Check::new(
            "regression and M_t/t agree within 2 combined SE",
            z.abs() <= 2.0,
            format!("{:.4} vs {:.4}, z = {z:.2}", est.rho_inv_hat, m_mean),
        ),
    ];
    Ok(Report {
        tables: vec![summary, table],
        checks,
        notes: Vec::new(),
    })
}

/// `∫_0^t Y_s ds` for the exposed widths: the compensator of `N_t`.
fn arrival_compensator(traj: &dual::DualTrajectory, t: f64) -> f64 {
    let y = traj.widths(WidthConvention::Exposed);
    let mut prev = 0.0;
    let mut total = 0.0;
    for (a, w) in traj.arrivals.iter().zip(&y) {
        if a.time > t {
            break;
        }
        total += w * (a.time - prev);
        prev = a.time;
    }
    let n = traj.count_at(t);
    total + y[n] * (t - prev)
}

pub(crate) fn interface_stats(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let t = c.horizon;
    // The first m gaps of a run are i.i.d.; pooling every gap seen before t
    // would undercount long gaps, which are the ones cut off at t.
    let m = c.samples.div_ceil(c.replications);
    let reps = par_reps(jobs, c.replications, |r| {
        let seed = rep_seed(c, r);
        let (l, _, traj) = certified_dual(c, seed, t)?;
        let st = dual::interface_stats(&traj, &[t])?;
        let comp = arrival_compensator(&traj, t);
        Ok((seed, l, traj.exact, st, comp))
    })?;
    let mut table = Table::new(
        "interface-stats",
        &[
            "replication", "seed", "L", "I_t", "N_t", "I_over_t", "N_over_t2", "compensator", "right_jumps", "exact",
        ],
    );
    let t2 = t * t;
    for (r, (seed, l, exact, st, comp)) in reps.iter().enumerate() {
        let i_t = st.sizes[0].1;
        let n_t = st.counts[0].1;
        table.push(vec![
            r.into(),
            (*seed).into(),
            (*l as i64).into(),
            i_t.into(),
            n_t.into(),
            (i_t as f64 / t).into(),
            (n_t as f64 / t2).into(),
            (*comp).into(),
            st.right_interarrivals.len().into(),
            (*exact).into(),
        ]);
    }
    let good: Vec<_> = reps.iter().filter(|r| r.2).collect();
    let mut short = 0;
    let mut gaps = Vec::with_capacity(c.samples);
    for r in &good {
        let g = &r.3.right_interarrivals;
        if g.len() < m {
            short += 1;
            continue;
        }
        gaps.extend_from_slice(&g[..m]);
    }
    gaps.truncate(c.samples);
    let ks = stats::ks_one_sample(&gaps, stats::exp1_cdf, c.alpha)?;
    let i_over: Vec<f64> = good.iter().map(|r| r.3.sizes[0].1 as f64 / t).collect();
    let n_over: Vec<f64> = good.iter().map(|r| r.3.counts[0].1 as f64 / t2).collect();
    let resid: Vec<f64> = good.iter().map(|r| r.3.counts[0].1 as f64 - r.4).collect();
    let within = |x: &[f64], target: f64| {
        let (mean, se) = (stats::mean(x), stats::std_error(x));
        let z = (mean - target) / se;
        (z.abs() <= 3.0, format!("{mean:.5} +- {se:.5} vs {target:.5}, z = {z:.2}"))
    };
    let (i_ok, i_detail) = within(&i_over, 2.0);
    let (n_ok, n_detail) = within(&n_over, 1.0);
    let (c_ok, c_detail) = within(&resid, 0.0);
    // Formation at Exp(1), then each edge advances at rate 1 and arrivals
    // come at rate I + 2: E I_t = 2t - 1 and E N_t = t^2 + t up to e^{-t}.
    let (fi_ok, fi_detail) = within(&i_over, 2.0 - 1.0 / t);
    let (fn_ok, fn_detail) = within(&n_over, 1.0 + 1.0 / t);
    let mut summary = Table::new(
        "interface-summary",
        &[
            "t", "replications", "gaps", "gaps_per_run", "ks_d", "ks_p", "I_over_t", "I_over_t_stderr", "N_over_t2",
            "N_over_t2_stderr", "N_minus_compensator", "N_minus_compensator_stderr",
        ],
    );
    summary.push(vec![
        t.into(),
        good.len().into(),
        gaps.len().into(),
        m.into(),
        ks.d.into(),
        ks.p_asymptotic.into(),
        stats::mean(&i_over).into(),
        stats::std_error(&i_over).into(),
        stats::mean(&n_over).into(),
        stats::std_error(&n_over).into(),
        stats::mean(&resid).into(),
        stats::std_error(&resid).into(),
    ]);
    let mut notes = Vec::new();
    if short > 0 {
        notes.push(format!("{short} runs had fewer than {m} right-edge advances and were left out of the KS sample"));
    }
    if gaps.len() < c.samples {
        notes.push(format!("only {} right-edge gaps available of {} requested", gaps.len(), c.samples));
    }
    Ok(Report {
        checks: vec![
            Check::new(
                "right-edge gaps ~ Exp(1)",
                ks.passes(c.alpha),
                format!("n = {}, D = {:.5}, p = {:.4}", ks.n, ks.d, ks.p_asymptotic),
            ),
            Check::new("I_t/t within 3 SE of 2", i_ok, i_detail),
            Check::new("N_t/t^2 within 3 SE of 1", n_ok, n_detail),
            Check::new("N_t - compensator within 3 SE of 0", c_ok, c_detail),
            Check::new("I_t/t within 3 SE of 2 - 1/t", fi_ok, fi_detail),
            Check::new("N_t/t^2 within 3 SE of 1 + 1/t", fn_ok, fn_detail),
        ],
        tables: vec![summary, table],
        notes,
    })
}

pub(crate) fn coupled_restart(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let u = c.u_grid[0];
    let v = *c.u_grid.get(1).unwrap_or(&u);
    let t = c.horizon;
    let reps = par_reps(jobs, c.replications, |r| {
        let seed = rep_seed(c, r);
        let l = dual_radius(c, t);
        let bx = LatticeBox::new(c.d, l, t, c.boundary)?;
        let set = EventSet::generate(&bx, c.rate, seed)?;
        let rec = dual::coupled_restart(&set, u, v)?;
        let other = EventSet::generate(&bx, c.rate, side_seed(c, 2, r))?;
        let fresh = dual::run_dual(&other, t)?;
        Ok((seed, l, rec, dual::hitting_time(&fresh, v), fresh.exact))
    })?;
    let mut table = Table::new(
        "coupled-restart",
        &[
            "replication", "seed", "L", "T_u", "T_star", "T_uv", "holds", "b_dominates", "fresh_T_v", "exact",
        ],
    );
    let mut holds = true;
    let mut dominates = true;
    let mut observed = 0;
    for (r, (seed, l, rec, fresh, _)) in reps.iter().enumerate() {
        let h = rec.inequality_holds();
        if let Some(ok) = h {
            holds &= ok;
            observed += 1;
        }
        dominates &= rec.b_dominates;
        table.push(vec![
            r.into(),
            (*seed).into(),
            (*l as i64).into(),
            rec.t_u.into(),
            rec.t_star.into(),
            rec.t_uv.into(),
            h.into(),
            rec.b_dominates.into(),
            (*fresh).into(),
            rec.exact.into(),
        ]);
    }
    let mut notes = Vec::new();
    if observed < reps.len() {
        notes.push(format!("{} runs did not observe every passage before T", reps.len() - observed));
    }
    let star: Vec<f64> = reps.iter().filter(|r| r.2.exact).filter_map(|r| r.2.t_star).collect();
    let fresh: Vec<f64> = reps.iter().filter(|r| r.4).filter_map(|r| r.3).collect();
    let mut checks = vec![
        Check::new(
            "T(u+v) >= T(u) + T*(v)",
            holds && observed > 0,
            format!("{observed} of {} runs observed, u = {u}, v = {v}", reps.len()),
        ),
        Check::new("restarted process dominates", dominates, format!("{} runs", reps.len())),
    ];
    checks.extend(dkw_check("T*(v) vs fresh T(v) DKW", &star, &fresh, c.alpha, &mut notes)?);
    Ok(Report {
        tables: vec![table],
        checks,
        notes,
    })
}

pub(crate) fn perturbation(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let t = c.horizon;
    let reps = par_reps(jobs, c.replications, |r| -> Result<Vec<Cell>> {
        let seed = rep_seed(c, r);
        let (l, exact, set, ()) = certified_run(c, seed, t, growth_guess(c.d, t), |set: &EventSet| {
            let ev = evolve(set, &InitialCondition::Zero, Model::Rsos, t)?;
            Ok((ev.field.at_origin(), ()))
        })?;
        let bx = set.bx().clone();
        let mut rng = stream(seed, 5);
        let (p, more) = loop {
            let time = bx.snap_time(rng.random_range(0.0..t));
            let site = bx.site_of(rng.random_range(0..bx.num_sites()));
            let p = SpaceTimePoint { time, site };
            if time <= 0.0 || time >= t {
                continue;
            }
            match set.insert_event(&p) {
                Ok(more) => break (p, more),
                Err(Error::DuplicateTime(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        let mut a = Surface::new(&bx, &InitialCondition::Zero, Model::Rsos)?;
        let mut b = Surface::new(&bx, &InitialCondition::Zero, Model::Rsos)?;
        let (mut lo, mut hi) = (0i64, 0i64);
        let pi = bx.index_of(&p.site).expect("drawn inside the box");
        for e in more.events() {
            let i = e.site as usize;
            if !(e.time == p.time && i == pi) {
                a.apply(i);
            }
            b.apply(i);
            let diff = b.heights()[i] - a.heights()[i];
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        let origin = bx.origin_index();
        let delta = b.heights()[origin] - a.heights()[origin];
        let path = minpath::argmin_path(&set, t, &Site::origin(c.d), &InitialCondition::Zero)?;
        let on_path = path.contains(&p);
        let ok = lo >= 0 && hi <= 1 && (on_path || delta == 0);
        Ok(vec![
            r.into(),
            seed.into(),
            (l as i64).into(),
            bx.num_sites().into(),
            p.time.into(),
            p.site.to_string().into(),
            delta.into(),
            on_path.into(),
            lo.into(),
            hi.into(),
            ok.into(),
            exact.into(),
        ])
    })?;
    let mut table = Table::new(
        "perturbation",
        &[
            "replication", "seed", "L", "sites", "p_t", "p_x", "delta", "on_path", "min_diff", "max_diff", "pass",
            "exact",
        ],
    );
    let get = |row: &[Cell], name: &str| row[table.column(name).unwrap()].clone();
    let mut coupling = true;
    let mut off_path = true;
    let mut off_count = 0usize;
    let mut weighted: Vec<f64> = Vec::with_capacity(reps.len());
    for row in &reps {
        let lo = get(row, "min_diff").as_f64().unwrap();
        let hi = get(row, "max_diff").as_f64().unwrap();
        let delta = get(row, "delta").as_f64().unwrap();
        let on = get(row, "on_path").as_bool().unwrap();
        let sites = get(row, "sites").as_f64().unwrap();
        coupling &= lo >= 0.0 && hi <= 1.0;
        if !on {
            off_count += 1;
            off_path &= delta == 0.0;
        }
        weighted.push(if delta > 0.0 { sites } else { 0.0 });
    }
    let rate = stats::mean(&weighted);
    let se = stats::std_error(&weighted);
    let n = reps.len();
    for row in reps {
        table.push(row);
    }
    Ok(Report {
        checks: vec![
            Check::new("height changes lie in {0, 1}", coupling, format!("{n} insertions, every site after every ring")),
            Check::new(
                "off-path insertions leave the target unchanged",
                off_path,
                format!("{off_count} of {n} insertions off the stored path"),
            ),
            Check::new(
                "influential insertions per unit space-time <= 1",
                rate <= 1.0 + 3.0 * se,
                format!("{rate:.4} +- {se:.4}"),
            ),
        ],
        tables: vec![table],
        notes: Vec::new(),
    })
}

pub(crate) fn berry_esseen(c: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let t = c.horizon;
    let mut grid = c.u_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let u0 = grid[0];
    let conv = c.width_convention;
    let reps = par_reps(jobs, c.replications, |r| {
        let seed = rep_seed(c, r);
        let (_, _, traj) = certified_dual(c, seed, t)?;
        let mut rng = stream(seed, 11);
        let direct = dual::hitting_time(&traj, u0);
        let resampled = dual::resample_hitting_time(&traj, u0, conv, &mut rng);
        let mut lit_rng = stream(seed, 12);
        let literal = dual::resample_hitting_time(&traj, u0, WidthConvention::Literal, &mut lit_rng);
        let be = grid
            .iter()
            .map(|&u| dual::berry_esseen_stats(&traj, u, conv))
            .collect::<Result<Vec<_>>>()?;
        Ok((seed, traj.exact, direct, resampled, literal, be))
    })?;
    let mut table = Table::new(
        "berry-esseen",
        &["replication", "seed", "u", "A_u", "mu", "sigma_sq", "theta", "T_u", "resampled_T_u", "exact"],
    );
    for (r, (seed, exact, direct, resampled, _, be)) in reps.iter().enumerate() {
        for (&u, s) in grid.iter().zip(be) {
            let first = u == u0;
            table.push(vec![
                r.into(),
                (*seed).into(),
                u.into(),
                s.map(|s| s.a_u).into(),
                s.map(|s| s.mu).into(),
                s.map(|s| s.sigma_sq).into(),
                s.map(|s| s.theta).into(),
                if first { (*direct).into() } else { Cell::Empty },
                if first { (*resampled).into() } else { Cell::Empty },
                (*exact).into(),
            ]);
        }
    }
    let good: Vec<_> = reps.iter().filter(|r| r.1).collect();
    let direct: Vec<f64> = good.iter().filter_map(|r| r.2).collect();
    let resampled: Vec<f64> = good.iter().filter_map(|r| r.3).collect();
    let literal: Vec<f64> = good.iter().filter_map(|r| r.4).collect();
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    checks.extend(dkw_check("resampled T(u) vs direct T(u) DKW", &direct, &resampled, c.alpha, &mut notes)?);
    if let Some(lit) = dkw_check("literal widths", &direct, &literal, c.alpha, &mut Vec::new())? {
        notes.push(format!("advisory, literal widths vs direct: {}", lit.detail));
    }
    let mut summary = Table::new("berry-esseen-summary", &["u", "log_u", "n", "mean_sigma_sq", "mean_mu"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (j, &u) in grid.iter().enumerate() {
        let s: Vec<_> = good.iter().filter_map(|r| r.5[j]).collect();
        if s.is_empty() {
            notes.push(format!("no run reached u = {u}"));
            continue;
        }
        let sig = stats::mean(&s.iter().map(|b| b.sigma_sq).collect::<Vec<_>>());
        let mu = stats::mean(&s.iter().map(|b| b.mu).collect::<Vec<_>>());
        let lu = (u as f64).ln();
        xs.push(lu);
        ys.push(sig);
        summary.push(vec![u.into(), lu.into(), s.len().into(), sig.into(), mu.into()]);
    }
    if xs.len() >= 3 {
        let (full, _) = stats::ols_slope(&xs, &ys)?;
        let mid = xs.len() / 2;
        let (a, _) = stats::ols_slope(&xs[..=mid], &ys[..=mid])?;
        let (b, _) = stats::ols_slope(&xs[mid..], &ys[mid..])?;
        let stable = [a, b].iter().all(|s| (s - full).abs() <= 0.3 * full.abs());
        checks.push(Check::new(
            "sigma_u^2 vs log u slope stable within 30%",
            stable && full > 0.0,
            format!("full {full:.4}, lower half {a:.4}, upper half {b:.4}"),
        ));
    } else {
        checks.push(Check::new("sigma_u^2 vs log u slope stable within 30%", false, "fewer than three levels reached"));
    }
    Ok(Report {
        tables: vec![summary, table],
        checks,
        notes,
    })
}
