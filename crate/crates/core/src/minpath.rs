//! Heights as optimal path weights.
//!
//! A lattice path runs backwards in time from `(t, x)`. It sits at one site
//! until a clock ring at that site, which it must take, and may then hop to
//! any offset in `N₀ = {0, ±e_i}`. The RSOS height equals the least value of
//! `W(γ) + H(γ(s))` over such paths, where `W` counts the rings taken and `H`
//! is the surface at the end time `s`. Ballistic deposition takes the largest
//! value instead, and k-RSOS charges `k` for every ring at which the path
//! hops.
//!
//! Values come from a forward recursion over the events in `(s, t]`, one pass
//! for all sites. The ring exactly at `(t, x)`, if there is one, is taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, EventSet, LatticeBox, Site, SpaceTimePoint, Topology};
use crate::surface::{InitialCondition, Model};

const INF: i64 = i64::MAX / 4;

/// Default enumeration cap, in events.
pub const DEFAULT_PATH_CAP: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinWeight {
    pub value: i64,
    /// Certifies that truncating space to the box did not change `value`.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    #[serde(rename = "t")]
    pub time: f64,
    #[serde(rename = "x")]
    pub site: Site,
    /// Offset in `N₀` taken at this ring.
    #[serde(rename = "move")]
    pub offset: Site,
}

impl PathStep {
    pub fn is_horizontal(&self) -> bool {
        self.offset.iter().any(|&c| c != 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub start: SpaceTimePoint,
    pub end_time: f64,
    /// Rings taken, latest first.
    pub steps: Vec<PathStep>,
    pub end_site: Site,
    pub weight: u64,
}

impl PathTrace {
    /// Rings without a hop count one, rings with a hop count `k`.
    pub fn weight_k(&self, k: u64) -> u64 {
        self.steps
            .iter()
            .map(|s| if s.is_horizontal() { k } else { 1 })
            .sum()
    }

    pub fn horizontal_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.is_horizontal()).count()
    }

    /// Whether the path occupies `p.site` at time `p.time`.
    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        if p.time > self.start.time || p.time < self.end_time {
            return false;
        }
        for s in &self.steps {
            if p.time >= s.time {
                return s.site == p.site;
            }
        }
        self.end_site == p.site
    }

    /// Re-checks every structural invariant against `set`.
    pub fn is_valid(&self, set: &EventSet) -> bool {
        self.check(set).is_ok()
    }

    pub fn check(&self, set: &EventSet) -> std::result::Result<(), String> {
        let bx = set.bx();
        let topo = bx.topology();
        let mut cur = bx
            .index_of(&self.start.site)
            .ok_or_else(|| "start outside the box".to_string())?;
        if !(self.end_time <= self.start.time && self.start.time <= bx.horizon) {
            return Err("times out of order".into());
        }
        let mut bound = self.start.time;
        let mut inclusive = true;
        for (n, step) in self.steps.iter().enumerate() {
            let times = set.site_times(cur);
            let k = upto(times, bound, inclusive);
            let latest = k.checked_sub(1).map(|i| times[i]);
            if latest != Some(step.time) || step.time <= self.end_time {
                return Err(format!("step {n} is not the next ring at the current site"));
            }
            if bx.site_of(cur) != step.site {
                return Err(format!("step {n} is recorded at the wrong site"));
            }
            cur = apply_offset(bx, &topo, cur, &step.offset)
                .ok_or_else(|| format!("step {n} has an illegal offset"))?;
            bound = step.time;
            inclusive = false;
        }
        let times = set.site_times(cur);
        let k = upto(times, bound, inclusive);
        if k > 0 && times[k - 1] > self.end_time {
            return Err("path skips a ring before its end".into());
        }
        if bx.site_of(cur) != self.end_site {
            return Err("end site does not match the moves".into());
        }
        if self.weight != self.steps.len() as u64 {
            return Err("weight does not count the steps".into());
        }
        Ok(())
    }
}

fn upto(times: &[f64], bound: f64, inclusive: bool) -> usize {
    if inclusive {
        times.partition_point(|&u| u <= bound)
    } else {
        times.partition_point(|&u| u < bound)
    }
}

fn apply_offset(bx: &LatticeBox, topo: &Topology, idx: usize, offset: &[i32]) -> Option<usize> {
    if offset.len() != bx.dim {
        return None;
    }
    let mut nz = offset.iter().enumerate().filter(|(_, &c)| c != 0);
    match (nz.next(), nz.next()) {
        (None, _) => Some(idx),
        (Some((axis, &c)), None) if c.abs() == 1 => {
            topo.neighbor(idx, 2 * axis + usize::from(c < 0))
        }
        _ => None,
    }
}

fn slot_offset(dim: usize, slot: usize) -> Site {
    let mut v = vec![0; dim];
    v[slot / 2] = if slot.is_multiple_of(2) { 1 } else { -1 };
    Site(v)
}

#[inline]
fn relax(model: Model, topo: &Topology, w: &[i64], i: usize) -> i64 {
    match model {
        Model::Rsos => (topo.neighbors(i).map(|j| w[j]).fold(w[i], i64::min) + 1).min(INF),
        Model::KRsos(k) => {
            let k = k as i64;
            topo.neighbors(i)
                .map(|j| w[j] + k)
                .fold(w[i] + 1, i64::min)
                .min(INF)
        }
        Model::Bd => (topo.neighbors(i).map(|j| w[j]).fold(w[i], i64::max) + 1).max(-INF),
    }
}

/// Per-site values recorded after each ring, for backtracking.
type Record = Vec<Vec<(f64, i64)>>;

fn run_dp(
    set: &EventSet,
    mut w: Vec<i64>,
    s: f64,
    t: f64,
    model: Model,
    mut record: Option<&mut Record>,
) -> Vec<i64> {
    let topo = set.bx().topology();
    let events = set.events();
    let lo = events.partition_point(|e| e.time <= s);
    let hi = events.partition_point(|e| e.time <= t);
    for e in &events[lo..hi] {
        let i = e.site as usize;
        w[i] = relax(model, &topo, &w, i);
        if let Some(rec) = record.as_deref_mut() {
            rec[i].push((e.time, w[i]));
        }
    }
    w
}

fn check_times(bx: &LatticeBox, t: f64, s: f64) -> Result<()> {
    if !(t <= bx.horizon && t >= 0.0) {
        return Err(Error::OutOfHorizon {
            time: t,
            horizon: bx.horizon,
        });
    }
    if !(s >= 0.0 && s <= t) {
        return Err(Error::InvalidArgument(format!("end time {s} not in [0, {t}]")));
    }
    Ok(())
}

/// Surface values at time `s`, produced by the same recursion from time 0.
fn boundary_values(set: &EventSet, init: &InitialCondition, s: f64, model: Model) -> Result<Vec<i64>> {
    let h = init.heights(set.bx())?;
    Ok(if s > 0.0 { run_dp(set, h, 0.0, s, model, None) } else { h })
}

/// Optimal values at every site at time `t`.
pub fn weight_field(
    set: &EventSet,
    t: f64,
    init: &InitialCondition,
    end_time: f64,
    model: Model,
) -> Result<Vec<i64>> {
    model.validate()?;
    check_times(set.bx(), t, end_time)?;
    let w = boundary_values(set, init, end_time, model)?;
    Ok(run_dp(set, w, end_time, t, model, None))
}

/// Whether a value at site `idx` is unaffected by truncating space.
///
/// Leaving the box costs at least `L + 1 - ‖x‖∞` rings (times `k` for
/// k-RSOS), and the path then ends on a surface no lower than `floor`.
/// Under periodic wrapping a path crossing the seam also pays that much, so
/// the bound must be strict there.
pub fn certificate(bx: &LatticeBox, idx: usize, value: i64, floor: i64, model: Model) -> bool {
    let exit = bx.radius as i64 + 1 - bx.site_of(idx).linf_norm();
    let cost = match model {
        Model::Rsos => exit,
        Model::KRsos(k) => k as i64 * exit,
        Model::Bd => return false,
    };
    match bx.boundary {
        Boundary::Free => value <= cost + floor,
        Boundary::Periodic => value < cost + floor,
    }
}

/// Optimal value at `(t, x)` over paths ending at time `end_time`.
pub fn min_weight(
    set: &EventSet,
    t: f64,
    x: &Site,
    init: &InitialCondition,
    end_time: f64,
    model: Model,
) -> Result<MinWeight> {
    let idx = set.bx().require_index(x)?;
    let w = weight_field(set, t, init, end_time, model)?;
    let value = w[idx];
    Ok(MinWeight {
        value,
        exact: certificate(set.bx(), idx, value, init.floor(), model),
    })
}

/// One RSOS-minimizing path from `(t, x)` to time 0.
pub fn argmin_path(set: &EventSet, t: f64, x: &Site, init: &InitialCondition) -> Result<PathTrace> {
    optimal_path(set, t, x, init, Model::Rsos)
}

/// One optimal path for any model. Among equally good hops at a ring the
/// order is stay, `+e1`, `-e1`, `+e2`, ...
pub fn optimal_path(
    set: &EventSet,
    t: f64,
    x: &Site,
    init: &InitialCondition,
    model: Model,
) -> Result<PathTrace> {
    model.validate()?;
    let bx = set.bx();
    check_times(bx, t, 0.0)?;
    let start = bx.require_index(x)?;
    let h = init.heights(bx)?;
    let mut rec: Record = vec![Vec::new(); bx.num_sites()];
    run_dp(set, h.clone(), 0.0, t, model, Some(&mut rec));
    let topo = bx.topology();
    let before = |z: usize, te: f64| -> i64 {
        let r = &rec[z];
        let k = r.partition_point(|&(u, _)| u < te);
        if k == 0 {
            h[z]
        } else {
            r[k - 1].1
        }
    };
    let mut steps = Vec::new();
    let mut y = start;
    let mut bound = t;
    let mut inclusive = true;
    loop {
        let r = &rec[y];
        let k = if inclusive {
            r.partition_point(|&(u, _)| u <= bound)
        } else {
            r.partition_point(|&(u, _)| u < bound)
        };
        if k == 0 {
            break;
        }
        let (te, target) = r[k - 1];
        let (hop, cost) = match model {
            Model::KRsos(k) => (k as i64, 1),
            _ => (1, 1),
        };
        let mut choice = None;
        if before(y, te) + cost == target {
            choice = Some((y, Site::origin(bx.dim)));
        } else {
            for slot in 0..topo.degree() {
                if let Some(z) = topo.neighbor(y, slot) {
                    if before(z, te) + hop == target {
                        choice = Some((z, slot_offset(bx.dim, slot)));
                        break;
                    }
                }
            }
        }
        let (z, offset) = choice.expect("recorded value has an optimal predecessor");
        steps.push(PathStep {
            time: te,
            site: bx.site_of(y),
            offset,
        });
        y = z;
        bound = te;
        inclusive = false;
    }
    Ok(PathTrace {
        start: SpaceTimePoint {
            time: t,
            site: x.clone(),
        },
        end_time: 0.0,
        weight: steps.len() as u64,
        steps,
        end_site: bx.site_of(y),
    })
}

/// Least weight of paths from `(t, x)` that sit at `y` at time `s`, or
/// `None` if no path gets there.
pub fn min_weight_to_site(
    set: &EventSet,
    t: f64,
    x: &Site,
    s: f64,
    y: &Site,
    model: Model,
) -> Result<Option<i64>> {
    model.validate()?;
    let bx = set.bx();
    check_times(bx, t, s)?;
    let xi = bx.require_index(x)?;
    let yi = bx.require_index(y)?;
    let far = if model == Model::Bd { -INF } else { INF };
    let mut w = vec![far; bx.num_sites()];
    w[yi] = 0;
    let v = run_dp(set, w, s, t, model, None)[xi];
    Ok((v.abs() < INF / 2).then_some(v))
}

/// Height change at `(t, x)` caused by adding a ring at `p`.
pub fn perturb_height(
    set: &EventSet,
    p: &SpaceTimePoint,
    t: f64,
    x: &Site,
    init: &InitialCondition,
) -> Result<i64> {
    let more = set.insert_event(p)?;
    let a = min_weight(set, t, x, init, 0.0, Model::Rsos)?.value;
    let b = min_weight(&more, t, x, init, 0.0, Model::Rsos)?.value;
    Ok(b - a)
}

/// Every path from `(t, x)` to time `s`, refusing sets above the default cap.
pub fn enumerate_paths<'a>(set: &'a EventSet, t: f64, x: &Site, s: f64) -> Result<PathIter<'a>> {
    enumerate_paths_with_cap(set, t, x, s, DEFAULT_PATH_CAP)
}

pub fn enumerate_paths_with_cap<'a>(
    set: &'a EventSet,
    t: f64,
    x: &Site,
    s: f64,
    cap: usize,
) -> Result<PathIter<'a>> {
    if set.len() > cap {
        return Err(Error::EnumerationCap {
            count: set.len(),
            cap,
        });
    }
    check_times(set.bx(), t, s)?;
    let idx = set.bx().require_index(x)?;
    Ok(PathIter {
        set,
        topo: set.bx().topology(),
        start: SpaceTimePoint {
            time: t,
            site: x.clone(),
        },
        end_time: s,
        stack: vec![Frame {
            site: idx,
            bound: t,
            inclusive: true,
            steps: Vec::new(),
        }],
    })
}

struct Frame {
    site: usize,
    bound: f64,
    inclusive: bool,
    steps: Vec<PathStep>,
}

/// Depth-first path enumeration; see [`enumerate_paths`].
pub struct PathIter<'a> {
    set: &'a EventSet,
    topo: Topology,
    start: SpaceTimePoint,
    end_time: f64,
    stack: Vec<Frame>,
}

impl Iterator for PathIter<'_> {
    type Item = PathTrace;

    fn next(&mut self) -> Option<PathTrace> {
        let bx = self.set.bx();
        while let Some(f) = self.stack.pop() {
            let times = self.set.site_times(f.site);
            let k = upto(times, f.bound, f.inclusive);
            let ring = k.checked_sub(1).map(|i| times[i]).filter(|&u| u > self.end_time);
            let Some(te) = ring else {
                return Some(PathTrace {
                    start: self.start.clone(),
                    end_time: self.end_time,
                    weight: f.steps.len() as u64,
                    steps: f.steps,
                    end_site: bx.site_of(f.site),
                });
            };
            let here = bx.site_of(f.site);
            let mut children = vec![(f.site, Site::origin(bx.dim))];
            for slot in 0..self.topo.degree() {
                if let Some(z) = self.topo.neighbor(f.site, slot) {
                    children.push((z, slot_offset(bx.dim, slot)));
                }
            }
            for (z, offset) in children.into_iter().rev() {
                let mut steps = f.steps.clone();
                steps.push(PathStep {
                    time: te,
                    site: here.clone(),
                    offset,
                });
                self.stack.push(Frame {
                    site: z,
                    bound: te,
                    inclusive: false,
                    steps,
                });
            }
        }
        None
    }
}
