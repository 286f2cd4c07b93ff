//! The dual process: RSOS grown from the well `‖x‖₁`.
//!
//! Its minimum `M_t` rises by one at a time. The interface is the set of
//! sites that have accepted at least one update; in one dimension it is an
//! interval `[l_t, r_t]` whose edges advance at rate one. An arrival is a ring
//! whose site lies in the interface right after the ring is applied. In one
//! dimension these are exactly the rings in `[l - 1, r + 1]`, so arrivals
//! come at rate `I_t + 2` once the interface has formed and at rate one
//! (site 0 only) before.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::lattice::{EventSet, LatticeBox, Site};
use crate::surface::{InitialCondition, Model, Surface};

/// `12/e - 2`, the factor in the third-moment term.
pub const THETA_FACTOR: f64 = 12.0 / std::f64::consts::E - 2.0;

/// Box radius that makes an edge hit negligible for runs up to `until`.
pub fn default_radius(until: f64) -> i32 {
    ((until + 6.0 * until.sqrt()).ceil() as i32).max(1)
}

/// Histogram of heights with a monotone minimum pointer.
#[derive(Clone, Debug)]
pub(crate) struct MinTracker {
    counts: Vec<u32>,
    min: i64,
}

impl MinTracker {
    pub(crate) fn new(heights: &[i64]) -> Self {
        let lo = heights.iter().copied().min().unwrap_or(0);
        let hi = heights.iter().copied().max().unwrap_or(0);
        assert!(lo >= 0, "heights are non-negative");
        let mut counts = vec![0u32; hi as usize + 2];
        for &h in heights {
            counts[h as usize] += 1;
        }
        MinTracker { counts, min: lo }
    }

    /// Moves one site from `from` to `to > from`; returns whether the
    /// minimum rose.
    pub(crate) fn raise(&mut self, from: i64, to: i64) -> bool {
        if to as usize >= self.counts.len() {
            self.counts.resize(to as usize + 2, 0);
        }
        self.counts[from as usize] -= 1;
        self.counts[to as usize] += 1;
        let before = self.min;
        while self.counts[self.min as usize] == 0 {
            self.min += 1;
        }
        self.min > before
    }

    pub(crate) fn min(&self) -> i64 {
        self.min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub site: u32,
    pub accepted: bool,
    /// Interface size right after the ring.
    pub size: i64,
    /// `(l, r)` right after the ring; one dimension only.
    pub bounds: Option<(i32, i32)>,
    /// `M` right after the ring.
    pub min: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualTrajectory {
    pub dim: usize,
    pub until: f64,
    /// `min_jumps[u - 1] = T(u)`.
    pub min_jumps: Vec<f64>,
    pub arrivals: Vec<Arrival>,
    pub right_jumps: Vec<f64>,
    pub left_jumps: Vec<f64>,
    /// Time of the first accepted update.
    pub formed_at: Option<f64>,
    /// False if any site on a face of the box accepted an update.
    pub exact: bool,
}

/// Which widths drive the exponential holding times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WidthConvention {
    /// `Y_0 = 1`, `Y_j = I_{τ_j} + 2`: the rate of the next arrival.
    #[default]
    Exposed,
    /// `Y_0 = 1`, `Y_j = I_{τ_j}`.
    Literal,
}

impl std::str::FromStr for WidthConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exposed" => Ok(WidthConvention::Exposed),
            "literal" => Ok(WidthConvention::Literal),
            other => Err(Error::Parse(format!("unknown width convention `{other}`"))),
        }
    }
}

impl DualTrajectory {
    pub fn final_min(&self) -> i64 {
        self.min_jumps.len() as i64
    }

    pub fn min_at(&self, t: f64) -> i64 {
        self.min_jumps.partition_point(|&u| u <= t) as i64
    }

    /// `N_t`.
    pub fn count_at(&self, t: f64) -> usize {
        self.arrivals.partition_point(|a| a.time <= t)
    }

    /// `I_t`.
    pub fn size_at(&self, t: f64) -> i64 {
        match self.count_at(t) {
            0 => 0,
            n => self.arrivals[n - 1].size,
        }
    }

    pub fn bounds_at(&self, t: f64) -> Option<(i32, i32)> {
        match self.count_at(t) {
            0 => None,
            n => self.arrivals[n - 1].bounds,
        }
    }

    /// `A(u) = N_{T(u)}`.
    pub fn arrivals_to(&self, u: u64) -> Option<usize> {
        hitting_time(self, u).map(|t| self.count_at(t))
    }

    /// `Y_0, Y_1, ...` under the given convention.
    pub fn widths(&self, convention: WidthConvention) -> Vec<f64> {
        let extra = match convention {
            WidthConvention::Exposed => 2,
            WidthConvention::Literal => 0,
        };
        std::iter::once(1.0)
            .chain(self.arrivals.iter().map(|a| (a.size + extra) as f64))
            .collect()
    }

    /// CSV `t_event,M,l,r,N`, one row per arrival.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_event,M,l,r,N")?;
        for (n, a) in self.arrivals.iter().enumerate() {
            let (l, r) = match a.bounds {
                Some((l, r)) => (l.to_string(), r.to_string()),
                None => (String::new(), String::new()),
            };
            writeln!(w, "{},{},{},{},{}", f64_17(a.time), a.min, l, r, n + 1)?;
        }
        Ok(())
    }

    /// CSV `u,T_u` for every level reached.
    pub fn write_hitting_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,T_u")?;
        writeln!(w, "0,{}", f64_17(0.0))?;
        for (u, t) in self.min_jumps.iter().enumerate() {
            writeln!(w, "{},{}", u + 1, f64_17(*t))?;
        }
        Ok(())
    }
}

/// Runs the dual process through every ring with time `<= until`.
pub fn run_dual(set: &EventSet, until: f64) -> Result<DualTrajectory> {
    let bx = set.bx();
    if !(until >= 0.0 && until <= bx.horizon) {
        return Err(Error::OutOfHorizon {
            time: until,
            horizon: bx.horizon,
        });
    }
    let mut surface = Surface::new(bx, &InitialCondition::Well, Model::Rsos)?;
    let mut tracker = MinTracker::new(surface.heights());
    let mut inside = vec![false; bx.num_sites()];
    let mut size = 0i64;
    let one_d = bx.dim == 1;
    let mut bounds: Option<(i32, i32)> = None;
    let mut traj = DualTrajectory {
        dim: bx.dim,
        until,
        min_jumps: Vec::new(),
        arrivals: Vec::new(),
        right_jumps: Vec::new(),
        left_jumps: Vec::new(),
        formed_at: None,
        exact: true,
    };
    for e in set.events_until(until) {
        let i = e.site as usize;
        let accepted = match surface.apply(i) {
            Some(h) => {
                if tracker.raise(h - 1, h) {
                    traj.min_jumps.push(e.time);
                }
                if bx.on_face(i) {
                    traj.exact = false;
                }
                if !inside[i] {
                    inside[i] = true;
                    size += 1;
                    traj.formed_at.get_or_insert(e.time);
                    if one_d {
                        let x = bx.site_of(i)[0];
                        bounds = Some(match bounds {
                            None => (x, x),
                            Some((l, r)) if x == r + 1 => {
                                traj.right_jumps.push(e.time);
                                (l, x)
                            }
                            Some((l, r)) if x == l - 1 => {
                                traj.left_jumps.push(e.time);
                                (x, r)
                            }
                            Some(_) => unreachable!("a one-dimensional interface grows at its edges"),
                        });
                    }
                }
                true
            }
            None => false,
        };
        if inside[i] {
            traj.arrivals.push(Arrival {
                time: e.time,
                site: e.site,
                accepted,
                size,
                bounds,
                min: tracker.min(),
            });
        }
    }
    Ok(traj)
}

/// `T(u) = inf{t : M_t >= u}`, if reached.
pub fn hitting_time(traj: &DualTrajectory, u: u64) -> Option<f64> {
    match u {
        0 => Some(0.0),
        u => traj.min_jumps.get(u as usize - 1).copied(),
    }
}

/// Outcome of [`coupled_restart`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub t_u: Option<f64>,
    /// Site of the update that lifted `M` to `u`.
    pub x0: Option<Site>,
    /// Time the restarted process `B` took to reach `u + v` after `T(u)`.
    pub t_star: Option<f64>,
    /// Absolute time at which `B` reached `u + v`.
    pub b_hit: Option<f64>,
    pub t_uv: Option<f64>,
    /// `B >= A` held at every site after every ring.
    pub b_dominates: bool,
    /// Neither process touched a face of the box.
    pub exact: bool,
}

impl RestartRecord {
    /// `T(u + v) >= T(u) + T*`, when all passages were observed.
    pub fn inequality_holds(&self) -> Option<bool> {
        Some(self.t_uv? >= self.b_hit?)
    }
}

/// Runs dual `A` to `T(u)`, restarts a second process `B` from the well of
/// depth `u` centred at the site that triggered `T(u)`, and drives both on the
/// remaining rings until each reaches `u + v`.
pub fn coupled_restart(set: &EventSet, u: u64, v: u64) -> Result<RestartRecord> {
    if u == 0 || v == 0 {
        return Err(Error::InvalidArgument("u and v must be positive".into()));
    }
    let bx = set.bx();
    let mut a = Surface::new(bx, &InitialCondition::Well, Model::Rsos)?;
    let mut ta = MinTracker::new(a.heights());
    let target = (u + v) as i64;
    let mut rec = RestartRecord {
        t_u: None,
        x0: None,
        t_star: None,
        b_hit: None,
        t_uv: None,
        b_dominates: true,
        exact: true,
    };
    let mut b: Option<(Surface, MinTracker)> = None;
    for e in set.events() {
        let i = e.site as usize;
        if let Some(h) = a.apply(i) {
            ta.raise(h - 1, h);
            rec.exact &= !bx.on_face(i);
            if ta.min() == u as i64 && rec.t_u.is_none() {
                rec.t_u = Some(e.time);
                let x0 = bx.site_of(i);
                let lifted = InitialCondition::well_at(bx, &x0).heights(bx)?;
                let lifted: Vec<i64> = lifted.into_iter().map(|h| h + u as i64).collect();
                let tb = MinTracker::new(&lifted);
                b = Some((Surface::from_heights(bx, lifted, Model::Rsos), tb));
                rec.x0 = Some(x0);
                continue;
            }
            if ta.min() == target && rec.t_uv.is_none() {
                rec.t_uv = Some(e.time);
            }
        }
        if let Some((bs, tb)) = b.as_mut() {
            if let Some(h) = bs.apply(i) {
                tb.raise(h - 1, h);
                rec.exact &= !bx.on_face(i);
                if tb.min() == target && rec.b_hit.is_none() {
                    rec.b_hit = Some(e.time);
                }
            }
            rec.b_dominates &= bs.heights()[i] >= a.heights()[i];
        }
        if rec.t_uv.is_some() && rec.b_hit.is_some() {
            break;
        }
    }
    if let (Some(tu), Some(hit)) = (rec.t_u, rec.b_hit) {
        rec.t_star = Some(hit - tu);
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceStats {
    /// Gaps between right-edge advances, the first measured from formation.
    pub right_interarrivals: Vec<f64>,
    pub left_interarrivals: Vec<f64>,
    /// `(t, I_t)` at the requested times.
    pub sizes: Vec<(f64, i64)>,
    /// `(t, N_t)` at the requested times.
    pub counts: Vec<(f64, usize)>,
    /// `(u, A(u))` for every level reached.
    pub a_table: Vec<(u64, usize)>,
}

/// Renewal quantities of a one-dimensional trajectory.
pub fn interface_stats(traj: &DualTrajectory, times: &[f64]) -> Result<InterfaceStats> {
    if traj.dim != 1 {
        return Err(Error::Unsupported(format!(
            "interface statistics need d = 1, got d = {}",
            traj.dim
        )));
    }
    let gaps = |jumps: &[f64]| -> Vec<f64> {
        let Some(start) = traj.formed_at else {
            return Vec::new();
        };
        let mut prev = start;
        jumps
            .iter()
            .map(|&t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect()
    };
    Ok(InterfaceStats {
        right_interarrivals: gaps(&traj.right_jumps),
        left_interarrivals: gaps(&traj.left_jumps),
        sizes: times.iter().map(|&t| (t, traj.size_at(t))).collect(),
        counts: times.iter().map(|&t| (t, traj.count_at(t))).collect(),
        a_table: (1..=traj.final_min() as u64)
            .map(|u| (u, traj.arrivals_to(u).expect("level reached")))
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseen {
    pub a_u: usize,
    pub mu: f64,
    pub sigma_sq: f64,
    pub theta: f64,
}

/// Moments of `T(u)` read as a sum of `A(u)` independent exponentials with
/// means `1 / Y_{j-1}`. `None` if `T(u)` was not observed.
pub fn berry_esseen_stats(
    traj: &DualTrajectory,
    u: u64,
    convention: WidthConvention,
) -> Result<Option<BerryEsseen>> {
    if traj.dim != 1 {
        return Err(Error::Unsupported("Berry-Esseen statistics need d = 1".into()));
    }
    let Some(a_u) = traj.arrivals_to(u) else {
        return Ok(None);
    };
    let y = traj.widths(convention);
    let (mut mu, mut sigma_sq, mut third) = (0.0, 0.0, 0.0);
    for &w in &y[..a_u] {
        mu += 1.0 / w;
        sigma_sq += 1.0 / (w * w);
        third += 1.0 / (w * w * w);
    }
    Ok(Some(BerryEsseen {
        a_u,
        mu,
        sigma_sq,
        theta: THETA_FACTOR * third,
    }))
}

/// Draws `T(u)` afresh from its conditional law given the widths.
pub fn resample_hitting_time<R: Rng + ?Sized>(
    traj: &DualTrajectory,
    u: u64,
    convention: WidthConvention,
    rng: &mut R,
) -> Option<f64> {
    let a_u = traj.arrivals_to(u)?;
    let y = traj.widths(convention);
    Some(
        y[..a_u]
            .iter()
            .map(|&w| {
                let g: f64 = Exp1.sample(rng);
                g / w
            })
            .sum(),
    )
}

/// Box used for a dual run up to `until` with the default radius.
pub fn default_box(dim: usize, until: f64) -> Result<LatticeBox> {
    LatticeBox::free(dim, default_radius(until), until)
}
