//! Event-driven RSOS, k-RSOS and ballistic-deposition surfaces.
//!
//! A [`Surface`] holds the heights of every site of a box and applies one
//! clock ring at a time. [`evolve`] drives it through an [`EventSet`] in time
//! order and records every height change in an [`AcceptedLog`].

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::lattice::{Event, EventSet, LatticeBox, Site, SpaceTimePoint, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Neighbour differences bounded by one.
    Rsos,
    /// Neighbour differences bounded by `k`.
    #[serde(rename = "krsos")]
    KRsos(u32),
    /// Ballistic deposition with corner touches.
    Bd,
}

impl Model {
    /// Lipschitz bound the model preserves, if any.
    pub fn lipschitz_bound(self) -> Option<i64> {
        match self {
            Model::Rsos => Some(1),
            Model::KRsos(k) => Some(k as i64),
            Model::Bd => None,
        }
    }

    pub(crate) fn validate(self) -> Result<()> {
        match self {
            Model::KRsos(0) => Err(Error::InvalidArgument("k-RSOS needs k >= 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Rsos => write!(f, "rsos"),
            Model::KRsos(k) => write!(f, "krsos({k})"),
            Model::Bd => write!(f, "bd"),
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "rsos" {
            return Ok(Model::Rsos);
        }
        if s == "bd" {
            return Ok(Model::Bd);
        }
        let k = s
            .strip_prefix("krsos(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("krsos:"))
            .ok_or_else(|| Error::Parse(format!("unknown model `{s}`")))?;
        let k: u32 = k
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad k in `{s}`")))?;
        let m = Model::KRsos(k);
        m.validate()?;
        Ok(m)
    }
}

/// Starting heights `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Zero,
    /// `H(x) = ‖x‖₁`.
    Well,
    /// One height per box site, in box index order.
    Explicit(Vec<i64>),
}

impl InitialCondition {
    pub fn explicit_from_fn(bx: &LatticeBox, f: impl Fn(&Site) -> i64) -> Self {
        InitialCondition::Explicit((0..bx.num_sites()).map(|i| f(&bx.site_of(i))).collect())
    }

    /// The well `‖x - center‖₁`.
    pub fn well_at(bx: &LatticeBox, center: &Site) -> Self {
        Self::explicit_from_fn(bx, |x| x.l1_distance(center))
    }

    pub fn heights(&self, bx: &LatticeBox) -> Result<Vec<i64>> {
        match self {
            InitialCondition::Zero => Ok(vec![0; bx.num_sites()]),
            InitialCondition::Well => Ok((0..bx.num_sites()).map(|i| bx.site_of(i).l1_norm()).collect()),
            InitialCondition::Explicit(h) => {
                if h.len() != bx.num_sites() {
                    return Err(Error::InitShape {
                        expected: bx.num_sites(),
                        got: h.len(),
                    });
                }
                Ok(h.clone())
            }
        }
    }

    /// Smallest starting height in the box.
    pub fn floor(&self) -> i64 {
        match self {
            InitialCondition::Zero | InitialCondition::Well => 0,
            InitialCondition::Explicit(h) => h.iter().copied().min().unwrap_or(0),
        }
    }

    /// Checks the model's Lipschitz constraint across every neighbour pair.
    pub fn check_admissible(&self, bx: &LatticeBox, model: Model) -> Result<()> {
        let heights = self.heights(bx)?;
        let Some(bound) = model.lipschitz_bound() else {
            return Ok(());
        };
        let topo = bx.topology();
        for (i, &hi) in heights.iter().enumerate() {
            for j in topo.neighbors(i) {
                if (hi - heights[j]).abs() > bound {
                    return Err(Error::Inadmissible {
                        a: bx.site_of(i).0,
                        b: bx.site_of(j).0,
                        ha: hi,
                        hb: heights[j],
                        bound,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Heights over a box at a given time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub bx: LatticeBox,
    pub heights: Vec<i64>,
    pub clock: f64,
}

impl HeightField {
    pub fn height(&self, site: &[i32]) -> Option<i64> {
        self.bx.index_of(site).map(|i| self.heights[i])
    }

    pub fn at_origin(&self) -> i64 {
        self.heights[self.bx.origin_index()]
    }

    pub fn min(&self) -> i64 {
        self.heights.iter().copied().min().unwrap_or(0)
    }

    /// CSV snapshot. One dimension gives `site,height` rows; two dimensions a
    /// matrix with one row per second coordinate; higher dimensions a long
    /// table with one column per coordinate.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let bx = &self.bx;
        let l = bx.radius;
        match bx.dim {
            1 => {
                writeln!(w, "site,height")?;
                for (i, h) in self.heights.iter().enumerate() {
                    writeln!(w, "{},{}", bx.site_of(i)[0], h)?;
                }
            }
            2 => {
                let cols: Vec<String> = (-l..=l).map(|x| format!("x1={x}")).collect();
                writeln!(w, "x2,{}", cols.join(","))?;
                let side = bx.side();
                for (row, chunk) in self.heights.chunks(side).enumerate() {
                    let vals: Vec<String> = chunk.iter().map(|h| h.to_string()).collect();
                    writeln!(w, "{},{}", row as i32 - l, vals.join(","))?;
                }
            }
            d => {
                let cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
                writeln!(w, "{},height", cols.join(","))?;
                for (i, h) in self.heights.iter().enumerate() {
                    let s: Vec<String> = bx.site_of(i).iter().map(|c| c.to_string()).collect();
                    writeln!(w, "{},{}", s.join(","), h)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Mutable surface state that applies clock rings one at a time.
#[derive(Clone, Debug)]
pub struct Surface {
    topo: Topology,
    model: Model,
    heights: Vec<i64>,
}

impl Surface {
    /// Fails if `init` violates the model's constraint.
    pub fn new(bx: &LatticeBox, init: &InitialCondition, model: Model) -> Result<Self> {
        model.validate()?;
        init.check_admissible(bx, model)?;
        Ok(Self::from_heights(bx, init.heights(bx)?, model))
    }

    /// Skips the admissibility check.
    pub fn from_heights(bx: &LatticeBox, heights: Vec<i64>, model: Model) -> Self {
        Surface {
            topo: bx.topology(),
            model,
            heights,
        }
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<i64> {
        self.heights
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Applies a clock ring at site `idx`; returns the new height if it changed.
    #[inline]
    pub fn apply(&mut self, idx: usize) -> Option<i64> {
        let h = &mut self.heights;
        let cur = h[idx];
        let new = match self.model {
            Model::Rsos => {
                if self.topo.neighbors(idx).all(|j| h[j] >= cur) {
                    cur + 1
                } else {
                    cur
                }
            }
            Model::KRsos(k) => {
                let k = k as i64;
                self.topo.neighbors(idx).map(|j| k + h[j]).fold(cur + 1, i64::min)
            }
            Model::Bd => self.topo.neighbors(idx).map(|j| h[j]).fold(cur, i64::max) + 1,
        };
        (new != cur).then(|| {
            h[idx] = new;
            new
        })
    }
}

/// An update that changed the height of its site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptedUpdate {
    pub point: SpaceTimePoint,
    pub new_height: i64,
}

/// Compact log entry with the site given by its box index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoggedUpdate {
    pub time: f64,
    pub site: u32,
    pub height: i64,
}

/// Every accepted update of a run, in time order, with a per-site index.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptedLog {
    bx: LatticeBox,
    init: Vec<i64>,
    entries: Vec<LoggedUpdate>,
    per_site: Vec<Vec<u32>>,
}

impl AcceptedLog {
    pub(crate) fn new(bx: &LatticeBox, init: Vec<i64>) -> Self {
        AcceptedLog {
            per_site: vec![Vec::new(); bx.num_sites()],
            bx: bx.clone(),
            init,
            entries: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, e: LoggedUpdate) {
        self.per_site[e.site as usize].push(self.entries.len() as u32);
        self.entries.push(e);
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn initial_heights(&self) -> &[i64] {
        &self.init
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LoggedUpdate] {
        &self.entries
    }

    pub fn site_entries(&self, idx: usize) -> impl Iterator<Item = &LoggedUpdate> + '_ {
        self.per_site[idx].iter().map(|&k| &self.entries[k as usize])
    }

    /// The update that raised site `idx` to `height`, if it happened.
    pub fn at_height(&self, idx: usize, height: i64) -> Option<&LoggedUpdate> {
        let list = &self.per_site[idx];
        let first = self.entries[*list.first()? as usize].height;
        let k = usize::try_from(height - first).ok()?;
        let e = &self.entries[*list.get(k)? as usize];
        // Unit steps make the offset exact; otherwise fall back to a scan.
        if e.height == height {
            Some(e)
        } else {
            self.site_entries(idx).find(|e| e.height == height)
        }
    }

    pub fn to_update(&self, e: &LoggedUpdate) -> AcceptedUpdate {
        AcceptedUpdate {
            point: SpaceTimePoint {
                time: e.time,
                site: self.bx.site_of(e.site as usize),
            },
            new_height: e.height,
        }
    }

    pub fn updates(&self) -> impl Iterator<Item = AcceptedUpdate> + '_ {
        self.entries.iter().map(|e| self.to_update(e))
    }

    pub fn contains_event(&self, time: f64, idx: usize) -> bool {
        self.site_entries(idx).any(|e| e.time == time)
    }

    fn locate(&self, u: &AcceptedUpdate) -> Result<LoggedUpdate> {
        let idx = self.bx.index_of(&u.point.site).ok_or(Error::NotInLog)?;
        self.site_entries(idx)
            .find(|e| e.time == u.point.time && e.height == u.new_height)
            .copied()
            .ok_or(Error::NotInLog)
    }

    /// Foundation `F_u`: accepted updates one level below `u` at `u`'s site
    /// and its in-box neighbours.
    pub fn foundation(&self, u: &AcceptedUpdate) -> Result<Vec<AcceptedUpdate>> {
        Ok(self
            .foundation_entries(&self.locate(u)?)
            .iter()
            .map(|e| self.to_update(e))
            .collect())
    }

    pub(crate) fn foundation_entries(&self, u: &LoggedUpdate) -> Vec<LoggedUpdate> {
        let idx = u.site as usize;
        let topo = self.bx.topology();
        std::iter::once(idx)
            .chain(topo.neighbors(idx))
            .filter_map(|j| self.at_height(j, u.height - 1).copied())
            .collect()
    }

    /// Whether `u` is the first clock ring at its site after every update of
    /// its foundation. Holds for every RSOS update.
    pub fn first_after_foundation(&self, set: &EventSet, u: &AcceptedUpdate) -> Result<bool> {
        let e = self.locate(u)?;
        let topo = self.bx.topology();
        Ok(first_after_foundation_with(self, set, &topo, &e))
    }

    /// JSON Lines `{t, x, h}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            let site = self.bx.site_of(e.site as usize);
            let coords: Vec<String> = site.iter().map(|c| c.to_string()).collect();
            writeln!(
                w,
                "{{\"t\":{},\"x\":[{}],\"h\":{}}}",
                f64_17(e.time),
                coords.join(","),
                e.height
            )?;
        }
        Ok(())
    }
}

pub(crate) fn first_after_foundation_with(
    log: &AcceptedLog,
    set: &EventSet,
    topo: &Topology,
    e: &LoggedUpdate,
) -> bool {
    let idx = e.site as usize;
    let mut after = 0.0f64;
    for j in std::iter::once(idx).chain(topo.neighbors(idx)) {
        if let Some(f) = log.at_height(j, e.height - 1) {
            after = after.max(f.time);
        }
    }
    let times = set.site_times(idx);
    let k = times.partition_point(|&t| t <= after);
    times.get(k) == Some(&e.time)
}

/// Result of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub field: HeightField,
    pub log: AcceptedLog,
    /// Fields at the requested snapshot times, in the order given.
    pub snapshots: Vec<HeightField>,
}

/// Processes every event with time `<= until` in time order.
pub fn evolve(set: &EventSet, init: &InitialCondition, model: Model, until: f64) -> Result<Evolution> {
    evolve_with_snapshots(set, init, model, until, &[])
}

pub fn evolve_with_snapshots(
    set: &EventSet,
    init: &InitialCondition,
    model: Model,
    until: f64,
    snapshot_times: &[f64],
) -> Result<Evolution> {
    let bx = set.bx();
    if !(until >= 0.0 && until <= bx.horizon) {
        return Err(Error::OutOfHorizon {
            time: until,
            horizon: bx.horizon,
        });
    }
    let mut surface = Surface::new(bx, init, model)?;
    let mut log = AcceptedLog::new(bx, surface.heights().to_vec());
    let mut order: Vec<usize> = (0..snapshot_times.len()).collect();
    order.sort_by(|&a, &b| snapshot_times[a].total_cmp(&snapshot_times[b]));
    let mut snaps: Vec<Option<HeightField>> = vec![None; snapshot_times.len()];
    let mut next = 0;
    let take = |surface: &Surface, clock: f64| HeightField {
        bx: bx.clone(),
        heights: surface.heights().to_vec(),
        clock,
    };
    for &Event { time, site } in set.events_until(until) {
        while next < order.len() && snapshot_times[order[next]] < time {
            snaps[order[next]] = Some(take(&surface, snapshot_times[order[next]]));
            next += 1;
        }
        if let Some(height) = surface.apply(site as usize) {
            log.push(LoggedUpdate { time, site, height });
        }
    }
    for &k in &order[next..] {
        snaps[k] = Some(take(&surface, snapshot_times[k]));
    }
    Ok(Evolution {
        field: take(&surface, until),
        log,
        snapshots: snaps.into_iter().map(|s| s.expect("every snapshot filled")).collect(),
    })
}

/// Heights after every event strictly before `before`.
pub fn heights_before(set: &EventSet, init: &[i64], model: Model, before: f64) -> Vec<i64> {
    let mut surface = Surface::from_heights(set.bx(), init.to_vec(), model);
    for e in set.events() {
        if e.time >= before {
            break;
        }
        surface.apply(e.site as usize);
    }
    surface.into_heights()
}
