//! The random Poisson lattice: clock rings of independent rate-`λ` Poisson
//! clocks over every site of a finite box `[-L, L]^d`, observed on `(0, T)`.
//!
//! Event times are stored on the grid of multiples of `ulp(T)`, which makes
//! the reversal `t ↦ T - t` exact in binary floating point, so reversing twice
//! returns the original set bit for bit.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::rng::site_stream;

/// Refuse to generate boxes expected to hold more events than this.
pub const DEFAULT_EVENT_BUDGET: u64 = 50_000_000;

const NO_NEIGHBOR: u32 = u32::MAX;

/// Integer lattice coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i32>);

impl Site {
    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).sum()
    }

    pub fn linf_norm(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).max().unwrap_or(0)
    }

    pub fn l1_distance(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a as i64 - b as i64).abs())
            .sum()
    }
}

impl Deref for Site {
    type Target = [i32];

    fn deref(&self) -> &[i32] {
        &self.0
    }
}

impl From<Vec<i32>> for Site {
    fn from(v: Vec<i32>) -> Self {
        Site(v)
    }
}

impl<const N: usize> From<[i32; N]> for Site {
    fn from(v: [i32; N]) -> Self {
        Site(v.to_vec())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A clock ring `(t, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    #[serde(rename = "t")]
    pub time: f64,
    #[serde(rename = "x")]
    pub site: Site,
}

impl SpaceTimePoint {
    pub fn new(time: f64, site: impl Into<Site>) -> Self {
        SpaceTimePoint {
            time,
            site: site.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Sites on the faces of the box simply have fewer neighbours.
    #[default]
    Free,
    /// Coordinates wrap around modulo `2L + 1`.
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Boundary::Free),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Parse(format!("unknown boundary `{other}`"))),
        }
    }
}

/// The space-time window `[-L, L]^d × (0, T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub dim: usize,
    pub radius: i32,
    pub horizon: f64,
    pub boundary: Boundary,
}

impl LatticeBox {
    pub fn new(dim: usize, radius: i32, horizon: f64, boundary: Boundary) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBox("dimension must be at least 1".into()));
        }
        if radius < 1 {
            return Err(Error::InvalidBox(format!("radius must be at least 1, got {radius}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidBox(format!("horizon must be positive, got {horizon}")));
        }
        let sites = (2.0 * radius as f64 + 1.0).powi(dim as i32);
        if sites >= (u32::MAX / 2) as f64 {
            return Err(Error::InvalidBox(format!("{sites} sites do not fit a site index")));
        }
        Ok(LatticeBox {
            dim,
            radius,
            horizon,
            boundary,
        })
    }

    /// Free-boundary box.
    pub fn free(dim: usize, radius: i32, horizon: f64) -> Result<Self> {
        Self::new(dim, radius, horizon, Boundary::Free)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.dim, self.radius, horizon, self.boundary)
    }

    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn num_sites(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn contains(&self, site: &[i32]) -> bool {
        site.len() == self.dim && site.iter().all(|c| c.abs() <= self.radius)
    }

    pub fn index_of(&self, site: &[i32]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let side = self.side();
        let mut idx = 0;
        for &c in site.iter().rev() {
            idx = idx * side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    pub(crate) fn require_index(&self, site: &[i32]) -> Result<usize> {
        self.index_of(site).ok_or_else(|| Error::OutOfBox {
            site: site.to_vec(),
            radius: self.radius,
        })
    }

    pub fn site_of(&self, mut idx: usize) -> Site {
        let side = self.side();
        let mut coords = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            coords.push((idx % side) as i32 - self.radius);
            idx /= side;
        }
        Site(coords)
    }

    pub fn origin_index(&self) -> usize {
        self.index_of(&vec![0; self.dim]).expect("origin is always inside")
    }

    /// Whether the site touches a face of the box.
    pub fn on_face(&self, idx: usize) -> bool {
        let side = self.side();
        let mut idx = idx;
        for _ in 0..self.dim {
            let c = idx % side;
            if c == 0 || c == side - 1 {
                return true;
            }
            idx /= side;
        }
        false
    }

    /// Spacing of the time grid on which event times are stored.
    pub fn time_grain(&self) -> f64 {
        let t = self.horizon;
        let up = f64::from_bits(t.to_bits() + 1);
        up - t
    }

    pub fn snap_time(&self, t: f64) -> f64 {
        let g = self.time_grain();
        (t / g).round() * g
    }

    /// Neighbour offsets in slot order `+e1, -e1, +e2, -e2, ...`.
    pub fn neighbor_offsets(&self) -> Vec<Site> {
        (0..2 * self.dim)
            .map(|slot| {
                let mut v = vec![0; self.dim];
                v[slot / 2] = if slot % 2 == 0 { 1 } else { -1 };
                Site(v)
            })
            .collect()
    }

    pub fn topology(&self) -> Topology {
        let n = self.num_sites();
        let side = self.side();
        let degree = 2 * self.dim;
        let mut table = vec![NO_NEIGHBOR; n * degree];
        for idx in 0..n {
            let mut stride = 1;
            for axis in 0..self.dim {
                let c = (idx / stride) % side;
                let up = if c + 1 < side {
                    Some(idx + stride)
                } else if self.boundary == Boundary::Periodic {
                    Some(idx - c * stride)
                } else {
                    None
                };
                let down = if c > 0 {
                    Some(idx - stride)
                } else if self.boundary == Boundary::Periodic {
                    Some(idx + (side - 1) * stride)
                } else {
                    None
                };
                if let Some(j) = up {
                    table[idx * degree + 2 * axis] = j as u32;
                }
                if let Some(j) = down {
                    table[idx * degree + 2 * axis + 1] = j as u32;
                }
                stride *= side;
            }
        }
        Topology { degree, table }
    }
}

/// Neighbour table of a box.
#[derive(Clone, Debug)]
pub struct Topology {
    degree: usize,
    table: Vec<u32>,
}

impl Topology {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Neighbour in slot `slot` (see [`LatticeBox::neighbor_offsets`]).
    #[inline]
    pub fn neighbor(&self, idx: usize, slot: usize) -> Option<usize> {
        let j = self.table[idx * self.degree + slot];
        (j != NO_NEIGHBOR).then_some(j as usize)
    }

    #[inline]
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.table[idx * self.degree..(idx + 1) * self.degree]
            .iter()
            .filter(|&&j| j != NO_NEIGHBOR)
            .map(|&j| j as usize)
    }

    /// Whether `b - a ∈ N₀` in the box graph.
    pub fn adjacent_or_equal(&self, a: usize, b: usize) -> bool {
        a == b || self.neighbors(a).any(|j| j == b)
    }
}

/// A clock ring with the site given by its box index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: u32,
}

/// Generation parameters recorded with a generated set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rate: f64,
    pub seed: u64,
}

/// An immutable set of clock rings, indexed both per site and globally by time.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSet {
    bx: LatticeBox,
    per_site: Vec<Vec<f64>>,
    global: Vec<Event>,
    provenance: Option<Provenance>,
}

impl EventSet {
    pub fn empty(bx: &LatticeBox) -> Self {
        EventSet {
            bx: bx.clone(),
            per_site: vec![Vec::new(); bx.num_sites()],
            global: Vec::new(),
            provenance: None,
        }
    }

    /// Poisson clocks of the given rate at every site, a pure function of
    /// `(bx, rate, seed)`.
    pub fn generate(bx: &LatticeBox, rate: f64, seed: u64) -> Result<Self> {
        Self::generate_with_budget(bx, rate, seed, DEFAULT_EVENT_BUDGET)
    }

    pub fn generate_with_budget(bx: &LatticeBox, rate: f64, seed: u64, budget: u64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidRate(rate));
        }
        let expected = bx.num_sites() as f64 * bx.horizon * rate;
        if expected > budget as f64 {
            return Err(Error::EventBudgetExceeded { expected, budget });
        }
        let mut set = Self::draw(bx, rate, seed, None);
        if set.global.windows(2).any(|w| w[0].time == w[1].time) {
            // Cross-site collision on the time grid: redraw with a global guard.
            let mut taken = HashSet::with_capacity(set.global.len());
            set = Self::draw(bx, rate, seed, Some(&mut taken));
        }
        set.provenance = Some(Provenance { rate, seed });
        Ok(set)
    }

    fn draw(bx: &LatticeBox, rate: f64, seed: u64, mut taken: Option<&mut HashSet<u64>>) -> Self {
        let n = bx.num_sites();
        let horizon = bx.horizon;
        let mut per_site = Vec::with_capacity(n);
        let mut global = Vec::with_capacity((n as f64 * horizon * rate * 1.05) as usize + 16);
        for idx in 0..n {
            let site = bx.site_of(idx);
            let mut rng = site_stream(seed, &site);
            let mut times = Vec::new();
            let mut t = 0.0;
            let mut last = 0.0;
            loop {
                let gap: f64 = Exp1.sample(&mut rng);
                t += gap / rate;
                let s = bx.snap_time(t);
                if s >= horizon {
                    break;
                }
                if s <= last {
                    continue;
                }
                if let Some(taken) = taken.as_deref_mut() {
                    if !taken.insert(s.to_bits()) {
                        continue;
                    }
                }
                times.push(s);
                global.push(Event {
                    time: s,
                    site: idx as u32,
                });
                last = s;
            }
            per_site.push(times);
        }
        global.sort_unstable_by(|a, b| a.time.total_cmp(&b.time));
        EventSet {
            bx: bx.clone(),
            per_site,
            global,
            provenance: None,
        }
    }

    /// A hand-built set. Times are snapped to the horizon grid.
    pub fn from_points<I>(bx: &LatticeBox, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = SpaceTimePoint>,
    {
        let mut global = Vec::new();
        for p in points {
            global.push(Self::check_point(bx, &p)?);
        }
        Self::from_events(bx, global)
    }

    fn check_point(bx: &LatticeBox, p: &SpaceTimePoint) -> Result<Event> {
        let idx = bx.require_index(&p.site)?;
        let time = bx.snap_time(p.time);
        if !(time > 0.0 && time < bx.horizon) {
            return Err(Error::OutOfHorizon {
                time: p.time,
                horizon: bx.horizon,
            });
        }
        Ok(Event {
            time,
            site: idx as u32,
        })
    }

    fn from_events(bx: &LatticeBox, mut global: Vec<Event>) -> Result<Self> {
        global.sort_unstable_by(|a, b| a.time.total_cmp(&b.time));
        if let Some(w) = global.windows(2).find(|w| w[0].time == w[1].time) {
            return Err(Error::DuplicateTime(w[0].time));
        }
        let mut per_site = vec![Vec::new(); bx.num_sites()];
        for e in &global {
            per_site[e.site as usize].push(e.time);
        }
        Ok(EventSet {
            bx: bx.clone(),
            per_site,
            global,
            provenance: None,
        })
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn provenance(&self) -> Option<Provenance> {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// All events in increasing time order.
    pub fn events(&self) -> &[Event] {
        &self.global
    }

    /// Events with time `<= until`.
    pub fn events_until(&self, until: f64) -> &[Event] {
        let end = self.global.partition_point(|e| e.time <= until);
        &self.global[..end]
    }

    /// Event times at a site, increasing.
    pub fn site_times(&self, idx: usize) -> &[f64] {
        &self.per_site[idx]
    }

    /// `|U_x|` restricted to `(0, until]`.
    pub fn count_at(&self, idx: usize, until: f64) -> usize {
        self.per_site[idx].partition_point(|&t| t <= until)
    }

    pub fn point(&self, e: &Event) -> SpaceTimePoint {
        SpaceTimePoint {
            time: e.time,
            site: self.bx.site_of(e.site as usize),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = SpaceTimePoint> + '_ {
        self.global.iter().map(|e| self.point(e))
    }

    /// Locate a point, snapping its time to the grid.
    pub fn find(&self, p: &SpaceTimePoint) -> Option<Event> {
        let idx = self.bx.index_of(&p.site)?;
        let time = self.bx.snap_time(p.time);
        self.per_site[idx]
            .binary_search_by(|t| t.total_cmp(&time))
            .ok()
            .map(|_| Event {
                time,
                site: idx as u32,
            })
    }

    /// A new set with `p` added; `self` is untouched.
    pub fn insert_event(&self, p: &SpaceTimePoint) -> Result<Self> {
        let e = Self::check_point(&self.bx, p)?;
        let pos = self.global.partition_point(|g| g.time < e.time);
        if self.global.get(pos).is_some_and(|g| g.time == e.time) {
            return Err(Error::DuplicateTime(e.time));
        }
        let mut out = self.clone();
        out.global.insert(pos, e);
        let times = &mut out.per_site[e.site as usize];
        let at = times.partition_point(|&t| t < e.time);
        times.insert(at, e.time);
        out.provenance = None;
        Ok(out)
    }

    /// A new set with the event at `p` removed.
    pub fn remove_event(&self, p: &SpaceTimePoint) -> Result<Self> {
        let e = self.find(p).ok_or_else(|| Error::MissingEvent {
            time: p.time,
            site: p.site.0.clone(),
        })?;
        let mut out = self.clone();
        let pos = out.global.partition_point(|g| g.time < e.time);
        out.global.remove(pos);
        let times = &mut out.per_site[e.site as usize];
        let at = times.partition_point(|&t| t < e.time);
        times.remove(at);
        out.provenance = None;
        Ok(out)
    }

    /// Time reversal `t ↦ T - t`.
    pub fn reverse(&self) -> Self {
        let horizon = self.bx.horizon;
        let global = self
            .global
            .iter()
            .rev()
            .map(|e| Event {
                time: horizon - e.time,
                site: e.site,
            })
            .collect();
        let per_site = self
            .per_site
            .iter()
            .map(|ts| ts.iter().rev().map(|&t| horizon - t).collect())
            .collect();
        EventSet {
            bx: self.bx.clone(),
            per_site,
            global,
            provenance: self.provenance,
        }
    }

    /// Lattice depth `D_s(p)`: the most events a backwards path from `p`
    /// can pass strictly between times `s` and `p.time`.
    pub fn depth(&self, p: &SpaceTimePoint, s: f64) -> Result<u64> {
        let x = self.bx.require_index(&p.site)?;
        let t = self.bx.snap_time(p.time);
        if t <= s {
            return Ok(0);
        }
        let topo = self.bx.topology();
        let mut depth = vec![0u64; self.bx.num_sites()];
        let lo = self.global.partition_point(|e| e.time <= s);
        let hi = self.global.partition_point(|e| e.time < t);
        for e in &self.global[lo..hi] {
            let i = e.site as usize;
            let best = topo.neighbors(i).map(|j| depth[j]).fold(depth[i], u64::max);
            depth[i] = best + 1;
        }
        let at_event = self.per_site[x].binary_search_by(|u| u.total_cmp(&t)).is_ok();
        Ok(if at_event {
            topo.neighbors(x).map(|j| depth[j]).fold(depth[x], u64::max)
        } else {
            depth[x]
        })
    }

    /// JSON Lines: a header object, then one `{t, x}` object per event in
    /// time order. Times carry 17 significant digits.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (rate, seed) = match self.provenance {
            Some(p) => (f64_17(p.rate), p.seed.to_string()),
            None => ("null".to_string(), "null".to_string()),
        };
        let boundary = match self.bx.boundary {
            Boundary::Free => "free",
            Boundary::Periodic => "periodic",
        };
        writeln!(
            w,
            "{{\"d\":{},\"L\":{},\"T\":{},\"rate\":{},\"seed\":{},\"boundary\":\"{}\"}}",
            self.bx.dim,
            self.bx.radius,
            f64_17(self.bx.horizon),
            rate,
            seed,
            boundary
        )?;
        for e in &self.global {
            let site = self.bx.site_of(e.site as usize);
            let coords: Vec<String> = site.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{{\"t\":{},\"x\":[{}]}}", f64_17(e.time), coords.join(","))?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            d: usize,
            #[serde(rename = "L")]
            radius: i32,
            #[serde(rename = "T")]
            horizon: f64,
            rate: Option<f64>,
            seed: Option<u64>,
            boundary: Boundary,
        }
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let header: Header =
            serde_json::from_str(&header_line).map_err(|e| Error::Parse(format!("header: {e}")))?;
        let bx = LatticeBox::new(header.d, header.radius, header.horizon, header.boundary)?;
        let mut global = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let p: SpaceTimePoint = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("event line {}: {e}", n + 2)))?;
            let e = Self::check_point(&bx, &p)?;
            if e.time != p.time {
                return Err(Error::Parse(format!(
                    "event line {}: time {} is not on the horizon grid",
                    n + 2,
                    p.time
                )));
            }
            global.push(e);
        }
        let mut set = Self::from_events(&bx, global)?;
        if let (Some(rate), Some(seed)) = (header.rate, header.seed) {
            set.provenance = Some(Provenance { rate, seed });
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(radius: i32, horizon: f64) -> LatticeBox {
        LatticeBox::free(1, radius, horizon).unwrap()
    }

    #[test]
    fn box_rejects_degenerate_parameters() {
        assert!(LatticeBox::free(0, 2, 1.0).is_err());
        assert!(LatticeBox::free(1, 0, 1.0).is_err());
        assert!(LatticeBox::free(1, 2, 0.0).is_err());
        assert!(LatticeBox::free(1, 2, f64::NAN).is_err());
    }

    #[test]
    fn index_round_trips() {
        let bx = LatticeBox::free(3, 2, 1.0).unwrap();
        for idx in 0..bx.num_sites() {
            assert_eq!(bx.index_of(&bx.site_of(idx)), Some(idx));
        }
        assert_eq!(bx.site_of(bx.origin_index()), Site::origin(3));
        assert_eq!(bx.index_of(&[3, 0, 0]), None);
    }

    #[test]
    fn free_and_periodic_neighbours() {
        let free = line(2, 1.0).topology();
        let left = line(2, 1.0).index_of(&[-2]).unwrap();
        assert_eq!(free.neighbors(left).count(), 1);
        let per = LatticeBox::new(1, 2, 1.0, Boundary::Periodic).unwrap();
        let topo = per.topology();
        let n: Vec<_> = topo.neighbors(left).map(|j| per.site_of(j)).collect();
        assert_eq!(n, vec![Site(vec![-1]), Site(vec![2])]);
    }

    #[test]
    fn generation_is_deterministic() {
        let bx = line(2, 1.0);
        let a = EventSet::generate(&bx, 1.0, 99).unwrap();
        let b = EventSet::generate(&bx, 1.0, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_jsonl_string(), b.to_jsonl_string());
        assert_ne!(a, EventSet::generate(&bx, 1.0, 100).unwrap());
    }

    #[test]
    fn generation_rejects_bad_rate_and_budget() {
        let bx = line(2, 1.0);
        assert!(matches!(EventSet::generate(&bx, 0.0, 1), Err(Error::InvalidRate(_))));
        assert!(matches!(EventSet::generate(&bx, -1.0, 1), Err(Error::InvalidRate(_))));
        assert!(matches!(
            EventSet::generate_with_budget(&bx, 1.0, 1, 3),
            Err(Error::EventBudgetExceeded { .. })
        ));
    }

    #[test]
    fn enlarging_the_box_keeps_inner_clocks() {
        let small = EventSet::generate(&line(2, 3.0), 1.0, 5).unwrap();
        let big = EventSet::generate(&line(4, 3.0), 1.0, 5).unwrap();
        for x in -2..=2 {
            let a = small.site_times(small.bx().index_of(&[x]).unwrap());
            let b = big.site_times(big.bx().index_of(&[x]).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn views_agree() {
        let bx = LatticeBox::free(2, 3, 2.0).unwrap();
        let set = EventSet::generate(&bx, 1.5, 3).unwrap();
        let per_site: usize = (0..bx.num_sites()).map(|i| set.site_times(i).len()).sum();
        assert_eq!(per_site, set.len());
        for e in set.events() {
            assert!(set.site_times(e.site as usize).contains(&e.time));
            assert!(e.time > 0.0 && e.time < bx.horizon);
        }
        assert!(set.events().windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn insert_into_empty_and_back() {
        let bx = line(2, 1.0);
        let empty = EventSet::empty(&bx);
        let p = SpaceTimePoint::new(0.5, [1]);
        let one = empty.insert_event(&p).unwrap();
        assert_eq!(one.points().collect::<Vec<_>>(), vec![p.clone()]);
        assert!(empty.is_empty());
        assert_eq!(one.remove_event(&p).unwrap(), empty);
    }

    #[test]
    fn insert_keeps_site_order() {
        let bx = line(2, 1.0);
        let set = EventSet::from_points(
            &bx,
            [0.1, 0.3, 0.7].map(|t| SpaceTimePoint::new(t, [0])),
        )
        .unwrap();
        let out = set.insert_event(&SpaceTimePoint::new(0.5, [0])).unwrap();
        let times = out.site_times(bx.index_of(&[0]).unwrap());
        assert_eq!(times.len(), 4);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn insert_rejects_duplicates_and_outsiders() {
        let bx = line(2, 1.0);
        let set = EventSet::from_points(&bx, [SpaceTimePoint::new(0.25, [0])]).unwrap();
        assert!(matches!(
            set.insert_event(&SpaceTimePoint::new(0.25, [1])),
            Err(Error::DuplicateTime(_))
        ));
        assert!(matches!(
            set.insert_event(&SpaceTimePoint::new(0.5, [3])),
            Err(Error::OutOfBox { .. })
        ));
        assert!(matches!(
            set.insert_event(&SpaceTimePoint::new(1.5, [0])),
            Err(Error::OutOfHorizon { .. })
        ));
    }

    #[test]
    fn reversal_arithmetic() {
        let bx = line(2, 1.0);
        let set = EventSet::from_points(
            &bx,
            [SpaceTimePoint::new(0.2, [0]), SpaceTimePoint::new(0.9, [1])],
        )
        .unwrap();
        let rev = set.reverse();
        let pts: Vec<_> = rev.points().collect();
        assert_eq!(pts[0].site, Site(vec![1]));
        assert!((pts[0].time - 0.1).abs() < 1e-15);
        assert_eq!(pts[1].site, Site(vec![0]));
        assert!((pts[1].time - 0.8).abs() < 1e-15);
        assert_eq!(rev.reverse(), set);
        assert_eq!(EventSet::empty(&bx).reverse(), EventSet::empty(&bx));
    }

    #[test]
    fn depth_edge_cases() {
        let bx = line(2, 1.0);
        let empty = EventSet::empty(&bx);
        assert_eq!(empty.depth(&SpaceTimePoint::new(0.9, [0]), 0.0).unwrap(), 0);
        let set = EventSet::generate(&bx, 3.0, 1).unwrap();
        assert_eq!(set.depth(&SpaceTimePoint::new(0.4, [0]), 0.5).unwrap(), 0);
    }

    /// Exhaustive search over stay/hop decisions on a free line.
    fn oracle_depth(rings: &[(f64, i32)], l: i32, t: f64, x: i32, s: f64) -> u64 {
        fn below(rings: &[(f64, i32)], l: i32, tau: f64, y: i32, s: f64) -> u64 {
            let next = rings
                .iter()
                .filter(|&&(u, z)| z == y && u > s && u < tau)
                .map(|&(u, _)| u)
                .fold(f64::NEG_INFINITY, f64::max);
            if next == f64::NEG_INFINITY {
                return 0;
            }
            1 + hop(rings, l, next, y, s)
        }
        fn hop(rings: &[(f64, i32)], l: i32, tau: f64, y: i32, s: f64) -> u64 {
            [-1, 0, 1]
                .iter()
                .filter(|d| (y + **d).abs() <= l)
                .map(|d| below(rings, l, tau, y + d, s))
                .max()
                .unwrap()
        }
        if t <= s {
            return 0;
        }
        if rings.iter().any(|&(u, z)| u == t && z == x) {
            hop(rings, l, t, x, s)
        } else {
            below(rings, l, t, x, s)
        }
    }

    #[test]
    fn depth_of_hand_built_set() {
        let bx = line(2, 1.0);
        let rings = [(0.3, 0), (0.6, 1), (0.9, 0)];
        let set = EventSet::from_points(&bx, rings.map(|(t, x)| SpaceTimePoint::new(t, [x]))).unwrap();
        let rings: Vec<(f64, i32)> = set.points().map(|p| (p.time, p.site[0])).collect();
        let p = set.points().last().unwrap();
        let expected = oracle_depth(&rings, 2, p.time, 0, 0.0);
        assert_eq!(expected, 2);
        assert_eq!(set.depth(&p, 0.0).unwrap(), expected);
    }

    #[test]
    fn depth_matches_exhaustive_search() {
        for seed in 0..200 {
            let bx = line(2, 2.0);
            let set = EventSet::generate(&bx, 0.6, seed).unwrap();
            if set.len() > 12 {
                continue;
            }
            let rings: Vec<(f64, i32)> = set.points().map(|p| (p.time, p.site[0])).collect();
            let mut probes: Vec<SpaceTimePoint> = set.points().collect();
            probes.push(SpaceTimePoint::new(2.0 - 1e-9, [1]));
            for p in probes {
                for s in [0.0, 0.5] {
                    let t = bx.snap_time(p.time);
                    assert_eq!(set.depth(&p, s).unwrap(), oracle_depth(&rings, 2, t, p.site[0], s));
                }
            }
        }
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let bx = LatticeBox::new(2, 2, 3.0, Boundary::Periodic).unwrap();
        let set = EventSet::generate(&bx, 0.7, 11).unwrap();
        let text = set.to_jsonl_string();
        let back = EventSet::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.to_jsonl_string(), text);
        assert!(text.lines().next().unwrap().contains("\"boundary\":\"periodic\""));
    }
}
