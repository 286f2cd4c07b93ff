//! Pyramids and dual pyramids.
//!
//! A pyramid of height `h` centred at `x` stacks layers `L_1, ..., L_h`. Each
//! layer holds exactly one ring at every site of an `ℓ₁` ball around `x`
//! (clipped to the box), and a ring in layer `k` comes after the rings of
//! layer `k - 1` at adjacent sites. Upright pyramids shrink towards the top;
//! dual pyramids start from a single ring and widen.
//!
//! Two readings of the geometry are supported. The foundation-consistent law
//! uses radius `h - k` for upright layer `k` and `k - 1` for dual layer `k`,
//! with adjacency measured from each ring. The literal law adds one to every
//! radius and measures adjacency from the centre.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{EventSet, LatticeBox, Site, SpaceTimePoint};
use crate::surface::{heights_before, AcceptedLog, InitialCondition, Model};

/// Largest set accepted by the brute-force searches.
pub const BRUTE_FORCE_CAP: usize = 12;

/// Refuse to list more pyramids than this.
pub const ENUMERATION_LIMIT: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PyramidKind {
    Upright,
    Dual,
}

impl PyramidKind {
    pub fn flipped(self) -> Self {
        match self {
            PyramidKind::Upright => PyramidKind::Dual,
            PyramidKind::Dual => PyramidKind::Upright,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiusLaw {
    #[default]
    FoundationConsistent,
    Literal,
}

impl std::str::FromStr for RadiusLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "foundation_consistent" => Ok(RadiusLaw::FoundationConsistent),
            "literal" => Ok(RadiusLaw::Literal),
            other => Err(Error::Parse(format!("unknown radius law `{other}`"))),
        }
    }
}

/// Radius of layer `k` (1-based) in a pyramid of height `h`.
pub fn layer_radius(kind: PyramidKind, law: RadiusLaw, h: usize, k: usize) -> i64 {
    let (h, k) = (h as i64, k as i64);
    match (kind, law) {
        (PyramidKind::Upright, RadiusLaw::FoundationConsistent) => h - k,
        (PyramidKind::Upright, RadiusLaw::Literal) => h - k + 1,
        (PyramidKind::Dual, RadiusLaw::FoundationConsistent) => k - 1,
        (PyramidKind::Dual, RadiusLaw::Literal) => k,
    }
}

/// Box indices of the ball of `radius` around `center`, ascending.
fn ball(bx: &LatticeBox, center: &Site, radius: i64) -> Vec<usize> {
    (0..bx.num_sites())
        .filter(|&i| bx.site_of(i).l1_distance(center) <= radius)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PyramidRepr", try_from = "PyramidRepr")]
pub struct Pyramid {
    pub kind: PyramidKind,
    pub center: Site,
    /// Every ring lies strictly before this time.
    pub within: f64,
    pub layers: Vec<Vec<SpaceTimePoint>>,
}

#[derive(Serialize, Deserialize)]
struct PyramidRepr {
    kind: PyramidKind,
    center: Site,
    height: usize,
    within: f64,
    layers: Vec<Vec<SpaceTimePoint>>,
}

impl From<Pyramid> for PyramidRepr {
    fn from(p: Pyramid) -> Self {
        PyramidRepr {
            kind: p.kind,
            center: p.center,
            height: p.layers.len(),
            within: p.within,
            layers: p.layers,
        }
    }
}

impl TryFrom<PyramidRepr> for Pyramid {
    type Error = String;

    fn try_from(r: PyramidRepr) -> std::result::Result<Self, String> {
        if r.height != r.layers.len() {
            return Err(format!("height {} but {} layers", r.height, r.layers.len()));
        }
        Ok(Pyramid {
            kind: r.kind,
            center: r.center,
            within: r.within,
            layers: r.layers,
        })
    }
}

impl Pyramid {
    pub fn height(&self) -> usize {
        self.layers.len()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, &SpaceTimePoint)> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.iter().map(move |p| (k + 1, p)))
    }

    /// Whether the layer geometry and timing hold under `law`.
    pub fn validate(&self, bx: &LatticeBox, law: RadiusLaw) -> bool {
        self.check(bx, law).is_ok()
    }

    /// As [`Pyramid::validate`], and every ring is present in `set`.
    pub fn validate_against(&self, set: &EventSet, law: RadiusLaw) -> bool {
        self.validate(set.bx(), law) && self.points().all(|(_, p)| set.find(p).is_some_and(|e| e.time == p.time))
    }

    pub fn check(&self, bx: &LatticeBox, law: RadiusLaw) -> std::result::Result<(), String> {
        let h = self.height();
        if h == 0 {
            return Ok(());
        }
        let c = bx
            .index_of(&self.center)
            .ok_or_else(|| "centre outside the box".to_string())?;
        let topo = bx.topology();
        let mut prev: Vec<(usize, f64)> = Vec::new();
        for (k0, layer) in self.layers.iter().enumerate() {
            let k = k0 + 1;
            let r = layer_radius(self.kind, law, h, k);
            if r < 0 {
                return Err(format!("layer {k} has negative radius"));
            }
            let mut sites = Vec::with_capacity(layer.len());
            for p in layer {
                let i = bx
                    .index_of(&p.site)
                    .ok_or_else(|| format!("layer {k} leaves the box"))?;
                if !(p.time > 0.0 && p.time < self.within) {
                    return Err(format!("layer {k} has a ring outside (0, within)"));
                }
                sites.push((i, p.time));
            }
            let mut idx: Vec<usize> = sites.iter().map(|s| s.0).collect();
            idx.sort_unstable();
            if idx != ball(bx, &self.center, r) {
                return Err(format!("layer {k} does not cover the ball of radius {r} once"));
            }
            for &(i, t) in &sites {
                let anchor = match law {
                    RadiusLaw::FoundationConsistent => i,
                    RadiusLaw::Literal => c,
                };
                if prev
                    .iter()
                    .any(|&(j, s)| topo.adjacent_or_equal(anchor, j) && s >= t)
                {
                    return Err(format!("layer {k} has a ring before an adjacent ring of layer {}", k - 1));
                }
            }
            prev = sites;
        }
        Ok(())
    }

    /// Time reversal inside a box of the given horizon: every ring `(t, x)`
    /// becomes `(T - t, x)`, layers swap order and the kind flips.
    pub fn reverse(&self, bx: &LatticeBox) -> Pyramid {
        let horizon = bx.horizon;
        let layers = self
            .layers
            .iter()
            .rev()
            .map(|l| {
                let mut l: Vec<SpaceTimePoint> = l
                    .iter()
                    .map(|p| SpaceTimePoint {
                        time: horizon - p.time,
                        site: p.site.clone(),
                    })
                    .collect();
                sort_layer(bx, &mut l);
                l
            })
            .collect();
        Pyramid {
            kind: self.kind.flipped(),
            center: self.center.clone(),
            within: horizon,
            layers,
        }
    }
}

fn sort_layer(bx: &LatticeBox, layer: &mut [SpaceTimePoint]) {
    layer.sort_by_key(|p| bx.index_of(&p.site));
}

/// The pyramid of height `h` read off an accepted log: layer `k` holds the
/// update to height `k` at each site of its ball. For upright pyramids the
/// log should start from zero; for dual pyramids from the well at `center`.
pub fn extract(log: &AcceptedLog, kind: PyramidKind, center: &Site, h: usize, within: f64) -> Result<Pyramid> {
    let bx = log.bx();
    bx.require_index(center)?;
    let mut layers = Vec::with_capacity(h);
    for k in 1..=h {
        let r = layer_radius(kind, RadiusLaw::FoundationConsistent, h, k);
        let mut layer = Vec::new();
        for i in ball(bx, center, r) {
            let e = log.at_height(i, k as i64).ok_or_else(|| {
                Error::InvalidPyramid(format!("no update to height {k} at {}", bx.site_of(i)))
            })?;
            layer.push(SpaceTimePoint {
                time: e.time,
                site: bx.site_of(i),
            });
        }
        layers.push(layer);
    }
    Ok(Pyramid {
        kind,
        center: center.clone(),
        within,
        layers,
    })
}

/// Replaces each layer by the earliest rings that keep the timing: the
/// first ring at each site after the adjacent rings of the layer below.
pub fn pushdown(set: &EventSet, p: &Pyramid) -> Result<Pyramid> {
    if !p.validate_against(set, RadiusLaw::FoundationConsistent) {
        return Err(Error::InvalidPyramid("input does not validate against the set".into()));
    }
    let bx = set.bx();
    let topo = bx.topology();
    let mut layers = Vec::with_capacity(p.height());
    let mut prev: Vec<(usize, f64)> = Vec::new();
    for layer in &p.layers {
        let mut out = Vec::with_capacity(layer.len());
        let mut cur = Vec::with_capacity(layer.len());
        for q in layer {
            let i = bx.require_index(&q.site)?;
            let after = prev
                .iter()
                .filter(|&&(j, _)| topo.adjacent_or_equal(i, j))
                .map(|&(_, s)| s)
                .fold(0.0, f64::max);
            let times = set.site_times(i);
            let t = times[times.partition_point(|&u| u <= after)];
            out.push(SpaceTimePoint {
                time: t,
                site: q.site.clone(),
            });
            cur.push((i, t));
        }
        layers.push(out);
        prev = cur;
    }
    Ok(Pyramid {
        kind: p.kind,
        center: p.center.clone(),
        within: p.within,
        layers,
    })
}

/// Whether each ring of layer `k` is the update to height `k` at its site.
pub fn lies_in_log(p: &Pyramid, log: &AcceptedLog) -> bool {
    let bx = log.bx();
    p.points().all(|(k, q)| {
        bx.index_of(&q.site)
            .and_then(|i| log.at_height(i, k as i64))
            .is_some_and(|e| e.time == q.time)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightMethod {
    /// Read off the matching surface process.
    ViaProcess,
    /// Search every layer assignment.
    BruteForce,
}

/// Largest upright pyramid centred at `x` with every ring before `t`.
pub fn max_pyramid_height(set: &EventSet, x: &Site, t: f64, method: HeightMethod) -> Result<u64> {
    max_height(set, PyramidKind::Upright, x, t, method)
}

/// Largest dual pyramid centred at `x` with every ring before `t`.
pub fn max_dual_pyramid_height(set: &EventSet, x: &Site, t: f64, method: HeightMethod) -> Result<u64> {
    max_height(set, PyramidKind::Dual, x, t, method)
}

fn max_height(set: &EventSet, kind: PyramidKind, x: &Site, t: f64, method: HeightMethod) -> Result<u64> {
    let bx = set.bx();
    let c = bx.require_index(x)?;
    match method {
        HeightMethod::ViaProcess => Ok(match kind {
            PyramidKind::Upright => heights_before(set, &vec![0; bx.num_sites()], Model::Rsos, t)[c] as u64,
            PyramidKind::Dual => dual_min_centered(set, x, t)? as u64,
        }),
        HeightMethod::BruteForce => {
            if set.len() > BRUTE_FORCE_CAP {
                return Err(Error::EnumerationCap {
                    count: set.len(),
                    cap: BRUTE_FORCE_CAP,
                });
            }
            let mut h = 0;
            loop {
                let mut found = false;
                Search::new(set, kind, x, h + 1, t).run(&mut |_| {
                    found = true;
                    false
                });
                if !found {
                    return Ok(h as u64);
                }
                h += 1;
            }
        }
    }
}

/// `min_y` of the RSOS surface grown from the well at `center`, using every
/// ring strictly before `before`.
pub fn dual_min_centered(set: &EventSet, center: &Site, before: f64) -> Result<i64> {
    let bx = set.bx();
    let init = InitialCondition::well_at(bx, center).heights(bx)?;
    Ok(heights_before(set, &init, Model::Rsos, before)
        .into_iter()
        .min()
        .unwrap_or(0))
}

/// Every foundation-consistent pyramid of the given kind centred at `x`
/// with rings before `t`, over all heights.
pub fn enumerate_pyramids(set: &EventSet, kind: PyramidKind, x: &Site, t: f64) -> Result<Vec<Pyramid>> {
    if set.len() > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationCap {
            count: set.len(),
            cap: BRUTE_FORCE_CAP,
        });
    }
    set.bx().require_index(x)?;
    let mut out = Vec::new();
    let mut overflow = false;
    for h in 1.. {
        let before = out.len();
        Search::new(set, kind, x, h, t).run(&mut |p| {
            out.push(p);
            if out.len() > ENUMERATION_LIMIT {
                overflow = true;
                return false;
            }
            true
        });
        if overflow {
            return Err(Error::EnumerationCap {
                count: out.len(),
                cap: ENUMERATION_LIMIT,
            });
        }
        if out.len() == before {
            break;
        }
    }
    Ok(out)
}

/// Backtracking over layer assignments of one height.
struct Search<'a> {
    set: &'a EventSet,
    kind: PyramidKind,
    center: Site,
    within: f64,
    /// `(layer, site)` slots, layer by layer.
    slots: Vec<(usize, usize)>,
    /// For each slot, the earlier slots of the layer below adjacent to it.
    below: Vec<Vec<usize>>,
    chosen: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(set: &'a EventSet, kind: PyramidKind, center: &Site, h: usize, within: f64) -> Self {
        let bx = set.bx();
        let topo = bx.topology();
        let mut slots = Vec::new();
        for k in 1..=h {
            for i in ball(bx, center, layer_radius(kind, RadiusLaw::FoundationConsistent, h, k)) {
                slots.push((k, i));
            }
        }
        let pos: HashMap<(usize, usize), usize> = slots.iter().enumerate().map(|(n, &s)| (s, n)).collect();
        let below = slots
            .iter()
            .map(|&(k, i)| {
                if k == 1 {
                    return Vec::new();
                }
                std::iter::once(i)
                    .chain(topo.neighbors(i))
                    .filter_map(|j| pos.get(&(k - 1, j)).copied())
                    .collect()
            })
            .collect();
        Search {
            set,
            kind,
            center: center.clone(),
            within,
            chosen: Vec::with_capacity(slots.len()),
            slots,
            below,
        }
    }

    /// Calls `visit` on each pyramid found; stops when it returns false.
    fn run(&mut self, visit: &mut dyn FnMut(Pyramid) -> bool) {
        self.step(visit);
    }

    fn step(&mut self, visit: &mut dyn FnMut(Pyramid) -> bool) -> bool {
        let n = self.chosen.len();
        if n == self.slots.len() {
            return visit(self.build());
        }
        let (_, site) = self.slots[n];
        let after = self.below[n].iter().map(|&m| self.chosen[m]).fold(0.0, f64::max);
        let times = self.set.site_times(site);
        let lo = times.partition_point(|&u| u <= after);
        let hi = times.partition_point(|&u| u < self.within);
        for &u in &times[lo..hi] {
            self.chosen.push(u);
            let go_on = self.step(visit);
            self.chosen.pop();
            if !go_on {
                return false;
            }
        }
        true
    }

    fn build(&self) -> Pyramid {
        let bx = self.set.bx();
        let h = self.slots.last().map_or(0, |s| s.0);
        let mut layers = vec![Vec::new(); h];
        for (&(k, i), &t) in self.slots.iter().zip(&self.chosen) {
            layers[k - 1].push(SpaceTimePoint {
                time: t,
                site: bx.site_of(i),
            });
        }
        Pyramid {
            kind: self.kind,
            center: self.center.clone(),
            within: self.within,
            layers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::evolve;

    fn small(seed: u64) -> Option<EventSet> {
        let bx = LatticeBox::free(1, 2, 2.0).unwrap();
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        (set.len() <= BRUTE_FORCE_CAP).then_some(set)
    }

    #[test]
    fn empty_pyramid_is_valid() {
        let bx = LatticeBox::free(1, 2, 1.0).unwrap();
        let p = Pyramid {
            kind: PyramidKind::Upright,
            center: Site(vec![0]),
            within: 1.0,
            layers: Vec::new(),
        };
        assert!(p.validate(&bx, RadiusLaw::FoundationConsistent));
        assert!(p.validate(&bx, RadiusLaw::Literal));
        let set = EventSet::empty(&bx);
        assert_eq!(max_pyramid_height(&set, &Site(vec![0]), 1.0, HeightMethod::BruteForce).unwrap(), 0);
        assert_eq!(max_pyramid_height(&set, &Site(vec![0]), 1.0, HeightMethod::ViaProcess).unwrap(), 0);
    }

    #[test]
    fn extracted_pyramids_validate_and_are_fixed_points() {
        let mut checked = 0;
        for seed in 0..300 {
            let bx = LatticeBox::free(1, 3, 3.0).unwrap();
            let set = EventSet::generate(&bx, 1.0, seed).unwrap();
            let ev = evolve(&set, &InitialCondition::Zero, Model::Rsos, 3.0).unwrap();
            for i in 0..bx.num_sites() {
                let x = bx.site_of(i);
                let h = ev.field.heights[i] as usize;
                let p = extract(&ev.log, PyramidKind::Upright, &x, h, 3.0).unwrap();
                assert!(p.validate_against(&set, RadiusLaw::FoundationConsistent));
                assert_eq!(pushdown(&set, &p).unwrap(), p);
                assert!(extract(&ev.log, PyramidKind::Upright, &x, h + 1, 3.0).is_err());
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn late_layer_breaks_timing() {
        let bx = LatticeBox::free(1, 2, 1.0).unwrap();
        let set = EventSet::from_points(
            &bx,
            [(0.1, -1), (0.2, 0), (0.3, 1), (0.5, 0)].map(|(t, x)| SpaceTimePoint::new(t, [x])),
        )
        .unwrap();
        let ev = evolve(&set, &InitialCondition::Zero, Model::Rsos, 1.0).unwrap();
        let mut p = extract(&ev.log, PyramidKind::Upright, &Site(vec![0]), 2, 1.0).unwrap();
        assert!(p.validate(&bx, RadiusLaw::FoundationConsistent));
        p.layers[1][0].time = 0.15;
        assert!(!p.validate(&bx, RadiusLaw::FoundationConsistent));
    }

    #[test]
    fn brute_force_agrees_with_the_process() {
        let mut n = 0;
        for seed in 0..200 {
            let Some(set) = small(seed) else { continue };
            n += 1;
            let rev = set.reverse();
            for i in 0..set.bx().num_sites() {
                let x = set.bx().site_of(i);
                let a = max_pyramid_height(&set, &x, 2.0, HeightMethod::ViaProcess).unwrap();
                let b = max_pyramid_height(&set, &x, 2.0, HeightMethod::BruteForce).unwrap();
                assert_eq!(a, b);
                let c = max_dual_pyramid_height(&rev, &x, 2.0, HeightMethod::BruteForce).unwrap();
                let d = max_dual_pyramid_height(&rev, &x, 2.0, HeightMethod::ViaProcess).unwrap();
                assert_eq!(a, c);
                assert_eq!(c, d);
            }
        }
        assert!(n > 50);
    }

    #[test]
    fn reversal_is_a_bijection_on_small_sets() {
        for seed in 0..100 {
            let Some(set) = small(seed) else { continue };
            let rev = set.reverse();
            let x = Site(vec![0]);
            let ups = enumerate_pyramids(&set, PyramidKind::Upright, &x, 2.0).unwrap();
            let duals = enumerate_pyramids(&rev, PyramidKind::Dual, &x, 2.0).unwrap();
            assert_eq!(ups.len(), duals.len());
            for p in &ups {
                let q = p.reverse(set.bx());
                assert!(q.validate_against(&rev, RadiusLaw::FoundationConsistent));
                assert!(duals.contains(&q));
                assert_eq!(q.reverse(set.bx()), *p);
            }
        }
    }

    #[test]
    fn pushdown_lands_in_the_log() {
        for seed in 0..100 {
            let Some(set) = small(seed) else { continue };
            let bx = set.bx();
            let log = evolve(&set, &InitialCondition::Zero, Model::Rsos, 2.0).unwrap().log;
            for i in 0..bx.num_sites() {
                let x = bx.site_of(i);
                for p in enumerate_pyramids(&set, PyramidKind::Upright, &x, 2.0).unwrap() {
                    let q = pushdown(&set, &p).unwrap();
                    assert_eq!(q.height(), p.height());
                    assert!(lies_in_log(&q, &log));
                    assert!(q.points().zip(p.points()).all(|((_, a), (_, b))| a.time <= b.time));
                }
                let well = InitialCondition::well_at(bx, &x);
                let dlog = evolve(&set, &well, Model::Rsos, 2.0).unwrap().log;
                for p in enumerate_pyramids(&set, PyramidKind::Dual, &x, 2.0).unwrap() {
                    let q = pushdown(&set, &p).unwrap();
                    assert!(lies_in_log(&q, &dlog));
                }
            }
        }
    }

    #[test]
    fn json_shape() {
        let p = Pyramid {
            kind: PyramidKind::Dual,
            center: Site(vec![0]),
            within: 1.0,
            layers: vec![vec![SpaceTimePoint::new(0.5, [0])]],
        };
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["height"], 1);
        assert_eq!(v["layers"][0][0]["x"][0], 0);
        let back: Pyramid = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn pushdown_rejects_invalid_input() {
        let bx = LatticeBox::free(1, 2, 1.0).unwrap();
        let set = EventSet::empty(&bx);
        let p = Pyramid {
            kind: PyramidKind::Upright,
            center: Site(vec![0]),
            within: 1.0,
            layers: vec![vec![SpaceTimePoint::new(0.5, [0])]],
        };
        assert!(pushdown(&set, &p).is_err());
    }
}
