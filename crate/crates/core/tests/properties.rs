use proptest::prelude::*;

use rsos_core::dual::run_dual;
use rsos_core::minpath::{self, enumerate_paths, DEFAULT_PATH_CAP};
use rsos_core::surface::evolve;
use rsos_core::{Boundary, EventSet, InitialCondition, LatticeBox, Model, Site, SpaceTimePoint};

fn small_box() -> impl Strategy<Value = LatticeBox> {
    (1usize..=2, 1i32..=3, 0.5f64..3.0, any::<bool>()).prop_map(|(d, l, t, periodic)| {
        let l = if d == 2 { l.min(2) } else { l };
        let b = if periodic { Boundary::Periodic } else { Boundary::Free };
        LatticeBox::new(d, l, t, b).unwrap()
    })
}

fn free_box() -> impl Strategy<Value = LatticeBox> {
    (1usize..=2, 1i32..=3, 0.5f64..3.0).prop_map(|(d, l, t)| {
        let l = if d == 2 { l.min(2) } else { l };
        LatticeBox::free(d, l, t).unwrap()
    })
}

/// 1-Lipschitz heights on a free box: a sum of per-axis walks with steps in
/// {-1, 0, 1}, shifted to be nonnegative.
fn walk_init(bx: &LatticeBox, steps: &[i8]) -> Vec<i64> {
    let side = bx.side();
    let walk = |axis: usize, c: i32| -> i64 {
        let upto = (c + bx.radius) as usize;
        (0..upto).map(|i| steps[(axis * side + i) % steps.len()] as i64).sum()
    };
    let raw: Vec<i64> = (0..bx.num_sites())
        .map(|i| bx.site_of(i).iter().enumerate().map(|(a, &c)| walk(a, c)).sum())
        .collect();
    let lo = *raw.iter().min().unwrap();
    raw.into_iter().map(|h| h - lo).collect()
}

fn steps() -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(-1i8..=1, 1..16)
}

fn max_neighbour_gap(bx: &LatticeBox, h: &[i64]) -> i64 {
    let topo = bx.topology();
    (0..h.len())
        .flat_map(|i| topo.neighbors(i).map(move |j| (i, j)))
        .map(|(i, j)| (h[i] - h[j]).abs())
        .max()
        .unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reversal_is_an_involution(bx in small_box(), seed in any::<u64>()) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let back = set.reverse().reverse();
        prop_assert_eq!(back.len(), set.len());
        prop_assert_eq!(back.events(), set.events());
    }

    #[test]
    fn jsonl_is_deterministic_and_round_trips(bx in small_box(), seed in any::<u64>()) {
        let a = EventSet::generate(&bx, 1.0, seed).unwrap().to_jsonl_string();
        let b = EventSet::generate(&bx, 1.0, seed).unwrap().to_jsonl_string();
        prop_assert_eq!(&a, &b);
        let parsed = EventSet::read_jsonl(a.as_bytes()).unwrap();
        prop_assert_eq!(parsed.to_jsonl_string(), a);
    }

    #[test]
    fn depth_is_monotone(bx in small_box(), seed in any::<u64>(), s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, extra in 0.01f64..0.99) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let t = bx.horizon;
        let p = SpaceTimePoint::new(t, Site::origin(bx.dim));
        let (lo, hi) = if s1 <= s2 { (s1 * t, s2 * t) } else { (s2 * t, s1 * t) };
        let d_lo = set.depth(&p, lo).unwrap();
        let d_hi = set.depth(&p, hi).unwrap();
        prop_assert!(d_hi <= d_lo);
        prop_assert!(d_lo <= set.len() as u64);
        let q = SpaceTimePoint::new(extra * t, Site::origin(bx.dim));
        if let Ok(more) = set.insert_event(&q) {
            prop_assert!(more.depth(&p, lo).unwrap() >= d_lo);
        }
    }

    #[test]
    fn lipschitz_bound_is_preserved(bx in small_box(), seed in any::<u64>(), k in 1u32..=3) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        for model in [Model::Rsos, Model::KRsos(k)] {
            let h = evolve(&set, &InitialCondition::Zero, model, bx.horizon).unwrap().field.heights;
            prop_assert!(max_neighbour_gap(&bx, &h) <= model.lipschitz_bound().unwrap());
        }
    }

    #[test]
    fn heights_are_dominated_by_ring_counts(bx in free_box(), seed in any::<u64>(), st in steps()) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let init = walk_init(&bx, &st);
        let ev = evolve(&set, &InitialCondition::Explicit(init.clone()), Model::Rsos, bx.horizon).unwrap();
        for (i, &h) in ev.field.heights.iter().enumerate() {
            prop_assert!(h >= init[i]);
            prop_assert!(h - init[i] <= set.count_at(i, bx.horizon) as i64);
        }
    }

    #[test]
    fn ordered_starts_stay_ordered(bx in free_box(), seed in any::<u64>(), a in steps(), b in steps()) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let low = walk_init(&bx, &a);
        let other = walk_init(&bx, &b);
        let high: Vec<i64> = low.iter().zip(&other).map(|(x, y)| *x.max(y)).collect();
        for model in [Model::Rsos, Model::KRsos(2), Model::Bd] {
            let hl = evolve(&set, &InitialCondition::Explicit(low.clone()), model, bx.horizon).unwrap().field.heights;
            let hh = evolve(&set, &InitialCondition::Explicit(high.clone()), model, bx.horizon).unwrap().field.heights;
            prop_assert!(hl.iter().zip(&hh).all(|(x, y)| x <= y), "{model}");
        }
    }

    #[test]
    fn one_extra_ring_moves_a_height_by_at_most_one(bx in free_box(), seed in any::<u64>(), frac in 0.01f64..0.99, site in any::<prop::sample::Index>(), st in steps()) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let p = SpaceTimePoint::new(frac * bx.horizon, bx.site_of(site.index(bx.num_sites())));
        let init = InitialCondition::Explicit(walk_init(&bx, &st));
        if set.insert_event(&p).is_ok() {
            let delta = minpath::perturb_height(&set, &p, bx.horizon, &Site::origin(bx.dim), &init).unwrap();
            prop_assert!(delta == 0 || delta == 1, "delta = {}", delta);
        }
    }

    #[test]
    fn every_update_follows_its_foundation(bx in free_box(), seed in any::<u64>(), st in steps()) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let init = InitialCondition::Explicit(walk_init(&bx, &st));
        let ev = evolve(&set, &init, Model::Rsos, bx.horizon).unwrap();
        for u in ev.log.updates() {
            prop_assert!(ev.log.first_after_foundation(&set, &u).unwrap());
        }
    }

    #[test]
    fn unit_k_is_rsos(bx in small_box(), seed in any::<u64>()) {
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let a = evolve(&set, &InitialCondition::Zero, Model::Rsos, bx.horizon).unwrap();
        let b = evolve(&set, &InitialCondition::Zero, Model::KRsos(1), bx.horizon).unwrap();
        prop_assert_eq!(a.field.heights, b.field.heights);
        prop_assert_eq!(a.log.len(), b.log.len());
    }

    #[test]
    fn path_value_matches_dynamics_and_enumeration(seed in any::<u64>(), t in 0.3f64..1.5, well in any::<bool>()) {
        let bx = LatticeBox::free(1, 3, t).unwrap();
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        prop_assume!(set.len() <= DEFAULT_PATH_CAP);
        let init = if well { InitialCondition::Well } else { InitialCondition::Zero };
        let x = Site::origin(1);
        let h = evolve(&set, &init, Model::Rsos, t).unwrap().field.at_origin();
        let mw = minpath::min_weight(&set, t, &x, &init, 0.0, Model::Rsos).unwrap();
        let floor = init.heights(&bx).unwrap();
        let best = enumerate_paths(&set, t, &x, 0.0)
            .unwrap()
            .map(|p| p.weight as i64 + floor[bx.index_of(&p.end_site).unwrap()])
            .min()
            .unwrap();
        prop_assert_eq!(mw.value, best);
        if mw.exact {
            prop_assert_eq!(h, mw.value);
        }
    }

    #[test]
    fn certified_values_survive_box_growth(d in 1usize..=2, l in 1i32..=3, t in 0.5f64..2.5, seed in any::<u64>()) {
        let small = LatticeBox::free(d, l, t).unwrap();
        let big = LatticeBox::free(d, l + 2, t).unwrap();
        let x = Site::origin(d);
        let a = minpath::min_weight(&EventSet::generate(&small, 1.0, seed).unwrap(), t, &x, &InitialCondition::Zero, 0.0, Model::Rsos).unwrap();
        let b = minpath::min_weight(&EventSet::generate(&big, 1.0, seed).unwrap(), t, &x, &InitialCondition::Zero, 0.0, Model::Rsos).unwrap();
        if a.exact {
            prop_assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn dual_on_reversed_rings_matches_the_height(d in 1usize..=2, t in 0.5f64..3.0, seed in any::<u64>()) {
        let bx = LatticeBox::free(d, rsos_core::dual::default_radius(t), t).unwrap();
        let set = EventSet::generate(&bx, 1.0, seed).unwrap();
        let h = evolve(&set, &InitialCondition::Zero, Model::Rsos, t).unwrap().field.at_origin();
        let traj = run_dual(&set.reverse(), t).unwrap();
        prop_assert!(traj.exact);
        prop_assert_eq!(traj.final_min(), h);
    }
}
