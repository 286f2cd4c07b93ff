//! Monte Carlo estimates against closed forms derived independently.

use rsos_core::experiment::{execute, ExperimentConfig, ExperimentKind};

/// `P(f(t,0) <= 1)` in d = 1 from the zero start. Either the origin never
/// rings, or, after its last ring at time `s`, one of the three sites a path
/// can step to is silent on `(0, s)`.
fn p_height_at_most_one(t: f64) -> f64 {
    let e = (-t).exp();
    e * (1.0 + 3.0 * t - 3.0 * (1.0 - e) + (1.0 - e * e) / 2.0)
}

#[test]
fn closed_form_matches_its_numerical_integral() {
    for t in [0.5, 2.0, 10.0] {
        let n = 200_000;
        let h = t / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                (-(t - s)).exp() * (1.0 - (1.0 - (-s).exp()).powi(3))
            })
            .sum::<f64>()
            * h;
        let direct = (-t).exp() + integral;
        assert!((direct - p_height_at_most_one(t)).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn small_heights_occur_at_the_derived_rate() {
    let mut c = ExperimentConfig::defaults(ExperimentKind::Variance);
    c.t_grid = vec![4.0];
    c.replications = 20_000;
    c.master_seed = 11;
    let r = execute(&c, 0).unwrap();
    let heights = r.table("variance-replications").unwrap().values("height");
    let n = heights.len() as f64;
    let hits = heights.iter().filter(|h| h.as_f64().unwrap() <= 1.0).count() as f64;
    let p = p_height_at_most_one(4.0);
    let se = (p * (1.0 - p) / n).sqrt();
    assert!(((hits / n) - p).abs() <= 4.0 * se, "{} vs {p}", hits / n);
}
