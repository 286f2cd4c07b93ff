//! Estimators and tests for the Monte Carlo checks.
//!
//! Distribution comparisons use DKW bands as the binding criterion; the
//! asymptotic Kolmogorov p-value is reported alongside for information.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::rng::stream;

/// Bootstrap resamples used by default.
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Smallest sample accepted by the KS routines.
pub const KS_MIN_SAMPLE: usize = 50;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn std_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Midpoint median.
pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Percentile bootstrap interval for `statistic`.
pub fn bootstrap_ci(
    x: &[f64],
    statistic: impl Fn(&[f64]) -> f64,
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<Interval> {
    if x.is_empty() || resamples == 0 {
        return Err(Error::SampleTooSmall { n: x.len(), min: 1 });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} not in (0, 1)")));
    }
    let mut rng = stream(seed, 0xb007);
    let n = x.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = x[rng.random_range(0..n)];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let pick = |q: f64| {
        let pos = (q * (resamples - 1) as f64).round() as usize;
        stats[pos.min(resamples - 1)]
    };
    Ok(Interval {
        level,
        lo: pick(tail),
        hi: pick(1.0 - tail),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    /// Bootstrap interval for the mean.
    pub ci: Interval,
}

pub fn summarize(x: &[f64], level: f64, seed: u64) -> Result<SampleSummary> {
    Ok(SampleSummary {
        n: x.len(),
        mean: mean(x),
        variance: variance(x),
        median: median(x),
        ci: bootstrap_ci(x, mean, level, BOOTSTRAP_RESAMPLES, seed)?,
    })
}

/// DKW half-width: `sup |F̂_n - F| <= ε` with probability at least `1 - α`.
pub fn dkw_epsilon(alpha: f64, n: usize) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    // The series converges slowly near zero, where the survival is 1 anyway.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn kolmogorov_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTwoSample {
    pub d: f64,
    /// Advisory only.
    pub p_asymptotic: f64,
    /// Combined band `ε(α/2, n_a) + ε(α/2, n_b)`.
    pub dkw_epsilon: f64,
    pub within_band: bool,
}

/// Two-sample Kolmogorov-Smirnov distance, exact under ties.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsTwoSample> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLE {
            return Err(Error::SampleTooSmall {
                n: s.len(),
                min: KS_MIN_SAMPLE,
            });
        }
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let eps = dkw_epsilon(alpha / 2.0, a.len()) + dkw_epsilon(alpha / 2.0, b.len());
    Ok(KsTwoSample {
        d,
        p_asymptotic: kolmogorov_p(d, na * nb / (na + nb)),
        dkw_epsilon: eps,
        within_band: d <= eps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsOneSample {
    pub n: usize,
    pub d: f64,
    pub p_asymptotic: f64,
    pub dkw_epsilon: f64,
}

impl KsOneSample {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_asymptotic >= alpha
    }
}

/// One-sample KS distance to a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<KsOneSample> {
    if x.len() < KS_MIN_SAMPLE {
        return Err(Error::SampleTooSmall {
            n: x.len(),
            min: KS_MIN_SAMPLE,
        });
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in v.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsOneSample {
        n: v.len(),
        d,
        p_asymptotic: kolmogorov_p(d, n),
        dkw_epsilon: dkw_epsilon(alpha, v.len()),
    })
}

pub fn exp1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x).exp_m1()
    }
}

/// `P(Poi(t) = k)`, built up in log space.
pub fn poisson_pmf(t: f64, k: u64) -> f64 {
    let mut log = -t;
    for j in 1..=k {
        log += t.ln() - (j as f64).ln();
    }
    log.exp()
}

/// `P(Poi(t) <= x)` by direct summation.
pub fn poisson_cdf(t: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let mut term = (-t).exp();
    let mut sum = term;
    for j in 1..=(x.floor() as u64) {
        term *= t / j as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// `c(d) = 1 - log(2d+1)/10d - log(10d)/10d - 1/10d`.
pub fn path_constant(d: usize) -> f64 {
    let d10 = 10.0 * d as f64;
    1.0 - (2.0 * d as f64 + 1.0).ln() / d10 - d10.ln() / d10 - 1.0 / d10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonTail {
    /// `exp(-t G(x/t))` with `G(y) = 1 - y + y log y`.
    pub lower_tail_bound: f64,
    pub path_event_bound_c: f64,
}

pub fn poisson_tail_bounds(t: f64, x: f64, d: usize) -> Result<PoissonTail> {
    if !(t > 0.0 && x > 0.0 && x <= t) {
        return Err(Error::InvalidArgument(format!("need 0 < x <= t, got x = {x}, t = {t}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let y = x / t;
    let g = 1.0 - y + y * y.ln();
    Ok(PoissonTail {
        lower_tail_bound: (-t * g).exp(),
        path_event_bound_c: path_constant(d),
    })
}

/// `Σ_{k <= t/(10d)} (2d+1)^k P(Poi(t) = k)`, a bound on the chance that
/// some path carries at most `t/(10d)` rings.
pub fn path_union_bound(t: f64, d: usize) -> f64 {
    let kmax = (t / (10.0 * d as f64)).floor() as u64;
    let base = (2 * d + 1) as f64;
    (0..=kmax)
        .map(|k| (k as f64 * base.ln()).exp() * poisson_pmf(t, k))
        .sum()
}

/// Least-squares `(slope, intercept)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("need two or more paired points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub replications: usize,
    pub rho_hat: f64,
    pub stderr: f64,
    pub rho_inv_hat: f64,
    pub stderr_inv: f64,
}

/// Minimum replications for [`growth_rate_estimate`].
pub const GROWTH_MIN_REPLICATIONS: usize = 100;

/// Slope of `T(u)` against `u` over `u_lo..=u_hi`. `tables[r][u]` is `T(u)` of
/// replication `r` (index 0 holds `T(0) = 0`). The estimate is the mean of the
/// per-replication slopes, which equals the slope of the mean curve.
pub fn growth_rate_estimate(tables: &[Vec<f64>], u_lo: u64, u_hi: u64) -> Result<GrowthRate> {
    if u_hi <= u_lo {
        return Err(Error::InvalidArgument("u range needs two or more levels".into()));
    }
    let xs: Vec<f64> = (u_lo..=u_hi).map(|u| u as f64).collect();
    let slopes: Vec<f64> = tables
        .iter()
        .filter(|t| t.len() > u_hi as usize)
        .map(|t| ols_slope(&xs, &t[u_lo as usize..=u_hi as usize]).map(|s| s.0))
        .collect::<Result<_>>()?;
    if slopes.len() < GROWTH_MIN_REPLICATIONS {
        return Err(Error::SampleTooSmall {
            n: slopes.len(),
            min: GROWTH_MIN_REPLICATIONS,
        });
    }
    let rho = mean(&slopes);
    let se = std_error(&slopes);
    Ok(GrowthRate {
        replications: slopes.len(),
        rho_hat: rho,
        stderr: se,
        rho_inv_hat: 1.0 / rho,
        stderr_inv: se / (rho * rho),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub t: f64,
    pub n: usize,
    pub var: f64,
    pub ci: Interval,
    pub var_over_t: f64,
    pub var_over_log_t: f64,
}

/// Per-time unbiased variance with a bootstrap interval. Intended for at
/// least a thousand replications per time.
pub fn variance_summary(rows: &[(f64, Vec<f64>)], level: f64, seed: u64) -> Result<Vec<VarianceRow>> {
    rows.iter()
        .enumerate()
        .map(|(k, (t, x))| {
            if x.len() < 2 {
                return Err(Error::SampleTooSmall { n: x.len(), min: 2 });
            }
            let var = variance(x);
            Ok(VarianceRow {
                t: *t,
                n: x.len(),
                var,
                ci: bootstrap_ci(x, variance, level, BOOTSTRAP_RESAMPLES, seed.wrapping_add(k as u64))?,
                var_over_t: var / t,
                var_over_log_t: var / t.ln(),
            })
        })
        .collect()
}

/// CSV `t,n,var,ci_level,ci_lo,ci_hi,var_over_t,var_over_log_t`.
pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,n,var,ci_level,ci_lo,ci_hi,var_over_t,var_over_log_t")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            f64_17(r.t),
            r.n,
            f64_17(r.var),
            f64_17(r.ci.level),
            f64_17(r.ci.lo),
            f64_17(r.ci.hi),
            f64_17(r.var_over_t),
            f64_17(r.var_over_log_t)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Exp1, Poisson};

    #[test]
    fn basic_moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&x), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn constant_sample_has_zero_variance() {
        let x = vec![7.0; 1000];
        let rows = variance_summary(&[(5.0, x)], 0.99, 1).unwrap();
        assert_eq!(rows[0].var, 0.0);
        assert_eq!(rows[0].ci.hi, 0.0);
    }

    #[test]
    fn ks_identical_is_zero() {
        let a: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let r = ks_two_sample(&a, &a, 0.01).unwrap();
        assert_eq!(r.d, 0.0);
        assert!(r.within_band);
    }

    #[test]
    fn ks_detects_unit_shift() {
        let mut rng = stream(3, 1);
        let a: Vec<f64> = (0..10_000)
            .map(|_| Poisson::new(10.0).unwrap().sample(&mut rng))
            .collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let r = ks_two_sample(&a, &b, 0.01).unwrap();
        assert!(r.d > 0.1 && !r.within_band);
    }

    #[test]
    fn ks_rejects_tiny_samples() {
        assert!(matches!(
            ks_two_sample(&[1.0; 10], &[1.0; 100], 0.01),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn dkw_shrinks_like_root_n() {
        let r = dkw_epsilon(0.01, 100) / dkw_epsilon(0.01, 400);
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Standard critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn exponential_sample_passes() {
        let mut rng = stream(11, 2);
        let x: Vec<f64> = (0..10_000).map(|_| Exp1.sample(&mut rng)).collect();
        let r = ks_one_sample(&x, exp1_cdf, 0.01).unwrap();
        assert!(r.passes(0.01));
        let y: Vec<f64> = x.iter().map(|v| v * 1.1).collect();
        assert!(!ks_one_sample(&y, exp1_cdf, 0.01).unwrap().passes(0.01));
    }

    #[test]
    fn tail_bound_at_the_mean_is_one() {
        assert_eq!(poisson_tail_bounds(7.0, 7.0, 1).unwrap().lower_tail_bound, 1.0);
        assert!(poisson_tail_bounds(7.0, 8.0, 1).is_err());
        assert!(poisson_tail_bounds(7.0, 0.0, 1).is_err());
    }

    #[test]
    fn path_constant_values() {
        let direct = 1.0 - 3f64.ln() / 10.0 - 10f64.ln() / 10.0 - 0.1;
        assert!((path_constant(1) - direct).abs() < 1e-15);
        assert!((path_constant(1) - 0.5599).abs() < 1e-3);
        for d in 1..50 {
            assert!(path_constant(d) > 0.0);
        }
    }

    #[test]
    fn chernoff_bound_dominates_exact_tail() {
        for t in [1.0, 5.0, 12.5, 30.0, 50.0] {
            for k in 1..=(t as u64) {
                let x = k as f64;
                let exact = poisson_cdf(t, x);
                let summed: f64 = (0..=k).map(|j| poisson_pmf(t, j)).sum();
                assert!((exact - summed).abs() < 1e-10);
                assert!(exact <= poisson_tail_bounds(t, x, 1).unwrap().lower_tail_bound + 1e-12);
            }
        }
    }

    #[test]
    fn union_bound_terms() {
        let t: f64 = 30.0;
        let direct: f64 = (0..=3)
            .map(|k| 3f64.powi(k) * (-t).exp() * t.powi(k) / [1.0, 1.0, 2.0, 6.0][k as usize])
            .sum();
        assert!((path_union_bound(t, 1) - direct).abs() < 1e-20);
    }

    #[test]
    fn growth_rate_of_exact_lines() {
        let tables: Vec<Vec<f64>> = (0..100).map(|_| (0..=60).map(|u| 2.0 * u as f64).collect()).collect();
        let g = growth_rate_estimate(&tables, 20, 60).unwrap();
        assert!((g.rho_hat - 2.0).abs() < 1e-12);
        assert!((g.rho_inv_hat - 0.5).abs() < 1e-12);
        assert!(growth_rate_estimate(&tables[..99], 20, 60).is_err());
    }

    #[test]
    fn bootstrap_interval_brackets_the_mean() {
        let x: Vec<f64> = (0..500).map(|i| (i % 13) as f64).collect();
        let ci = bootstrap_ci(&x, mean, 0.95, 2000, 4).unwrap();
        assert!(ci.lo < mean(&x) && mean(&x) < ci.hi);
        assert_eq!(ci, bootstrap_ci(&x, mean, 0.95, 2000, 4).unwrap());
    }
}
