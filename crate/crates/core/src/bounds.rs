//! Rate functions and tail bounds, plus the trace-norm expectation check
//! for uniformly drawn Pauli words.
//!
//! Bounds are returned as [`TailBound`], which stores the exponent in one
//! base and converts between `2^{-x}` and `e^{-x}` forms.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{identity, trace_norm, c};
use crate::randomizer::RandomizingMap;
use crate::sampler::{build_ensemble, haar_pure_state, EnsembleKind, SeededStream};
use crate::stats::{mean, median, std_error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Two,
    E,
}

/// A bound of the form `base^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub base: Base,
    pub exponent: f64,
    pub value: f64,
}

impl TailBound {
    fn from_nats(nats: f64, base: Base) -> Self {
        let exponent = match base {
            Base::Two => nats / LN_2,
            Base::E => nats,
        };
        Self {
            base,
            exponent,
            value: (-nats).exp(),
        }
    }

    pub fn in_base(&self, base: Base) -> Self {
        let nats = match self.base {
            Base::Two => self.exponent * LN_2,
            Base::E => self.exponent,
        };
        Self::from_nats(nats, base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionSample {
    pub x: f64,
    /// Nats.
    pub value: f64,
}

/// `Λ*(x) = x − 1 − ln x`, the rate function of a unit-mean exponential.
pub fn rate_function_exp(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("rate function needs x > 0, got {x}")));
    }
    Ok(x - 1.0 - x.ln())
}

pub fn rate_samples(xs: &[f64]) -> Result<Vec<RateFunctionSample>> {
    xs.iter()
        .map(|&x| Ok(RateFunctionSample { x, value: rate_function_exp(x)? }))
        .collect()
}

/// `Λ*(1 ± ε) ≥ ε²/6` at `ε = k/100`, `k = 1..=99`.
pub fn rate_floor_holds() -> bool {
    (1..100).all(|k| {
        let e = k as f64 / 100.0;
        let floor = e * e / 6.0;
        exp_rate(1.0 + e) >= floor && exp_rate(1.0 - e) >= floor
    })
}

/// Midpoint convexity of `Λ*` on `triples` deterministic pairs in `(0, 6)`.
pub fn rate_midpoint_convexity(triples: usize) -> bool {
    (0..triples).all(|k| {
        let t = k as f64 / triples.max(1) as f64;
        let a = 0.01 + 2.0 * t;
        let b = a + 0.05 + 3.0 * (1.0 - t) * t + 0.5 * t;
        let (fa, fb, fm) = (exp_rate(a), exp_rate(b), exp_rate(0.5 * (a + b)));
        fm <= 0.5 * (fa + fb) + 1e-15
    })
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_section_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    f(lo).min(f(hi)).min(f1).min(f2)
}

fn check_convex(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<()> {
    const GRID: usize = 33;
    let xs: Vec<f64> = (0..GRID).map(|k| lo + (hi - lo) * k as f64 / (GRID - 1) as f64).collect();
    for w in xs.windows(3) {
        let (a, m, b) = (f(w[0]), f(w[1]), f(w[2]));
        if m > 0.5 * (a + b) + 1e-12 * (1.0 + a.abs() + b.abs()) {
            return Err(Error::Contract(format!(
                "rate function is not convex near x = {}",
                w[1]
            )));
        }
    }
    Ok(())
}

/// `Pr((1/n) Σ X_j ≥ a) ≤ e^{−n inf_{x ≥ a} Λ*(x)}`, the infimum taken by
/// golden-section search over `[a, search_max]`.
pub fn cramer_upper_tail(
    n: u64,
    a: f64,
    rate: impl Fn(f64) -> f64,
    search_max: f64,
) -> Result<TailBound> {
    if n == 0 || !(search_max >= a) {
        return Err(Error::Domain(format!(
            "need n ≥ 1 and a ≤ search_max; got n={n}, a={a}, search_max={search_max}"
        )));
    }
    check_convex(&rate, a, search_max)?;
    let inf = golden_section_min(&rate, a, search_max).max(0.0);
    Ok(TailBound::from_nats(n as f64 * inf, Base::Two))
}

/// `Pr((1/n) Σ X_j ≤ a) ≤ e^{−n inf_{x ≤ a} Λ*(x)}` over `[search_min, a]`.
pub fn cramer_lower_tail(
    n: u64,
    a: f64,
    rate: impl Fn(f64) -> f64,
    search_min: f64,
) -> Result<TailBound> {
    if n == 0 || !(search_min <= a) {
        return Err(Error::Domain(format!(
            "need n ≥ 1 and search_min ≤ a; got n={n}, a={a}, search_min={search_min}"
        )));
    }
    check_convex(&rate, search_min, a)?;
    let inf = golden_section_min(&rate, search_min, a).max(0.0);
    Ok(TailBound::from_nats(n as f64 * inf, Base::Two))
}

fn exp_rate(x: f64) -> f64 {
    rate_function_exp(x).unwrap_or(f64::INFINITY)
}

/// Upper tail of the mean of `n` unit-mean exponentials.
pub fn exponential_upper_tail(n: u64, a: f64) -> Result<TailBound> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {a}")));
    }
    cramer_upper_tail(n, a, exp_rate, 4.0 * a.max(1.0))
}

/// Lower tail of the mean of `n` unit-mean exponentials.
pub fn exponential_lower_tail(n: u64, a: f64) -> Result<TailBound> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {a}")));
    }
    cramer_lower_tail(n, a, exp_rate, a.min(1.0) * 1e-6)
}

fn xlog2(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).log2()
    }
}

/// `D(α‖μ)` in bits; infinite when `μ ∈ {0, 1}` disagrees with `α`.
pub fn binary_divergence(alpha: f64, mu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&mu) {
        return Err(Error::Domain(format!(
            "divergence arguments must lie in [0, 1]; got {alpha}, {mu}"
        )));
    }
    Ok((xlog2(alpha, mu) + xlog2(1.0 - alpha, 1.0 - mu)).max(0.0))
}

/// Azuma–Hoeffding: for a martingale with increments bounded by `cap`,
/// `Pr(S_n/n ≥ t) ≤ e^{−n t²/(2 cap²)}`. The exponent is reported base 2.
pub fn azuma_tail(n: u64, t: f64, cap: f64) -> Result<TailBound> {
    if n == 0 || !(t >= 0.0) || !(cap > 0.0) {
        return Err(Error::Domain(format!(
            "need n ≥ 1, t ≥ 0, cap > 0; got n={n}, t={t}, cap={cap}"
        )));
    }
    Ok(TailBound::from_nats(n as f64 * t * t / (2.0 * cap * cap), Base::Two))
}

/// Chernoff bound for i.i.d. `[0, 1]` variables with mean `μ ≥ α`:
/// `Pr((1/n) Σ X_j ≤ α) ≤ 2^{−n D(α‖μ)}`.
pub fn chernoff_lower_tail(n: u64, alpha: f64, mu: f64) -> Result<TailBound> {
    if n == 0 || alpha > mu {
        return Err(Error::Domain(format!(
            "need n ≥ 1 and α ≤ μ; got n={n}, α={alpha}, μ={mu}"
        )));
    }
    let bits = n as f64 * binary_divergence(alpha, mu)?;
    Ok(TailBound::from_nats(bits * LN_2, Base::Two))
}

/// `ε d C″ / (2 (log d)²) − 1`, the divergence lower bound in the entropy
/// concentration argument (valid for `ε < 1/5`).
pub fn locking_divergence_lower_bound(epsilon: f64, d: f64, c2: f64) -> f64 {
    epsilon * d * c2 / (2.0 * d.log2().powi(2)) - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTraceNormReport {
    pub d: usize,
    pub n: usize,
    pub draws: usize,
    pub states_per_draw: usize,
    pub grand_mean: f64,
    /// Standard error over per-draw means.
    pub std_error: f64,
    /// `sqrt(d/n)`.
    pub bound: f64,
    /// Mean of `‖R(φ) − I/d‖₂²`, whose expectation is `(d−1)/(nd)`.
    pub mean_hilbert_schmidt_sq: f64,
    pub expected_hilbert_schmidt_sq: f64,
    pub within_bound: bool,
}

fn check_pauli_dim(d: usize, n: usize) -> Result<()> {
    if !d.is_power_of_two() || d < 2 || n == 0 {
        return Err(Error::Domain(format!(
            "need a power-of-two d ≥ 2 and n ≥ 1; got d={d}, n={n}"
        )));
    }
    Ok(())
}

fn deviation_norms(map: &RandomizingMap, stream: &SeededStream, states: usize) -> Vec<(f64, f64)> {
    let d = map.dim();
    let flat = identity(d) * c(1.0 / d as f64, 0.0);
    (0..states)
        .into_par_iter()
        .map(|s| {
            let phi = haar_pure_state(d, &mut stream.derive(s as u64).rng());
            let diff = map.output_for_pure(&phi) - &flat;
            let hs = diff.iter().map(|z| z.norm_sqr()).sum::<f64>();
            (trace_norm(&diff).expect("square"), hs)
        })
        .collect()
}

/// For each draw, `n` uniformly random Pauli words (from
/// `stream.derive(k).derive(0)`) and `states_per_draw` Haar states (from
/// `stream.derive(k).derive(1)`); reports the mean of `‖R(φ) − I/d‖₁`.
pub fn pauli_trace_norm_experiment(
    d: usize,
    n: usize,
    draws: usize,
    states_per_draw: usize,
    stream: &SeededStream,
) -> Result<PauliTraceNormReport> {
    check_pauli_dim(d, n)?;
    if draws == 0 || states_per_draw == 0 {
        return Err(Error::Domain("need at least one draw and one state".into()));
    }
    let per_draw = (0..draws)
        .map(|k| {
            let draw = stream.derive(k as u64);
            let map = RandomizingMap::new(build_ensemble(d, n, EnsembleKind::Pauli, &draw.derive(0))?);
            Ok(deviation_norms(&map, &draw.derive(1), states_per_draw))
        })
        .collect::<Result<Vec<_>>>()?;
    let draw_means: Vec<f64> = per_draw
        .iter()
        .map(|v| mean(&v.iter().map(|x| x.0).collect::<Vec<_>>()))
        .collect();
    let hs: Vec<f64> = per_draw.iter().flatten().map(|x| x.1).collect();
    let grand_mean = mean(&draw_means);
    let se = if draws > 1 { std_error(&draw_means) } else { 0.0 };
    let bound = (d as f64 / n as f64).sqrt();
    Ok(PauliTraceNormReport {
        d,
        n,
        draws,
        states_per_draw,
        grand_mean,
        std_error: se,
        bound,
        mean_hilbert_schmidt_sq: mean(&hs),
        expected_hilbert_schmidt_sq: (d as f64 - 1.0) / (n as f64 * d as f64),
        within_bound: grand_mean <= bound + 3.0 * se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceNormCheck {
    pub d: usize,
    pub n: usize,
    /// `sqrt(d log₂ d / n)`, from inverting `n = d log d / ε²`.
    pub epsilon_theory: f64,
    pub empirical_max: f64,
    pub empirical_median: f64,
    pub empirical_mean: f64,
    /// `sqrt(d/n)`.
    pub expectation_bound: f64,
    pub mean_within_expectation_bound: bool,
}

/// One Pauli ensemble of size `n` (from `stream.derive(0)`) probed with
/// `states` Haar states (from `stream.derive(1)`).
pub fn trace_norm_randomizing_check(
    d: usize,
    n: usize,
    states: usize,
    stream: &SeededStream,
) -> Result<TraceNormCheck> {
    check_pauli_dim(d, n)?;
    if states == 0 {
        return Err(Error::Domain("need at least one state".into()));
    }
    let map = RandomizingMap::new(build_ensemble(d, n, EnsembleKind::Pauli, &stream.derive(0))?);
    let norms: Vec<f64> = deviation_norms(&map, &stream.derive(1), states)
        .into_iter()
        .map(|x| x.0)
        .collect();
    let df = d as f64;
    let empirical_mean = mean(&norms);
    let expectation_bound = (df / n as f64).sqrt();
    Ok(TraceNormCheck {
        d,
        n,
        epsilon_theory: (df * df.log2() / n as f64).sqrt(),
        empirical_max: norms.iter().copied().fold(0.0, f64::max),
        empirical_median: median(&norms),
        empirical_mean,
        expectation_bound,
        mean_within_expectation_bound: empirical_mean <= expectation_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_function_values() {
        assert_eq!(rate_function_exp(1.0).unwrap(), 0.0);
        assert!((rate_function_exp(2.0).unwrap() - 0.306853).abs() < 5e-7);
        assert!(rate_function_exp(0.0).is_err());
        for k in 1..100 {
            let e = k as f64 / 100.0;
            assert!(rate_function_exp(1.0 + e).unwrap() >= e * e / 6.0);
            assert!(rate_function_exp(1.0 - e).unwrap() >= e * e / 6.0);
        }
    }

    #[test]
    fn cramer_examples() {
        let at_mean = exponential_upper_tail(50, 1.0).unwrap();
        assert!((at_mean.value - 1.0).abs() < 1e-12);
        let below_mean = exponential_upper_tail(50, 0.5).unwrap();
        assert!((below_mean.value - 1.0).abs() < 1e-12);
        let b = exponential_upper_tail(100, 2.0).unwrap();
        assert_eq!(b.base, Base::Two);
        assert!((b.exponent - 100.0 * 0.306_852_819_440_054_7 / LN_2).abs() < 1e-6);
        assert!((b.exponent - 44.27).abs() < 0.01);
        let lower = exponential_lower_tail(100, 0.5).unwrap();
        let expect = 100.0 * rate_function_exp(0.5).unwrap();
        assert!((lower.in_base(Base::E).exponent - expect).abs() < 1e-6);
        assert!((exponential_lower_tail(10, 1.0).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shipped_rate_checks() {
        assert!(rate_floor_holds());
        assert!(rate_midpoint_convexity(100));
    }

    #[test]
    fn nonconvex_rate_is_rejected() {
        let wavy = |x: f64| (3.0 * x).sin() + 1.0;
        assert!(matches!(cramer_upper_tail(10, 0.0, wavy, 4.0), Err(Error::Contract(_))));
    }

    #[test]
    fn base_conversion_round_trips() {
        let b = azuma_tail(100, 0.5, 1.0).unwrap();
        assert!((b.value - (-12.5f64).exp()).abs() < 1e-18);
        assert!((b.exponent - 12.5 / LN_2).abs() < 1e-12);
        let e = b.in_base(Base::E);
        assert!((e.exponent - 12.5).abs() < 1e-12);
        assert!((e.value - b.value).abs() < 1e-20);
        assert_eq!(azuma_tail(10, 0.0, 1.0).unwrap().value, 1.0);
        // Increment cap 2 with deviation 2t gives the n t²/2 exponent back.
        let doubled = azuma_tail(100, 1.0, 2.0).unwrap();
        assert!((doubled.in_base(Base::E).exponent - 12.5).abs() < 1e-12);
    }

    #[test]
    fn azuma_is_monotone() {
        let mut last = 1.0;
        for n in [1, 10, 100, 1000] {
            let v = azuma_tail(n, 0.3, 1.0).unwrap().value;
            assert!(v <= last);
            last = v;
        }
        assert!(azuma_tail(10, 0.4, 1.0).unwrap().value < azuma_tail(10, 0.2, 1.0).unwrap().value);
    }

    #[test]
    fn divergence_values() {
        assert_eq!(binary_divergence(0.5, 0.5).unwrap(), 0.0);
        assert!((binary_divergence(1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_divergence(0.9, 0.5).unwrap() - 0.531004).abs() < 5e-7);
        assert_eq!(binary_divergence(0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(binary_divergence(0.0, 0.0).unwrap(), 0.0);
        assert!(binary_divergence(1.2, 0.5).is_err());
    }

    #[test]
    fn chernoff_and_locking_formula() {
        let b = chernoff_lower_tail(10, 0.5, 0.9).unwrap();
        assert!((b.exponent - 10.0 * binary_divergence(0.5, 0.9).unwrap()).abs() < 1e-12);
        assert!(chernoff_lower_tail(10, 0.95, 0.9).is_err());
        let v = locking_divergence_lower_bound(0.1, 2f64.powi(20), 1.0);
        assert!((v - (0.1 * 2f64.powi(20) / 800.0 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn pauli_experiment_small() {
        let rep = pauli_trace_norm_experiment(4, 16, 4, 20, &SeededStream::new(1)).unwrap();
        assert!(rep.within_bound);
        assert!((rep.bound - 0.5).abs() < 1e-15);
        assert!(pauli_trace_norm_experiment(6, 4, 1, 1, &SeededStream::new(1)).is_err());
    }

    #[test]
    fn trace_norm_check_values() {
        let rep = trace_norm_randomizing_check(16, 1024, 20, &SeededStream::new(2)).unwrap();
        assert!((rep.epsilon_theory - 0.25).abs() < 1e-15);
        assert!(rep.empirical_max >= rep.empirical_median);
    }
}
