//! Limiting laws and asymptotic predictors.
//!
//! * the normalized stopping time
//!   `X = (T - n log n - (m-1) n log log n) / n` tends to
//!   `Gumbel(-log (m-1)!, 1)`, so `e^{-X}` tends to `Exp(1/(m-1)!)`;
//! * at the largest `k` with surviving k-tons,
//!   `k = e log n + ((e-1)(m-1) - 1/2) log log n + d`, the k-ton count is
//!   Poisson with random rate `e^{(e-1)X - d} / sqrt(2 pi e)`.

mod quad;

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp, Gumbel, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, poisson_ln_pmf};

pub use quad::{integrate, integrate_pieces};

/// Euler-Mascheroni constant to 20 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// Smallest `n` for which `log log n` based formulas are used.
pub const MIN_ASYMPTOTIC_N: u64 = 16;

/// `1 / sqrt(2 pi e)`.
pub fn poisson_rate_scale() -> f64 {
    1.0 / (2.0 * PI * E).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum LimitModel {
    Gumbel { mu: f64, beta: f64 },
    Exponential { lambda: f64 },
    Poisson { lambda: f64 },
}

impl LimitModel {
    pub fn is_continuous(&self) -> bool {
        !matches!(self, LimitModel::Poisson { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LimitModel::Gumbel { mu, beta } => mu.is_finite() && beta > 0.0 && beta.is_finite(),
            LimitModel::Exponential { lambda } | LimitModel::Poisson { lambda } => {
                lambda > 0.0 && lambda.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid parameters for {self}")))
        }
    }

    /// `P(Y <= x)`. For the Poisson family `x` is floored.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LimitModel::Gumbel { mu, beta } => (-(-(x - mu) / beta).exp()).exp(),
            LimitModel::Exponential { lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-lambda * x).exp_m1()
                }
            }
            LimitModel::Poisson { lambda } => {
                if x < 0.0 {
                    return 0.0;
                }
                let top = x.floor() as u64;
                let mut acc = 0.0;
                for r in 0..=top {
                    let p = poisson_ln_pmf(r, lambda).exp();
                    acc += p;
                    if r as f64 > lambda && p < 1e-18 * acc {
                        break;
                    }
                }
                acc.min(1.0)
            }
        }
    }

    /// Probability mass at `r`; zero for continuous families.
    pub fn pmf(&self, r: u64) -> f64 {
        match *self {
            LimitModel::Poisson { lambda } => poisson_ln_pmf(r, lambda).exp(),
            _ => 0.0,
        }
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::domain(format!("quantile level {p} outside [0, 1]")));
        }
        Ok(match *self {
            LimitModel::Gumbel { mu, beta } => mu - beta * (-p.ln()).ln(),
            LimitModel::Exponential { lambda } => -(-p).ln_1p() / lambda,
            LimitModel::Poisson { lambda } => {
                if p == 1.0 {
                    return Ok(f64::INFINITY);
                }
                let mut r = 0u64;
                let mut acc = 0.0;
                loop {
                    acc += poisson_ln_pmf(r, lambda).exp();
                    if acc >= p {
                        break r as f64;
                    }
                    r += 1;
                }
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LimitModel::Gumbel { mu, beta } => Gumbel::new(mu, beta).expect("valid").sample(rng),
            LimitModel::Exponential { lambda } => Exp::new(lambda).expect("valid").sample(rng),
            LimitModel::Poisson { lambda } => Poisson::new(lambda).expect("valid").sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LimitModel::Gumbel { mu, beta } => mu + beta * EULER_GAMMA,
            LimitModel::Exponential { lambda } => 1.0 / lambda,
            LimitModel::Poisson { lambda } => lambda,
        }
    }
}

impl std::fmt::Display for LimitModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LimitModel::Gumbel { mu, beta } => write!(f, "Gumbel(mu={mu}, beta={beta})"),
            LimitModel::Exponential { lambda } => write!(f, "Exponential(lambda={lambda})"),
            LimitModel::Poisson { lambda } => write!(f, "Poisson(lambda={lambda})"),
        }
    }
}

/// `exp(-exp(-(x - mu) / beta))`.
///
/// ```
/// use kton::limits::gumbel_cdf;
/// let half = gumbel_cdf((1.0 / 2f64.ln()).ln(), 0.0, 1.0).unwrap();
/// assert!((half - 0.5).abs() < 1e-15);
/// ```
pub fn gumbel_cdf(x: f64, mu: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("Gumbel scale must be positive, got {beta}")));
    }
    Ok(LimitModel::Gumbel { mu, beta }.cdf(x))
}

/// Limit law of the normalized stopping time: `Gumbel(-log (m-1)!, 1)`.
pub fn erdos_renyi_model(m: u32) -> LimitModel {
    LimitModel::Gumbel {
        mu: -ln_factorial(m.saturating_sub(1) as u64),
        beta: 1.0,
    }
}

/// Limit law of `e^{-X}`: `Exp(1/(m-1)!)`.
pub fn gumbel_to_exponential(m: u32) -> LimitModel {
    LimitModel::Exponential {
        lambda: (-ln_factorial(m.saturating_sub(1) as u64)).exp(),
    }
}

/// `e log n + ((e-1)(m-1) - 1/2) log log n`, the threshold without `d`.
pub fn threshold_base(n: u64, m: u32) -> f64 {
    let ln_n = (n as f64).ln();
    E * ln_n + ((E - 1.0) * (m as f64 - 1.0) - 0.5) * ln_n.ln()
}

/// Integer k-ton level with its effective offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub n: u64,
    pub m: u32,
    pub k: u64,
    pub d_eff: f64,
}

impl ThresholdSpec {
    /// `k` recomputed from `n`, `m` and `d_eff`.
    pub fn reconstruct_k(&self) -> u64 {
        (threshold_base(self.n, self.m) + self.d_eff).round() as u64
    }
}

fn check_asymptotic_n(n: u64) -> Result<()> {
    if n < MIN_ASYMPTOTIC_N {
        return Err(Error::domain(format!(
            "n = {n} is below {MIN_ASYMPTOTIC_N}; log log n is not meaningful"
        )));
    }
    Ok(())
}

/// `k = round(e log n + ((e-1)(m-1) - 1/2) log log n + d)` and the `d_eff`
/// that reproduces `k` exactly.
///
/// ```
/// use kton::limits::kton_threshold;
/// let t = kton_threshold(1_000_000, 1, 0.0).unwrap();
/// assert_eq!(t.k, 36);
/// assert!((t.d_eff + 0.24156).abs() < 1e-4);
/// ```
pub fn kton_threshold(n: u64, m: u32, d: f64) -> Result<ThresholdSpec> {
    check_asymptotic_n(n)?;
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    let base = threshold_base(n, m);
    let k = (base + d).round();
    if k < m as f64 {
        return Err(Error::domain(format!("threshold k = {k} is below m = {m}")));
    }
    Ok(ThresholdSpec {
        n,
        m,
        k: k as u64,
        d_eff: k - base,
    })
}

/// The first `n >= n_hint` at which the threshold lands on an integer with
/// `d_eff` within `tol` of `d`.
///
/// The base grows like `e log n`, so a suitable `n` lies within a factor
/// `e^{1/e}` of `n_hint`.
pub fn snap_threshold(n_hint: u64, m: u32, d: f64, tol: f64) -> Result<ThresholdSpec> {
    check_asymptotic_n(n_hint)?;
    kton_threshold(n_hint, m, d)?;
    let k = (threshold_base(n_hint, m) + d).ceil() as u64;
    let target = k as f64 - d;
    let (mut lo, mut hi) = (n_hint, n_hint.saturating_mul(2));
    while threshold_base(hi, m) < target {
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if threshold_base(mid, m) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let spec = ThresholdSpec {
        n: hi,
        m,
        k,
        d_eff: k as f64 - threshold_base(hi, m),
    };
    if (spec.d_eff - d).abs() > tol {
        return Err(Error::domain(format!(
            "no n near {n_hint} gives d_eff within {tol} of {d}"
        )));
    }
    Ok(spec)
}

/// Centering and scaling of a draw index: `(T - n log n - (m-1) n log log n) / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub n: u64,
    pub m: u32,
}

impl Normalizer {
    pub fn new(n: u64, m: u32) -> Result<Self> {
        check_asymptotic_n(n)?;
        if m == 0 {
            return Err(Error::domain("m must be at least 1"));
        }
        Ok(Self { n, m })
    }

    fn center(&self) -> f64 {
        let n = self.n as f64;
        n * n.ln() + (self.m as f64 - 1.0) * n * n.ln().ln()
    }

    pub fn normalize(&self, draws: f64) -> f64 {
        (draws - self.center()) / self.n as f64
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        self.center() + x * self.n as f64
    }
}

/// `e^{(e-1) x - d} / sqrt(2 pi e)`.
pub fn mixed_poisson_rate(x: f64, d: f64) -> f64 {
    ((E - 1.0) * x - d).exp() * poisson_rate_scale()
}

const MIX_LO: f64 = -40.0;
const MIX_HI: f64 = 40.0;
/// Peaks of the integrand narrow like `1/sqrt(r)`.
const MIX_PIECES: u32 = 320;

/// `P(S = r)` for `S ~ Pois(mixed_poisson_rate(X, d))` with
/// `X ~ Gumbel(-log (m-1)!, 1)`.
pub fn mixed_poisson_pmf(r: u64, d: f64, m: u32) -> f64 {
    let mu = -ln_factorial(m.saturating_sub(1) as u64);
    let integrand = |x: f64| {
        let z = x - mu;
        let ln_density = -z - (-z).exp();
        let rate = mixed_poisson_rate(x, d);
        (ln_density + poisson_ln_pmf(r, rate)).exp()
    };
    integrate_pieces(integrand, MIX_LO, MIX_HI, MIX_PIECES, 1e-13).clamp(0.0, 1.0)
}

/// Gumbel mass of `[x, y]`: `e^{-e^{-y}/(m-1)!} - e^{-e^{-x}/(m-1)!}`.
pub fn completion_cdf_increment(x: f64, y: f64, m: u32) -> Result<f64> {
    if !(x < y) {
        return Err(Error::domain(format!("need x < y, got x = {x}, y = {y}")));
    }
    let model = erdos_renyi_model(m);
    Ok(model.cdf(y) - model.cdf(x))
}

const HARMONIC_EXACT_MAX: u64 = 1_000_000;

/// `H_n`, summed for `n <= 10^6` and `log n + gamma + 1/(2n)` beyond.
pub fn harmonic(n: u64) -> f64 {
    if n <= HARMONIC_EXACT_MAX {
        (1..=n).rev().map(|i| 1.0 / i as f64).sum()
    } else {
        let x = n as f64;
        x.ln() + EULER_GAMMA + 0.5 / x
    }
}

/// Bound `(y - x) e^{e y - x - g} / sqrt(2 pi e)` on the chance that a
/// k-ton survives while the normalized stopping time lies in `[x, y]`,
/// when `k` sits `g` above the threshold. `n` and `m` only set the scale
/// of the statement and do not enter the value.
pub fn tail_bound_theorem2_part2(_n: u64, _m: u32, x: f64, y: f64, g_of_n: f64) -> f64 {
    (y - x).max(0.0) * (E * y - x - g_of_n).exp() * poisson_rate_scale()
}

/// Drift `c sqrt(log log n)` used for `g(n)` in the vanishing and
/// non-vanishing regimes.
pub fn drift(n: u64, c: f64) -> f64 {
    c * (n as f64).ln().ln().max(0.0).sqrt()
}

/// Draws `X` from the Gumbel limit and returns the Poisson mass at `r` for
/// the resulting rate; averaging gives a Monte Carlo estimate of
/// [`mixed_poisson_pmf`].
pub fn mixed_poisson_pmf_sample<R: Rng + ?Sized>(r: u64, d: f64, m: u32, rng: &mut R) -> f64 {
    let mu = -ln_factorial(m.saturating_sub(1) as u64);
    let u: f64 = rng.sample(Open01);
    let x = mu - (-u.ln()).ln();
    poisson_ln_pmf(r, mixed_poisson_rate(x, d)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::stream::trial_rng;

    #[test]
    fn gumbel_examples() {
        assert!((gumbel_cdf(0.0, 0.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((gumbel_cdf(3.0, 3.0, 2.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gumbel_cdf(1e6, 0.0, 1.0).unwrap(), 1.0);
        assert!(gumbel_cdf(0.0, 0.0, 0.0).is_err());
        assert!(gumbel_cdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn model_constructors() {
        assert_eq!(erdos_renyi_model(1), LimitModel::Gumbel { mu: 0.0, beta: 1.0 });
        assert_eq!(erdos_renyi_model(2), LimitModel::Gumbel { mu: 0.0, beta: 1.0 });
        match erdos_renyi_model(3) {
            LimitModel::Gumbel { mu, .. } => assert!((mu + 2f64.ln()).abs() < 1e-15),
            _ => unreachable!(),
        }
        let e3 = gumbel_to_exponential(3);
        assert!((e3.cdf(2.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((gumbel_to_exponential(1).cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(gumbel_to_exponential(1).cdf(1e-300) < 1e-299);
    }

    #[test]
    fn exponential_identity_on_grid() {
        for m in 1..=6 {
            let g = erdos_renyi_model(m);
            let ex = gumbel_to_exponential(m);
            for j in -20..=20 {
                let r = 2f64.powi(j);
                let lhs = 1.0 - g.cdf(-r.ln());
                assert!((lhs - ex.cdf(r)).abs() < 1e-12, "m={m} r={r}");
            }
        }
    }

    #[test]
    fn quantile_round_trip() {
        for model in [
            LimitModel::Gumbel { mu: -0.7, beta: 1.3 },
            LimitModel::Exponential { lambda: 0.5 },
        ] {
            let (lo, hi) = match model {
                LimitModel::Gumbel { mu, beta } => (mu - 10.0 * beta, mu + 10.0 * beta),
                _ => (1e-3, 40.0),
            };
            for i in 0..=200 {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                let p = model.cdf(x);
                if p <= 0.0 || p >= 1.0 {
                    continue;
                }
                let back = model.quantile(p).unwrap();
                // Near the upper tail the CDF is flat to double precision.
                let slope_ok = (model.cdf(x + 1e-6) - p) > 1e-13;
                if slope_ok {
                    assert!((back - x).abs() < 1e-9 * x.abs().max(1.0), "{model} x={x} back={back}");
                }
            }
        }
        let p = LimitModel::Poisson { lambda: 3.0 };
        assert_eq!(p.quantile(p.cdf(4.0)).unwrap(), 4.0);
    }

    #[test]
    fn threshold_examples() {
        let t = kton_threshold(1_000_000, 1, 0.0).unwrap();
        assert_eq!(t.k, 36);
        assert!((t.d_eff - (36.0 - threshold_base(1_000_000, 1))).abs() < 1e-15);
        assert_eq!(t.reconstruct_k(), 36);
        assert_eq!(kton_threshold(1_000_000, 2, 0.0).unwrap().k, 41);
        assert_eq!(kton_threshold(16, 1, 0.0).unwrap().k, 7);
        assert!(kton_threshold(8, 1, 0.0).is_err());
        assert!(kton_threshold(16, 1, -20.0).is_err());
    }

    #[test]
    fn snapping_hits_target_offset() {
        for n in [10_000u64, 1_000_000, 100_000_000] {
            let s = snap_threshold(n, 1, 0.0, 0.01).unwrap();
            assert!(s.n >= n && s.n < 2 * n);
            assert!(s.d_eff.abs() <= 0.01);
            assert_eq!(s.reconstruct_k(), s.k);
        }
    }

    #[test]
    fn normalizer_monotone_and_invertible() {
        let z = Normalizer::new(1000, 2).unwrap();
        assert!(z.normalize(10_000.0) < z.normalize(10_001.0));
        assert!((z.denormalize(z.normalize(12_345.0)) - 12_345.0).abs() < 1e-8);
        assert!(Normalizer::new(15, 1).is_err());
    }

    #[test]
    fn rate_examples() {
        assert!((mixed_poisson_rate(0.0, 0.0) - 0.241_970_7).abs() < 1e-7);
        assert!((mixed_poisson_rate(0.0, poisson_rate_scale().ln()) - 1.0).abs() < 1e-15);
        assert!((mixed_poisson_rate(1.0, 0.0) - 1.3487).abs() < 1e-3);
    }

    #[test]
    fn mixed_pmf_normalizes() {
        // Far enough above the threshold nothing reaches 200.
        for m in [1, 2, 3] {
            let total: f64 = (0..=200).map(|r| mixed_poisson_pmf(r, 20.0, m)).sum();
            assert!((total - 1.0).abs() < 1e-6, "m={m} total={total}");
        }
        assert!(mixed_poisson_pmf(0, 60.0, 1) > 1.0 - 1e-12);
    }

    #[test]
    fn truncated_mass_matches_mixed_poisson_cdf() {
        // Near d = 0 the Gumbel tail carries a few percent of mass past 200.
        for m in [1, 2, 3] {
            for d in [-2.0, 0.0, 1.5] {
                let total: f64 = (0..=200).map(|r| mixed_poisson_pmf(r, d, m)).sum();
                let mu = -ln_factorial(m as u64 - 1);
                let cdf = |x: f64| {
                    let z = x - mu;
                    let pois = LimitModel::Poisson { lambda: mixed_poisson_rate(x, d) };
                    (-z - (-z).exp()).exp() * pois.cdf(200.0)
                };
                let expect = integrate_pieces(cdf, MIX_LO, MIX_HI, 640, 1e-13);
                assert!((total - expect).abs() < 1e-8, "m={m} d={d}: {total} vs {expect}");
            }
        }
    }

    #[test]
    fn mixed_pmf_matches_monte_carlo() {
        let mut rng = trial_rng(11, 0);
        let draws = 400_000;
        for r in 0..4 {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..draws {
                let v = mixed_poisson_pmf_sample(r, 0.0, 1, &mut rng);
                sum += v;
                sq += v * v;
            }
            let mean = sum / draws as f64;
            let se = ((sq / draws as f64 - mean * mean) / draws as f64).sqrt();
            let q = mixed_poisson_pmf(r, 0.0, 1);
            assert!((mean - q).abs() < 4.0 * se + 1e-12, "r={r} mc={mean} quad={q}");
            assert!((mean - q).abs() < 1e-3);
        }
    }

    #[test]
    fn completion_increment_examples() {
        assert!((completion_cdf_increment(-60.0, 60.0, 1).unwrap() - 1.0).abs() < 1e-15);
        let v = completion_cdf_increment(0.0, 60.0, 1).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let v = completion_cdf_increment(0.0, 2f64.ln(), 1).unwrap();
        assert!((v - ((-0.5f64).exp() - (-1.0f64).exp())).abs() < 1e-15);
        assert!(completion_cdf_increment(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn completion_increment_matches_quadrature() {
        let mut rng = trial_rng(5, 0);
        for _ in 0..100 {
            let a: f64 = rng.gen_range(-5.0..8.0);
            let b = a + rng.gen_range(0.01..6.0);
            let m: u32 = rng.gen_range(1..=5);
            let lf = ln_factorial(m as u64 - 1);
            let f = |t: f64| (-t - (-t - lf).exp() - lf).exp();
            let q = integrate(f, a, b, 1e-14);
            let c = completion_cdf_increment(a, b, m).unwrap();
            assert!((q - c).abs() < 1e-10, "{a} {b} {m}");
        }
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic(1), 1.0);
        assert_eq!(harmonic(2), 1.5);
        assert!((harmonic(100) - 5.187_377_517_639_621).abs() < 1e-12);
        let below = harmonic(1_000_000);
        let above = harmonic(1_000_001);
        assert!((above - below - 1.0 / 1_000_001.0).abs() < 1e-11);
    }

    #[test]
    fn tail_bound_examples() {
        let s = poisson_rate_scale();
        assert!((tail_bound_theorem2_part2(100, 1, 0.5, 2.0, E * 2.0 - 0.5) - 1.5 * s).abs() < 1e-15);
        assert!((tail_bound_theorem2_part2(100, 1, 0.0, 1.0, 5.0) - 0.02472).abs() < 2e-5);
        assert!(tail_bound_theorem2_part2(100, 1, 0.0, 1.0, 800.0) == 0.0);
    }

    #[test]
    fn model_json_shape() {
        let json = serde_json::to_string(&LimitModel::Gumbel { mu: 0.0, beta: 1.0 }).unwrap();
        assert_eq!(json, r#"{"family":"Gumbel","params":{"mu":0.0,"beta":1.0}}"#);
    }
}
