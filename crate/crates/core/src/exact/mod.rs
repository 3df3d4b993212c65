//! Exact and log-space evaluation of the occupancy formulas.
//!
//! After `N` uniform draws from `n` types, `S_{k,N}` is the number of types
//! seen exactly `k` times. This module gives its first two moments, the
//! probability that prescribed types hold prescribed counts, and the joint
//! law of `(S_{m-1,N}, S_{k,N})` by inclusion-exclusion with Bonferroni
//! brackets. [`oracle`] enumerates every draw sequence of tiny instances and
//! serves as ground truth for the rest.

mod inclusion_exclusion;
mod logprob;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_falling, ln_pow_one_minus, poisson_ln_pmf};
use inclusion_exclusion::{Category, Depth, Problem};

pub use logprob::LogProb;
pub use oracle::{enumerate_exact, ExactTable, OracleStat, ORACLE_LIMIT};

/// Two-sided bound on a probability from consecutive truncations of the
/// inclusion-exclusion sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbBracket {
    pub lower: f64,
    pub upper: f64,
    /// Last order `t = j1 + j2` included in `estimate`.
    pub truncation_depth: u64,
    pub converged: bool,
    /// Partial sum at `truncation_depth`.
    pub estimate: f64,
}

impl ProbBracket {
    pub(crate) fn new(lower: f64, upper: f64, truncation_depth: u64, estimate: f64) -> Self {
        let upper = upper.max(lower);
        let width = upper - lower;
        Self {
            lower,
            upper,
            truncation_depth,
            converged: width < 1e-12 * upper.abs().max(1e-300),
            estimate,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Query for `P(S_{m-1,N} = r1, S_{k,N} = r2)`.
///
/// With `k = m - 1` both coordinates count the same types, so only `r1 = r2`
/// can have positive probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSpec {
    pub n: u64,
    #[serde(rename = "N")]
    pub draws: u64,
    pub m: u64,
    pub k: u64,
    pub r1: u64,
    pub r2: u64,
}

impl JointSpec {
    pub fn new(n: u64, draws: u64, m: u64, k: u64, r1: u64, r2: u64) -> Result<Self> {
        let spec = Self {
            n,
            draws,
            m,
            k,
            r1,
            r2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "must be at least 1"));
        }
        if self.draws == 0 {
            return Err(Error::validation("N", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::validation("m", "must be at least 1"));
        }
        if self.k + 1 < self.m {
            return Err(Error::validation("k", "must be at least m - 1"));
        }
        if self.k == self.m - 1 {
            if self.r1 > self.n || (self.m - 1) as u128 * self.r1 as u128 > self.draws as u128 {
                return Err(Error::domain("infeasible marginal: (m-1) r1 > N or r1 > n"));
            }
            return Ok(());
        }
        if self.r1 + self.r2 > self.n {
            return Err(Error::domain(format!(
                "r1 + r2 = {} exceeds n = {}",
                self.r1 + self.r2,
                self.n
            )));
        }
        let used = (self.m - 1) as u128 * self.r1 as u128 + self.k as u128 * self.r2 as u128;
        if used > self.draws as u128 {
            return Err(Error::domain(format!(
                "(m-1) r1 + k r2 = {used} exceeds N = {}",
                self.draws
            )));
        }
        Ok(())
    }

    fn collapsed(&self) -> bool {
        self.k + 1 == self.m
    }

    fn problem(&self) -> Problem {
        let cats = if self.collapsed() {
            vec![Category {
                count: self.k,
                target: self.r1,
            }]
        } else {
            vec![
                Category {
                    count: self.m - 1,
                    target: self.r1,
                },
                Category {
                    count: self.k,
                    target: self.r2,
                },
            ]
        };
        Problem {
            n: self.n,
            draws: self.draws,
            cats,
        }
    }
}

fn check_moment_args(n: u64, draws: u64, k: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if k > draws {
        return Err(Error::domain(format!("k = {k} exceeds N = {draws}")));
    }
    Ok(())
}

/// `ln E(S_{k,N}) = ln(n C(N,k) n^{-k} (1 - 1/n)^{N-k})`.
pub fn ln_expected_ktons(n: u64, draws: u64, k: u64) -> Result<LogProb> {
    check_moment_args(n, draws, k)?;
    let ln = (n as f64).ln() + ln_falling(draws, k) - ln_factorial(k) - k as f64 * (n as f64).ln()
        + ln_pow_one_minus(1, n, draws - k);
    Ok(LogProb::from_ln(ln))
}

/// Expected number of types seen exactly `k` times in `N` draws.
///
/// ```
/// use kton::exact::expected_ktons;
/// assert!((expected_ktons(2, 3, 3).unwrap() - 0.25).abs() < 1e-15);
/// ```
pub fn expected_ktons(n: u64, draws: u64, k: u64) -> Result<f64> {
    ln_expected_ktons(n, draws, k).map(LogProb::value)
}

/// `E(S_{k,N}^2)`: the first moment plus the ordered-pair term
/// `n(n-1) N! / (k!^2 (N-2k)!) n^{-2k} (1 - 2/n)^{N-2k}`, which vanishes when
/// `2k > N` or `n = 1`.
pub fn second_moment_ktons(n: u64, draws: u64, k: u64) -> Result<f64> {
    let first = expected_ktons(n, draws, k)?;
    if n < 2 || 2 * k > draws {
        return Ok(first);
    }
    let ln_pair = (n as f64).ln() + ((n - 1) as f64).ln() + ln_falling(draws, 2 * k)
        - 2.0 * ln_factorial(k)
        - 2.0 * k as f64 * (n as f64).ln()
        + ln_pow_one_minus(2, n, draws - 2 * k);
    Ok(first + ln_pair.exp())
}

/// Probability that `r1` prescribed types are `(m-1)`-tons and `r2` other
/// prescribed types are `k`-tons after `N` draws.
///
/// ```
/// use kton::exact::{prescribed_type_prob, JointSpec};
/// let spec = JointSpec::new(2, 2, 1, 2, 0, 1).unwrap();
/// assert!((prescribed_type_prob(&spec).unwrap() - 0.25).abs() < 1e-15);
/// ```
pub fn prescribed_type_prob(spec: &JointSpec) -> Result<f64> {
    spec.validate()?;
    let (r1, r2) = if spec.collapsed() {
        (spec.r1, 0)
    } else {
        (spec.r1, spec.r2)
    };
    let used = (spec.m - 1) * r1 + spec.k * r2;
    let ln = ln_falling(spec.draws, used)
        - r1 as f64 * ln_factorial(spec.m - 1)
        - r2 as f64 * ln_factorial(spec.k)
        - used as f64 * (spec.n as f64).ln()
        + ln_pow_one_minus(r1 + r2, spec.n, spec.draws - used);
    Ok(ln.exp().min(1.0))
}

/// Bonferroni bracket on `P(S_{m-1,N} = r1, S_{k,N} = r2)` truncated at
/// order `depth`.
///
/// Depths past `n - r1 - r2` are clamped; the full sum is exact up to
/// rounding, and the bracket then collapses around it.
pub fn joint_prob_bracket(spec: &JointSpec, depth: u64) -> Result<ProbBracket> {
    spec.validate()?;
    if spec.collapsed() && spec.r1 != spec.r2 {
        return Ok(ProbBracket::new(0.0, 0.0, 0, 0.0));
    }
    Ok(spec.problem().bracket(Depth::At(depth)))
}

/// Like [`joint_prob_bracket`], stopping at the first order whose next
/// diagonal is below `1e-14` of the running sum.
pub fn joint_prob(spec: &JointSpec) -> Result<ProbBracket> {
    spec.validate()?;
    if spec.collapsed() && spec.r1 != spec.r2 {
        return Ok(ProbBracket::new(0.0, 0.0, 0, 0.0));
    }
    Ok(spec.problem().bracket(Depth::Auto))
}

/// Deepest meaningful truncation order for `spec`.
pub fn full_depth(spec: &JointSpec) -> Result<u64> {
    spec.validate()?;
    Ok(spec.problem().full_depth())
}

/// Bracket on `P(S_{k,N} = r)`; `depth = None` picks the depth automatically.
pub fn marginal_prob_bracket(
    n: u64,
    draws: u64,
    k: u64,
    r: u64,
    depth: Option<u64>,
) -> Result<ProbBracket> {
    if n == 0 || draws == 0 {
        return Err(Error::domain("n and N must be at least 1"));
    }
    if r > n || k as u128 * r as u128 > draws as u128 {
        return Ok(ProbBracket::new(0.0, 0.0, 0, 0.0));
    }
    let problem = Problem {
        n,
        draws,
        cats: vec![Category {
            count: k,
            target: r,
        }],
    };
    Ok(problem.bracket(depth.map_or(Depth::Auto, Depth::At)))
}

/// Product-of-Poissons limit for the joint law: `Pois(lambda1)` mass at `r1`
/// times `Pois(lambda2)` mass at `r2`, where
/// `lambda1 = e^{-f/n} / (m-1)!` and `lambda2 = e^{(e-1) f/n - d} / sqrt(2 pi e)`.
pub fn asymptotic_joint_prediction(spec: &JointSpec, f_over_n: f64, d: f64) -> f64 {
    let lambda1 = (-f_over_n - ln_factorial(spec.m - 1)).exp();
    let lambda2 = crate::limits::mixed_poisson_rate(f_over_n, d);
    (poisson_ln_pmf(spec.r1, lambda1) + poisson_ln_pmf(spec.r2, lambda2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn moment_examples() {
        assert!(close(expected_ktons(2, 2, 1).unwrap(), 1.0, 1e-14));
        assert!(close(expected_ktons(2, 3, 3).unwrap(), 0.25, 1e-14));
        assert!(close(expected_ktons(1, 5, 5).unwrap(), 1.0, 1e-14));
        assert_eq!(expected_ktons(1, 5, 4).unwrap(), 0.0);
        assert!(close(second_moment_ktons(2, 2, 1).unwrap(), 2.0, 1e-14));
        assert!(close(second_moment_ktons(2, 3, 3).unwrap(), 0.25, 1e-14));
        assert!(close(second_moment_ktons(3, 2, 1).unwrap(), 8.0 / 3.0, 1e-14));
        assert!(matches!(expected_ktons(2, 3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn expected_ktons_large_n_matches_direct_formula() {
        let (n, draws, k) = (1_000_000u64, 13_815_511u64, 1u64);
        let direct = draws as f64 * (1.0 - 1.0 / n as f64).powf((draws - 1) as f64);
        assert!(close(expected_ktons(n, draws, k).unwrap(), direct, 1e-9));
    }

    #[test]
    fn prescribed_examples() {
        let w = |n, draws, m, k, r1, r2| {
            prescribed_type_prob(&JointSpec::new(n, draws, m, k, r1, r2).unwrap()).unwrap()
        };
        assert!(close(w(2, 2, 1, 1, 1, 0), 0.25, 1e-14));
        assert!(close(w(2, 2, 1, 2, 0, 1), 0.25, 1e-14));
        assert_eq!(w(5, 7, 2, 3, 0, 0), 1.0);
        // r1 + r2 = n with nothing left over: 0^0 = 1.
        assert!(close(w(2, 2, 1, 2, 1, 1), 0.25, 1e-14));
    }

    #[test]
    fn joint_examples() {
        let full = |n, draws, m, k, r1, r2| {
            joint_prob_bracket(&JointSpec::new(n, draws, m, k, r1, r2).unwrap(), u64::MAX).unwrap()
        };
        let b = full(2, 2, 1, 2, 0, 1);
        assert!(b.converged && b.upper.abs() < 1e-15);
        let b = full(2, 2, 1, 2, 1, 1);
        assert!(b.converged && close(b.estimate, 0.5, 1e-14));
        let b = full(3, 3, 1, 1, 0, 3);
        assert!(b.converged && close(b.estimate, 6.0 / 27.0, 1e-14));
        assert_eq!(b.truncation_depth, 0);
    }

    #[test]
    fn infeasible_specs_rejected() {
        assert!(JointSpec::new(3, 2, 1, 2, 0, 2).is_err());
        assert!(JointSpec::new(3, 9, 1, 1, 2, 2).is_err());
        assert!(JointSpec::new(3, 9, 3, 1, 0, 0).is_err());
    }

    #[test]
    fn brackets_tighten_with_depth() {
        let spec = JointSpec::new(30, 60, 1, 3, 1, 2).unwrap();
        let mut prev = ProbBracket::new(0.0, 1.0, 0, 0.0);
        for depth in 0..=27 {
            let b = joint_prob_bracket(&spec, depth).unwrap();
            assert!(b.lower <= b.upper);
            assert!(b.lower >= prev.lower - 1e-15 && b.upper <= prev.upper + 1e-15);
            prev = b;
        }
        assert!(prev.converged);
        let auto = joint_prob(&spec).unwrap();
        assert!(close(auto.estimate, prev.estimate, 1e-12));
    }

    #[test]
    fn prediction_examples() {
        let spec = JointSpec::new(100, 100, 1, 5, 0, 0).unwrap();
        let base = (-1.0f64).exp() * (-1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).exp();
        assert!(close(asymptotic_joint_prediction(&spec, 0.0, 0.0), base, 1e-14));
        let spec = JointSpec::new(100, 100, 1, 5, 1, 0).unwrap();
        assert!(close(asymptotic_joint_prediction(&spec, 0.0, 0.0), base, 1e-14));
    }
}
