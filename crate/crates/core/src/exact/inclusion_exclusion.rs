//! Inclusion-exclusion for "exactly `r_i` types are `c_i`-tons" after `N` draws.
//!
//! With `a_i = r_i + j_i` prescribed types per category and
//! `s = sum c_i a_i`, the probability that the prescribed types hold exactly
//! their counts is
//!
//! ```text
//! W(a) = N! / (prod c_i!^{a_i} (N - s)!) * n^{-s} * (1 - sum a_i / n)^{N - s}
//! ```
//!
//! and
//!
//! ```text
//! P(S_{c_1,N} = r_1, ...) = sum_j (-1)^{|j|} multinomial(n; a, rest) prod C(a_i, r_i) W(a).
//! ```
//!
//! Truncating after total order `t = |j|` gives an upper bound for even `t`
//! and a lower bound for odd `t`.
//!
//! Terms are evaluated in log space and summed diagonal by diagonal in linear
//! space, scaled by the largest term, with compensated summation. Every term
//! carries a rounding-error estimate. When the estimate says cancellation
//! has eaten the answer and the instance is small enough, the same sum is
//! redone in exact integer arithmetic over the common denominator `n^N`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::ProbBracket;
use crate::special::{ln_factorial, ln_falling, ln_pow_one_minus, log_sum_exp};

/// Largest integer size, in bits, for which the exact fallback is attempted.
const EXACT_BITS_BUDGET: f64 = 1.0e5;
/// Largest number of terms for which the exact fallback is attempted.
const EXACT_TERMS_BUDGET: u64 = 4_000_000;
/// Relative accuracy below which the float result is accepted as is.
const FLOAT_ACCEPT: f64 = 1e-13;
/// Default truncation rule: stop once a whole diagonal is this small
/// relative to the running sum.
const DIAGONAL_CUTOFF: f64 = 1e-14;
const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Category {
    /// Count value `c`: the category is "types seen exactly `c` times".
    pub count: u64,
    /// Required number of such types.
    pub target: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub n: u64,
    pub draws: u64,
    pub cats: Vec<Category>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Depth {
    /// Truncate at the given total order (clamped to the full depth).
    At(u64),
    /// Smallest depth whose next diagonal is negligible.
    Auto,
}

struct FloatTerm {
    negative: bool,
    ln_abs: f64,
    /// Relative error bound of `exp(ln_abs)`.
    rel_err: f64,
}

impl Problem {
    fn targets(&self) -> u64 {
        self.cats.iter().map(|c| c.target).sum()
    }

    /// Deepest diagonal with any admissible prescription.
    pub(crate) fn full_depth(&self) -> u64 {
        self.n - self.targets()
    }

    /// `a` vectors (prescribed counts) on diagonal `t`, restricted to `s <= N`.
    fn diagonal(&self, t: u64) -> Vec<Vec<u64>> {
        let base: Vec<u64> = self.cats.iter().map(|c| c.target).collect();
        let mut out = Vec::new();
        match self.cats.len() {
            1 => out.push(vec![base[0] + t]),
            2 => {
                for j1 in 0..=t {
                    out.push(vec![base[0] + j1, base[1] + t - j1]);
                }
            }
            _ => unreachable!("one or two categories"),
        }
        out.retain(|a| self.used_draws(a) <= self.draws as u128);
        out
    }

    fn used_draws(&self, a: &[u64]) -> u128 {
        self.cats
            .iter()
            .zip(a)
            .map(|(c, &ai)| c.count as u128 * ai as u128)
            .sum()
    }

    /// No admissible prescription lies beyond this diagonal.
    fn last_nonempty_depth(&self) -> u64 {
        let full = self.full_depth();
        let base = self.used_draws(&self.cats.iter().map(|c| c.target).collect::<Vec<_>>());
        if base > self.draws as u128 {
            return 0;
        }
        let slack = self.draws as u128 - base;
        // Categories with c = 0 never consume draws.
        if self.cats.iter().any(|c| c.count == 0) {
            return full;
        }
        let min_c = self.cats.iter().map(|c| c.count).min().unwrap() as u128;
        full.min((slack / min_c) as u64)
    }

    /// Parts of the multinomial `n! / ((n - |a|)! prod r_i! prod (a_i - r_i)!)`,
    /// which equals `n^{(|a|)} prod C(a_i, r_i) / a_i!`. The largest part is
    /// returned first so that it can be cancelled against `n!`.
    fn multinomial_parts(&self, a: &[u64]) -> Vec<u64> {
        let total: u64 = a.iter().sum();
        let mut parts = vec![self.n - total];
        for (cat, &ai) in self.cats.iter().zip(a) {
            parts.push(cat.target);
            parts.push(ai - cat.target);
        }
        let (imax, _) = parts.iter().enumerate().max_by_key(|(_, &v)| v).unwrap();
        parts.swap(0, imax);
        parts
    }

    fn float_term(&self, t: u64, a: &[u64]) -> FloatTerm {
        let n = self.n;
        let total: u64 = a.iter().sum();
        let s = self.used_draws(a) as u64;
        let mp = self.multinomial_parts(a);
        let mut parts = Vec::with_capacity(12);
        parts.push(ln_falling(n, n - mp[0]));
        for &x in &mp[1..] {
            parts.push(-ln_factorial(x));
        }
        for (cat, &ai) in self.cats.iter().zip(a) {
            parts.push(-(ai as f64) * ln_factorial(cat.count));
        }
        parts.push(ln_falling(self.draws, s));
        parts.push(-(s as f64) * (n as f64).ln());
        parts.push(ln_pow_one_minus(total, n, self.draws - s));
        let ln_abs: f64 = parts.iter().sum();
        let magnitude: f64 = parts
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| p.abs())
            .sum();
        FloatTerm {
            negative: t % 2 == 1,
            ln_abs,
            rel_err: 8.0 * EPS * (magnitude + 1.0),
        }
    }

    /// Numerator of the term over the common denominator `n^N`: the
    /// multinomial above times `N! / ((N - s)! prod c_i!^{a_i})` times
    /// `(n - |a|)^{N - s}`.
    fn exact_term(&self, a: &[u64]) -> BigInt {
        let n = self.n;
        let total: u64 = a.iter().sum();
        let s = self.used_draws(a) as u64;
        let mp = self.multinomial_parts(a);
        let mut num = falling_big(n, n - mp[0]);
        let mut den = BigInt::one();
        for &x in &mp[1..] {
            den *= factorial_big(x);
        }
        num *= falling_big(self.draws, s);
        for (cat, &ai) in self.cats.iter().zip(a) {
            den *= pow_big(&factorial_big(cat.count), ai);
        }
        num *= pow_big(&BigInt::from(n - total), self.draws - s);
        debug_assert!((&num % &den).is_zero());
        num / den
    }

    /// Size in bits of the largest integer the exact pass would build.
    fn exact_bits(&self, last: u64) -> f64 {
        let ln2n = (self.n as f64 + 1.0).log2();
        let mut worst = 0.0f64;
        for t in 0..=last {
            for a in self.diagonal(t) {
                let mp = self.multinomial_parts(&a);
                worst = worst.max((self.n - mp[0]) as f64 * ln2n);
            }
        }
        worst + self.draws as f64 * ln2n
    }

    fn exact_feasible(&self, last: u64) -> bool {
        let per_diag = self.cats.len() as u64;
        let terms = (last + 1).saturating_mul(if per_diag == 2 { last + 2 } else { 1 });
        terms <= EXACT_TERMS_BUDGET
            && self.draws as f64 * (self.n as f64 + 1.0).log2() <= EXACT_BITS_BUDGET
            && self.exact_bits(last) <= EXACT_BITS_BUDGET
    }

    pub(crate) fn bracket(&self, depth: Depth) -> ProbBracket {
        let full = self.full_depth();
        // Diagonals past `last` are empty, so the partial sum is final there.
        let last = self.last_nonempty_depth();
        let requested = match depth {
            Depth::At(d) => Some(d.min(full)),
            Depth::Auto => None,
        };
        let compute_to = match requested {
            Some(d) => d.saturating_add(1).min(last),
            None => last,
        };

        let mut diagonals: Vec<Vec<FloatTerm>> = Vec::new();
        let mut running = 0.0f64;
        let mut scale = f64::NEG_INFINITY;
        let mut prev_ln_mag = f64::INFINITY;
        let mut auto_depth = None;
        for t in 0..=compute_to {
            let terms: Vec<FloatTerm> = self
                .diagonal(t)
                .iter()
                .map(|a| self.float_term(t, a))
                .filter(|ft| ft.ln_abs > f64::NEG_INFINITY)
                .collect();
            let ln_mag = log_sum_exp(&terms.iter().map(|ft| ft.ln_abs).collect::<Vec<_>>());
            diagonals.push(terms);
            if requested.is_none() {
                // Rough rescaled running sum; only feeds the stopping rule.
                if ln_mag > scale {
                    running *= (scale - ln_mag).exp();
                    scale = ln_mag;
                }
                if ln_mag > f64::NEG_INFINITY {
                    let sign = if t % 2 == 1 { -1.0 } else { 1.0 };
                    running += sign * (ln_mag - scale).exp();
                }
                let decreasing = ln_mag < prev_ln_mag;
                prev_ln_mag = ln_mag;
                if t >= 2 && decreasing && running != 0.0 {
                    let ln_running = running.abs().ln() + scale;
                    if ln_mag < DIAGONAL_CUTOFF.ln() + ln_running {
                        auto_depth = Some(t - 1);
                        break;
                    }
                }
            }
        }
        let report_depth = requested.unwrap_or(auto_depth.unwrap_or(last));
        let complete = report_depth >= last;
        let index = report_depth.min(last) as usize;

        let partial = float_partial_sums(&diagonals);
        let est = &partial[index];
        let computed = diagonals.len() as u64 - 1;
        if est.err <= FLOAT_ACCEPT * est.value.abs() || !self.exact_feasible(computed) {
            let sums: Vec<(f64, f64)> = partial.iter().map(|p| (p.value, p.err)).collect();
            return assemble(&sums, index, complete, report_depth);
        }

        // Exact pass over the same diagonals.
        let denom = BigInt::from(self.n).pow(self.draws as u32);
        let mut acc = BigInt::zero();
        let mut sums = Vec::with_capacity(diagonals.len());
        for t in 0..=computed {
            for a in self.diagonal(t) {
                let term = self.exact_term(&a);
                if t % 2 == 1 {
                    acc -= term;
                } else {
                    acc += term;
                }
            }
            let value = BigRational::new(acc.clone(), denom.clone())
                .to_f64()
                .expect("finite");
            // One rounding step from the exact rational.
            sums.push((value, value.abs() * EPS));
        }
        assemble(&sums, index, complete, report_depth)
    }
}

struct Partial {
    value: f64,
    err: f64,
}

fn float_partial_sums(diagonals: &[Vec<FloatTerm>]) -> Vec<Partial> {
    let scale = diagonals
        .iter()
        .flatten()
        .map(|ft| ft.ln_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(diagonals.len());
    let (mut sum, mut comp, mut err) = (0.0f64, 0.0f64, 0.0f64);
    for diag in diagonals {
        for ft in diag {
            let mag = (ft.ln_abs - scale).exp();
            let y = if ft.negative { -mag } else { mag } - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            err += mag * (ft.rel_err + 4.0 * EPS);
        }
        let factor = if scale.is_finite() { scale.exp() } else { 0.0 };
        out.push(Partial {
            value: sum * factor,
            err: (err + 2.0 * EPS * sum.abs()) * factor,
        });
    }
    out
}

fn assemble(sums: &[(f64, f64)], index: usize, complete: bool, depth: u64) -> ProbBracket {
    let estimate = sums[index].0;
    let mut lower = 0.0f64;
    let mut upper = 1.0f64;
    for (t, &(v, e)) in sums.iter().enumerate().take(index + 2) {
        if t % 2 == 0 {
            upper = upper.min(v + e);
        } else {
            lower = lower.max(v - e);
        }
    }
    if complete {
        let (v, e) = sums[index];
        lower = lower.max(v - e);
        upper = upper.min(v + e);
    }
    let lower = lower.clamp(0.0, 1.0);
    let upper = upper.clamp(lower, 1.0);
    ProbBracket::new(lower, upper, depth, estimate)
}

fn falling_big(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i))
}

fn factorial_big(k: u64) -> BigInt {
    falling_big(k, k)
}

fn pow_big(base: &BigInt, e: u64) -> BigInt {
    num_traits::pow::pow(base.clone(), e as usize)
}
