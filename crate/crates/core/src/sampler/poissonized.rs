//! Exact stopping-time sampler through the Poisson embedding.
//!
//! Give every type an independent rate-`1/n` Poisson clock; the merged
//! arrival sequence is then an i.i.d. uniform draw sequence, so the
//! collection completes at `tau = max_i G_i` where `G_i` is the time of the
//! `m`-th arrival of type `i`. With `lambda = tau / n`,
//!
//! * `P(lambda <= s) = P(Pois(s) >= m)^n`, sampled by inversion;
//! * the last type holds exactly `m` copies;
//! * the other `n - 1` counts are i.i.d. `Pois(lambda)` conditioned on `>= m`,
//!   so their histogram is one multinomial, drawn as a chain of binomials.
//!
//! The result has exactly the law of `(T, histogram at T)` of the draw-by-draw
//! process at `O(max count)` cost per trial instead of `O(n log n)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Open01};

use super::histogram::CountHistogram;
use super::stream::TrialRng;
use crate::special::{poisson_hazard, poisson_ln_lower, poisson_ln_pmf};

/// Solves `P(Pois(lambda) < m) = q` for `lambda`, given `ln q`.
pub(crate) fn invert_lower_tail(m: u32, ln_q: f64) -> f64 {
    let m = m as u64;
    if m == 1 {
        return -ln_q;
    }
    let g = |lambda: f64| poisson_ln_lower(m, lambda) - ln_q;
    // ln P(Pois < m) >= -lambda, so the root is at or beyond -ln q.
    let mut lo = (-ln_q).max(0.0);
    let mut hi = lo.max(1.0);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dlambda ln P(Pois < m) = -P(Pois = m-1) / P(Pois < m)
        let slope = -(poisson_ln_pmf(m - 1, x) - poisson_ln_lower(m, x)).exp();
        let mut next = x - gx / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

pub(crate) fn run(n: u32, m: u32, rng: &mut TrialRng) -> (u64, CountHistogram) {
    let u: f64 = rng.sample(Open01);
    // q = 1 - u^{1/n}
    let ln_q = (-(u.ln() / n as f64).exp_m1()).ln();
    let lambda = invert_lower_tail(m, ln_q);

    let mut hist = BTreeMap::new();
    hist.insert(m as u64, 1u64);
    let mut remaining = n as u64 - 1;
    let mut c = m as u64;
    let mut total = m as u64;
    while remaining > 0 {
        let h = poisson_hazard(c, lambda);
        let take = if h >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, h)
                .expect("hazard is a probability")
                .sample(rng)
        };
        if take > 0 {
            *hist.entry(c).or_insert(0) += take;
            total += c * take;
            remaining -= take;
        }
        c += 1;
    }
    let hist = CountHistogram::from_multiplicities(hist).expect("n >= 1 types");
    (total, hist)
}
