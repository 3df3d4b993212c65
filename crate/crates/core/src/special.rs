//! Log-space special functions shared by the exact, limit and sampler code.

/// Natural log of `Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// Below this length the falling factorial is summed term by term, which is
/// exact to a few ulps even when `n` is huge and `lgamma(n)` differences are not.
const FALLING_DIRECT_MAX: u64 = 4096;

/// `ln(n (n-1) ... (n-k+1))`, requires `k <= n`.
pub fn ln_falling(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k <= FALLING_DIRECT_MAX {
        let mut acc = 0.0;
        let mut comp = 0.0;
        for i in 0..k {
            // Kahan; k can be a few thousand.
            let y = ((n - i) as f64).ln() - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        }
        acc
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// `ln C(n, k)`, `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    ln_falling(n, k) - ln_factorial(k)
}

/// `ln((1 - a/n)^e)` with the convention `0^0 = 1`.
pub fn ln_pow_one_minus(a: u64, n: u64, e: u64) -> f64 {
    if e == 0 {
        return 0.0;
    }
    if a >= n {
        return f64::NEG_INFINITY;
    }
    // For a > n/2 the rounded quotient a/n would lose the digits of n - a.
    let ln = if 2 * a <= n {
        (-(a as f64) / n as f64).ln_1p()
    } else {
        ((n - a) as f64).ln() - (n as f64).ln()
    };
    e as f64 * ln
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln P(Pois(lambda) = r)`.
pub fn poisson_ln_pmf(r: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if r == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    r as f64 * lambda.ln() - lambda - ln_factorial(r)
}

pub fn poisson_pmf(r: u64, lambda: f64) -> f64 {
    poisson_ln_pmf(r, lambda).exp()
}

/// `ln P(Pois(lambda) < m)`, the finite sum `e^-lambda sum_{i<m} lambda^i / i!`.
pub fn poisson_ln_lower(m: u64, lambda: f64) -> f64 {
    if m == 0 {
        return f64::NEG_INFINITY;
    }
    let terms: Vec<f64> = (0..m).map(|i| poisson_ln_pmf(i, lambda)).collect();
    log_sum_exp(&terms).min(0.0)
}

/// `P(Pois(lambda) = c) / P(Pois(lambda) >= c)`, the discrete hazard at `c`.
pub fn poisson_hazard(c: u64, lambda: f64) -> f64 {
    if c == 0 {
        return (-lambda).exp();
    }
    let cf = c as f64;
    if cf > lambda + 1.0 {
        // P(>= c) / P(= c) = sum_j prod_{i=1..j} lambda / (c + i)
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut i = 1.0;
        loop {
            term *= lambda / (cf + i);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            i += 1.0;
        }
        1.0 / sum
    } else {
        let upper = -poisson_ln_lower(c, lambda).exp_m1();
        (poisson_ln_pmf(c, lambda).exp() / upper).min(1.0)
    }
}
