//! Empirical statistics for comparing simulations with the limit laws:
//! ECDFs, Kolmogorov-Smirnov distances, Pearson chi-square against discrete
//! laws, moment summaries and the k-ton coupling diagnostics.

mod summary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::limits::{LimitModel, Normalizer};
use crate::sampler::TrialRecord;
use crate::special::{ln_factorial, poisson_ln_pmf};

pub use summary::{median, quantile, robust_summary, summarize, RobustSummary, Summary};

/// Ordered multiset of reals with optional weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("sample contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            values,
            weights: None,
        })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::domain("values and weights differ in length"));
        }
        if values.is_empty() {
            return Err(Error::domain("empty sample"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::domain("weights must be non-negative with positive total"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("sample contains NaN"));
        }
        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, weights) = pairs.into_iter().unzip();
        Ok(Self {
            values,
            weights: Some(weights),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    fn total_weight(&self) -> f64 {
        self.weights.as_ref().map_or(self.values.len() as f64, |w| w.iter().sum())
    }

    /// Kish effective sample size; the plain count when unweighted.
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            None => self.values.len() as f64,
            Some(w) => {
                let s: f64 = w.iter().sum();
                s * s / w.iter().map(|x| x * x).sum::<f64>()
            }
        }
    }

    /// Distinct values with the ECDF value reached at each, ascending.
    pub fn ecdf_steps(&self) -> Vec<(f64, f64)> {
        let total = self.total_weight();
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            acc += self.weight(i);
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = acc / total,
                _ => out.push((v, acc / total)),
            }
        }
        if let Some(last) = out.last_mut() {
            last.1 = 1.0;
        }
        out
    }

    /// Right-continuous ECDF at `x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let steps = self.ecdf_steps();
        let idx = steps.partition_point(|s| s.0 <= x);
        if idx == 0 {
            0.0
        } else {
            steps[idx - 1].1
        }
    }
}

/// Outcome of a goodness-of-fit comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub sample_size: u64,
    pub reference: String,
    pub p_value_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<u64>,
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        acc += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, size: f64) -> f64 {
    let rt = size.sqrt();
    kolmogorov_sf((rt + 0.12 + 0.11 / rt) * d)
}

/// Sup distance between the ECDF and a continuous model CDF, checked on
/// both sides of every jump.
///
/// ```
/// use kton::limits::LimitModel;
/// use kton::stats::{ks_distance, EmpiricalSample};
///
/// let model = LimitModel::Exponential { lambda: 1.0 };
/// let sample = EmpiricalSample::new(vec![0.5]).unwrap();
/// let p = model.cdf(0.5);
/// let report = ks_distance(&sample, &model).unwrap();
/// assert!((report.statistic - p.max(1.0 - p)).abs() < 1e-15);
/// ```
pub fn ks_distance(sample: &EmpiricalSample, model: &LimitModel) -> Result<GofReport> {
    if !model.is_continuous() {
        return Err(Error::domain(format!(
            "{model} is discrete; use a chi-square comparison"
        )));
    }
    model.validate()?;
    let mut prev = 0.0;
    let mut d = 0.0f64;
    for (x, f_emp) in sample.ecdf_steps() {
        let f = model.cdf(x);
        d = d.max((f - prev).abs()).max((f_emp - f).abs());
        prev = f_emp;
    }
    let size = sample.effective_size();
    Ok(GofReport {
        statistic: d,
        sample_size: sample.len() as u64,
        reference: model.to_string(),
        p_value_bound: Some(ks_p_value(d, size)),
        degrees_of_freedom: None,
    })
}

/// Two-sample KS distance, with the asymptotic p-value at the effective size
/// `n1 n2 / (n1 + n2)`.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> GofReport {
    let sa = a.ecdf_steps();
    let sb = b.ecdf_steps();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d = 0.0f64;
    while i < sa.len() || j < sb.len() {
        let xa = sa.get(i).map_or(f64::INFINITY, |s| s.0);
        let xb = sb.get(j).map_or(f64::INFINITY, |s| s.0);
        let x = xa.min(xb);
        if xa == x {
            fa = sa[i].1;
            i += 1;
        }
        if xb == x {
            fb = sb[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    let (na, nb) = (a.effective_size(), b.effective_size());
    GofReport {
        statistic: d,
        sample_size: (a.len() + b.len()) as u64,
        reference: "two-sample".into(),
        p_value_bound: Some(ks_p_value(d, na * nb / (na + nb))),
        degrees_of_freedom: None,
    }
}

/// Minimum expected count per bin after merging.
pub const MIN_EXPECTED: f64 = 5.0;
/// Smallest total count accepted by the chi-square comparisons.
pub const MIN_CHI_SQUARE_TOTAL: u64 = 100;

/// Pearson statistic of observed counts against `Pois(lambda)`.
pub fn chi_square_poisson(counts: &BTreeMap<u64, u64>, lambda: f64) -> Result<GofReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("Poisson rate must be positive, got {lambda}")));
    }
    chi_square_pmf(
        counts,
        |r| poisson_ln_pmf(r, lambda).exp(),
        &LimitModel::Poisson { lambda }.to_string(),
    )
}

/// Pearson statistic of observed counts against the discrete law `pmf` on
/// the non-negative integers. Bins with expected count below
/// [`MIN_EXPECTED`] are merged into their neighbours, tails first.
pub fn chi_square_pmf(
    counts: &BTreeMap<u64, u64>,
    pmf: impl Fn(u64) -> f64,
    reference: &str,
) -> Result<GofReport> {
    let total: u64 = counts.values().sum();
    if total < MIN_CHI_SQUARE_TOTAL {
        return Err(Error::domain(format!(
            "chi-square needs at least {MIN_CHI_SQUARE_TOTAL} observations, got {total}"
        )));
    }
    let max_obs = counts.keys().next_back().copied().unwrap_or(0);
    let n = total as f64;
    // (observed, expected) per value, then one open upper-tail bin.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    let mut r = 0u64;
    loop {
        let p = pmf(r);
        cum += p;
        bins.push((counts.get(&r).copied().unwrap_or(0) as f64, n * p));
        r += 1;
        if r > max_obs && (n * (1.0 - cum) < 1e-3 || r > max_obs + 50) {
            break;
        }
    }
    bins.push((0.0, (n * (1.0 - cum)).max(0.0)));
    let bins = merge_bins(bins);
    if bins.len() <= 1 {
        return Err(Error::domain("degenerate binning: at most one bin after merging"));
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = bins.len() as u64 - 1;
    let p = ChiSquared::new(dof as f64).map(|c| c.sf(statistic)).ok();
    Ok(GofReport {
        statistic,
        sample_size: total,
        reference: reference.to_string(),
        p_value_bound: p,
        degrees_of_freedom: Some(dof),
    })
}

fn merge_bins(mut bins: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let join = |a: (f64, f64), b: (f64, f64)| (a.0 + b.0, a.1 + b.1);
    while bins.len() > 1 && bins[bins.len() - 1].1 < MIN_EXPECTED {
        let last = bins.pop().unwrap();
        let prev = bins.pop().unwrap();
        bins.push(join(prev, last));
    }
    while bins.len() > 1 && bins[0].1 < MIN_EXPECTED {
        let first = bins.remove(0);
        bins[0] = join(first, bins[0]);
    }
    let mut i = 1;
    while i + 1 < bins.len() {
        if bins[i].1 < MIN_EXPECTED {
            let b = bins.remove(i);
            bins[i] = join(b, bins[i]);
        } else {
            i += 1;
        }
    }
    bins
}

/// `k! S_k / (log n)^{k-m+1}`.
pub fn normalized_kton(s_k: f64, n: u64, m: u32, k: u64) -> f64 {
    let power = k as f64 - m as f64 + 1.0;
    (ln_factorial(k) + s_k.ln() - power * (n as f64).ln().ln()).exp()
}

/// Default `epsilon` in the range check `k <= epsilon log n`.
pub const DEFAULT_RANGE_EPSILON: f64 = 0.25;

/// Checks `m <= k <= epsilon log n`, the practical stand-in for
/// `k = o(log n)`.
pub fn check_kton_range(n: u64, m: u32, k: u64, epsilon: f64) -> Result<()> {
    if k < m as u64 {
        return Err(Error::domain(format!("k = {k} is below m = {m}")));
    }
    let bound = epsilon * (n as f64).ln();
    if k as f64 > bound {
        return Err(Error::domain(format!(
            "k = {k} exceeds {epsilon} log n = {bound:.3} at n = {n}"
        )));
    }
    Ok(())
}

/// Robust summary of `|k! S_k / (log n)^{k-m+1} - e^{-X}|` per trial, with
/// `X` the normalized stopping time.
pub fn coupling_residuals(trials: &[TrialRecord], n: u64, m: u32, k: u64) -> Result<RobustSummary> {
    let draws: Vec<f64> = trials.iter().map(|t| t.total_draws as f64).collect();
    let ktons: Vec<f64> = trials.iter().map(|t| t.kton(k) as f64).collect();
    coupling_residuals_raw(&draws, &ktons, n, m, k, DEFAULT_RANGE_EPSILON)
}

/// [`coupling_residuals`] on raw `(T, S_k)` columns.
pub fn coupling_residuals_raw(
    draws: &[f64],
    ktons: &[f64],
    n: u64,
    m: u32,
    k: u64,
    epsilon: f64,
) -> Result<RobustSummary> {
    if draws.len() != ktons.len() || draws.is_empty() {
        return Err(Error::domain("need equally many, and at least one, T and S_k values"));
    }
    check_kton_range(n, m, k, epsilon)?;
    let z = Normalizer::new(n, m)?;
    let residuals: Vec<f64> = draws
        .iter()
        .zip(ktons)
        .map(|(&t, &s)| (normalized_kton(s, n, m, k) - (-z.normalize(t)).exp()).abs())
        .collect();
    robust_summary(&residuals)
}

/// Pairwise correlations of the normalized k-ton counts for `k = m..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub ks: Vec<u64>,
    pub matrix: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Smallest off-diagonal entry; NaN if any coordinate is constant.
    pub fn min_pairwise(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.ks.len() {
            for j in i + 1..self.ks.len() {
                let c = self.matrix[i][j];
                if c.is_nan() {
                    return f64::NAN;
                }
                min = min.min(c);
            }
        }
        min
    }
}

pub fn linear_dependence_check(
    trials: &[TrialRecord],
    n: u64,
    m: u32,
    big_k: u64,
) -> Result<CorrelationMatrix> {
    if big_k < m as u64 {
        return Err(Error::domain(format!("K = {big_k} is below m = {m}")));
    }
    let ks: Vec<u64> = (m as u64..=big_k).collect();
    let columns: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| trials.iter().map(|t| normalized_kton(t.kton(k) as f64, n, m, k)).collect())
        .collect();
    correlation_matrix(ks, &columns)
}

/// Pearson correlations between columns of equal length.
pub fn correlation_matrix(ks: Vec<u64>, columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let len = columns.first().map_or(0, Vec::len);
    if len < 2 || columns.iter().any(|c| c.len() != len) {
        return Err(Error::domain("need at least two rows in every column"));
    }
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|c| {
            let s = summarize(c).expect("non-empty");
            (s.mean, s.variance.sqrt())
        })
        .collect();
    let p = columns.len();
    let mut matrix = vec![vec![1.0; p]; p];
    for i in 0..p {
        for j in i + 1..p {
            let (mi, si) = stats[i];
            let (mj, sj) = stats[j];
            let cov: f64 = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| (a - mi) * (b - mj))
                .sum::<f64>()
                / (len as f64 - 1.0);
            let c = if si > 0.0 && sj > 0.0 {
                (cov / (si * sj)).clamp(-1.0, 1.0)
            } else {
                f64::NAN
            };
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }
    Ok(CorrelationMatrix { ks, matrix })
}

/// Histogram of non-negative integer observations.
pub fn tally(values: impl IntoIterator<Item = u64>) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    for v in values {
        *out.entry(v).or_insert(0) += 1;
    }
    out
}
