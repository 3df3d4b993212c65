use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    // Welford.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
        min = min.min(v);
        max = max.max(v);
    }
    let n = values.len() as f64;
    let variance = if values.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
    Ok(Summary {
        count: values.len() as u64,
        mean,
        variance,
        std_error: (variance / n).sqrt(),
        min,
        max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustSummary {
    pub count: u64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of already sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("quantile of empty sample or level outside [0, 1]"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&v, p))
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

pub fn robust_summary(values: &[f64]) -> Result<RobustSummary> {
    if values.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = sorted_quantile(&v, 0.25);
    let q3 = sorted_quantile(&v, 0.75);
    Ok(RobustSummary {
        count: v.len() as u64,
        median: sorted_quantile(&v, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_summaries() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        let r = robust_summary(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(r.median, 3.0);
        assert_eq!(r.q1, 2.0);
        assert_eq!(r.iqr, 2.0);
        assert!(summarize(&[]).is_err());
    }
}
