//! Exhaustive comparison of the closed forms against enumeration.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::Result;
use crate::exact::{
    enumerate_exact, expected_ktons, full_depth, joint_prob_bracket, second_moment_ktons, ExactTable,
    JointSpec, OracleStat,
};

/// Above this `n`, `m = 1` queries only visit `r1 >= n - N - 2`; smaller
/// `r1` have probability zero but need `n - r1` alternating orders.
const FULL_R1_SWEEP_MAX_N: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct ComparisonRow {
    pub n: u64,
    #[serde(rename = "N")]
    pub draws: u64,
    pub m: u64,
    pub k: u64,
    pub r1: u64,
    pub r2: u64,
    pub oracle: f64,
    pub estimate: f64,
    pub rel_err: f64,
    pub depths_checked: u64,
    pub violations: u64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Sweep {
    pub instances: u64,
    pub moment_comparisons: u64,
    pub max_rel_err_joint: f64,
    pub max_rel_err_moment: f64,
    pub bracket_violations: u64,
    pub marginal_mass_max_err: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Largest `N >= 1` with `n^N <= limit`, capped at `max_draws` for `n = 1`.
fn max_draws(n: u64, limit: u64, cap: u64) -> u64 {
    if n == 1 {
        return cap;
    }
    let mut draws = 0;
    let mut size: u128 = 1;
    while size * n as u128 <= limit as u128 {
        size *= n as u128;
        draws += 1;
    }
    draws
}

fn rel_err(estimate: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate - exact).abs() / exact.abs()
    }
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `lower <= p <= upper` in exact arithmetic.
fn contains_exact(lower: f64, upper: f64, p: &BigRational) -> bool {
    let lo = BigRational::from_float(lower).expect("finite bound");
    let hi = BigRational::from_float(upper).expect("finite bound");
    &lo <= p && p <= &hi
}

pub(crate) fn sweep_n(n: u64, limit: u64, cap: u64) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for draws in 1..=max_draws(n, limit, cap) {
        let stats: Vec<OracleStat> = (0..=draws).map(OracleStat::CountAt).collect();
        let table = enumerate_exact(n, draws, 1, &stats)?;
        sweep.instances += 1;
        compare_moments(n, draws, &table, &mut sweep)?;
        for m in 1..=draws + 1 {
            for k in (m - 1)..=draws {
                if k == m - 1 || k >= m {
                    compare_joint(n, draws, m, k, &table, &mut sweep)?;
                }
            }
        }
    }
    Ok(sweep)
}

fn compare_moments(n: u64, draws: u64, table: &ExactTable, sweep: &mut Sweep) -> Result<()> {
    for k in 0..=draws {
        let idx = k as usize;
        let first = to_f64(&table.moment(idx, 1));
        let second = to_f64(&table.moment(idx, 2));
        let e1 = rel_err(expected_ktons(n, draws, k)?, first);
        let e2 = rel_err(second_moment_ktons(n, draws, k)?, second);
        sweep.max_rel_err_moment = sweep.max_rel_err_moment.max(e1).max(e2);
        sweep.moment_comparisons += 2;
    }
    Ok(())
}

fn compare_joint(n: u64, draws: u64, m: u64, k: u64, table: &ExactTable, sweep: &mut Sweep) -> Result<()> {
    let collapsed = k == m - 1;
    let keep: Vec<usize> = if collapsed {
        vec![k as usize]
    } else {
        vec![(m - 1) as usize, k as usize]
    };
    let marginal = table.marginal(&keep);
    let r1_min = if m == 1 && n > FULL_R1_SWEEP_MAX_N {
        n.saturating_sub(draws + 2)
    } else {
        0
    };
    let mut mass = BigRational::zero();
    let mut mass_float = 0.0;
    for r1 in r1_min..=n {
        if (m - 1) as u128 * r1 as u128 > draws as u128 {
            break;
        }
        // Collapsed queries are zero off the diagonal; one neighbour suffices.
        let r2_range = if collapsed { r1.saturating_sub(1)..=r1 } else { 0..=n - r1 };
        for r2 in r2_range {
            if !collapsed && (m - 1) as u128 * r1 as u128 + k as u128 * r2 as u128 > draws as u128 {
                break;
            }
            let spec = JointSpec::new(n, draws, m, k, r1, r2)?;
            let exact = if collapsed {
                if r1 == r2 {
                    marginal.prob(&[Some(r1)])
                } else {
                    BigRational::zero()
                }
            } else {
                marginal.prob(&[Some(r1), Some(r2)])
            };
            let full = full_depth(&spec)?;
            let top = full.min(draws + 2);
            let mut violations = 0;
            for depth in 0..=top {
                let b = joint_prob_bracket(&spec, depth)?;
                if !contains_exact(b.lower, b.upper, &exact) {
                    violations += 1;
                }
            }
            let b = joint_prob_bracket(&spec, full)?;
            let oracle = to_f64(&exact);
            let err = rel_err(b.estimate, oracle);
            if !collapsed || r1 == r2 {
                mass += exact.clone();
                mass_float += b.estimate;
            }
            sweep.max_rel_err_joint = sweep.max_rel_err_joint.max(err);
            sweep.bracket_violations += violations;
            sweep.rows.push(ComparisonRow {
                n,
                draws,
                m,
                k,
                r1,
                r2,
                oracle,
                estimate: b.estimate,
                rel_err: err,
                depths_checked: top + 1,
                violations,
            });
        }
    }
    // Summed over the full grid, the joint law is a distribution.
    if r1_min == 0 {
        debug_assert!(mass.is_one());
        sweep.marginal_mass_max_err = sweep.marginal_mass_max_err.max((mass_float - 1.0).abs());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_ladder() {
        assert_eq!(max_draws(2, 1_000_000, 20), 19);
        assert_eq!(max_draws(12, 1_000_000, 20), 5);
        assert_eq!(max_draws(1_000_000, 1_000_000, 20), 1);
        assert_eq!(max_draws(1, 1_000_000, 7), 7);
    }

    #[test]
    fn small_sweep_is_clean() {
        let s = sweep_n(3, 1_000, 20).unwrap();
        assert_eq!(s.instances, 6);
        assert_eq!(s.bracket_violations, 0);
        assert!(s.max_rel_err_joint <= 1e-10, "{}", s.max_rel_err_joint);
        assert!(s.max_rel_err_moment <= 1e-12, "{}", s.max_rel_err_moment);
        assert!(s.marginal_mass_max_err <= 1e-10);
    }
}
