//! Brute-force ground truth: walk all `n^N` equally likely draw sequences
//! and tabulate the requested statistics with exact rational weights.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n^N` the oracle will enumerate.
pub const ORACLE_LIMIT: u64 = 100_000_000;

/// A statistic of one draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStat {
    /// `S_{i,N}`: types seen exactly `i` times after all `N` draws.
    CountAt(u64),
    /// Draw at which every type first has `m` copies; `None` if that has not
    /// happened by draw `N`.
    StoppingTime,
    /// `S_k` at the stopping time; `None` if not complete by draw `N`.
    CountAtStop(u64),
}

impl fmt::Display for OracleStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleStat::CountAt(i) => write!(f, "S_{i}"),
            OracleStat::StoppingTime => write!(f, "T"),
            OracleStat::CountAtStop(k) => write!(f, "S_{k}@T"),
        }
    }
}

/// Outcome key: one value per requested statistic, `None` for censored.
pub type Outcome = Vec<Option<u64>>;

/// Exact joint distribution of the requested statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTable {
    pub n: u64,
    pub draws: u64,
    pub m: u64,
    pub stats: Vec<OracleStat>,
    rows: BTreeMap<Outcome, BigRational>,
}

/// Enumerates every draw sequence of an `(n, N)` instance.
///
/// ```
/// use kton::exact::{enumerate_exact, OracleStat};
/// use num_rational::BigRational;
///
/// let table = enumerate_exact(3, 3, 1, &[OracleStat::CountAt(1)]).unwrap();
/// let p = table.prob(&[Some(3)]);
/// assert_eq!(p, BigRational::new(2.into(), 9.into()));
/// ```
pub fn enumerate_exact(n: u64, draws: u64, m: u64, stats: &[OracleStat]) -> Result<ExactTable> {
    if n == 0 || m == 0 {
        return Err(Error::domain("n and m must be at least 1"));
    }
    let total = (n as u128).checked_pow(draws as u32).filter(|&t| t <= ORACLE_LIMIT as u128);
    let Some(total) = total else {
        return Err(Error::TooLarge {
            n,
            draws,
            limit: ORACLE_LIMIT,
        });
    };
    let mut walker = Walker {
        n: n as usize,
        draws: draws as usize,
        m,
        stats,
        counts: vec![0; n as usize],
        mult: vec![0; draws as usize + 2],
        short: n,
        stop: None,
        tally: HashMap::new(),
    };
    walker.mult[0] = n;
    walker.descend(0);
    let denom = BigInt::from(total);
    let rows = walker
        .tally
        .into_iter()
        .map(|(k, c)| (k, BigRational::new(BigInt::from(c), denom.clone())))
        .collect();
    Ok(ExactTable {
        n,
        draws,
        m,
        stats: stats.to_vec(),
        rows,
    })
}

struct Walker<'a> {
    n: usize,
    draws: usize,
    m: u64,
    stats: &'a [OracleStat],
    counts: Vec<u64>,
    mult: Vec<u64>,
    short: u64,
    /// Stopping time and a snapshot of the histogram at that time.
    stop: Option<(u64, Vec<u64>)>,
    tally: HashMap<Outcome, u64>,
}

impl Walker<'_> {
    fn descend(&mut self, depth: usize) {
        if depth == self.draws {
            let key: Outcome = self.stats.iter().map(|s| self.value(*s)).collect();
            *self.tally.entry(key).or_insert(0) += 1;
            return;
        }
        for t in 0..self.n {
            let c = self.counts[t];
            self.counts[t] = c + 1;
            self.mult[c as usize] -= 1;
            self.mult[c as usize + 1] += 1;
            let completes = c + 1 == self.m;
            if completes {
                self.short -= 1;
            }
            let newly_stopped = self.short == 0 && self.stop.is_none();
            if newly_stopped {
                self.stop = Some((depth as u64 + 1, self.mult.clone()));
            }
            self.descend(depth + 1);
            if newly_stopped {
                self.stop = None;
            }
            if completes {
                self.short += 1;
            }
            self.mult[c as usize + 1] -= 1;
            self.mult[c as usize] += 1;
            self.counts[t] = c;
        }
    }

    fn value(&self, stat: OracleStat) -> Option<u64> {
        match stat {
            OracleStat::CountAt(i) => Some(self.mult.get(i as usize).copied().unwrap_or(0)),
            // m copies of everything with zero draws is impossible, so an
            // empty instance never stops.
            OracleStat::StoppingTime => self.stop.as_ref().map(|s| s.0),
            OracleStat::CountAtStop(k) => self
                .stop
                .as_ref()
                .map(|s| s.1.get(k as usize).copied().unwrap_or(0)),
        }
    }
}

impl ExactTable {
    pub fn rows(&self) -> impl Iterator<Item = (&Outcome, &BigRational)> {
        self.rows.iter()
    }

    /// Probability of one outcome; zero if it never occurs.
    pub fn prob(&self, outcome: &[Option<u64>]) -> BigRational {
        self.rows.get(outcome).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.rows.values().fold(BigRational::zero(), |a, p| a + p)
    }

    /// Joint law of the statistics at positions `keep`.
    pub fn marginal(&self, keep: &[usize]) -> ExactTable {
        let mut rows: BTreeMap<Outcome, BigRational> = BTreeMap::new();
        for (k, p) in &self.rows {
            let key: Outcome = keep.iter().map(|&i| k[i]).collect();
            let slot = rows.entry(key).or_insert_with(BigRational::zero);
            *slot += p;
        }
        ExactTable {
            n: self.n,
            draws: self.draws,
            m: self.m,
            stats: keep.iter().map(|&i| self.stats[i]).collect(),
            rows,
        }
    }

    /// `E(X^power)` of statistic `index`, over outcomes where it is defined.
    pub fn moment(&self, index: usize, power: u32) -> BigRational {
        self.rows
            .iter()
            .filter_map(|(k, p)| k[index].map(|v| p * BigRational::from_integer(BigInt::from(v).pow(power))))
            .fold(BigRational::zero(), |a, x| a + x)
    }

    fn configuration(&self) -> String {
        format!("n={} N={} m={}", self.n, self.draws, self.m)
    }

    fn describe(&self, outcome: &[Option<u64>]) -> String {
        self.stats
            .iter()
            .zip(outcome)
            .map(|(s, v)| match v {
                Some(v) => format!("{s}={v}"),
                None => format!("{s}=censored"),
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    /// CSV with columns `configuration,value,numerator,denominator,float`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["configuration", "value", "numerator", "denominator", "float"])?;
        let config = self.configuration();
        for (k, p) in &self.rows {
            w.write_record([
                config.clone(),
                self.describe(k),
                p.numer().to_string(),
                p.denom().to_string(),
                format!("{:e}", p.to_f64().unwrap_or(f64::NAN)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
