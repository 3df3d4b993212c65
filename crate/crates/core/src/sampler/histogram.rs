use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiset of per-type counts, stored as `count value -> number of types`.
///
/// `kton_count(k)` is the number of types seen exactly `k` times, i.e. the
/// k-ton count `S_{k,x}` after `x = draws()` draws. Only nonzero
/// multiplicities are stored, and that is also how the histogram serializes:
/// `{"1": 3, "2": 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u64, u64>", into = "BTreeMap<u64, u64>")]
pub struct CountHistogram {
    multiplicities: BTreeMap<u64, u64>,
    n_total: u64,
}

impl CountHistogram {
    /// Builds a histogram from a sparse multiplicity map. Zero entries are
    /// dropped; an empty map is rejected because `n_total` must be positive.
    pub fn from_multiplicities(map: BTreeMap<u64, u64>) -> Result<Self> {
        let multiplicities: BTreeMap<u64, u64> =
            map.into_iter().filter(|&(_, mult)| mult > 0).collect();
        let n_total = multiplicities.values().sum();
        if n_total == 0 {
            return Err(Error::domain("histogram must describe at least one type"));
        }
        Ok(Self {
            multiplicities,
            n_total,
        })
    }

    /// Histogram of a per-type count vector.
    pub fn from_counts(counts: &[u32]) -> Self {
        let mut multiplicities = BTreeMap::new();
        for &c in counts {
            *multiplicities.entry(c as u64).or_insert(0) += 1;
        }
        Self {
            multiplicities,
            n_total: counts.len() as u64,
        }
    }

    /// Histogram from a dense multiplicity vector indexed by count value.
    pub(crate) fn from_dense(dense: &[u64]) -> Self {
        let multiplicities: BTreeMap<u64, u64> = dense
            .iter()
            .enumerate()
            .filter(|&(_, &mult)| mult > 0)
            .map(|(c, &mult)| (c as u64, mult))
            .collect();
        let n_total = multiplicities.values().sum();
        Self {
            multiplicities,
            n_total,
        }
    }

    /// The k-ton count: number of types seen exactly `k` times. Zero when absent.
    pub fn kton_count(&self, k: u64) -> u64 {
        self.multiplicities.get(&k).copied().unwrap_or(0)
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    /// Total number of draws represented, `sum c * multiplicity(c)`.
    pub fn draws(&self) -> u64 {
        self.multiplicities.iter().map(|(&c, &mult)| c * mult).sum()
    }

    pub fn min_count(&self) -> u64 {
        *self.multiplicities.keys().next().expect("non-empty histogram")
    }

    pub fn max_count(&self) -> u64 {
        *self.multiplicities.keys().next_back().expect("non-empty histogram")
    }

    /// Iterates `(count, multiplicity)` pairs in increasing count order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.multiplicities.iter().map(|(&c, &mult)| (c, mult))
    }

    pub fn multiplicities(&self) -> &BTreeMap<u64, u64> {
        &self.multiplicities
    }
}

impl TryFrom<BTreeMap<u64, u64>> for CountHistogram {
    type Error = Error;

    fn try_from(map: BTreeMap<u64, u64>) -> Result<Self> {
        Self::from_multiplicities(map)
    }
}

impl From<CountHistogram> for BTreeMap<u64, u64> {
    fn from(hist: CountHistogram) -> Self {
        hist.multiplicities
    }
}
