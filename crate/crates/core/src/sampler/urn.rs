use rand::distributions::{Distribution, Uniform};

use super::histogram::CountHistogram;
use super::stream::TrialRng;

/// Draw-by-draw state of one collector.
///
/// `counts[t]` is the number of copies of type `t`; `mult[c]` is the number
/// of types holding exactly `c` copies and is kept in step with `counts`, so
/// every draw is O(1) and any `S_{k,x}` can be read off at any time.
pub(crate) struct Urn {
    counts: Vec<u32>,
    mult: Vec<u64>,
    short: u64,
    draws: u64,
    m: u32,
    pick: Uniform<u32>,
}

impl Urn {
    pub(crate) fn new(n: u32, m: u32) -> Self {
        let mut mult = vec![0u64; (m as usize + 2).max(64)];
        mult[0] = n as u64;
        Self {
            counts: vec![0; n as usize],
            mult,
            short: if m > 0 { n as u64 } else { 0 },
            draws: 0,
            m,
            pick: Uniform::new(0, n),
        }
    }

    #[cfg(test)]
    pub(crate) fn draw(&mut self, rng: &mut TrialRng) {
        self.run(rng, 1, false);
    }

    /// Makes up to `limit` more draws, stopping early at completion when
    /// `stop_when_complete` is set. Returns the number of draws made.
    pub(crate) fn run(&mut self, rng: &mut TrialRng, limit: u64, stop_when_complete: bool) -> u64 {
        let counts = &mut self.counts[..];
        let mult = &mut self.mult;
        let pick = self.pick;
        let m = self.m;
        let mut short = self.short;
        let mut made = 0u64;
        while made < limit && !(stop_when_complete && short == 0) {
            let t = pick.sample(rng) as usize;
            let c = counts[t];
            let next = c + 1;
            counts[t] = next;
            if next as usize == mult.len() {
                mult.push(0);
            }
            mult[c as usize] -= 1;
            mult[next as usize] += 1;
            short -= (next == m) as u64;
            made += 1;
        }
        self.short = short;
        self.draws += made;
        made
    }

    /// Number of types still below `m` copies.
    #[inline]
    pub(crate) fn short(&self) -> u64 {
        self.short
    }

    pub(crate) fn draws(&self) -> u64 {
        self.draws
    }

    pub(crate) fn histogram(&self) -> CountHistogram {
        CountHistogram::from_dense(&self.mult)
    }

    #[cfg(test)]
    pub(crate) fn counts(&self) -> &[u32] {
        &self.counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::stream::trial_rng;

    #[test]
    fn incremental_multiplicities_match_recount() {
        let mut rng = trial_rng(1, 0);
        let mut urn = Urn::new(37, 3);
        for _ in 0..500 {
            urn.draw(&mut rng);
            let recount = CountHistogram::from_counts(urn.counts());
            assert_eq!(recount, urn.histogram());
            let short = urn.counts().iter().filter(|&&c| c < 3).count() as u64;
            assert_eq!(short, urn.short());
        }
        assert_eq!(urn.histogram().draws(), 500);
    }
}
