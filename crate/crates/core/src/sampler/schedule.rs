use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest `n` for which the `log log n` based schedules are accepted.
pub const MIN_SCHEDULE_N: u64 = 16;

/// A rule `n -> N(n)` for the number of draws in fixed-draw mode.
///
/// The formula kinds all have the shape `n log n + (m-1) n log log n + f(n)`:
///
/// * `OffsetX { x }`: `f(n) = x n`, the window endpoint `N(n, x)`.
/// * `LemmaM`: `n log n + (m - 3/2) n log log n`, i.e. `f(n) = -n log log n / 2`.
/// * `LemmaMPrime`: `n log n + (m - 1/2) n log log n`, i.e. `f(n) = +n log log n / 2`.
///
/// `Custom` pins an explicit draw count and is the only kind usable below
/// [`MIN_SCHEDULE_N`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrawSchedule {
    OffsetX { x: f64 },
    LemmaM,
    LemmaMPrime,
    Custom { draws: u64, description: String },
}

impl DrawSchedule {
    pub fn custom(draws: u64) -> Self {
        DrawSchedule::Custom {
            draws,
            description: format!("N={draws}"),
        }
    }

    /// Textual tag for `f(n)`.
    pub fn f_description(&self) -> String {
        match self {
            DrawSchedule::OffsetX { x } => format!("f(n) = {x} n"),
            DrawSchedule::LemmaM => "f(n) = -n log log n / 2".to_string(),
            DrawSchedule::LemmaMPrime => "f(n) = n log log n / 2".to_string(),
            DrawSchedule::Custom { description, .. } => description.clone(),
        }
    }

    /// The real-valued `N(n)` before rounding.
    pub fn evaluate_real(&self, n: u64, m: u32) -> Result<f64> {
        if let DrawSchedule::Custom { draws, .. } = self {
            return Ok(*draws as f64);
        }
        if n < MIN_SCHEDULE_N {
            return Err(Error::domain(format!(
                "schedule {self:?} needs n >= {MIN_SCHEDULE_N} (log log n), got n={n}"
            )));
        }
        let nf = n as f64;
        let log_n = nf.ln();
        let loglog = log_n.ln();
        let m = m as f64;
        let value = match self {
            DrawSchedule::OffsetX { x } => nf * log_n + (m - 1.0) * nf * loglog + x * nf,
            DrawSchedule::LemmaM => nf * log_n + (m - 1.5) * nf * loglog,
            DrawSchedule::LemmaMPrime => nf * log_n + (m - 0.5) * nf * loglog,
            DrawSchedule::Custom { .. } => unreachable!(),
        };
        if !value.is_finite() {
            return Err(Error::domain(format!("schedule {self:?} is not finite at n={n}")));
        }
        Ok(value)
    }

    /// `ceil(N(n))`, the number of draws actually made.
    pub fn evaluate(&self, n: u64, m: u32) -> Result<u64> {
        let value = self.evaluate_real(n, m)?;
        if value < 0.0 {
            return Err(Error::domain(format!(
                "schedule {self:?} is negative at n={n}: {value}"
            )));
        }
        Ok(value.ceil() as u64)
    }

    /// `f(n)/n` implied by the rounded draw count, i.e. the offset `x` such
    /// that `ceil(N(n)) = n log n + (m-1) n log log n + x n`.
    pub fn f_over_n(&self, n: u64, m: u32) -> Result<f64> {
        let draws = self.evaluate(n, m)? as f64;
        let nf = n as f64;
        if n < 3 {
            return Err(Error::domain(format!("f(n)/n needs n >= 3, got {n}")));
        }
        let log_n = nf.ln();
        Ok((draws - nf * log_n - (m as f64 - 1.0) * nf * log_n.ln()) / nf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_up() {
        let n = 1000;
        let draws = DrawSchedule::OffsetX { x: 0.0 }.evaluate(n, 1).unwrap();
        assert_eq!(draws, (1000.0f64 * 1000f64.ln()).ceil() as u64);
        assert_eq!(draws, 6908);
    }

    #[test]
    fn lemma_kinds_bracket_the_offset_schedule() {
        let n = 10_000;
        for m in 1..4 {
            let lo = DrawSchedule::LemmaM.evaluate(n, m).unwrap();
            let mid = DrawSchedule::OffsetX { x: 0.0 }.evaluate(n, m).unwrap();
            let hi = DrawSchedule::LemmaMPrime.evaluate(n, m).unwrap();
            assert!(lo < mid && mid < hi);
            // f(n) = -n log log n / 2 exactly.
            let f = DrawSchedule::LemmaM.f_over_n(n, m).unwrap();
            let half_loglog = 0.5 * (n as f64).ln().ln();
            assert!((f + half_loglog).abs() < 1.0 / n as f64);
        }
    }

    #[test]
    fn small_n_is_a_domain_error() {
        assert!(DrawSchedule::LemmaM.evaluate(15, 1).is_err());
        assert!(DrawSchedule::OffsetX { x: 1.0 }.evaluate(2, 2).is_err());
        assert_eq!(DrawSchedule::custom(3).evaluate(2, 1).unwrap(), 3);
        assert_eq!(DrawSchedule::custom(0).evaluate(3, 1).unwrap(), 0);
    }

    #[test]
    fn evaluate_is_at_least_one_from_sixteen_up() {
        for n in 16..200 {
            for m in 1..4 {
                for s in [
                    DrawSchedule::LemmaM,
                    DrawSchedule::LemmaMPrime,
                    DrawSchedule::OffsetX { x: 0.0 },
                ] {
                    assert!(s.evaluate(n, m).unwrap() >= 1);
                }
            }
        }
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&DrawSchedule::OffsetX { x: 0.5 }).unwrap();
        assert_eq!(json, r#"{"kind":"offset_x","x":0.5}"#);
        let back: DrawSchedule = serde_json::from_str(r#"{"kind":"lemma_m_prime"}"#).unwrap();
        assert_eq!(back, DrawSchedule::LemmaMPrime);
    }
}
