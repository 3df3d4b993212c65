use serde::{Deserialize, Serialize};

/// Non-negative real carried as its natural log; `Zero` is an exact zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogProb {
    Zero,
    Positive(f64),
}

impl LogProb {
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            LogProb::Zero
        } else {
            LogProb::Positive(ln)
        }
    }

    pub fn ln(self) -> f64 {
        match self {
            LogProb::Zero => f64::NEG_INFINITY,
            LogProb::Positive(l) => l,
        }
    }

    pub fn value(self) -> f64 {
        self.ln().exp()
    }

    pub fn is_zero(self) -> bool {
        matches!(self, LogProb::Zero)
    }

    pub fn mul(self, other: LogProb) -> LogProb {
        LogProb::from_ln(self.ln() + other.ln())
    }
}
