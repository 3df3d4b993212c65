pub mod error;
pub mod exact;
pub mod experiments;
pub mod harness;
pub mod limits;
pub mod sampler;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/sampling.md")]
    struct Sampling;
    #[doc = include_str!("../../../book/src/exact.md")]
    struct Exact;
    #[doc = include_str!("../../../book/src/limits.md")]
    struct Limits;
    #[doc = include_str!("../../../book/src/statistics.md")]
    struct Statistics;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
