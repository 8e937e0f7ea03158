//! Explanation-quality auditing for tabular classifiers.
//!
//! Train a model, explain its test-set predictions with five post hoc
//! attribution methods, score every explanation with five quality metrics,
//! and test whether the per-group means of those scores differ between two
//! demographic groups across seeded trials.

pub mod dataio;
pub mod error;
pub mod explainers;
pub mod harness;
mod linalg;
pub mod metrics;
pub mod models;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/explainers.md")]
    mod explainers {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/audit.md")]
    mod audit {}
}
