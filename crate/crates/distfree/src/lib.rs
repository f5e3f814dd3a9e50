//! Distribution-free predictive inference and rank tests.
//!
//! Conformal prediction regions (full, split, jackknife+, CV+, and
//! Bonferroni-combined splits) and transform-augmented nonparametric rank
//! tests (two-sample, independence), built on one primitive: the jittered
//! ranks of an exchangeable sequence are uniform over all permutations.
//! Every guarantee is finite-sample and holds regardless of the quality of
//! the fitted score transform; the [`harness`] module certifies each one by
//! Monte Carlo.

pub mod aggregate;
pub mod conformal;
pub mod error;
pub mod harness;
pub mod point;
pub mod rank_tests;
pub mod ranks;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
pub use point::Point;
pub use ranks::JitterConfig;
pub use rng::Rng;
