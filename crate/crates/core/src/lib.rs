//! Intermediate efficiency of the Neyman-Pearson test relative to the
//! Kolmogorov-Smirnov test for uniformity under local alternatives
//! `p(t) = 1 - theta + theta f(t)`.

pub mod alt_model;
pub mod error;
pub mod quad_moments;
pub mod ks_null;
pub mod power_engine;
pub mod quadrature;
pub mod rng;
pub mod test_stats;
pub mod theory;

pub use error::{Error, Result};
