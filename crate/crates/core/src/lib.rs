//! Certified numerics for entropy of sums of log-concave integer random
//! variables and their continuous (uniformly smoothed) counterparts.
//!
//! The crate is organised bottom-up:
//!
//! * [`pmf`]: integer pmfs on a finite window with certified tails, the
//!   standard log-concave families, and exact-ish summary statistics.
//! * [`convolve`]: direct and FFT convolution with error propagation.
//! * [`smooth`]: Irwin–Hall smoothing `S_n + U_1 + ... + U_n` and its
//!   differential entropy by Gauss–Legendre quadrature.
//! * [`bounds`]: closed-form quantitative bounds and their preconditions.
//! * [`verify`]: numerical checks of each inequality and a sweep driver.

pub mod bounds;
pub mod convolve;
pub mod error;
pub mod fmt;
pub mod pmf;
pub mod smooth;
pub mod sum;
pub mod verify;

pub use error::{Error, Result};
pub use pmf::{
    entropy_tail, from_family, interval_probability, is_log_concave, stats, tv_shift_distance,
    DistStats, Family, FamilySpec, IntegerPmf, LogConcavity, Provenance, TailCert,
};
pub use sum::{compensated_sum, NeumaierSum};
