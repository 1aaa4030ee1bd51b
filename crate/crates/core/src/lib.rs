//! Certified bounds on the photon-number transfer statistics q(m|n) of an
//! unknown optical channel, from measurements made with characterised
//! sources and detectors.
//!
//! The measured statistic is modelled as
//! `f(x, y) = sum_{n,m} p_n(x) q(m|n) r_m(y)` with a known source response
//! `p_n(x)` and detector response `r_m(y)`. Two estimators bound a chosen
//! element of `q`: an analytical one ([`estimator`]) that inverts truncated
//! source and detector systems and bounds the remainders, and a linear
//! program ([`lp`]). Applications: single-photon channel error rates and key
//! rates for BB84/six-state QKD ([`qkd`]) and photon statistics in
//! time-resolved homodyne counting ([`tcspc`]).

// `!(x >= 0.0)` guards also reject NaN; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod error;
pub mod estimator;
pub mod hermite;
pub mod homodyne;
pub mod linalg;
pub mod lp;
pub mod qkd;
pub mod quad;
pub mod sample;
pub mod source;
pub mod special;
pub mod table;
pub mod tcspc;
pub mod threshold;

pub use error::{Error, Result};
pub use homodyne::HomodyneDetector;
pub use source::PoissonSource;
pub use threshold::ThresholdDetector;
