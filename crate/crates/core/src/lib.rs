//! Numerical laboratory for the limit q-Durrmeyer operator
//!
//! `(D f)(x) = sum_k A_k(f) p_k(x)` on `[0,1]`, with
//! `p_k(x) = (x;q)_inf x^k / (q;q)_k`, together with its entire continuation.
//!
//! The operator is available in three independent forms: the basis series on
//! `[0,1]` ([`durrmeyer::eval_interval`]), the double series valid in the
//! whole plane ([`durrmeyer::eval_entire`]) and the Taylor series built from
//! divided differences ([`taylor::taylor_coeffs`]). The [`growth`] and
//! [`extremal`] modules measure the maximum modulus against `(-r;q)_inf`.

pub mod arith;
pub mod cli;
pub mod durrmeyer;
pub mod error;
pub mod extremal;
pub mod funcspace;
pub mod growth;
pub mod qcore;
pub mod scaled;
pub mod taylor;
pub mod verify;

pub use error::{QError, Result};
pub use funcspace::{FunctionSpec, GridFunction};
pub use qcore::{PrecisionTier, QContext, TruncationReport};
pub use scaled::ScaledValue;
pub use taylor::PowerSeriesRep;
