//! Computational laboratory for Vaughan's approximation to the Chebyshev
//! function over arithmetic progressions.
//!
//! The library computes the kernel
//! `F_R(n) = Σ_{r≤R} μ(r)/φ(r) · c_r(n)` (with `c_r` the Ramanujan sum),
//! the induced approximation `ρ*_R(x;q,a) = Σ_{n≤x, n≡a (q), n>a} F_R(n)`
//! to `ψ*(x;q,a)`, the first-moment averages of `ψ* − ρ*_R` over modulus
//! ranges, and the theoretical main terms those averages converge to.
//! A verification harness checks every identity and asymptotic against
//! brute force at desk scale.
//!
//! Module map:
//! * [`sieve`] — factorization tables and exact arithmetic functions,
//! * [`kernel`] — `F_R`, `ρ*_R`, `ψ*` evaluation (exact and fast paths),
//! * [`theory`] — constants (`C0`, `C1(a)`, `C2(a)`) and main terms,
//! * [`moments`] — deterministic parallel modulus-range averages,
//! * [`verify`] — lemma-by-lemma residual scans and decay fits,
//! * [`numeric`] — compensated summation and deterministic reduction.

pub mod kernel;
pub mod moments;
pub mod numeric;
pub mod sieve;
pub mod theory;
pub mod verify;

use thiserror::Error;

/// Unified error type; the variants mirror the failure classes the
/// operations document (configuration vs domain vs data sufficiency).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
