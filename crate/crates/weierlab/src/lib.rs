//! Numerical laboratory for generalized Weierstrass functions.
//!
//! Given a smooth expanding circle map `f` (a degree-`d` lift with a
//! trigonometric-polynomial perturbation) and a smooth observable `v`, the
//! twisted cohomological equation
//!
//! ```text
//! v(x) = alpha(f(x)) - Df(x) * alpha(x)
//! ```
//!
//! has a unique bounded solution `alpha`, given by the series
//! `alpha(y) = -sum_{n>=1} v(f^{n-1}(y)) / Df^n(y)`. Depending on the pair
//! `(f, v)`, `alpha` is either as smooth as the data or nowhere
//! differentiable, and in the rough case its modulus of continuity obeys a
//! central limit theorem with an explicit variance.
//!
//! This crate evaluates `alpha` with certified truncation, builds the
//! absolutely continuous invariant density by Ulam's method, estimates the
//! dynamical variance `sigma^2(phi)` two independent ways, decides the
//! regularity dichotomy from periodic-orbit sums, and runs the CLT /
//! law-of-iterated-logarithm experiments for the increments of `alpha`.

pub mod clt;
pub mod dynamics;
pub mod ergodic;
pub mod error;
pub mod presets;
pub mod regularity;
pub mod weierstrass;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
