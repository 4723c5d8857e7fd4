//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The certified infimum of |Df| is not above 1: the map violates the
    /// uniform-expansion hypothesis and nothing downstream is defined.
    #[error("map is not uniformly expanding: certified inf |Df| = {min_df} <= 1")]
    NotExpanding { min_df: f64 },

    /// An iterative solver (root finding, contraction iteration, power
    /// iteration) failed to reach its tolerance within the iteration cap.
    #[error("{what} did not converge after {iterations} iterations (last delta {last_delta:e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        last_delta: f64,
    },

    /// Periodic-orbit enumeration would visit more symbol words than the cap.
    #[error("orbit enumeration budget exceeded: degree^period = {words} > cap {cap}")]
    BudgetExceeded { words: u128, cap: u128 },

    /// Defensive guard: a non-positive Lyapunov exponent cannot occur for a
    /// certified expanding map.
    #[error("degenerate dynamics: Lyapunov exponent {lyapunov:e} <= 0")]
    DegenerateDynamics { lyapunov: f64 },

    /// sigma(phi) vanishes: alpha is smooth, its increments are not
    /// diffusive, and the CLT/LIL normalization is undefined.
    #[error(
        "sigma(phi) = {sigma:e} <= {tol:e}: the modulus-of-continuity CLT/LIL \
         requires sigma(phi) != 0 (alpha is of class C^(1+eps), not nowhere differentiable)"
    )]
    ZeroVariance { sigma: f64, tol: f64 },

    /// The periodic-orbit criterion and the variance criterion disagree.
    /// They are mathematically equivalent, so disagreement always means a
    /// numerical artifact (p_max too small or tolerances mis-set); no
    /// verdict is issued.
    #[error(
        "regularity criteria disagree: max |orbit sum| = {max_abs_sum:e} vs orbit_tol \
         {orbit_tol:e}, sigma^2 = {sigma2:e} vs sigma_tol {sigma_tol:e}; \
         raise p_max or adjust tolerances"
    )]
    CriteriaDisagree {
        max_abs_sum: f64,
        sigma2: f64,
        orbit_tol: f64,
        sigma_tol: f64,
    },

    /// The geometric tail bound cannot reach the requested tolerance within
    /// the term cap.
    #[error(
        "series truncation cannot reach tol {tol:e}: {required} terms needed, max_terms = {max_terms}"
    )]
    TruncationUnachievable {
        tol: f64,
        required: usize,
        max_terms: usize,
    },

    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
