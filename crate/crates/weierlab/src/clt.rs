//! Monte-Carlo verification of the central limit theorem and of the
//! law-of-iterated-logarithm scaling for the increments of alpha.
//!
//! For mu-distributed `x` and small `h`, the normalized increment
//!
//! ```text
//! y = (alpha(x+h) - alpha(x)) / (sigma * ell * h * sqrt(-log |h|))
//! ```
//!
//! converges in law to the standard normal. At desk scale the limit is out
//! of reach (convergence is logarithmic in `h`), so the experiment tests
//! the two statements that are observable: the KS distance to the normal
//! decreases as `h` shrinks, and the law of `y` matches the law of the
//! length-`n` Birkhoff sum `(1/(sigma sqrt(n))) S_n phi` with
//! `n = round(-log h / L)`, which shares the finite-`n` error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ergodic::{stationary_orbit, LyapunovResult, UlamDensity, VarianceEstimate};
use crate::weierstrass::SystemHandle;
use crate::{Error, Result};

/// sigma below this is treated as zero: the CLT/LIL hypotheses fail.
pub const ZERO_SIGMA_TOL: f64 = 1e-6;

/// Standard normal CDF, `Phi(y) = erfc(-y / sqrt 2) / 2`.
///
/// Absolute error is a few ulps, far below the 1e-12 contract; symmetry
/// `Phi(-y) = 1 - Phi(y)` holds to the same accuracy.
pub fn normal_cdf(y: f64) -> f64 {
    0.5 * libm::erfc(-y / std::f64::consts::SQRT_2)
}

/// Sorted sample with right-continuous step evaluation.
#[derive(Clone, Debug)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "empirical CDF needs at least one sample");
        assert!(
            values.iter().all(|v| v.is_finite()),
            "empirical CDF samples must be finite"
        );
        values.sort_unstable_by(f64::total_cmp);
        EmpiricalCdf { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let count = self.values.partition_point(|&v| v <= x);
        count as f64 / self.values.len() as f64
    }
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF:
/// `sup_i max(|i/n - F(x_(i))|, |(i-1)/n - F(x_(i))|)`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &EmpiricalCdf, cdf: F) -> f64 {
    let n = samples.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in samples.values().iter().enumerate() {
        let f = cdf(x);
        let hi = ((i + 1) as f64 / n - f).abs();
        let lo = (i as f64 / n - f).abs();
        sup = sup.max(hi).max(lo);
    }
    sup
}

/// Two-sample Kolmogorov-Smirnov statistic by a merge walk over both
/// sorted samples.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (xs, ys) = (a.values(), b.values());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup.max((1.0 - j as f64 / nb).abs().max((i as f64 / na - 1.0).abs()))
}

/// One normalized increment observation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IncrementSample {
    pub x: f64,
    pub h: f64,
    pub y: f64,
}

/// Per-scale result of the CLT experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KsReport {
    pub h: f64,
    pub k: u32,
    pub n_samples: usize,
    pub ks_vs_normal: f64,
    pub ks_vs_birkhoff: f64,
    pub mean_y: f64,
    pub var_y: f64,
    pub seed: u64,
}

const CLT_CHUNK: usize = 512;

/// CLT experiment over dyadic scales `h = 2^-k`.
///
/// For each scale, `n_samples` points are drawn from the density and the
/// normalized increments compared (i) against the standard normal and
/// (ii) against an independent equal-size sample of normalized Birkhoff
/// sums of length `round(-log h / L)`. Requires `sigma > 0` and every
/// `h < e^-1` (so `-log h > 1`), i.e. `k >= 2`.
pub fn clt_experiment(
    sys: &SystemHandle,
    rho: &UlamDensity,
    sigma: &VarianceEstimate,
    lyap: &LyapunovResult,
    h_exponents: &[u32],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<KsReport>> {
    if sigma.sigma <= ZERO_SIGMA_TOL {
        return Err(Error::ZeroVariance {
            sigma: sigma.sigma,
            tol: ZERO_SIGMA_TOL,
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    for &k in h_exponents {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "CLT scale 2^-{k} is not below e^-1; use k >= 2"
            )));
        }
    }
    let mut reports = Vec::with_capacity(h_exponents.len());
    for &k in h_exponents {
        let h = 2f64.powi(-(k as i32));
        let log_inv_h = -(h.ln());
        let denom = sigma.sigma * lyap.ell * h * log_inv_h.sqrt();

        // increment sample points come from one per-scale stream; each
        // Birkhoff-oracle sample gets its own stream, so results do not
        // depend on worker count
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(k) << 33);
        let xs: Vec<f64> = (0..n_samples).map(|_| rho.sample(&mut rng)).collect();

        let ys: Vec<f64> = xs
            .par_chunks(CLT_CHUNK)
            .flat_map_iter(|chunk| chunk.iter().map(|&x| sys.increment(x, h) / denom))
            .collect();

        let n_bar = ((log_inv_h / lyap.l).round() as usize).max(1);
        let birkhoff_denom = sigma.sigma * (n_bar as f64).sqrt();
        let chain_len = n_bar + sys.n_terms();
        let zs: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .with_min_len(CLT_CHUNK)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((u64::from(k) << 33) | (1 << 32) | i as u64);
                let chain = stationary_orbit(sys.map(), rho, &mut rng, chain_len);
                let s: f64 = sys.phi_over_chain(&chain).iter().sum();
                s / birkhoff_denom
            })
            .collect();

        let nf = n_samples as f64;
        let mean_y = ys.iter().sum::<f64>() / nf;
        let var_y = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum::<f64>()
            / (nf - 1.0).max(1.0);

        let y_cdf = EmpiricalCdf::new(ys);
        let z_cdf = EmpiricalCdf::new(zs);
        reports.push(KsReport {
            h,
            k,
            n_samples,
            ks_vs_normal: ks_statistic(&y_cdf, normal_cdf),
            ks_vs_birkhoff: ks_two_sample(&y_cdf, &z_cdf),
            mean_y,
            var_y,
            seed,
        });
    }
    Ok(reports)
}

/// One row of a law-of-iterated-logarithm trace.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LilEntry {
    pub k: u32,
    pub h: f64,
    pub r: f64,
}

/// Increment ratios under the iterated-logarithm normalization
/// `h * sqrt(2 (-log h) loglog(-log h))` along dyadic scales; the limsup
/// equals `sigma * ell`, but at reachable scales only boundedness and sign
/// mixing are observable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LilTrace {
    pub x: f64,
    pub entries: Vec<LilEntry>,
    pub sup_abs: f64,
}

/// Trace `R_k = (alpha(x+h) - alpha(x)) / (h sqrt(2 (-log h) loglog(-log h)))`
/// for `h = 2^-k`, `k_min <= k <= k_max`. Defined for `k >= 4`
/// (`-log h > e`); requires `sigma > 0`.
pub fn lil_trace(
    sys: &SystemHandle,
    sigma: &VarianceEstimate,
    x: f64,
    k_min: u32,
    k_max: u32,
) -> Result<LilTrace> {
    if sigma.sigma <= ZERO_SIGMA_TOL {
        return Err(Error::ZeroVariance {
            sigma: sigma.sigma,
            tol: ZERO_SIGMA_TOL,
        });
    }
    if !(4..40).contains(&k_min) || k_max <= k_min || k_max > 40 {
        return Err(Error::InvalidParameter(format!(
            "LIL scales need 4 <= k_min < k_max <= 40, got [{k_min}, {k_max}]"
        )));
    }
    let entries: Vec<LilEntry> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let h = 2f64.powi(-(k as i32));
            let log_inv_h = -(h.ln());
            let denom = h * (2.0 * log_inv_h * log_inv_h.ln().ln()).sqrt();
            LilEntry {
                k,
                h,
                r: sys.increment(x, h) / denom,
            }
        })
        .collect();
    let sup_abs = entries.iter().fold(0.0f64, |m, e| m.max(e.r.abs()));
    Ok(LilTrace { x, entries, sup_abs })
}
