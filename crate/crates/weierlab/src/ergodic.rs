//! Invariant density, Lyapunov exponent and the dynamical variance.
//!
//! The absolutely continuous invariant probability is approximated by
//! Ulam's method: the transfer operator is projected onto piecewise
//! constants over `m` cells, with matrix entries computed by exact
//! interval intersection (the lift is monotone on each branch, so every
//! cell image decomposes into finitely many cell-aligned segments found by
//! root solving). The stationary vector is found by power iteration.
//!
//! `sigma^2(phi) = lim_n int (S_n phi / sqrt(n))^2 dmu` is estimated two
//! independent ways: the absolutely convergent autocorrelation expansion
//! `sigma^2 = c_0 + 2 sum_{n>=1} c_n` (Green-Kubo), and direct Monte Carlo
//! of the defining expression with mu-distributed starting points.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{derivative_bounds, invert_lift, CircleMapSpec};
use crate::weierstrass::SystemHandle;
use crate::{Error, Result};

/// Piecewise-constant invariant density on `m` equal cells.
///
/// `weights[i]` is the cell probability; the density value on cell `i` is
/// `weights[i] * m`. `residual` is the final L1 change of the power
/// iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UlamDensity {
    pub m: usize,
    pub weights: Vec<f64>,
    pub residual: f64,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

/// Sub-samples per cell used by [`UlamDensity::integrate`].
pub const DEFAULT_SUBSAMPLES: usize = 4;

const POWER_ITERATION_CAP: usize = 100_000;

/// Ulam approximation of the invariant density.
///
/// `m` must be a power of two `>= 2^10`; the map must be certified
/// expanding. Power iteration runs until the L1 change is `<= tol`.
pub fn invariant_density(map: &CircleMapSpec, m: usize, tol: f64) -> Result<UlamDensity> {
    if !m.is_power_of_two() || m < 1 << 10 {
        return Err(Error::InvalidParameter(format!(
            "Ulam cell count must be a power of two >= 1024, got {m}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Ulam tolerance must be positive, got {tol}"
        )));
    }
    derivative_bounds(map, 1 << 12)?;

    let rows = ulam_rows(map, m)?;

    // deterministic single-threaded power iteration
    let mut weights = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        next.iter_mut().for_each(|w| *w = 0.0);
        for (i, row) in rows.iter().enumerate() {
            let wi = weights[i];
            for &(j, frac) in row {
                next[j] += wi * frac;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|w| *w /= total);
        residual = weights
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut weights, &mut next);
        if residual <= tol {
            let cumulative = cumulative_of(&weights);
            return Ok(UlamDensity {
                m,
                weights,
                residual,
                cumulative,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        what: "Ulam power iteration",
        iterations: POWER_ITERATION_CAP,
        last_delta: residual,
    })
}

/// Row `i` lists `(target cell, fraction of cell i mapped there)`.
///
/// The image of cell `i` under the lift is `[f(lo), f(hi))`; splitting it
/// at the cell boundaries `k/m` and pulling each piece back through the
/// monotone lift gives the exact Lebesgue fractions (no sampling noise).
fn ulam_rows(map: &CircleMapSpec, m: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let mf = m as f64;
    (0..m)
        .into_par_iter()
        .map(|i| {
            let lo = i as f64 / mf;
            let hi = (i + 1) as f64 / mf;
            let flo = map.lift(lo);
            let fhi = map.lift(hi);
            let k_start = (flo * mf).floor() as i64;
            let mut k_end = (fhi * mf).floor() as i64;
            if (fhi * mf).fract() == 0.0 {
                k_end -= 1; // image ends exactly on a boundary
            }
            let mut row = Vec::with_capacity((k_end - k_start + 1) as usize);
            let mut x_prev = lo;
            for k in k_start..=k_end {
                let x_next = if k == k_end {
                    hi
                } else {
                    invert_lift(map, (k + 1) as f64 / mf, lo, hi)?
                };
                let j = (k.rem_euclid(m as i64)) as usize;
                row.push((j, (x_next - x_prev) * mf));
                x_prev = x_next;
            }
            Ok(row)
        })
        .collect()
}

fn cumulative_of(weights: &[f64]) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(weights.len() + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    cumulative
}

impl UlamDensity {
    /// Density value on cell `i`.
    pub fn density_value(&self, i: usize) -> f64 {
        self.weights[i] * self.m as f64
    }

    /// Left endpoint of cell `i`.
    pub fn left_endpoint(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    /// Quadrature against the density with `sub` sample points per cell:
    /// `sum_i weights[i] * mean of g over the cell's sub-cell midpoints`.
    pub fn integrate_with<G: Fn(f64) -> f64 + Sync>(&self, sub: usize, g: G) -> f64 {
        let mf = self.m as f64;
        let sf = sub as f64;
        let partials: Vec<f64> = self
            .weights
            .par_chunks(1024)
            .enumerate()
            .map(|(chunk, ws)| {
                let base = chunk * 1024;
                let mut acc = 0.0;
                for (off, &w) in ws.iter().enumerate() {
                    let i = base + off;
                    let mut cell = 0.0;
                    for j in 0..sub {
                        let x = (i as f64 + (j as f64 + 0.5) / sf) / mf;
                        cell += g(x);
                    }
                    acc += w * cell / sf;
                }
                acc
            })
            .collect();
        partials.iter().sum()
    }

    /// Quadrature with the default refinement.
    pub fn integrate<G: Fn(f64) -> f64 + Sync>(&self, g: G) -> f64 {
        self.integrate_with(DEFAULT_SUBSAMPLES, g)
    }

    /// One draw from the density: inverse-CDF over cells, uniform inside
    /// the selected cell. Deterministic given the RNG state.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.sample_from_uniform(u)
    }

    /// Inverse CDF applied to `u in [0,1)` (exposed for the unit-cell edge
    /// cases; `sample` is the RNG front end).
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        // first cell whose cumulative right endpoint exceeds u
        let c = self.cumulative.partition_point(|&c| c <= u).min(self.m) - 1;
        let w = self.weights[c];
        let frac = if w > 0.0 {
            ((u - self.cumulative[c]) / w).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((c as f64 + frac) / self.m as f64).min(1.0 - f64::EPSILON / 2.0)
    }

    /// Rebuild the sampling table (after deserializing).
    pub fn rebuild_cumulative(&mut self) {
        self.cumulative = cumulative_of(&self.weights);
    }
}

/// Lyapunov exponent `L = int log |Df| dmu > 0` and `ell = 1 / sqrt(L)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub l: f64,
    pub ell: f64,
}

pub fn lyapunov(map: &CircleMapSpec, rho: &UlamDensity) -> Result<LyapunovResult> {
    let l = rho.integrate(|x| map.df(x).abs().ln());
    if !(l > 0.0) {
        return Err(Error::DegenerateDynamics { lyapunov: l });
    }
    Ok(LyapunovResult {
        l,
        ell: 1.0 / l.sqrt(),
    })
}

/// `int phi dmu` — zero for every admissible system up to discretization
/// error; the computed value is used to center `phi` in the variance
/// estimators.
pub fn mean_phi(sys: &SystemHandle, rho: &UlamDensity) -> f64 {
    rho.integrate(|x| sys.phi(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    GreenKubo,
    BirkhoffMc,
}

/// `sigma^2(phi)` with convergence diagnostics.
///
/// For Green-Kubo, `diagnostics` holds the correlation terms `c_0..c_n_max`
/// and `terms_or_samples` the number of lags actually summed; for Monte
/// Carlo, `diagnostics` holds per-batch means and `std_error` the standard
/// error of the estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub sigma2: f64,
    pub sigma: f64,
    pub method: VarianceMethod,
    pub terms_or_samples: usize,
    pub diagnostics: Vec<f64>,
    pub std_error: Option<f64>,
    /// Green-Kubo: the correlation terms decayed below `term_tol` before
    /// `n_max` (three consecutive small terms). Always true for Monte Carlo.
    pub converged: bool,
}

/// Negative estimates within this tolerance of zero are clamped (roundoff
/// in the exact-coboundary case).
pub const SIGMA2_CLAMP: f64 = 1e-9;

fn finish_sigma2(raw: f64) -> (f64, f64) {
    let sigma2 = raw.max(0.0);
    (sigma2, sigma2.sqrt())
}

/// Once the lag-`n` correlation has decayed this far below `c_0`, a
/// magnitude up-tick marks the quadrature noise floor: the cell-midpoint
/// quadrature cannot resolve `phi o f^n` after `Df^n` passes the grid
/// resolution, and from there the computed terms are aliasing noise, not
/// correlations.
const GK_ALIAS_GUARD: f64 = 1e-4;

/// Autocorrelation ("Green-Kubo") estimate
/// `sigma^2 = c_0 + 2 sum_{n>=1} c_n` with
/// `c_n = int phihat (phihat o f^n) dmu`, `phihat = phi - int phi dmu`.
///
/// The sum stops once three consecutive terms fall below `term_tol`, or at
/// the first magnitude up-tick after the terms have decayed below
/// `GK_ALIAS_GUARD * c_0` (the quadrature noise floor; the up-tick term is
/// excluded). If neither happens by `n_max` the estimate is returned with
/// `converged = false`.
pub fn variance_green_kubo(
    sys: &SystemHandle,
    rho: &UlamDensity,
    n_max: usize,
    term_tol: f64,
) -> VarianceEstimate {
    assert!(n_max >= 1 && n_max <= 100, "n_max must lie in 1..=100");
    assert!(term_tol > 0.0, "term_tol must be positive");
    let sub = DEFAULT_SUBSAMPLES;
    let mf = rho.m as f64;
    let sf = sub as f64;
    let lags = n_max + 1;

    // raw moments in one pass over the quadrature points:
    //   a[n] = int phi o f^n dmu,   r[n] = int phi * (phi o f^n) dmu
    struct Acc {
        a: Vec<f64>,
        r: Vec<f64>,
        w: f64,
    }
    let partials: Vec<Acc> = rho
        .weights
        .par_chunks(256)
        .enumerate()
        .map(|(chunk, ws)| {
            let base = chunk * 256;
            let mut acc = Acc {
                a: vec![0.0; lags],
                r: vec![0.0; lags],
                w: 0.0,
            };
            for (off, &wcell) in ws.iter().enumerate() {
                let i = base + off;
                let w = wcell / sf;
                for j in 0..sub {
                    let x = (i as f64 + (j as f64 + 0.5) / sf) / mf;
                    let phis = sys.phi_along_orbit(x, lags);
                    let p0 = phis[0];
                    for (n, &pn) in phis.iter().enumerate() {
                        acc.a[n] += w * pn;
                        acc.r[n] += w * p0 * pn;
                    }
                    acc.w += w;
                }
            }
            acc
        })
        .collect();
    let mut a = vec![0.0; lags];
    let mut r = vec![0.0; lags];
    let mut wtot = 0.0;
    for acc in &partials {
        for n in 0..lags {
            a[n] += acc.a[n];
            r[n] += acc.r[n];
        }
        wtot += acc.w;
    }
    let mean = a[0] / wtot;
    let corr: Vec<f64> = (0..lags)
        .map(|n| r[n] - mean * a[n] - mean * a[0] + mean * mean * wtot)
        .collect();

    let mut sum = corr[0];
    let mut used = 0;
    let mut consecutive_small = 0;
    let mut converged = false;
    let noise_floor = GK_ALIAS_GUARD * corr[0].abs();
    for (n, &c) in corr.iter().enumerate().skip(1) {
        if n >= 2 && corr[n - 1].abs() < noise_floor && c.abs() >= corr[n - 1].abs() {
            converged = true;
            break;
        }
        sum += 2.0 * c;
        used = n;
        if c.abs() < term_tol {
            consecutive_small += 1;
            if consecutive_small == 3 {
                converged = true;
                break;
            }
        } else {
            consecutive_small = 0;
        }
    }
    let (sigma2, sigma) = finish_sigma2(sum);
    VarianceEstimate {
        sigma2,
        sigma,
        method: VarianceMethod::GreenKubo,
        terms_or_samples: used,
        diagnostics: corr,
        std_error: None,
        converged,
    }
}

/// Orbit segment of a mu-distributed point, `chain[i+1] = f(chain[i])`.
///
/// For a nonlinear lift the segment is forward iteration from a density
/// sample: floating-point orbits of such maps are statistically generic.
/// For a *linear* lift forward float iteration is degenerate (every f64 is
/// a dyadic rational, so e.g. the doubling map reaches the fixed point 0
/// exactly within 53 steps); there the segment is built backwards through
/// uniformly chosen inverse branches, `x_i = (x_(i+1) + b_i) / d`, which
/// is exactly Lebesgue-stationary — and Lebesgue is the invariant measure
/// of a linear lift.
pub fn stationary_orbit<R: Rng>(
    map: &CircleMapSpec,
    rho: &UlamDensity,
    rng: &mut R,
    len: usize,
) -> Vec<f64> {
    if map.perturbation.is_empty() {
        let d = f64::from(map.degree);
        let mut chain = vec![0.0; len];
        chain[len - 1] = rho.sample(rng);
        for i in (0..len - 1).rev() {
            let b = rng.gen_range(0..map.degree);
            chain[i] = (chain[i + 1] + f64::from(b)) / d;
        }
        chain
    } else {
        let mut chain = Vec::with_capacity(len);
        let mut x = rho.sample(rng);
        for _ in 0..len {
            chain.push(x);
            x = map.step(x);
        }
        chain
    }
}

const MC_CHUNK: usize = 512;
const MC_BATCHES: usize = 100;

/// Direct Monte Carlo of `int (S_n phihat / sqrt(n))^2 dmu` with starting
/// points drawn from the density. Sample `i` consumes ChaCha stream `i` of
/// the seed, so the result is deterministic whatever the worker count.
pub fn variance_birkhoff_mc(
    sys: &SystemHandle,
    rho: &UlamDensity,
    n: usize,
    samples: usize,
    seed: u64,
) -> VarianceEstimate {
    assert!(n >= 100, "birkhoff_mc needs n >= 100");
    assert!(samples >= 10_000, "birkhoff_mc needs samples >= 10^4");
    let mean = mean_phi(sys, rho);
    let sqrt_n = (n as f64).sqrt();
    let chain_len = n + sys.n_terms();

    let qs: Vec<f64> = (0..samples)
        .into_par_iter()
        .with_min_len(MC_CHUNK)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let chain = stationary_orbit(sys.map(), rho, &mut rng, chain_len);
            let mut s = 0.0;
            for p in sys.phi_over_chain(&chain) {
                s += p - mean;
            }
            let z = s / sqrt_n;
            z * z
        })
        .collect();

    let total: f64 = qs.iter().sum();
    let raw = total / samples as f64;
    let sq_total: f64 = qs.iter().map(|q| q * q).sum();
    let var_q = (sq_total / samples as f64 - raw * raw).max(0.0);
    let std_error = (var_q / samples as f64).sqrt();

    let batch = samples.div_euclid(MC_BATCHES).max(1);
    let diagnostics: Vec<f64> = qs
        .chunks(batch)
        .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        .collect();

    let (sigma2, sigma) = finish_sigma2(raw);
    VarianceEstimate {
        sigma2,
        sigma,
        method: VarianceMethod::BirkhoffMc,
        terms_or_samples: samples,
        diagnostics,
        std_error: Some(std_error),
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn density_of_linear_maps_is_uniform() {
        for degree in [2u32, 3] {
            let map = CircleMapSpec::linear(degree, "linear");
            let rho = invariant_density(&map, 4096, 1e-12).unwrap();
            let expect = 1.0 / 4096.0;
            for &w in &rho.weights {
                assert!((w - expect).abs() <= 1e-12 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn density_rejects_bad_m() {
        let map = CircleMapSpec::linear(2, "d");
        assert!(matches!(
            invariant_density(&map, 1000, 1e-12),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            invariant_density(&map, 512, 1e-12),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn density_rejects_non_expanding_map() {
        let (mut map, _) = presets::nonlinear();
        map.perturbation[0].sin_coeff = 0.5; // 2 - pi < 1
        assert!(matches!(
            invariant_density(&map, 1024, 1e-10),
            Err(Error::NotExpanding { .. })
        ));
    }

    #[test]
    fn ulam_rows_are_stochastic() {
        let (map, _) = presets::nonlinear();
        let rows = ulam_rows(&map, 1024).unwrap();
        for row in &rows {
            let s: f64 = row.iter().map(|&(_, w)| w).sum();
            assert!((s - 1.0).abs() <= 1e-10);
            for &(_, w) in row {
                assert!(w >= -1e-15);
            }
        }
    }

    #[test]
    fn integrate_constant_is_exact() {
        let map = CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 4096, 1e-12).unwrap();
        assert_eq!(rho.integrate(|_| 1.0), 1.0);
    }

    #[test]
    fn integrate_trig_against_uniform() {
        let map = CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 4096, 1e-12).unwrap();
        assert!(rho.integrate(|x| (TAU * x).cos()).abs() <= 1e-6);
        let c2 = rho.integrate(|x| (TAU * x).cos().powi(2));
        assert!((c2 - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn lyapunov_linear_closed_forms() {
        let map = CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 4096, 1e-12).unwrap();
        let lyap = lyapunov(&map, &rho).unwrap();
        assert!((lyap.l - 2f64.ln()).abs() <= 1e-9);
        assert!((lyap.ell - 1.0 / 2f64.ln().sqrt()).abs() <= 1e-9);
        assert!((lyap.ell * lyap.ell * lyap.l - 1.0).abs() <= 1e-12);

        let map = CircleMapSpec::linear(3, "t");
        let rho = invariant_density(&map, 4096, 1e-12).unwrap();
        let lyap = lyapunov(&map, &rho).unwrap();
        assert!((lyap.l - 3f64.ln()).abs() <= 1e-9);
    }

    #[test]
    fn mean_phi_classic_and_smooth() {
        let map = CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 4096, 1e-12).unwrap();
        assert!(mean_phi(&presets::classic_system(), &rho).abs() <= 1e-8);
        assert!(mean_phi(&presets::smooth_system(), &rho).abs() <= 1e-8);
    }

    #[test]
    fn green_kubo_classic_closed_form() {
        let sys = presets::classic_system();
        let rho = invariant_density(sys.map(), 4096, 1e-12).unwrap();
        let est = variance_green_kubo(&sys, &rho, 64, 1e-10);
        assert!(
            (est.sigma2 - PI * PI / 2.0).abs() <= 1e-4,
            "sigma2 = {}",
            est.sigma2
        );
        assert!((est.sigma - (PI * PI / 2.0).sqrt()).abs() <= 1e-4);
        assert!(est.converged);
        // all lag >= 1 correlations vanish by Fourier orthogonality
        for &c in &est.diagnostics[1..est.terms_or_samples + 1] {
            assert!(c.abs() <= 1e-8);
        }
    }

    #[test]
    fn green_kubo_smooth_is_zero() {
        let sys = presets::smooth_system();
        let rho = invariant_density(sys.map(), 4096, 1e-12).unwrap();
        let est = variance_green_kubo(&sys, &rho, 64, 1e-10);
        assert!(est.sigma2 <= 1e-8, "sigma2 = {}", est.sigma2);
        // raw partial sum may be a hair negative but never below the clamp
        let raw = est.diagnostics[0]
            + 2.0 * est.diagnostics[1..est.terms_or_samples + 1]
                .iter()
                .sum::<f64>();
        assert!(raw >= -SIGMA2_CLAMP);
    }

    #[test]
    fn sampler_uniform_density_returns_u() {
        let map = CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 1024, 1e-12).unwrap();
        for u in [0.0, 0.1, 0.5, 0.999_999] {
            let x = rho.sample_from_uniform(u);
            assert!((x - u).abs() <= 1e-9, "u = {u}: x = {x}");
        }
    }

    #[test]
    fn sampler_concentrated_density_stays_in_cell() {
        let mut weights = vec![0.0; 1024];
        weights[37] = 1.0;
        let mut rho = UlamDensity {
            m: 1024,
            weights,
            residual: 0.0,
            cumulative: Vec::new(),
        };
        rho.rebuild_cumulative();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let x = rho.sample(&mut rng);
            assert!((37.0 / 1024.0..38.0 / 1024.0).contains(&x));
        }
    }

    #[test]
    fn sampler_is_deterministic_for_a_seed() {
        let map = CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 1024, 1e-12).unwrap();
        let draw = |seed: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| rho.sample(&mut rng)).collect()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn mc_matches_closed_form_for_classic() {
        let sys = presets::classic_system();
        let rho = invariant_density(sys.map(), 1024, 1e-12).unwrap();
        let est = variance_birkhoff_mc(&sys, &rho, 200, 10_000, 1);
        let se = est.std_error.unwrap();
        assert!(
            (est.sigma2 - PI * PI / 2.0).abs() <= 3.0 * se,
            "sigma2 = {} se = {se}",
            est.sigma2
        );
    }
}
