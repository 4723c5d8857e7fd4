//! The generalized Weierstrass function `alpha` and its companions.
//!
//! `alpha(y) = -sum_{n>=1} v(f^{n-1}(y)) / Df^n(y)` is the unique bounded
//! solution of the twisted cohomological equation
//! `v = alpha o f - Df * alpha`. The series is truncated at a length
//! certified by the geometric tail bound `sup|v| * lower^-N / (lower - 1)
//! <= tol`, uniform in `y`.
//!
//! The derived observable is `phi = -(v' + alpha * D2f) / Df`; increments
//! of `alpha` at scale `h` behave like `h` times a Birkhoff sum of `phi`
//! of length `N(x, h)`, the stopping time at which the accumulated
//! derivative first reaches `1/|h|`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::dynamics::{derivative_bounds, reduce_mod1, CircleMapSpec, DerivativeBounds};
use crate::{Error, Result};

pub use crate::dynamics::Harmonic;

/// Trigonometric-polynomial observable
/// `v(x) = c0 + sum_k (c_k cos(2 pi k x) + s_k sin(2 pi k x))`.
///
/// `v` and `v'` are exact evaluations; 1-periodicity is automatic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    #[serde(default)]
    pub mean_coeff: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub name: String,
}

impl ObservableSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.mean_coeff.is_finite() {
            return Err(Error::InvalidParameter("non-finite observable mean".into()));
        }
        for h in &self.harmonics {
            if h.k == 0 {
                return Err(Error::InvalidParameter(
                    "observable harmonic with k = 0 (use mean_coeff instead)".into(),
                ));
            }
            if !h.cos_coeff.is_finite() || !h.sin_coeff.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite observable coefficient at k = {}",
                    h.k
                )));
            }
        }
        Ok(())
    }

    /// `(v(x), v'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let mut v = self.mean_coeff;
        let mut dv = 0.0;
        for h in &self.harmonics {
            let w = TAU * f64::from(h.k);
            let (s, c) = (w * x).sin_cos();
            v += h.cos_coeff * c + h.sin_coeff * s;
            dv += w * (-h.cos_coeff * s + h.sin_coeff * c);
        }
        (v, dv)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// `|c0| + sum (|c_k| + |s_k|)`, an upper bound for `sup |v|`.
    pub fn sup_bound(&self) -> f64 {
        self.mean_coeff.abs()
            + self
                .harmonics
                .iter()
                .map(|h| h.cos_coeff.abs() + h.sin_coeff.abs())
                .sum::<f64>()
    }
}

/// Truncation contract for the alpha series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_terms() -> usize {
    200
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tol: default_tol(),
            max_terms: default_max_terms(),
        }
    }
}

/// Grid used to certify expansion when building a [`SystemHandle`].
pub const CERTIFICATE_GRID: usize = 1 << 16;

/// An admissible pair (map, observable) with certified expansion bounds and
/// a truncation length satisfying the tail bound. Immutable once built;
/// all evaluations are pure functions of `(self, x, h)`.
#[derive(Clone, Debug)]
pub struct SystemHandle {
    map: CircleMapSpec,
    observable: ObservableSpec,
    bounds: DerivativeBounds,
    policy: TruncationPolicy,
    hoelder_eps: f64,
    n_terms: usize,
}

impl SystemHandle {
    pub fn new(
        map: CircleMapSpec,
        observable: ObservableSpec,
        policy: TruncationPolicy,
        hoelder_eps: f64,
    ) -> Result<Self> {
        observable.validate()?;
        if !(policy.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation tol must be positive, got {}",
                policy.tol
            )));
        }
        if policy.max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be >= 1".into()));
        }
        if !(hoelder_eps > 0.0 && hoelder_eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "hoelder_eps must lie in (0,1), got {hoelder_eps}"
            )));
        }
        let bounds = derivative_bounds(&map, CERTIFICATE_GRID)?;
        let n_terms = required_terms(observable.sup_bound(), bounds.lower, &policy)?;
        Ok(SystemHandle {
            map,
            observable,
            bounds,
            policy,
            hoelder_eps,
            n_terms,
        })
    }

    pub fn map(&self) -> &CircleMapSpec {
        &self.map
    }

    pub fn observable(&self) -> &ObservableSpec {
        &self.observable
    }

    pub fn bounds(&self) -> DerivativeBounds {
        self.bounds
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.policy
    }

    pub fn hoelder_eps(&self) -> f64 {
        self.hoelder_eps
    }

    /// Number of series terms certified by the tail bound.
    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    /// Same system, tighter truncation (used by witness re-checks).
    pub fn with_tol(&self, tol: f64) -> Result<Self> {
        SystemHandle::new(
            self.map.clone(),
            self.observable.clone(),
            TruncationPolicy { tol, ..self.policy },
            self.hoelder_eps,
        )
    }

    /// Partial sum of the alpha series; absolute truncation error is at
    /// most `policy.tol`. `x` is taken mod 1.
    pub fn alpha(&self, x: f64) -> f64 {
        let mut z = reduce_mod1(x);
        let mut prod = 1.0;
        let mut sum = KahanSum::default();
        for _ in 0..self.n_terms {
            let (fz, dfz, _) = self.map.eval(z);
            prod *= dfz;
            sum.add(self.observable.value(z) / prod);
            z = reduce_mod1(fz);
        }
        -sum.value()
    }

    /// `v(x) - alpha(f(x)) + Df(x) alpha(x)`; bounded by
    /// `(1 + upper) * tol` by truncation-error propagation.
    pub fn cohomological_residual(&self, x: f64) -> f64 {
        let z = reduce_mod1(x);
        let (fz, dfz, _) = self.map.eval(z);
        self.observable.value(z) - self.alpha(fz) + dfz * self.alpha(z)
    }

    /// Derived observable `phi(x) = -(v'(x) + alpha(x) D2f(x)) / Df(x)`.
    pub fn phi(&self, x: f64) -> f64 {
        let z = reduce_mod1(x);
        let (_, dfz, d2fz) = self.map.eval(z);
        -(self.observable.deriv(z) + self.alpha(z) * d2fz) / dfz
    }

    /// `phi` at `x, f(x), ..., f^(n-1)(x)` in one pass.
    ///
    /// The orbit is extended by `n_terms` points and handed to
    /// [`SystemHandle::phi_over_chain`].
    pub fn phi_along_orbit(&self, x: f64, n: usize) -> Vec<f64> {
        let total = n + self.n_terms;
        let mut chain = Vec::with_capacity(total);
        let mut z = reduce_mod1(x);
        for _ in 0..total {
            chain.push(z);
            z = self.map.step(z);
        }
        self.phi_over_chain(&chain)
    }

    /// `phi` at the first `chain.len() - n_terms` points of a precomputed
    /// orbit segment (`chain[i+1] = f(chain[i]) mod 1`).
    ///
    /// Alpha is recovered by the backward recursion
    /// `alpha(x_i) = (alpha(x_(i+1)) - v(x_i)) / Df(x_i)` started from 0 at
    /// the end of the chain, which reproduces the truncated series with at
    /// least `n_terms` terms at every returned index while visiting each
    /// orbit point once. The recursion divides errors by `Df > 1`, so it is
    /// stable however long the chain is.
    pub fn phi_over_chain(&self, chain: &[f64]) -> Vec<f64> {
        let total = chain.len();
        assert!(
            total >= self.n_terms,
            "chain must carry at least n_terms = {} points",
            self.n_terms
        );
        let n = total - self.n_terms;
        let mut vs = Vec::with_capacity(total);
        let mut dvs = vec![0.0; n];
        let mut dfs = Vec::with_capacity(total);
        let mut d2fs = vec![0.0; n];
        for (i, &x) in chain.iter().enumerate() {
            let (_, dfz, d2fz) = self.map.eval(x);
            let (v, dv) = self.observable.eval(x);
            vs.push(v);
            dfs.push(dfz);
            if i < n {
                dvs[i] = dv;
                d2fs[i] = d2fz;
            }
        }
        let mut phis = vec![0.0; n];
        let mut a = 0.0;
        for i in (0..total).rev() {
            a = (a - vs[i]) / dfs[i];
            if i < n {
                phis[i] = -(dvs[i] + a * d2fs[i]) / dfs[i];
            }
        }
        phis
    }

    /// Stopping time `N(x, h)`: the unique `N >= 0` with
    /// `|Df^N(x)| < 1/|h| <= |Df^(N+1)(x)|`.
    pub fn stopping_time(&self, x: f64, h: f64) -> u32 {
        assert!(
            h != 0.0 && h.abs() < 1.0 && h.is_finite(),
            "stopping_time requires 0 < |h| < 1, got {h}"
        );
        let target = 1.0 / h.abs();
        let mut z = reduce_mod1(x);
        let mut prod = 1.0;
        let mut n = 0u32;
        loop {
            let (fz, dfz, _) = self.map.eval(z);
            prod *= dfz.abs();
            if prod >= target {
                return n;
            }
            n += 1;
            z = reduce_mod1(fz);
        }
    }

    /// Birkhoff sum `sum_{i<n} phi(f^i(x))`; `n = 0` returns 0.
    pub fn birkhoff_sum_phi(&self, x: f64, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut sum = KahanSum::default();
        for p in self.phi_along_orbit(x, n) {
            sum.add(p);
        }
        sum.value()
    }

    /// `alpha(x+h) - alpha(x)`, both ends evaluated with the same policy.
    /// `x + h` is formed in lift coordinates before any reduction.
    pub fn increment(&self, x: f64, h: f64) -> f64 {
        assert!(
            h != 0.0 && h.abs() < 1.0 && h.is_finite(),
            "increment requires 0 < |h| < 1, got {h}"
        );
        self.alpha(x + h) - self.alpha(x)
    }

    /// `(increment - h * S_(N(x,h)) phi) / h`; bounded uniformly in `(x, h)`.
    pub fn residual_ratio(&self, x: f64, h: f64) -> f64 {
        let n = self.stopping_time(x, h);
        (self.increment(x, h) - h * self.birkhoff_sum_phi(x, n as usize)) / h
    }

    /// Second-order difference `alpha(x+h) + alpha(x-h) - 2 alpha(x)`.
    pub fn second_difference(&self, x: f64, h: f64) -> f64 {
        assert!(
            h != 0.0 && h.abs() <= 1.0 && h.is_finite(),
            "second_difference requires 0 < |h| <= 1, got {h}"
        );
        self.alpha(x + h) + self.alpha(x - h) - 2.0 * self.alpha(x)
    }

    /// Zygmund ratio `|second_difference| / |h|`, bounded over all `(x, h)`.
    pub fn zygmund_ratio(&self, x: f64, h: f64) -> f64 {
        self.second_difference(x, h).abs() / h.abs()
    }

    /// `second_difference / |h|^(1 + hoelder_eps)`.
    pub fn omega_ratio(&self, x: f64, h: f64) -> f64 {
        self.second_difference(x, h) / h.abs().powf(1.0 + self.hoelder_eps)
    }
}

/// Smallest `n` with `sup_v * lower^-n / (lower - 1) <= tol`.
fn required_terms(sup_v: f64, lower: f64, policy: &TruncationPolicy) -> Result<usize> {
    if sup_v == 0.0 {
        return Ok(1);
    }
    let needed = (sup_v / (policy.tol * (lower - 1.0))).ln() / lower.ln();
    let required = needed.ceil().max(1.0) as usize;
    if required > policy.max_terms {
        return Err(Error::TruncationUnachievable {
            tol: policy.tol,
            required,
            max_terms: policy.max_terms,
        });
    }
    Ok(required)
}

/// Compensated summation for the 40-200 term alpha series near tol = 1e-12.
#[derive(Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use std::f64::consts::PI;

    #[test]
    fn alpha_classic_closed_forms() {
        let sys = presets::classic_system();
        // all iterates of 0 stay at 0: alpha(0) = -sum 2^-n = -1
        assert!((sys.alpha(0.0) + 1.0).abs() <= 1e-12);
        // first term +1/2, the rest telescope to -1/2
        assert!(sys.alpha(0.5).abs() <= 1e-12);
    }

    #[test]
    fn alpha_smooth_is_the_constructed_coboundary() {
        let sys = presets::smooth_system();
        // v was built so that alpha(x) = sin(2 pi x) / (2 pi)
        let expect = |x: f64| (TAU * x).sin() / TAU;
        assert!((sys.alpha(0.25) - 1.0 / TAU).abs() <= 1e-12);
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!(
                (sys.alpha(x) - expect(x)).abs() <= 1e-11,
                "x = {x}: {} vs {}",
                sys.alpha(x),
                expect(x)
            );
        }
    }

    #[test]
    fn alpha_term_count_matches_tail_bound() {
        let sys = presets::classic_system();
        // sup|v| = 1, lower = 2: 2^-n <= 1e-12 first at n = 40
        assert_eq!(sys.n_terms(), 40);
        let b = sys.bounds();
        let tail = sys.observable().sup_bound() * b.lower.powi(-(sys.n_terms() as i32))
            / (b.lower - 1.0);
        assert!(tail <= sys.policy().tol);
    }

    #[test]
    fn truncation_unachievable_is_reported() {
        let (map, obs) = presets::nonlinear();
        let policy = TruncationPolicy {
            tol: 1e-12,
            max_terms: 10,
        };
        match SystemHandle::new(map, obs, policy, 0.5) {
            Err(Error::TruncationUnachievable { required, .. }) => assert!(required > 10),
            other => panic!("expected TruncationUnachievable, got {other:?}"),
        }
    }

    #[test]
    fn cohomological_residual_tracks_tol() {
        let sys = presets::classic_system();
        assert!(sys.cohomological_residual(0.3).abs() <= 3e-12);
        let sys = presets::smooth_system();
        assert!(sys.cohomological_residual(0.7).abs() <= 3e-12);
        // residual scales with the policy tolerance
        let (map, obs) = presets::classic();
        let loose = SystemHandle::new(
            map,
            obs,
            TruncationPolicy {
                tol: 1e-6,
                max_terms: 200,
            },
            0.5,
        )
        .unwrap();
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!(loose.cohomological_residual(x).abs() <= 3e-6);
        }
    }

    #[test]
    fn phi_classic_is_pi_sine() {
        let sys = presets::classic_system();
        assert!((sys.phi(0.25) - PI).abs() <= 1e-12);
        assert!(sys.phi(0.0).abs() <= 1e-12);
    }

    #[test]
    fn phi_smooth_closed_form() {
        let sys = presets::smooth_system();
        // phi = cos(2 pi x) - cos(4 pi x) by direct differentiation
        assert!((sys.phi(0.5) - (-2.0)).abs() <= 1e-11);
        for i in 0..50 {
            let x = i as f64 / 50.0;
            let expect = (TAU * x).cos() - (2.0 * TAU * x).cos();
            assert!((sys.phi(x) - expect).abs() <= 1e-11);
        }
    }

    #[test]
    fn phi_along_orbit_matches_pointwise_phi() {
        let sys = presets::nonlinear_system();
        let x0 = 0.137;
        let phis = sys.phi_along_orbit(x0, 50);
        let mut z = x0;
        for (i, &p) in phis.iter().enumerate() {
            assert!(
                (p - sys.phi(z)).abs() <= 1e-11,
                "orbit index {i}: {p} vs {}",
                sys.phi(z)
            );
            z = sys.map().step(z);
        }
    }

    #[test]
    fn stopping_time_dyadic_and_thirds() {
        let sys = presets::classic_system();
        for x in [0.0, 0.1, 0.7] {
            assert_eq!(sys.stopping_time(x, 1.0 / 8.0), 2);
            assert_eq!(sys.stopping_time(x, 1.0 / 3.0), 1);
            assert_eq!(sys.stopping_time(x, -1.0 / 8.0), 2);
        }
    }

    #[test]
    fn stopping_time_nonlinear_product_accumulation() {
        let sys = presets::nonlinear_system();
        let (x, h) = (0.1, 2f64.powi(-10));
        let n = sys.stopping_time(x, h);
        // independent product accumulation
        let mut z = x;
        let mut prod = 1.0;
        let mut count = 0u32;
        loop {
            prod *= sys.map().df(z).abs();
            if prod >= 1024.0 {
                break;
            }
            count += 1;
            z = sys.map().step(z);
        }
        assert_eq!(n, count);
    }

    #[test]
    #[should_panic(expected = "stopping_time requires")]
    fn stopping_time_rejects_h_zero() {
        presets::classic_system().stopping_time(0.3, 0.0);
    }

    #[test]
    fn birkhoff_sum_examples() {
        let sys = presets::classic_system();
        assert_eq!(sys.birkhoff_sum_phi(0.42, 0), 0.0);
        let expect =
            PI * ((TAU / 7.0).sin() + (2.0 * TAU / 7.0).sin() + (4.0 * TAU / 7.0).sin());
        assert!((sys.birkhoff_sum_phi(1.0 / 7.0, 3) - expect).abs() <= 1e-10);

        // phi of the smooth preset telescopes on periodic orbits
        let sys = presets::smooth_system();
        assert!(sys.birkhoff_sum_phi(1.0 / 3.0, 2).abs() <= 1e-10);
    }

    #[test]
    fn increment_examples() {
        let sys = presets::classic_system();
        assert!((sys.increment(0.0, 0.5) - 1.0).abs() <= 2e-12);
        let sys = presets::smooth_system();
        assert!((sys.increment(0.0, 0.25) - 1.0 / TAU).abs() <= 2e-12);
    }

    #[test]
    #[should_panic(expected = "increment requires")]
    fn increment_rejects_h_zero() {
        presets::classic_system().increment(0.1, 0.0);
    }

    #[test]
    fn residual_ratio_is_the_definitional_composition() {
        let sys = presets::classic_system();
        let (x, h) = (0.0, 0.5);
        let n = sys.stopping_time(x, h) as usize;
        let composed = (sys.increment(x, h) - h * sys.birkhoff_sum_phi(x, n)) / h;
        assert_eq!(sys.residual_ratio(x, h), composed);
    }

    #[test]
    fn second_difference_even_symmetry_at_zero() {
        // classic alpha is a pure cosine series, so alpha(-h) = alpha(h)
        let sys = presets::classic_system();
        for k in 3..15 {
            let h = 2f64.powi(-k);
            let lhs = sys.second_difference(0.0, h);
            let rhs = 2.0 * (sys.alpha(h) - sys.alpha(0.0));
            assert!((lhs - rhs).abs() <= 4e-12);
        }
    }

    #[test]
    fn zygmund_ratio_of_smooth_alpha_decays_linearly() {
        let sys = presets::smooth_system();
        // alpha'' exists and |alpha''| <= 2 pi, so |D2_h alpha| <= 2 pi h^2
        for k in 4..18 {
            let h = 2f64.powi(-k);
            let r = sys.zygmund_ratio(0.3, h);
            assert!(r <= TAU * h + 1e-9, "k = {k}: ratio {r}");
        }
    }

    #[test]
    fn omega_ratio_scale() {
        let sys = presets::classic_system();
        let (x, h) = (0.21, 2f64.powi(-8));
        let d2 = sys.second_difference(x, h);
        assert_eq!(sys.omega_ratio(x, h), d2 / h.powf(1.5));
    }

    #[test]
    fn alpha_is_one_periodic() {
        let sys = presets::nonlinear_system();
        for i in 0..50 {
            let x = i as f64 / 50.0;
            assert!((sys.alpha(x) - sys.alpha(x + 1.0)).abs() <= 1e-13);
            assert!((sys.alpha(x) - sys.alpha(x - 1.0)).abs() <= 1e-13);
        }
    }

    #[test]
    fn hoelder_eps_domain() {
        let (map, obs) = presets::classic();
        assert!(
            SystemHandle::new(map.clone(), obs.clone(), TruncationPolicy::default(), 0.0).is_err()
        );
        assert!(SystemHandle::new(map, obs, TruncationPolicy::default(), 1.0).is_err());
    }
}
