//! Expanding circle maps as degree-`d` lifts with trigonometric perturbations.
//!
//! A map is `f(x) = d*x + g(x)` with `g(x) = sum_k (a_k cos(2 pi k x) + b_k
//! sin(2 pi k x))`, so `Df` and `D2f` are exact closed forms of the
//! coefficients. The module certifies uniform expansion on a grid with a
//! rigorous Lipschitz margin, inverts the d monotone branches, and
//! enumerates periodic orbits as fixed points of composed inverse branches.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::{Error, Result};

/// One Fourier mode of the perturbation or of an observable:
/// `cos_coeff * cos(2 pi k x) + sin_coeff * sin(2 pi k x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: u32,
    #[serde(default)]
    pub cos_coeff: f64,
    #[serde(default)]
    pub sin_coeff: f64,
}

/// Degree-`d` lift `f(x) = d*x + g(x)` of an expanding circle map.
///
/// `f(x+1) = f(x) + d` holds identically in the coefficients, and all
/// derivatives are exact trigonometric evaluations, so the smoothness
/// hypotheses hold by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleMapSpec {
    pub degree: u32,
    #[serde(default)]
    pub perturbation: Vec<Harmonic>,
    #[serde(default)]
    pub name: String,
}

impl CircleMapSpec {
    /// Linear map `x -> d*x` (no perturbation).
    pub fn linear(degree: u32, name: &str) -> Self {
        CircleMapSpec {
            degree,
            perturbation: Vec::new(),
            name: name.to_owned(),
        }
    }

    /// Structural validation: degree >= 2, positive wave numbers, finite
    /// coefficients. Expansion is certified separately by
    /// [`derivative_bounds`].
    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::InvalidParameter(format!(
                "map degree must be >= 2, got {}",
                self.degree
            )));
        }
        for h in &self.perturbation {
            if h.k == 0 {
                return Err(Error::InvalidParameter(
                    "perturbation harmonic with k = 0 (use the linear part instead)".into(),
                ));
            }
            if !h.cos_coeff.is_finite() || !h.sin_coeff.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite perturbation coefficient at k = {}",
                    h.k
                )));
            }
        }
        Ok(())
    }

    /// Lift value, first and second derivative at `x`: `(f, Df, D2f)`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let d = f64::from(self.degree);
        let mut f = d * x;
        let mut df = d;
        let mut d2f = 0.0;
        for h in &self.perturbation {
            let w = TAU * f64::from(h.k);
            let (s, c) = (w * x).sin_cos();
            f += h.cos_coeff * c + h.sin_coeff * s;
            df += w * (-h.cos_coeff * s + h.sin_coeff * c);
            d2f += w * w * (-h.cos_coeff * c - h.sin_coeff * s);
        }
        (f, df, d2f)
    }

    /// Lift value only.
    pub fn lift(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// First derivative only.
    pub fn df(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// Circle map: `f(x) mod 1`.
    pub fn step(&self, x: f64) -> f64 {
        reduce_mod1(self.eval(x).0)
    }

    /// `sum_k (2 pi k)^2 (|a_k| + |b_k|)`, a Lipschitz constant for `Df`.
    fn df_lipschitz(&self) -> f64 {
        self.perturbation
            .iter()
            .map(|h| {
                let w = TAU * f64::from(h.k);
                w * w * (h.cos_coeff.abs() + h.sin_coeff.abs())
            })
            .sum()
    }
}

/// Reduce to the fundamental domain `[0, 1)`.
pub fn reduce_mod1(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance on the circle.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Certified bounds `1 < lower <= |Df| <= upper`.
///
/// `lower` plays the role of the expansion constant lambda (the `b` of the
/// geometric tail estimates); `upper` bounds distortion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub lower: f64,
    pub upper: f64,
    pub grid_size: usize,
}

/// Certify expansion on a grid of `grid_size` points with the rigorous
/// margin `df_lipschitz / grid_size`.
pub fn derivative_bounds(spec: &CircleMapSpec, grid_size: usize) -> Result<DerivativeBounds> {
    spec.validate()?;
    if grid_size < 1024 {
        return Err(Error::InvalidParameter(format!(
            "expansion-certificate grid must have >= 1024 points, got {grid_size}"
        )));
    }
    let mut min_df = f64::INFINITY;
    let mut max_df = f64::NEG_INFINITY;
    let step = 1.0 / grid_size as f64;
    for i in 0..grid_size {
        let df = spec.df(i as f64 * step);
        min_df = min_df.min(df);
        max_df = max_df.max(df);
    }
    let margin = spec.df_lipschitz() * step;
    let lower = min_df - margin;
    let upper = max_df + margin;
    if !(lower > 1.0) {
        return Err(Error::NotExpanding { min_df: lower });
    }
    Ok(DerivativeBounds {
        lower,
        upper,
        grid_size,
    })
}

const ROOT_MAX_ITERS: usize = 200;
const ROOT_RESIDUAL_TOL: f64 = 1e-14;

/// Solve `lift(x) = target` on `[lo, hi]` (the lift is strictly increasing).
///
/// Newton steps safeguarded by the bracket; converges to residual
/// `<= 1e-14` or to a bracket of a few ulps.
pub(crate) fn invert_lift(spec: &CircleMapSpec, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..ROOT_MAX_ITERS {
        let (fx, dfx, _) = spec.eval(x);
        residual = fx - target;
        if residual.abs() <= ROOT_RESIDUAL_TOL {
            return Ok(x);
        }
        if residual > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
            // bracket exhausted at floating-point resolution
            return Ok(x);
        }
        let next = x - residual / dfx;
        x = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::ConvergenceFailure {
        what: "inverse-branch root solve",
        iterations: ROOT_MAX_ITERS,
        last_delta: residual.abs(),
    })
}

/// Integer offset of the lowest inverse branch at `y`: the smallest `m`
/// with `y + m >= f(0)`.
fn branch_offset(spec: &CircleMapSpec, y: f64) -> f64 {
    (spec.lift(0.0) - y).ceil()
}

/// The `branch`-th inverse branch at `y in [0, 1)`, branches ordered by
/// position of the preimage in `[0, 1)`.
pub fn invert_branch(spec: &CircleMapSpec, y: f64, branch: u32) -> Result<f64> {
    let target = y + branch_offset(spec, y) + f64::from(branch);
    invert_lift(spec, target, 0.0, 1.0)
}

/// All `d` preimages of `y` under the circle map, ascending in `[0, 1)`.
///
/// Each returned `x` satisfies `|f(x) - y - m| <= 1e-13` for its branch
/// integer `m`.
pub fn inverse_branches(spec: &CircleMapSpec, y: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(0.0..1.0).contains(&y) {
        return Err(Error::InvalidParameter(format!(
            "inverse_branches target must lie in [0,1), got {y}"
        )));
    }
    (0..self_degree(spec))
        .map(|i| invert_branch(spec, y, i))
        .collect()
}

fn self_degree(spec: &CircleMapSpec) -> u32 {
    spec.degree
}

/// A cycle of the circle map.
///
/// `points` is the forward orbit starting from the smallest point, `word`
/// the inverse-branch itinerary that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<f64>,
    pub word: Vec<u8>,
}

const WORD_CAP: u128 = 1 << 20;
const CONTRACTION_MAX_ITERS: usize = 500;
const CONTRACTION_TOL: f64 = 1e-14;
/// Orbits whose point sets differ by less than this are the same orbit.
const ORBIT_DEDUP_TOL: f64 = 1e-9;
/// Points closer than this along one orbit reveal a smaller exact period.
const EXACT_PERIOD_TOL: f64 = 1e-10;

/// Every orbit of exact period `p <= p_max`, found as fixed points of
/// `p`-fold inverse-branch compositions (contractions with factor
/// `<= lower^-p`), deduplicated across words and cyclic rotations.
///
/// The list is sorted by `(period, first point)` so the output is
/// deterministic however the word space is partitioned.
pub fn periodic_orbits(spec: &CircleMapSpec, p_max: u32) -> Result<Vec<PeriodicOrbit>> {
    if !(1..=16).contains(&p_max) {
        return Err(Error::InvalidParameter(format!(
            "orbit period cap must lie in 1..=16, got {p_max}"
        )));
    }
    // certify expansion; the contraction argument needs lower > 1
    derivative_bounds(spec, 4096)?;
    let d = spec.degree;
    if d > 255 {
        return Err(Error::InvalidParameter(format!(
            "orbit enumeration supports degree <= 255, got {d}"
        )));
    }
    let words_at_cap = u128::from(d)
        .checked_pow(p_max)
        .unwrap_or(u128::MAX);
    if words_at_cap > WORD_CAP {
        return Err(Error::BudgetExceeded {
            words: words_at_cap,
            cap: WORD_CAP,
        });
    }
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for p in 1..=p_max as usize {
        let mut word = vec![0u8; p];
        loop {
            if let Some(orbit) = orbit_of_word(spec, &word)? {
                if !orbits
                    .iter()
                    .any(|o| o.period == orbit.period && same_orbit(&o.points, &orbit.points))
                {
                    orbits.push(orbit);
                }
            }
            if !increment_word(&mut word, d) {
                break;
            }
        }
    }
    orbits.sort_by(|a, b| {
        (a.period, a.points[0])
            .partial_cmp(&(b.period, b.points[0]))
            .unwrap()
    });
    Ok(orbits)
}

/// Odometer over base-`d` words; returns false after the last word.
fn increment_word(word: &mut [u8], d: u32) -> bool {
    for digit in word.iter_mut().rev() {
        if u32::from(*digit) + 1 < d {
            *digit += 1;
            return true;
        }
        *digit = 0;
    }
    false
}

/// Fixed point of the composed inverse branch `T_w0 o ... o T_w(p-1)`,
/// returned as a canonical orbit when its exact period equals the word
/// length (non-primitive words are dropped here and found at their true
/// period).
fn orbit_of_word(spec: &CircleMapSpec, word: &[u8]) -> Result<Option<PeriodicOrbit>> {
    let p = word.len();
    let mut z = 0.5;
    let mut converged = false;
    let mut delta = f64::INFINITY;
    for _ in 0..CONTRACTION_MAX_ITERS {
        let mut y = z;
        for &w in word.iter().rev() {
            y = invert_branch(spec, y, u32::from(w))?;
        }
        delta = (y - z).abs();
        z = y;
        if delta < CONTRACTION_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            what: "periodic-orbit contraction iteration",
            iterations: CONTRACTION_MAX_ITERS,
            last_delta: delta,
        });
    }
    // One more backward pass records the whole cycle: chain[j] is the point
    // with itinerary word[j], word[j+1], ..., so f(chain[j]) = chain[j+1]
    // up to the root-solver residual -- much tighter than iterating f
    // forward from the fixed point.
    let mut chain = vec![0.0; p];
    let mut y = z;
    for j in (0..p).rev() {
        y = invert_branch(spec, y, u32::from(word[j]))?;
        chain[j] = snap_to_zero(y);
    }
    // exact period must be the full word length
    for i in 0..p {
        for j in (i + 1)..p {
            if circle_dist(chain[i], chain[j]) < EXACT_PERIOD_TOL {
                return Ok(None);
            }
        }
    }
    // canonical rotation: start at the smallest point
    let start = chain
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let points: Vec<f64> = (0..p).map(|i| chain[(start + i) % p]).collect();
    let word: Vec<u8> = (0..p).map(|i| word[(start + i) % p]).collect();
    Ok(Some(PeriodicOrbit {
        period: p,
        points,
        word,
    }))
}

/// Collapse the two symbolic codings of a point at the branch boundary 0.
fn snap_to_zero(x: f64) -> f64 {
    if x < 1e-12 || x > 1.0 - 1e-12 {
        0.0
    } else {
        x
    }
}

/// Point sets equal within the dedup tolerance (both already canonical:
/// rotation starting at the minimum, boundary points snapped to 0).
fn same_orbit(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| circle_dist(*x, *y) < ORBIT_DEDUP_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> CircleMapSpec {
        CircleMapSpec::linear(2, "doubling")
    }

    fn nonlinear() -> CircleMapSpec {
        CircleMapSpec {
            degree: 2,
            perturbation: vec![Harmonic {
                k: 1,
                cos_coeff: 0.0,
                sin_coeff: 0.1,
            }],
            name: "nonlinear".into(),
        }
    }

    #[test]
    fn eval_linear_maps() {
        let (f, df, d2f) = doubling().eval(0.25);
        assert_eq!((f, df, d2f), (0.5, 2.0, 0.0));
        let (f, df, d2f) = CircleMapSpec::linear(3, "t").eval(0.9);
        assert!((f - 2.7).abs() < 1e-15);
        assert_eq!(df, 3.0);
        assert_eq!(d2f, 0.0);
    }

    #[test]
    fn eval_perturbed_at_zero() {
        // g(x) = 0.1 sin(2 pi x): g(0) = 0, g'(0) = 0.2 pi, g''(0) = 0
        let (f, df, d2f) = nonlinear().eval(0.0);
        assert_eq!(f, 0.0);
        assert!((df - (2.0 + 0.2 * std::f64::consts::PI)).abs() < 1e-14);
        assert!(d2f.abs() < 1e-14);
    }

    #[test]
    fn lift_periodicity() {
        let spec = nonlinear();
        let d = f64::from(spec.degree);
        let mut x = 0.137;
        for _ in 0..100 {
            let lhs = spec.lift(x + 1.0);
            let rhs = spec.lift(x) + d;
            assert!((lhs - rhs).abs() < 1e-12, "x={x}: {lhs} vs {rhs}");
            x = reduce_mod1(x * 1.618 + 0.1);
        }
    }

    #[test]
    fn bounds_linear() {
        let b = derivative_bounds(&doubling(), 4096).unwrap();
        assert_eq!(b.lower, 2.0);
        assert_eq!(b.upper, 2.0);
    }

    #[test]
    fn bounds_nonlinear() {
        let b = derivative_bounds(&nonlinear(), 1 << 16).unwrap();
        let pi = std::f64::consts::PI;
        assert!((b.lower - (2.0 - 0.2 * pi)).abs() < 1e-4, "lower = {}", b.lower);
        assert!((b.upper - (2.0 + 0.2 * pi)).abs() < 1e-4, "upper = {}", b.upper);
        assert!(b.lower < 2.0 - 0.2 * pi); // margin is subtracted
    }

    #[test]
    fn bounds_reject_non_expanding() {
        let spec = CircleMapSpec {
            degree: 2,
            perturbation: vec![Harmonic {
                k: 1,
                cos_coeff: 0.0,
                sin_coeff: 0.5,
            }],
            name: "too steep".into(),
        };
        match derivative_bounds(&spec, 4096) {
            Err(Error::NotExpanding { .. }) => {}
            other => panic!("expected NotExpanding, got {other:?}"),
        }
    }

    #[test]
    fn bounds_reject_small_grid() {
        assert!(matches!(
            derivative_bounds(&doubling(), 512),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn inverse_branches_doubling() {
        let spec = doubling();
        let xs = inverse_branches(&spec, 0.5).unwrap();
        assert_eq!(xs.len(), 2);
        assert!((xs[0] - 0.25).abs() < 1e-13);
        assert!((xs[1] - 0.75).abs() < 1e-13);
        let xs = inverse_branches(&spec, 0.0).unwrap();
        assert!(xs[0].abs() < 1e-13);
        assert!((xs[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn inverse_branches_nonlinear_residual() {
        let spec = nonlinear();
        let xs = inverse_branches(&spec, 0.5).unwrap();
        assert_eq!(xs.len(), 2);
        for (i, &x) in xs.iter().enumerate() {
            let r = spec.lift(x) - 0.5 - i as f64;
            assert!(r.abs() <= 1e-13, "branch {i}: residual {r:e}");
        }
    }

    #[test]
    fn orbits_doubling_small_periods() {
        let spec = doubling();
        let orbits = periodic_orbits(&spec, 1).unwrap();
        assert_eq!(orbits.len(), 1);
        assert_eq!(orbits[0].points, vec![0.0]);

        let orbits = periodic_orbits(&spec, 2).unwrap();
        assert_eq!(orbits.len(), 2);
        assert_eq!(orbits[1].period, 2);
        assert!((orbits[1].points[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((orbits[1].points[1] - 2.0 / 3.0).abs() < 1e-12);

        let orbits = periodic_orbits(&spec, 3).unwrap();
        assert_eq!(orbits.len(), 4);
        let p3: Vec<&PeriodicOrbit> = orbits.iter().filter(|o| o.period == 3).collect();
        assert_eq!(p3.len(), 2);
        for (orbit, first) in p3.iter().zip([1.0 / 7.0, 3.0 / 7.0]) {
            assert!((orbit.points[0] - first).abs() < 1e-12);
        }
        // forward order of the second one is 3/7 -> 6/7 -> 5/7
        assert!((p3[1].points[1] - 6.0 / 7.0).abs() < 1e-12);
        assert!((p3[1].points[2] - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn orbits_close_up_and_stay_distinct() {
        for spec in [doubling(), nonlinear(), CircleMapSpec::linear(3, "triple")] {
            let p_max = if spec.degree == 2 { 8 } else { 6 };
            let orbits = periodic_orbits(&spec, p_max).unwrap();
            for orbit in &orbits {
                let p = orbit.period;
                // wrap-around: f(points[i]) = points[(i+1) mod p] within 1e-12
                for i in 0..p {
                    let fx = spec.step(orbit.points[i]);
                    let next = orbit.points[(i + 1) % p];
                    assert!(
                        circle_dist(fx, next) < 1e-12,
                        "{}: period {p} orbit breaks at {i}: {fx} vs {next}",
                        spec.name
                    );
                }
                for i in 0..p {
                    for j in (i + 1)..p {
                        assert!(circle_dist(orbit.points[i], orbit.points[j]) > 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn orbit_return_after_p_steps() {
        let spec = nonlinear();
        for orbit in periodic_orbits(&spec, 6).unwrap() {
            let mut x = orbit.points[0];
            for _ in 0..orbit.period {
                x = spec.step(x);
            }
            assert!(circle_dist(x, orbit.points[0]) < 1e-10);
        }
    }

    #[test]
    fn word_cap_guard() {
        let spec = CircleMapSpec::linear(100, "huge");
        assert!(matches!(
            periodic_orbits(&spec, 16),
            Err(Error::BudgetExceeded { .. })
        ));
        let spec = CircleMapSpec::linear(1000, "too many branches");
        assert!(matches!(
            periodic_orbits(&spec, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn p_max_domain() {
        assert!(matches!(
            periodic_orbits(&doubling(), 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            periodic_orbits(&doubling(), 17),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn validate_rejects_degree_one_and_k_zero() {
        assert!(CircleMapSpec::linear(1, "x").validate().is_err());
        let spec = CircleMapSpec {
            degree: 2,
            perturbation: vec![Harmonic {
                k: 0,
                cos_coeff: 1.0,
                sin_coeff: 0.0,
            }],
            name: String::new(),
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn reduce_mod1_edges() {
        assert_eq!(reduce_mod1(0.0), 0.0);
        assert_eq!(reduce_mod1(1.0), 0.0);
        assert_eq!(reduce_mod1(-0.25), 0.75);
        assert_eq!(reduce_mod1(2.5), 0.5);
        let r = reduce_mod1(-1e-20);
        assert!((0.0..1.0).contains(&r));
    }
}
