//! The regularity dichotomy: alpha is either of class `C^(1+eps)` or
//! nowhere differentiable, and which case holds is decidable two ways.
//!
//! * Orbit criterion: alpha is nowhere differentiable iff some periodic
//!   orbit carries a nonzero Birkhoff sum of `phi`.
//! * Variance criterion: alpha is nowhere differentiable iff
//!   `sigma^2(phi) > 0`.
//!
//! The two are mathematically equivalent, so [`classify`] demands they
//! agree and refuses to issue a verdict otherwise (`CriteriaDisagree`):
//! disagreement always means `p_max` is too small or a tolerance is
//! mis-set, never a third possibility.

use serde::{Deserialize, Serialize};

use crate::dynamics::{periodic_orbits, PeriodicOrbit};
use crate::ergodic::{variance_green_kubo, UlamDensity};
use crate::weierstrass::{KahanSum, SystemHandle};
use crate::{Error, Result};

/// Default orbit-sum threshold; well above truncation noise
/// (`10 * p_max * (1 + upper) * tol`) for the default policy.
pub const DEFAULT_ORBIT_TOL: f64 = 1e-8;
/// Default variance threshold.
pub const DEFAULT_SIGMA_TOL: f64 = 1e-6;
/// Default period cap for a map of the given degree: 255 periodic points
/// for degree 2, 364 for degree 3 and above.
pub fn default_p_max(degree: u32) -> u32 {
    if degree == 2 {
        8
    } else {
        6
    }
}

/// One periodic orbit together with its Birkhoff sum of `phi`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitSum {
    pub orbit: PeriodicOrbit,
    pub sum: f64,
}

/// All orbit sums up to `p_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitSumReport {
    pub entries: Vec<OrbitSum>,
    pub max_abs_sum: f64,
    pub p_max: u32,
}

/// Birkhoff sums of `phi` over every orbit of period `<= p_max`, in
/// canonical orbit order.
///
/// Sums of every period can vanish by symmetry up to period 2 even in the
/// nowhere-differentiable case, so `p_max >= 3` is the useful regime; the
/// cross-check in [`classify`] catches a too-small `p_max`.
pub fn orbit_sums(sys: &SystemHandle, p_max: u32) -> Result<OrbitSumReport> {
    let orbits = periodic_orbits(sys.map(), p_max)?;
    let entries: Vec<OrbitSum> = orbits
        .into_iter()
        .map(|orbit| {
            let mut sum = KahanSum::default();
            for &x in &orbit.points {
                sum.add(sys.phi(x));
            }
            OrbitSum {
                sum: sum.value(),
                orbit,
            }
        })
        .collect();
    let max_abs_sum = entries.iter().fold(0.0f64, |m, e| m.max(e.sum.abs()));
    Ok(OrbitSumReport {
        entries,
        max_abs_sum,
        p_max,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    NowhereDifferentiable,
    C1plusEpsilon,
}

/// Decision record of the dichotomy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub verdict: Regularity,
    /// Earliest orbit (canonical order) whose sum exceeds `orbit_tol`;
    /// present exactly in the nowhere-differentiable case.
    pub witness: Option<OrbitSum>,
    pub max_abs_sum: f64,
    pub sigma2: f64,
    pub orbit_tol: f64,
    pub sigma_tol: f64,
}

/// Decide the dichotomy from orbit sums up to `p_max`, cross-checked
/// against `sigma^2(phi)` from the autocorrelation estimator.
///
/// Errors with [`Error::CriteriaDisagree`] when the two equivalent
/// criteria land on different sides of their thresholds.
pub fn classify(
    sys: &SystemHandle,
    rho: &UlamDensity,
    p_max: u32,
    orbit_tol: f64,
    sigma_tol: f64,
) -> Result<RegularityVerdict> {
    if !(orbit_tol > 0.0 && sigma_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "classification tolerances must be positive".into(),
        ));
    }
    let report = orbit_sums(sys, p_max)?;
    let sigma2 = variance_green_kubo(sys, rho, 64, 1e-10).sigma2;
    let nd_orbit = report.max_abs_sum > orbit_tol;
    let nd_sigma = sigma2 > sigma_tol;
    if nd_orbit != nd_sigma {
        return Err(Error::CriteriaDisagree {
            max_abs_sum: report.max_abs_sum,
            sigma2,
            orbit_tol,
            sigma_tol,
        });
    }
    let witness = if nd_orbit {
        report
            .entries
            .iter()
            .find(|e| e.sum.abs() > orbit_tol)
            .cloned()
    } else {
        None
    };
    Ok(RegularityVerdict {
        verdict: if nd_orbit {
            Regularity::NowhereDifferentiable
        } else {
            Regularity::C1plusEpsilon
        },
        witness,
        max_abs_sum: report.max_abs_sum,
        sigma2,
        orbit_tol,
        sigma_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::invariant_density;
    use crate::presets;
    use std::f64::consts::{PI, TAU};

    fn period3_sum() -> f64 {
        PI * ((TAU / 7.0).sin() + (2.0 * TAU / 7.0).sin() + (4.0 * TAU / 7.0).sin())
    }

    #[test]
    fn orbit_sums_classic_p3() {
        let sys = presets::classic_system();
        let report = orbit_sums(&sys, 3).unwrap();
        assert_eq!(report.entries.len(), 4);
        // fixed point and period-2 orbit vanish by sine symmetry
        assert!(report.entries[0].sum.abs() <= 1e-10);
        assert!(report.entries[1].sum.abs() <= 1e-10);
        let sums: Vec<f64> = report.entries[2..].iter().map(|e| e.sum).collect();
        assert!((sums[0] - period3_sum()).abs() <= 1e-10, "{sums:?}");
        assert!((sums[1] + period3_sum()).abs() <= 1e-10, "{sums:?}");
        assert!((report.max_abs_sum - period3_sum()).abs() <= 1e-10);
    }

    #[test]
    fn orbit_sums_smooth_all_vanish() {
        let sys = presets::smooth_system();
        let report = orbit_sums(&sys, 8).unwrap();
        for e in &report.entries {
            assert!(
                e.sum.abs() <= 1e-10,
                "period {} orbit has sum {:e}",
                e.orbit.period,
                e.sum
            );
        }
    }

    #[test]
    fn orbit_sums_cubic_nonzero_by_period_4() {
        let sys = presets::cubic_system();
        let report = orbit_sums(&sys, 4).unwrap();
        assert!(report.max_abs_sum > 0.1, "max = {}", report.max_abs_sum);
    }

    #[test]
    fn classify_classic_nowhere_differentiable() {
        let sys = presets::classic_system();
        let rho = invariant_density(sys.map(), 4096, 1e-12).unwrap();
        let v = classify(&sys, &rho, 8, DEFAULT_ORBIT_TOL, DEFAULT_SIGMA_TOL).unwrap();
        assert_eq!(v.verdict, Regularity::NowhereDifferentiable);
        let w = v.witness.expect("witness present");
        assert_eq!(w.orbit.period, 3);
        assert!((w.sum - period3_sum()).abs() <= 1e-10);
        assert!((v.sigma2 - PI * PI / 2.0).abs() <= 1e-3);
    }

    #[test]
    fn classify_smooth_c1() {
        let sys = presets::smooth_system();
        let rho = invariant_density(sys.map(), 4096, 1e-12).unwrap();
        let v = classify(&sys, &rho, 8, DEFAULT_ORBIT_TOL, DEFAULT_SIGMA_TOL).unwrap();
        assert_eq!(v.verdict, Regularity::C1plusEpsilon);
        assert!(v.witness.is_none());
        assert!(v.sigma2 <= 1e-8);
    }

    #[test]
    fn classify_with_starved_p_max_disagrees() {
        // orbit sums vanish through period 2 while sigma^2 ~ pi^2/2: the
        // cross-check must withhold the verdict
        let sys = presets::classic_system();
        let rho = invariant_density(sys.map(), 4096, 1e-12).unwrap();
        match classify(&sys, &rho, 2, DEFAULT_ORBIT_TOL, DEFAULT_SIGMA_TOL) {
            Err(Error::CriteriaDisagree {
                max_abs_sum,
                sigma2,
                ..
            }) => {
                assert!(max_abs_sum <= DEFAULT_ORBIT_TOL);
                assert!((sigma2 - PI * PI / 2.0).abs() <= 1e-3);
            }
            other => panic!("expected CriteriaDisagree, got {other:?}"),
        }
    }

    #[test]
    fn default_p_max_by_degree() {
        assert_eq!(default_p_max(2), 8);
        assert_eq!(default_p_max(3), 6);
    }
}
