//! Built-in (map, observable) pairs used throughout the tests and the CLI.
//!
//! * `classic`   — doubling map with `v = cos(2 pi x)`: alpha is the dyadic
//!   Weierstrass cosine series, nowhere differentiable.
//! * `smooth`    — doubling map with `v` constructed so that
//!   `alpha(x) = sin(2 pi x) / (2 pi)` exactly (a smooth coboundary case).
//! * `nonlinear` — degree-2 map with `g = 0.1 sin(2 pi x)`, `v = cos(2 pi x)`.
//! * `cubic`     — linear degree-3 map with `v = cos(2 pi x)`.

use std::f64::consts::{PI, TAU};

use crate::dynamics::{CircleMapSpec, Harmonic};
use crate::weierstrass::{ObservableSpec, SystemHandle, TruncationPolicy};

/// Default Hoelder exponent used by the omega ratio.
pub const DEFAULT_HOELDER_EPS: f64 = 0.5;

fn cos_observable(name: &str) -> ObservableSpec {
    ObservableSpec {
        mean_coeff: 0.0,
        harmonics: vec![Harmonic {
            k: 1,
            cos_coeff: 1.0,
            sin_coeff: 0.0,
        }],
        name: name.to_owned(),
    }
}

pub fn classic() -> (CircleMapSpec, ObservableSpec) {
    (CircleMapSpec::linear(2, "doubling"), cos_observable("cos"))
}

/// `v(x) = sin(4 pi x)/(2 pi) - sin(2 pi x)/pi`, built so that
/// `alpha(x) = sin(2 pi x)/(2 pi)` solves `v = alpha o f - Df alpha`.
pub fn smooth() -> (CircleMapSpec, ObservableSpec) {
    let map = CircleMapSpec::linear(2, "doubling");
    let obs = ObservableSpec {
        mean_coeff: 0.0,
        harmonics: vec![
            Harmonic {
                k: 2,
                cos_coeff: 0.0,
                sin_coeff: 1.0 / TAU,
            },
            Harmonic {
                k: 1,
                cos_coeff: 0.0,
                sin_coeff: -1.0 / PI,
            },
        ],
        name: "coboundary of sin(2 pi x)/(2 pi)".to_owned(),
    };
    (map, obs)
}

pub fn nonlinear() -> (CircleMapSpec, ObservableSpec) {
    let map = CircleMapSpec {
        degree: 2,
        perturbation: vec![Harmonic {
            k: 1,
            cos_coeff: 0.0,
            sin_coeff: 0.1,
        }],
        name: "perturbed doubling".to_owned(),
    };
    (map, cos_observable("cos"))
}

pub fn cubic() -> (CircleMapSpec, ObservableSpec) {
    (CircleMapSpec::linear(3, "tripling"), cos_observable("cos"))
}

pub fn by_name(name: &str) -> Option<(CircleMapSpec, ObservableSpec)> {
    match name {
        "classic" => Some(classic()),
        "smooth" => Some(smooth()),
        "nonlinear" => Some(nonlinear()),
        "cubic" => Some(cubic()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 4] = ["classic", "smooth", "nonlinear", "cubic"];

fn system_of(pair: (CircleMapSpec, ObservableSpec)) -> SystemHandle {
    SystemHandle::new(pair.0, pair.1, TruncationPolicy::default(), DEFAULT_HOELDER_EPS)
        .expect("preset systems are admissible")
}

pub fn classic_system() -> SystemHandle {
    system_of(classic())
}

pub fn smooth_system() -> SystemHandle {
    system_of(smooth())
}

pub fn nonlinear_system() -> SystemHandle {
    system_of(nonlinear())
}

pub fn cubic_system() -> SystemHandle {
    system_of(cubic())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in PRESET_NAMES {
            let (map, obs) = by_name(name).unwrap();
            let sys = SystemHandle::new(map, obs, TruncationPolicy::default(), 0.5).unwrap();
            assert!(sys.bounds().lower > 1.0, "{name}");
        }
    }

    #[test]
    fn unknown_name_is_none() {
        assert!(by_name("takagi").is_none());
    }
}
