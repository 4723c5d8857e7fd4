//! Run configuration: one JSON document describing the system and every
//! per-command setting, with presets referenceable by name and overridable
//! field by field.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use weierlab::dynamics::CircleMapSpec;
use weierlab::weierstrass::{ObservableSpec, SystemHandle, TruncationPolicy};

use crate::error::CliError;
use crate::presets;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlamSettings {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_ulam_tol")]
    pub tol: f64,
}

fn default_m() -> usize {
    1 << 14
}
fn default_ulam_tol() -> f64 {
    1e-12
}

impl Default for UlamSettings {
    fn default() -> Self {
        UlamSettings {
            m: default_m(),
            tol: default_ulam_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSettings {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_term_tol")]
    pub term_tol: f64,
    #[serde(default = "default_mc_n")]
    pub mc_n: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

fn default_n_max() -> usize {
    64
}
fn default_term_tol() -> f64 {
    1e-10
}
fn default_mc_n() -> usize {
    1000
}
fn default_mc_samples() -> usize {
    100_000
}

impl Default for VarianceSettings {
    fn default() -> Self {
        VarianceSettings {
            n_max: default_n_max(),
            term_tol: default_term_tol(),
            mc_n: default_mc_n(),
            mc_samples: default_mc_samples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySettings {
    /// Defaults by degree when absent (8 for degree 2, else 6).
    #[serde(default)]
    pub p_max: Option<u32>,
    #[serde(default = "default_orbit_tol")]
    pub orbit_tol: f64,
    #[serde(default = "default_sigma_tol")]
    pub sigma_tol: f64,
}

fn default_orbit_tol() -> f64 {
    weierlab::regularity::DEFAULT_ORBIT_TOL
}
fn default_sigma_tol() -> f64 {
    weierlab::regularity::DEFAULT_SIGMA_TOL
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings {
            p_max: None,
            orbit_tol: default_orbit_tol(),
            sigma_tol: default_sigma_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSettings {
    /// Dyadic scales `h = 2^-k`.
    #[serde(default = "default_h_exponents")]
    pub h_exponents: Vec<u32>,
    #[serde(default = "default_clt_samples")]
    pub n_samples: usize,
}

fn default_h_exponents() -> Vec<u32> {
    vec![8, 14, 20]
}
fn default_clt_samples() -> usize {
    100_000
}

impl Default for CltSettings {
    fn default() -> Self {
        CltSettings {
            h_exponents: default_h_exponents(),
            n_samples: default_clt_samples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilSettings {
    #[serde(default = "default_lil_k_min")]
    pub k_min: u32,
    #[serde(default = "default_lil_k_max")]
    pub k_max: u32,
    /// Number of mu-random trace points.
    #[serde(default = "default_lil_points")]
    pub points: usize,
}

fn default_lil_k_min() -> u32 {
    4
}
fn default_lil_k_max() -> u32 {
    30
}
fn default_lil_points() -> usize {
    10
}

impl Default for LilSettings {
    fn default() -> Self {
        LilSettings {
            k_min: default_lil_k_min(),
            k_max: default_lil_k_max(),
            points: default_lil_points(),
        }
    }
}

/// Per-dyadic-scale scan settings (zygmund / residual commands).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    pub k_min: u32,
    pub k_max: u32,
    pub samples_per_scale: usize,
}

pub fn default_zygmund_scan() -> ScanSettings {
    ScanSettings {
        k_min: 4,
        k_max: 20,
        samples_per_scale: 1000,
    }
}

pub fn default_residual_scan() -> ScanSettings {
    ScanSettings {
        k_min: 6,
        k_max: 24,
        samples_per_scale: 1000,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    /// Grid mode emits `2^grid_log2` uniformly spaced points.
    #[serde(default = "default_grid_log2")]
    pub grid_log2: u32,
    /// Explicit points override the grid when non-empty.
    #[serde(default)]
    pub points: Vec<f64>,
}

fn default_grid_log2() -> u32 {
    10
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            grid_log2: default_grid_log2(),
            points: Vec::new(),
        }
    }
}

/// The whole run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: CircleMapSpec,
    pub observable: ObservableSpec,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default = "default_hoelder_eps")]
    pub hoelder_eps: f64,
    #[serde(default)]
    pub ulam: UlamSettings,
    #[serde(default)]
    pub variance: VarianceSettings,
    #[serde(default)]
    pub classify: ClassifySettings,
    #[serde(default)]
    pub clt: CltSettings,
    #[serde(default)]
    pub lil: LilSettings,
    #[serde(default = "default_zygmund_scan")]
    pub zygmund: ScanSettings,
    #[serde(default = "default_residual_scan")]
    pub residual: ScanSettings,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_hoelder_eps() -> f64 {
    weierlab::presets::DEFAULT_HOELDER_EPS
}

impl RunConfig {
    /// Structural validation (cheap; no expansion certificate).
    pub fn validate(&self) -> Result<(), CliError> {
        self.map
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.observable
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.truncation.tol > 0.0 && self.truncation.tol.is_finite()) {
            return Err(CliError::Config("truncation.tol must be positive".into()));
        }
        if self.truncation.max_terms == 0 {
            return Err(CliError::Config("truncation.max_terms must be >= 1".into()));
        }
        if !(self.hoelder_eps > 0.0 && self.hoelder_eps < 1.0) {
            return Err(CliError::Config("hoelder_eps must lie in (0,1)".into()));
        }
        if !self.ulam.m.is_power_of_two() || self.ulam.m < 1 << 10 {
            return Err(CliError::Config(
                "ulam.m must be a power of two >= 1024".into(),
            ));
        }
        if !(self.ulam.tol > 0.0 && self.ulam.tol.is_finite()) {
            return Err(CliError::Config("ulam.tol must be positive".into()));
        }
        if self.variance.n_max == 0 || self.variance.n_max > 100 {
            return Err(CliError::Config("variance.n_max must lie in 1..=100".into()));
        }
        if !(self.variance.term_tol > 0.0) {
            return Err(CliError::Config("variance.term_tol must be positive".into()));
        }
        if self.variance.mc_n < 100 {
            return Err(CliError::Config("variance.mc_n must be >= 100".into()));
        }
        if self.variance.mc_samples < 10_000 {
            return Err(CliError::Config(
                "variance.mc_samples must be >= 10^4".into(),
            ));
        }
        if let Some(p) = self.classify.p_max {
            if !(1..=16).contains(&p) {
                return Err(CliError::Config("classify.p_max must lie in 1..=16".into()));
            }
        }
        if !(self.classify.orbit_tol > 0.0 && self.classify.sigma_tol > 0.0) {
            return Err(CliError::Config(
                "classification tolerances must be positive".into(),
            ));
        }
        if self.clt.h_exponents.is_empty() {
            return Err(CliError::Config("clt.h_exponents must be non-empty".into()));
        }
        for &k in &self.clt.h_exponents {
            if !(2..=52).contains(&k) {
                return Err(CliError::Config(
                    "clt.h_exponents entries must lie in 2..=52 (h in (0, e^-1))".into(),
                ));
            }
        }
        if self.clt.n_samples == 0 {
            return Err(CliError::Config("clt.n_samples must be >= 1".into()));
        }
        if !(4..40).contains(&self.lil.k_min)
            || self.lil.k_max <= self.lil.k_min
            || self.lil.k_max > 40
        {
            return Err(CliError::Config(
                "lil scales need 4 <= k_min < k_max <= 40".into(),
            ));
        }
        if self.lil.points == 0 {
            return Err(CliError::Config("lil.points must be >= 1".into()));
        }
        for (name, scan) in [("zygmund", &self.zygmund), ("residual", &self.residual)] {
            if scan.k_min == 0 || scan.k_max < scan.k_min || scan.k_max > 52 {
                return Err(CliError::Config(format!(
                    "{name} scan needs 1 <= k_min <= k_max <= 52"
                )));
            }
            if scan.samples_per_scale == 0 {
                return Err(CliError::Config(format!(
                    "{name} scan needs samples_per_scale >= 1"
                )));
            }
        }
        if self.eval.grid_log2 > 24 {
            return Err(CliError::Config("eval.grid_log2 must be <= 24".into()));
        }
        for &x in &self.eval.points {
            if !x.is_finite() {
                return Err(CliError::Config("eval.points must be finite".into()));
            }
        }
        Ok(())
    }

    /// Build the certified system handle (runs the expansion certificate).
    pub fn system(&self) -> Result<SystemHandle, CliError> {
        Ok(SystemHandle::new(
            self.map.clone(),
            self.observable.clone(),
            self.truncation,
            self.hoelder_eps,
        )?)
    }

    pub fn p_max(&self) -> u32 {
        self.classify
            .p_max
            .unwrap_or_else(|| weierlab::regularity::default_p_max(self.map.degree))
    }

    /// Seed, required by every Monte Carlo command.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(
                "a seed is required for Monte Carlo commands (set \"seed\" or pass --seed)".into(),
            )
        })
    }

    /// Content digest of the canonicalized config (sorted JSON keys).
    pub fn content_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse a config document. The document may reference a preset:
/// `{"preset": "classic", ...overrides}` deep-merges the overrides onto the
/// named preset (objects merge recursively, everything else replaces).
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    let merged = if let Some(name_value) = obj.remove("preset") {
        let name = name_value
            .as_str()
            .ok_or_else(|| CliError::Config("\"preset\" must be a string".into()))?;
        let base = presets::preset_config(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset {name:?}; available: {}",
                weierlab::presets::PRESET_NAMES.join(", ")
            ))
        })?;
        let mut base_value = serde_json::to_value(&base).expect("preset serializes");
        deep_merge(&mut base_value, value);
        base_value
    } else {
        value
    };
    let config: RunConfig =
        serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Recursively merge `patch` into `base`: objects merge key-wise, any other
/// value replaces.
pub fn deep_merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(base_map), serde_json::Value::Object(patch_map)) => {
            for (key, patch_value) in patch_map {
                match base_map.get_mut(&key) {
                    Some(base_value) => deep_merge(base_value, patch_value),
                    None => {
                        base_map.insert(key, patch_value);
                    }
                }
            }
        }
        (base_slot, patch_value) => *base_slot = patch_value,
    }
}

/// Parse a comma-separated point list; empty input is an empty list.
pub fn parse_points(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad point {s:?}: {e}")))
                .and_then(|x| {
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(CliError::Config(format!("point {s:?} is not finite")))
                    }
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_reference_with_overrides() {
        let cfg = parse_config(r#"{"preset": "classic", "seed": 99, "ulam": {"m": 2048}}"#)
            .unwrap();
        assert_eq!(cfg.seed, Some(99));
        assert_eq!(cfg.ulam.m, 2048);
        assert_eq!(cfg.ulam.tol, 1e-12); // untouched sibling field survives
        assert_eq!(cfg.map.degree, 2);
    }

    #[test]
    fn unknown_preset_and_bad_types_are_config_errors() {
        assert!(parse_config(r#"{"preset": "takagi"}"#).is_err());
        assert!(parse_config(r#"{"preset": 7}"#).is_err());
        assert!(parse_config("[1,2]").is_err());
        assert!(parse_config("{").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse_config(r#"{"preset": "classic", "sedd": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn config_round_trips_unchanged() {
        let cfg = presets::preset_config("nonlinear").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.content_hash(), back.content_hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = presets::preset_config("classic").unwrap();
        let mut b = a.clone();
        b.seed = Some(12345);
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn validation_catches_domain_errors() {
        let mut cfg = presets::preset_config("classic").unwrap();
        cfg.ulam.m = 3000;
        assert!(cfg.validate().is_err());
        let mut cfg = presets::preset_config("classic").unwrap();
        cfg.clt.h_exponents = vec![1];
        assert!(cfg.validate().is_err());
        let mut cfg = presets::preset_config("classic").unwrap();
        cfg.map.degree = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parse_points_handles_empty_and_junk() {
        assert_eq!(parse_points("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_points("0.1, 0.2,0.9").unwrap(), vec![0.1, 0.2, 0.9]);
        assert!(parse_points("0.1,abc").is_err());
        assert!(parse_points("nan").is_err());
    }
}
