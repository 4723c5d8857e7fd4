//! Built-in run configurations, one per library preset, with the default
//! experiment settings and seed 1.

use crate::config::{
    default_residual_scan, default_zygmund_scan, EvalSettings, RunConfig,
};

pub fn preset_config(name: &str) -> Option<RunConfig> {
    let (map, observable) = weierlab::presets::by_name(name)?;
    Some(RunConfig {
        map,
        observable,
        truncation: Default::default(),
        hoelder_eps: weierlab::presets::DEFAULT_HOELDER_EPS,
        ulam: Default::default(),
        variance: Default::default(),
        classify: Default::default(),
        clt: Default::default(),
        lil: Default::default(),
        zygmund: default_zygmund_scan(),
        residual: default_residual_scan(),
        eval: EvalSettings::default(),
        seed: Some(1),
        out_dir: None,
        workers: None,
    })
}
