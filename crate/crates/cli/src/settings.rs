use std::path::Path;

use netshock::config::{ConfigError, KeyValues};
use netshock::synth::SYNTH_KEYS;

/// Built-in defaults, shipped as `config/defaults.conf`.
pub const DEFAULTS: &str = include_str!("../../../config/defaults.conf");

pub const CLI_KEYS: &[&str] = &[
    "alpha",
    "tol",
    "max_iter",
    "window_start",
    "window_end",
    "post_start",
    "preconflict_end",
    "strict",
    "exclude_international",
    "pre_year",
    "post_year",
    "years",
    "sample_rule",
    "renormalize",
    "region_level",
    "centrality",
    "eigen_tol",
    "eigen_max_iter",
];

/// Defaults, then the config file, then flag overrides.
pub fn resolve(config_file: Option<&Path>, overrides: &[(&str, String)]) -> Result<KeyValues, ConfigError> {
    let mut kv = KeyValues::parse(DEFAULTS)?;
    if let Some(path) = config_file {
        let file = KeyValues::load(path)?;
        let allowed: Vec<&str> = CLI_KEYS.iter().chain(SYNTH_KEYS).copied().collect();
        file.check_known(&allowed)?;
        kv.merge(&file);
    }
    for (k, v) in overrides {
        kv.set(*k, v);
    }
    Ok(kv)
}

/// The synthetic-economy keys present in `kv`.
pub fn synth_subset(kv: &KeyValues) -> KeyValues {
    let mut out = KeyValues::new();
    for (k, v) in kv.iter() {
        if SYNTH_KEYS.contains(&k) {
            out.set(k, v);
        }
    }
    out
}

pub fn parse_years(kv: &KeyValues, key: &str) -> Result<Vec<i32>, ConfigError> {
    let raw = kv.get_str(key).unwrap_or("");
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<i32>().map_err(|_| ConfigError::Invalid {
                key: key.into(),
                value: raw.into(),
                reason: "expected comma-separated years".into(),
            })
        })
        .collect()
}

pub fn required<T>(kv: &KeyValues, key: &str) -> Result<T, ConfigError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    kv.get(key)?.ok_or_else(|| ConfigError::Invalid { key: key.into(), value: String::new(), reason: "missing".into() })
}
