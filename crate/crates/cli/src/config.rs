//! Flat `key = value` configuration with `[section]` headers.
//!
//! Keys outside any section live in the root section `""`. Values are kept
//! as strings and parsed on access so that error messages can name the key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use crate::CliError;

/// Known keys per section; anything else is a configuration error.
const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["experiment", "experiments", "seed", "method", "mode"]),
    (
        "problem",
        &[
            "problem", "elements", "degree", "alpha", "velocity", "gamma", "domain", "t_end", "initial",
            "amplitude", "width", "jump", "warp", "boundary",
        ],
    ),
    (
        "controller",
        &["tol", "beta1", "beta2", "beta3", "accept_safety", "w_min", "ref_choice", "dt_init"],
    ),
    ("cfl", &["nu", "lo", "hi", "max_abs"]),
    ("plateau", &["meshes"]),
    ("spectra", &["spot_checks"]),
    ("coldstart", &["nu_reduction"]),
    (
        "exner",
        &["h", "hv1", "hv2", "b", "g", "sigma", "ag", "jacobian_42", "sweep", "sweep_h", "sweep_v", "sweep_ag"],
    ),
    ("convergence", &["levels", "base_steps", "t_end"]),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn known(section: &str, key: &str) -> bool {
    SCHEMA
        .iter()
        .any(|(s, keys)| *s == section && keys.contains(&key))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
        let mut cfg = Config::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("").trim().to_string();
            for (key, value) in props.iter() {
                cfg.set(&section, key.trim(), value.trim())?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), CliError> {
        if !known(section, key) {
            let name = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            return Err(CliError::Config(format!("unknown key `{name}`")));
        }
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` or `section.key=value` override. A bare key is
    /// looked up in the schema and must name exactly one section.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (lhs, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
        let lhs = lhs.trim();
        let (section, key) = match lhs.split_once('.') {
            Some((s, k)) => (s.to_string(), k.to_string()),
            None => {
                let hits: Vec<&str> = SCHEMA
                    .iter()
                    .filter(|(_, keys)| keys.contains(&lhs))
                    .map(|(s, _)| *s)
                    .collect();
                match hits.as_slice() {
                    [one] => (one.to_string(), lhs.to_string()),
                    [] => return Err(CliError::Config(format!("unknown key `{lhs}`"))),
                    _ => {
                        return Err(CliError::Config(format!(
                            "ambiguous key `{lhs}`, qualify it as section.{lhs}"
                        )))
                    }
                }
            }
        };
        self.set(&section, &key, value.trim())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn contains(&self, section: &str, key: &str) -> bool {
        self.get(section, key).is_some()
    }

    fn name(section: &str, key: &str) -> String {
        if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        }
    }

    pub fn parse_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                CliError::Config(format!("{} = {v:?}: {e}", Self::name(section, key)))
            }),
        }
    }

    pub fn parse_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse_opt(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse_opt(section, key)?
            .ok_or_else(|| CliError::Config(format!("missing key `{}`", Self::name(section, key))))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(section, key) else { return Ok(None) };
        v.split(',')
            .map(|item| {
                item.trim().parse().map_err(|e| {
                    CliError::Config(format!("{} item {item:?}: {e}", Self::name(section, key)))
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Canonical text (sorted sections and keys); hashed into the manifest.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (section, props) in &self.sections {
            if !section.is_empty() {
                let _ = writeln!(out, "[{section}]");
            }
            for (k, v) in props {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

/// Bundled default configuration for an experiment.
pub fn default_config(experiment: &str) -> Option<&'static str> {
    Some(match experiment {
        "run" => include_str!("../configs/run.cfg"),
        "plateau" => include_str!("../configs/plateau.cfg"),
        "spectra" => include_str!("../configs/spectra.cfg"),
        "coldstart" => include_str!("../configs/coldstart.cfg"),
        "exner-eigen" => include_str!("../configs/exner.cfg"),
        "cfl-bisect" => include_str!("../configs/run.cfg"),
        "convergence" => include_str!("../configs/convergence.cfg"),
        "all" => include_str!("../configs/all.cfg"),
        _ => return None,
    })
}
