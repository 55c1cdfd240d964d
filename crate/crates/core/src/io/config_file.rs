//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # bench defaults
//! r_in        = 1000
//! v_th0       = 0.090
//! noise_sigma = 5e-3
//! modulation  = triangular
//! ```
//!
//! SI units throughout, `#` starts a comment, unknown or repeated keys are
//! errors. Every value is checked against the emulator invariants after the
//! whole file has been read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::device::{EmulatorConfig, Modulation};
use crate::error::{Error, Result};
use crate::noise::Sampling;
use crate::protocols::DEFAULT_PULSES;

pub const DEFAULT_TAYLOR_TERMS: usize = 9;

/// Grid, trial-count and seed defaults for the protocol runners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolDefaults {
    pub seed: u64,
    pub pulses: usize,
    pub reps: usize,
    pub imin: f64,
    pub imax: f64,
    pub points: usize,
    pub i_dc: f64,
    pub sampling: Sampling,
}

impl Default for ProtocolDefaults {
    fn default() -> Self {
        ProtocolDefaults {
            seed: 0,
            pulses: DEFAULT_PULSES,
            reps: 1000,
            imin: 0.0,
            imax: 120e-6,
            points: 121,
            i_dc: 0.0,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExperimentConfig {
    pub emulator: EmulatorConfig,
    pub protocol: ProtocolDefaults,
}

const KEYS: &[&str] = &[
    "r_in",
    "r_normal",
    "v_th0",
    "v_offset",
    "noise_sigma",
    "mod_depth",
    "v_fullscale",
    "g_dc",
    "modulation",
    "taylor_terms",
    "seed",
    "pulses",
    "reps",
    "imin",
    "imax",
    "points",
    "idc",
    "sampling",
];

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::ConfigFile {
            line,
            message: format!("{key}: '{v}' is not a finite number"),
        })
}

fn parse_count(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse::<u64>().map_err(|_| Error::ConfigFile {
        line,
        message: format!("{key}: '{v}' is not a non-negative integer"),
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut cfg = ExperimentConfig::default();
        let mut shape: Option<String> = None;
        let mut terms = DEFAULT_TAYLOR_TERMS;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::ConfigFile {
                line,
                message: format!("expected 'key = value', got '{body}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let key = *KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::ConfigFile {
                line,
                message: format!("unknown key '{key}'"),
            })?;
            if let Some(first) = seen.insert(key, line) {
                return Err(Error::ConfigFile {
                    line,
                    message: format!("'{key}' already set on line {first}"),
                });
            }
            let e = &mut cfg.emulator;
            let p = &mut cfg.protocol;
            match key {
                "r_in" => e.r_in = parse_f64(line, key, value)?,
                "r_normal" => e.r_normal = parse_f64(line, key, value)?,
                "v_th0" => e.v_th0 = parse_f64(line, key, value)?,
                "v_offset" => e.v_offset = parse_f64(line, key, value)?,
                "noise_sigma" => e.noise_sigma = parse_f64(line, key, value)?,
                "mod_depth" => e.tri.mod_depth = parse_f64(line, key, value)?,
                "v_fullscale" => e.tri.v_fullscale = parse_f64(line, key, value)?,
                "g_dc" => e.tri.g_dc = parse_f64(line, key, value)?,
                "modulation" => shape = Some(value.to_ascii_lowercase()),
                "taylor_terms" => terms = parse_count(line, key, value)? as usize,
                "seed" => p.seed = parse_count(line, key, value)?,
                "pulses" => p.pulses = parse_count(line, key, value)? as usize,
                "reps" => p.reps = parse_count(line, key, value)? as usize,
                "imin" => p.imin = parse_f64(line, key, value)?,
                "imax" => p.imax = parse_f64(line, key, value)?,
                "points" => p.points = parse_count(line, key, value)? as usize,
                "idc" => p.i_dc = parse_f64(line, key, value)?,
                "sampling" => {
                    p.sampling = value.parse().map_err(|_| Error::ConfigFile {
                        line,
                        message: format!("sampling: '{value}' is not 'iid' or 'stratified'"),
                    })?
                }
                _ => unreachable!("key table and match arms out of sync"),
            }
        }

        cfg.emulator.modulation = match shape.as_deref() {
            None | Some("triangular") => Modulation::Triangular,
            Some("sinusoidal") => Modulation::Sinusoidal { n_terms: terms },
            Some(other) => {
                return Err(Error::ConfigFile {
                    line: seen["modulation"],
                    message: format!("modulation: '{other}' is not 'triangular' or 'sinusoidal'"),
                })
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.emulator.validate()?;
        let p = &self.protocol;
        if p.pulses == 0 {
            return Err(Error::range("pulses", "must be >= 1"));
        }
        if p.reps == 0 {
            return Err(Error::range("reps", "must be >= 1"));
        }
        if p.points == 0 {
            return Err(Error::range("points", "must be >= 1"));
        }
        if p.imax < p.imin {
            return Err(Error::range("imax", "must be >= imin"));
        }
        Ok(())
    }

    /// Render in the file format; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let e = &self.emulator;
        let p = &self.protocol;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("r_in", e.r_in.to_string());
        put("r_normal", e.r_normal.to_string());
        put("v_th0", e.v_th0.to_string());
        put("v_offset", e.v_offset.to_string());
        put("noise_sigma", e.noise_sigma.to_string());
        put("mod_depth", e.tri.mod_depth.to_string());
        put("v_fullscale", e.tri.v_fullscale.to_string());
        put("g_dc", e.tri.g_dc.to_string());
        match e.modulation {
            Modulation::Triangular => put("modulation", "triangular".into()),
            Modulation::Sinusoidal { n_terms } => {
                put("modulation", "sinusoidal".into());
                put("taylor_terms", n_terms.to_string());
            }
        }
        put("seed", p.seed.to_string());
        put("pulses", p.pulses.to_string());
        put("reps", p.reps.to_string());
        put("imin", p.imin.to_string());
        put("imax", p.imax.to_string());
        put("points", p.points.to_string());
        put("idc", p.i_dc.to_string());
        put("sampling", p.sampling.to_string());
        out
    }
}
