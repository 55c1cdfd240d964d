//! Line-oriented instrument command set.
//!
//! | command                               | reply                      |
//! |---------------------------------------|----------------------------|
//! | `SET <KEY> <value>`                   | `OK`                       |
//! | `GET <KEY>`                           | the value                  |
//! | `IDC <amps>`                          | `OK` (flux bias, clamped)  |
//! | `PULSE <amps>`                        | `1` switched, `0` not      |
//! | `RESET`                               | `OK`                       |
//! | `SCURVE <imin> <imax> <points> <n>`   | comma-separated `p_sw`     |
//! | `*IDN?`                               | identification string      |
//! | `QUIT`                                | `OK`, then the link closes |
//!
//! Keys: `RIN RNORM VTH0 VOFF SIGMA MODDEPTH GDC SEED`, plus `IDC` as an
//! alias of the `IDC` command. Commands and keys are case-insensitive.
//! Errors: `ERR 1 unknown` (command or key), `ERR 2 parse` (arity, number
//! syntax, non-UTF-8), `ERR 3 range` (value violates an invariant).

use crate::device::{DeviceState, EmulatorConfig};
use crate::io::csv::fmt_float;
use crate::noise::{substream_key, NoiseSource, OpId, Sampling};
use crate::protocols::{linspace, pulse_trial, s_curve, TrialPlan};

/// Upper bound on `points * pulses` for one `SCURVE` command.
pub const SCURVE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Unknown = 1,
    Parse = 2,
    Range = 3,
}

impl ErrorCode {
    pub fn reply(self) -> &'static str {
        match self {
            ErrorCode::Unknown => "ERR 1 unknown",
            ErrorCode::Parse => "ERR 2 parse",
            ErrorCode::Range => "ERR 3 range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub text: String,
    /// Close the connection after sending `text`.
    pub close: bool,
}

impl Reply {
    fn line(text: impl Into<String>) -> Self {
        Reply {
            text: text.into(),
            close: false,
        }
    }

    fn err(code: ErrorCode) -> Self {
        Reply::line(code.reply())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Key {
    Rin,
    Rnorm,
    Vth0,
    Voff,
    Sigma,
    ModDepth,
    Gdc,
    Seed,
    Idc,
}

impl Key {
    pub const ALL: [Key; 9] = [
        Key::Rin,
        Key::Rnorm,
        Key::Vth0,
        Key::Voff,
        Key::Sigma,
        Key::ModDepth,
        Key::Gdc,
        Key::Seed,
        Key::Idc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Key::Rin => "RIN",
            Key::Rnorm => "RNORM",
            Key::Vth0 => "VTH0",
            Key::Voff => "VOFF",
            Key::Sigma => "SIGMA",
            Key::ModDepth => "MODDEPTH",
            Key::Gdc => "GDC",
            Key::Seed => "SEED",
            Key::Idc => "IDC",
        }
    }

    pub fn parse(s: &str) -> Option<Key> {
        Key::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

/// State of one instrument connection.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSession {
    pub cfg: EmulatorConfig,
    pub i_dc: f64,
    pub device: DeviceState,
    pub seed: u64,
    pulses: u64,
    scurves: u64,
}

impl Default for InstrumentSession {
    fn default() -> Self {
        Self::new(EmulatorConfig::default(), 0)
    }
}

fn parse_float(s: &str) -> Result<f64, ErrorCode> {
    s.parse::<f64>().map_err(|_| ErrorCode::Parse)
}

fn parse_count(s: &str) -> Result<u64, ErrorCode> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    // integral floats such as 1e3 are accepted
    let x = parse_float(s)?;
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(ErrorCode::Range)
    }
}

fn finite(x: f64) -> Result<f64, ErrorCode> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ErrorCode::Range)
    }
}

impl InstrumentSession {
    pub fn new(cfg: EmulatorConfig, seed: u64) -> Self {
        InstrumentSession {
            cfg,
            i_dc: 0.0,
            device: DeviceState::new(),
            seed,
            pulses: 0,
            scurves: 0,
        }
    }

    fn clamp_idc(&self, i: f64) -> f64 {
        let lim = self.cfg.tri.i_dc_limit();
        i.clamp(-lim, lim)
    }

    pub fn get(&self, key: Key) -> String {
        let c = &self.cfg;
        match key {
            Key::Rin => c.r_in.to_string(),
            Key::Rnorm => c.r_normal.to_string(),
            Key::Vth0 => c.v_th0.to_string(),
            Key::Voff => c.v_offset.to_string(),
            Key::Sigma => c.noise_sigma.to_string(),
            Key::ModDepth => c.tri.mod_depth.to_string(),
            Key::Gdc => c.tri.g_dc.to_string(),
            Key::Seed => self.seed.to_string(),
            Key::Idc => self.i_dc.to_string(),
        }
    }

    /// Apply a setting; the session is unchanged on error.
    pub fn set(&mut self, key: Key, raw: &str) -> Result<(), ErrorCode> {
        if key == Key::Seed {
            self.seed = parse_count(raw)?;
            return Ok(());
        }
        let value = finite(parse_float(raw)?)?;
        if key == Key::Idc {
            self.i_dc = self.clamp_idc(value);
            return Ok(());
        }
        let mut next = self.cfg;
        match key {
            Key::Rin => next.r_in = value,
            Key::Rnorm => next.r_normal = value,
            Key::Vth0 => next.v_th0 = value,
            Key::Voff => next.v_offset = value,
            Key::Sigma => next.noise_sigma = value,
            Key::ModDepth => next.tri.mod_depth = value,
            Key::Gdc => next.tri.g_dc = value,
            Key::Seed | Key::Idc => unreachable!(),
        }
        next.validate().map_err(|_| ErrorCode::Range)?;
        self.cfg = next;
        self.i_dc = self.clamp_idc(self.i_dc);
        Ok(())
    }

    /// Fire one pulse at the current flux bias; `true` if the device switched.
    pub fn pulse(&mut self, i_sq: f64) -> Result<bool, ErrorCode> {
        let i_sq = finite(i_sq)?;
        let noise = NoiseSource::new(self.cfg.noise_sigma, self.seed).map_err(|_| ErrorCode::Range)?;
        let v_n = noise.draw(OpId::Session, 0, self.pulses);
        self.pulses += 1;
        pulse_trial(&mut self.device, &self.cfg, i_sq, self.i_dc, v_n)
            .map(|o| o.switched)
            .map_err(|_| ErrorCode::Range)
    }

    fn scurve(&mut self, args: &[&str]) -> Result<String, ErrorCode> {
        let [imin, imax, points, npulses] = args else {
            return Err(ErrorCode::Parse);
        };
        let p_sw = self.s_curve(
            parse_float(imin)?,
            parse_float(imax)?,
            parse_count(points)?,
            parse_count(npulses)?,
        )?;
        Ok(p_sw.iter().map(|p| fmt_float(*p)).collect::<Vec<_>>().join(","))
    }

    /// Switching probabilities on `points` evenly spaced amplitudes.
    /// Each call draws from a fresh substream.
    pub fn s_curve(&mut self, imin: f64, imax: f64, points: u64, npulses: u64) -> Result<Vec<f64>, ErrorCode> {
        let imin = finite(imin)?;
        let imax = finite(imax)?;
        if points == 0 || npulses == 0 || imax < imin || points.saturating_mul(npulses) > SCURVE_BUDGET {
            return Err(ErrorCode::Range);
        }
        let seed = substream_key(self.seed, OpId::Session, 1, self.scurves);
        self.scurves += 1;
        let plan = TrialPlan::new(npulses as usize, seed).with_sampling(Sampling::Independent);
        let grid = linspace(imin, imax, points as usize);
        let sc = s_curve(&self.cfg, &grid, self.i_dc, &plan).map_err(|_| ErrorCode::Range)?;
        Ok(sc.p_sw)
    }

    /// Handle one command line (with or without its terminator).
    pub fn handle_line(&mut self, raw: &[u8]) -> Reply {
        match std::str::from_utf8(raw) {
            Ok(text) => self.handle_command(text),
            Err(_) => Reply::err(ErrorCode::Parse),
        }
    }

    pub fn handle_command(&mut self, line: &str) -> Reply {
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        let Some((cmd, args)) = tokens.split_first() else {
            return Reply::err(ErrorCode::Parse);
        };
        let result: Result<String, ErrorCode> = match cmd.to_ascii_uppercase().as_str() {
            "SET" => match args {
                [key, value] => Key::parse(key)
                    .ok_or(ErrorCode::Unknown)
                    .and_then(|k| self.set(k, value))
                    .map(|_| "OK".to_string()),
                _ => Err(ErrorCode::Parse),
            },
            "GET" => match args {
                [key] => Key::parse(key).map(|k| self.get(k)).ok_or(ErrorCode::Unknown),
                _ => Err(ErrorCode::Parse),
            },
            "IDC" => match args {
                [value] => self.set(Key::Idc, value).map(|_| "OK".to_string()),
                _ => Err(ErrorCode::Parse),
            },
            "PULSE" => match args {
                [value] => parse_float(value)
                    .and_then(|i| self.pulse(i))
                    .map(|s| if s { "1" } else { "0" }.to_string()),
                _ => Err(ErrorCode::Parse),
            },
            "RESET" if args.is_empty() => {
                self.device.reset();
                self.pulses = 0;
                self.scurves = 0;
                Ok("OK".to_string())
            }
            "SCURVE" => self.scurve(args),
            "*IDN?" if args.is_empty() => Ok(format!("SQUID-EMU,VIRTUAL,0,{}", env!("CARGO_PKG_VERSION"))),
            "QUIT" if args.is_empty() => {
                return Reply {
                    text: "OK".to_string(),
                    close: true,
                }
            }
            "RESET" | "*IDN?" | "QUIT" => Err(ErrorCode::Parse),
            _ => Err(ErrorCode::Unknown),
        };
        match result {
            Ok(text) => Reply::line(text),
            Err(code) => Reply::err(code),
        }
    }
}
