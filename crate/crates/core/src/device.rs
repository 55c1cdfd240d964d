//! Hysteretic switching core.
//!
//! The bias current develops a voltage across `R_in` plus the device. A
//! comparator checks it against the threshold
//! `V_th = V_th0 + V_offset + V_n - Tri(I_dc)`. Above threshold the MOSFET
//! opens and the device shows its normal resistance; below, it is shorted.
//! While superconducting the sensed voltage is `|I| R_in`, so the device
//! switches at `V_th / R_in`. Once resistive it is `|I| (R_in + R_normal)`,
//! so it only retraps below `V_th / (R_in + R_normal)`.

use crate::error::{ensure_finite, Error, Result};
use crate::noise::{NoiseSource, OpId, Sampling};
use crate::reference::sinusoidal_tri_mode;
use crate::tri::{tri, TriConfig};

/// Comparator decision resolution (V). Keeps grid currents that sit exactly on
/// a threshold from flipping on the last bit of a floating-point product.
pub const COMPARATOR_RESOLUTION: f64 = 1e-12;

/// Largest |V_sq| for which the shunt MOSFET stays out of saturation.
pub const V_SQ_VALID_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Triangular,
    /// Series-cosine modulation with the given number of terms.
    Sinusoidal { n_terms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulatorConfig {
    /// Input sense resistor (ohm).
    pub r_in: f64,
    /// Normal-state resistance, R_sq || R_M (ohm).
    pub r_normal: f64,
    /// Zero-flux threshold (V).
    pub v_th0: f64,
    /// Comparator input offset (V).
    pub v_offset: f64,
    /// Standard deviation of the threshold noise (V).
    pub noise_sigma: f64,
    pub tri: TriConfig,
    pub modulation: Modulation,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        EmulatorConfig {
            r_in: 1000.0,
            r_normal: 225.0,
            v_th0: 0.090,
            v_offset: 0.0,
            noise_sigma: 0.0,
            tri: TriConfig::default(),
            modulation: Modulation::Triangular,
        }
    }
}

impl EmulatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.tri.validate()?;
        if !(self.r_in.is_finite() && self.r_in > 0.0) {
            return Err(Error::range("r_in", "must be finite and > 0"));
        }
        if !(self.r_normal.is_finite() && self.r_normal >= 0.0) {
            return Err(Error::range("r_normal", "must be finite and >= 0"));
        }
        if !(self.v_th0.is_finite() && self.v_th0 > 0.0) {
            return Err(Error::range("v_th0", "must be finite and > 0"));
        }
        if !self.v_offset.is_finite() {
            return Err(Error::range("v_offset", "must be finite"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::range("noise_sigma", "must be finite and >= 0"));
        }
        if self.v_th0 + self.v_offset <= self.tri.mod_depth {
            return Err(Error::range(
                "mod_depth",
                format!(
                    "v_th0 + v_offset ({}) must exceed the modulation depth ({})",
                    self.v_th0 + self.v_offset,
                    self.tri.mod_depth
                ),
            ));
        }
        if let Modulation::Sinusoidal { n_terms } = self.modulation {
            if n_terms == 0 {
                return Err(Error::range("taylor_terms", "must be >= 1"));
            }
        }
        Ok(())
    }

    /// Modulation voltage subtracted from the threshold at flux bias `i_dc`.
    pub fn modulation_voltage(&self, i_dc: f64) -> Result<f64> {
        match self.modulation {
            Modulation::Triangular => tri(i_dc, &self.tri),
            Modulation::Sinusoidal { n_terms } => sinusoidal_tri_mode(i_dc, &self.tri, n_terms),
        }
    }

    /// Noise-free threshold at flux bias `i_dc`.
    pub fn threshold_mean(&self, i_dc: f64) -> Result<f64> {
        threshold(self, i_dc, 0.0)
    }

    pub fn noise(&self, seed: u64) -> Result<NoiseSource> {
        NoiseSource::new(self.noise_sigma, seed)
    }
}

/// Comparator threshold `V_th0 + V_offset + V_n - Tri(I_dc)`.
pub fn threshold(cfg: &EmulatorConfig, i_dc: f64, v_n: f64) -> Result<f64> {
    ensure_finite("v_n", v_n)?;
    Ok(cfg.v_th0 + cfg.v_offset + v_n - cfg.modulation_voltage(i_dc)?)
}

/// Current below which a resistive device returns to the superconducting state.
pub fn retrap_current(cfg: &EmulatorConfig, v_th: f64) -> f64 {
    v_th / (cfg.r_in + cfg.r_normal)
}

/// Current above which a superconducting device switches.
pub fn switching_current(cfg: &EmulatorConfig, v_th: f64) -> f64 {
    v_th / cfg.r_in
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase {
    #[default]
    Superconducting,
    Resistive,
}

impl Phase {
    pub fn resistance(self, cfg: &EmulatorConfig) -> f64 {
        match self {
            Phase::Superconducting => 0.0,
            Phase::Resistive => cfg.r_normal,
        }
    }

    pub fn is_resistive(self) -> bool {
        self == Phase::Resistive
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub phase: Phase,
    /// Voltage across the device (V).
    pub v_sq: f64,
    /// `|v_sq|` is beyond the range where the shunt behaves as a switch.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    pub phase: Phase,
    pub last_v_th: f64,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self::new()
    }
}

impl DeviceState {
    pub fn new() -> Self {
        DeviceState {
            phase: Phase::Superconducting,
            last_v_th: 0.0,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }

    /// Apply bias `i_sq` at flux bias `i_dc` with threshold noise `v_n`.
    pub fn step(&mut self, cfg: &EmulatorConfig, i_sq: f64, i_dc: f64, v_n: f64) -> Result<StepOutput> {
        ensure_finite("i_sq", i_sq)?;
        let v_th = threshold(cfg, i_dc, v_n)?;
        Ok(self.step_with_threshold(cfg, i_sq, v_th))
    }

    /// Same as [`step`](Self::step) with the threshold already composed.
    pub fn step_with_threshold(&mut self, cfg: &EmulatorConfig, i_sq: f64, v_th: f64) -> StepOutput {
        let sensed = i_sq.abs() * (cfg.r_in + self.phase.resistance(cfg));
        self.phase = if sensed - v_th > COMPARATOR_RESOLUTION {
            Phase::Resistive
        } else {
            Phase::Superconducting
        };
        self.last_v_th = v_th;
        let v_sq = i_sq * self.phase.resistance(cfg);
        StepOutput {
            phase: self.phase,
            v_sq,
            saturated: v_sq.abs() > V_SQ_VALID_LIMIT,
        }
    }
}

/// Threshold samples taken at the comparator input.
#[derive(Debug, Clone, PartialEq)]
pub struct VthSamples {
    pub i_dc: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl VthSamples {
    /// Running mean; exact when every sample is equal. NaN if empty.
    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples
            .iter()
            .enumerate()
            .fold(0.0, |m, (k, v)| m + (v - m) / (k + 1) as f64)
    }

    /// Sample standard deviation (n - 1 normalization; 0 for a single sample).
    pub fn std_dev(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.samples.iter().map(|v| (v - m).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    /// Equal-width histogram over the sample range. A degenerate range gets a
    /// single bin of width 1 mV centered on the value.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        let bins = bins.max(1);
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return vec![HistogramBin {
                lo: lo - 0.5e-3,
                hi: lo + 0.5e-3,
                count: self.samples.len(),
            }];
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in &self.samples {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| HistogramBin {
                lo: lo + k as f64 * width,
                hi: lo + (k + 1) as f64 * width,
                count,
            })
            .collect()
    }
}

/// Sample the comparator threshold `n` times at fixed flux bias.
pub fn sample_vth_histogram(
    cfg: &EmulatorConfig,
    i_dc: f64,
    n: usize,
    noise: &NoiseSource,
    sampling: Sampling,
) -> Result<VthSamples> {
    if n == 0 {
        return Err(Error::invalid("histogram needs at least one sample"));
    }
    let mean = cfg.threshold_mean(i_dc)?;
    let samples = noise
        .block(OpId::Histogram, 0, n, sampling)
        .into_iter()
        .map(|v_n| mean + v_n)
        .collect();
    Ok(VthSamples { i_dc, samples })
}
