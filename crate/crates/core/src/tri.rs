//! Linear-to-triangular flux converter.
//!
//! The flux-bias current is turned into a voltage, rectified, digitized by an
//! 8-bit ADC and remapped so that the low six bits count up and down
//! alternately. The remapped code drives a 6-bit DAC whose output, scaled by
//! the divider, is the triangular modulation subtracted from the threshold.
//!
//! Bit layout of the ADC code:
//!
//! ```text
//!   D7      D6      D5..D0
//!   period  slope   ramp position
//! ```
//!
//! `D6 = 1` inverts `D5..D0` through six XOR gates, which keeps the ramp
//! continuous through each maximum.

use crate::error::{ensure_finite, Error, Result};

/// Number of ADC codes.
pub const ADC_CODES: u32 = 256;
/// Largest remapped (6-bit) DAC code.
pub const DAC_MAX: u8 = 63;

/// Raw 8-bit ADC output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AdcCode(u8);

impl AdcCode {
    pub const fn new(code: u8) -> Self {
        AdcCode(code)
    }

    pub const fn code(self) -> u8 {
        self.0
    }

    /// Period bit.
    pub const fn d7(self) -> bool {
        self.0 & 0x80 != 0
    }

    /// Slope bit (0 rising, 1 falling).
    pub const fn d6(self) -> bool {
        self.0 & 0x40 != 0
    }

    pub const fn low6(self) -> u8 {
        self.0 & 0x3f
    }
}

impl From<u8> for AdcCode {
    fn from(code: u8) -> Self {
        AdcCode(code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriConfig {
    /// ADC full-scale input voltage (V).
    pub v_fullscale: f64,
    /// Peak modulation voltage after the output divider (V).
    pub mod_depth: f64,
    /// Transimpedance from flux-bias current to ADC input voltage (V/A).
    pub g_dc: f64,
}

impl Default for TriConfig {
    fn default() -> Self {
        TriConfig {
            v_fullscale: 5.0,
            mod_depth: 0.040,
            g_dc: 2500.0,
        }
    }
}

impl TriConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_fullscale.is_finite() && self.v_fullscale > 0.0) {
            return Err(Error::range("v_fullscale", "must be finite and > 0"));
        }
        if !(self.mod_depth.is_finite() && self.mod_depth >= 0.0) {
            return Err(Error::range("mod_depth", "must be finite and >= 0"));
        }
        if !(self.g_dc.is_finite() && self.g_dc > 0.0) {
            return Err(Error::range("g_dc", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Flux-bias current that drives the ADC to full scale.
    pub fn i_dc_limit(&self) -> f64 {
        self.v_fullscale / self.g_dc
    }

    /// Flux-bias current spanned by one ADC code.
    pub fn code_current(&self) -> f64 {
        self.v_fullscale / (ADC_CODES as f64 * self.g_dc)
    }

    /// Flux-bias current of one full triangle period (128 codes).
    pub fn period_current(&self) -> f64 {
        self.v_fullscale / (2.0 * self.g_dc)
    }

    /// Output voltage of one DAC step.
    pub fn dac_step(&self) -> f64 {
        self.mod_depth / DAC_MAX as f64
    }
}

/// Rectify and digitize an ADC input voltage. Truncates, and saturates at the
/// top code.
pub fn digitize(v_dc: f64, cfg: &TriConfig) -> Result<AdcCode> {
    ensure_finite("v_dc", v_dc)?;
    let scaled = (ADC_CODES as f64 * v_dc.abs() / cfg.v_fullscale).floor();
    let code = scaled.clamp(0.0, (ADC_CODES - 1) as f64);
    Ok(AdcCode(code as u8))
}

/// XOR remap of the low six bits by D6.
pub fn remap(code: AdcCode) -> u8 {
    let mask = if code.d6() { DAC_MAX } else { 0 };
    code.low6() ^ mask
}

/// DAC plus divider output for a remapped code.
pub fn dac_output(code6: u8, cfg: &TriConfig) -> f64 {
    cfg.mod_depth * f64::from(code6.min(DAC_MAX)) / DAC_MAX as f64
}

/// Triangular modulation voltage for a flux-bias current.
pub fn tri(i_dc: f64, cfg: &TriConfig) -> Result<f64> {
    ensure_finite("i_dc", i_dc)?;
    let code = digitize(cfg.g_dc * i_dc, cfg)?;
    Ok(dac_output(remap(code), cfg))
}
