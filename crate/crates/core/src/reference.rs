//! Ideal DC-SQUID relations and the series-cosine modulation alternative.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};
use crate::tri::TriConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealSquidParams {
    /// Single-junction critical current (A).
    pub i_c: f64,
    /// Applied flux in units of the flux quantum.
    pub flux: f64,
}

impl IdealSquidParams {
    pub fn new(i_c: f64, flux: f64) -> Result<Self> {
        if !(i_c.is_finite() && i_c > 0.0) {
            return Err(Error::range("i_c", "must be finite and > 0"));
        }
        ensure_finite("flux", flux)?;
        Ok(IdealSquidParams { i_c, flux })
    }
}

/// Switching current of a symmetric two-junction loop with negligible
/// inductance: `2 Ic |cos(pi flux)|`.
pub fn ideal_isw(p: &IdealSquidParams) -> f64 {
    2.0 * p.i_c * (PI * p.flux).cos().abs()
}

/// Truncated Maclaurin series of `cos(x)` with `n_terms` terms, built by term
/// recursion.
pub fn taylor_cos(x: f64, n_terms: usize) -> Result<f64> {
    if n_terms == 0 {
        return Err(Error::invalid("n_terms must be >= 1"));
    }
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..n_terms - 1 {
        let k = k as f64;
        term *= -x2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        sum += term;
    }
    Ok(sum)
}

/// Reduce an angle into [-pi, pi].
pub fn reduce_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = x - two_pi * (x / two_pi).round();
    r.clamp(-PI, PI)
}

/// Sinusoidal replacement for the triangular converter.
///
/// Phase convention: the ADC input voltage (rectified, saturating at full
/// scale like the ADC) is read as flux `v / (v_fullscale / 2)`, so one flux
/// quantum spans the same bias interval as one triangle period. The output is
/// `mod_depth * (1 - |cos(pi * flux)|)`: zero at zero bias and `mod_depth` at
/// half a period, the same points where the triangular mode sits at 0 and its
/// peak. The cosine argument is reduced to [-pi, pi] before the series is
/// evaluated.
pub fn sinusoidal_tri_mode(i_dc: f64, cfg: &TriConfig, n_terms: usize) -> Result<f64> {
    ensure_finite("i_dc", i_dc)?;
    let v = (cfg.g_dc * i_dc).abs().min(cfg.v_fullscale);
    let flux = v / (cfg.v_fullscale / 2.0);
    let c = taylor_cos(reduce_angle(PI * flux), n_terms)?;
    Ok(cfg.mod_depth * (1.0 - c.abs().min(1.0)))
}
