use rayon::prelude::*;

use super::{check_grid, SweepRecord, TrialPlan};
use crate::device::{DeviceState, EmulatorConfig};
use crate::error::{ensure_finite, Error, Result};
use crate::noise::{NoiseSource, OpId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOutcome {
    pub switched: bool,
    /// Plateau voltage of the pulse (V).
    pub v_sq: f64,
}

/// One current pulse from the superconducting state with a single threshold
/// noise draw `v_n`.
pub fn pulse_trial(
    device: &mut DeviceState,
    cfg: &EmulatorConfig,
    i_sq: f64,
    i_dc: f64,
    v_n: f64,
) -> Result<PulseOutcome> {
    device.reset();
    let out = device.step(cfg, i_sq, i_dc, v_n)?;
    Ok(PulseOutcome {
        switched: out.phase.is_resistive(),
        v_sq: out.v_sq,
    })
}

/// Switch count and summed plateau voltage of `n` pulses at one point.
pub(crate) fn pulse_point(
    cfg: &EmulatorConfig,
    noise: &NoiseSource,
    op: OpId,
    point: u64,
    i_sq: f64,
    v_th_mean: f64,
    plan: &TrialPlan,
) -> (usize, f64) {
    let draws = noise.block(op, point, plan.n_trials, plan.sampling);
    let mut device = DeviceState::new();
    let mut switches = 0usize;
    let mut sum_v = 0.0;
    for v_n in draws {
        device.reset();
        let out = device.step_with_threshold(cfg, i_sq, v_th_mean + v_n);
        if out.phase.is_resistive() {
            switches += 1;
        }
        sum_v += out.v_sq;
    }
    (switches, sum_v)
}

fn pulse_grid(
    cfg: &EmulatorConfig,
    currents: &[f64],
    i_dc: f64,
    plan: &TrialPlan,
) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    plan.validate()?;
    check_grid("i_sq", currents)?;
    let v_th = cfg.threshold_mean(i_dc)?;
    let noise = cfg.noise(plan.seed)?;
    Ok(currents
        .par_iter()
        .enumerate()
        .map(|(k, &i)| pulse_point(cfg, &noise, OpId::Pulse, k as u64, i, v_th, plan))
        .collect())
}

/// Cumulative switching probability versus pulse amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SCurve {
    pub currents: Vec<f64>,
    pub p_sw: Vec<f64>,
    pub switches: Vec<usize>,
    pub n_pulses: usize,
}

impl SCurve {
    /// Linearly interpolated current where `p_sw` first reaches `level`.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        crossing(&self.currents, &self.p_sw, level)
    }
}

pub(crate) fn crossing(x: &[f64], p: &[f64], level: f64) -> Option<f64> {
    let k = p.iter().position(|v| *v >= level)?;
    if k == 0 {
        return Some(x[0]);
    }
    let (x0, x1, p0, p1) = (x[k - 1], x[k], p[k - 1], p[k]);
    Some(x0 + (x1 - x0) * (level - p0) / (p1 - p0))
}

pub fn s_curve(cfg: &EmulatorConfig, currents: &[f64], i_dc: f64, plan: &TrialPlan) -> Result<SCurve> {
    let counts = pulse_grid(cfg, currents, i_dc, plan)?;
    let n = plan.n_trials;
    Ok(SCurve {
        currents: currents.to_vec(),
        p_sw: counts.iter().map(|(k, _)| *k as f64 / n as f64).collect(),
        switches: counts.iter().map(|(k, _)| *k).collect(),
        n_pulses: n,
    })
}

/// Pulse-averaged IV curve. Uses the same noise substreams as [`s_curve`], so
/// both protocols see identical trials for identical seeds.
pub fn pulsed_iv(cfg: &EmulatorConfig, currents: &[f64], i_dc: f64, plan: &TrialPlan) -> Result<SweepRecord> {
    let counts = pulse_grid(cfg, currents, i_dc, plan)?;
    let n = plan.n_trials as f64;
    Ok(SweepRecord {
        currents: currents.to_vec(),
        mean_v: counts.iter().map(|(_, v)| v / n).collect(),
        fraction: counts.iter().map(|(k, _)| *k as f64 / n).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindIswParams {
    pub target: f64,
    /// Bisection stops once the bracket is narrower than this (A).
    pub tolerance: f64,
    pub i_lo: f64,
    pub i_hi: f64,
    pub max_iter: usize,
    pub trials: TrialPlan,
}

impl FindIswParams {
    /// Median search bracketed by zero and twice the zero-flux switching
    /// current plus ten noise widths.
    pub fn for_config(cfg: &EmulatorConfig, trials: TrialPlan) -> Self {
        FindIswParams {
            target: 0.5,
            tolerance: 0.05e-6,
            i_lo: 0.0,
            i_hi: (2.0 * (cfg.v_th0 + cfg.v_offset) + 10.0 * cfg.noise_sigma) / cfg.r_in,
            max_iter: 64,
            trials,
        }
    }
}

/// Bisection for the pulse amplitude at which `p_sw` equals `target`.
pub fn find_isw(cfg: &EmulatorConfig, i_dc: f64, params: &FindIswParams) -> Result<f64> {
    cfg.validate()?;
    params.trials.validate()?;
    if !(params.target > 0.0 && params.target < 1.0) {
        return Err(Error::invalid("target probability must be in (0, 1)"));
    }
    ensure_finite("i_lo", params.i_lo)?;
    ensure_finite("i_hi", params.i_hi)?;
    if !(params.tolerance > 0.0) || params.i_hi <= params.i_lo {
        return Err(Error::invalid("need i_lo < i_hi and tolerance > 0"));
    }
    let v_th = cfg.threshold_mean(i_dc)?;
    let noise = cfg.noise(params.trials.seed)?;
    let p_at = |point: u64, i: f64| {
        let (k, _) = pulse_point(cfg, &noise, OpId::FindIsw, point, i, v_th, &params.trials);
        k as f64 / params.trials.n_trials as f64
    };

    let (mut lo, mut hi) = (params.i_lo, params.i_hi);
    let (p_lo, p_hi) = (p_at(0, lo), p_at(1, hi));
    if !(p_lo < params.target && p_hi >= params.target) {
        return Err(Error::BracketFailure {
            target: params.target,
            lo,
            hi,
            p_lo,
            p_hi,
        });
    }
    for it in 0..params.max_iter {
        if hi - lo <= params.tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if p_at(2 + it as u64, mid) >= params.target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
