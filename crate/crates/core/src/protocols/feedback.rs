//! Flux-locked working point.
//!
//! Proportional control of the flux bias on the measured switching
//! probability: every iteration fires a burst of pulses at a fixed probe
//! amplitude, estimates `p_sw` and moves `I_dc` against the error
//! `p_sw - 0.5`. External flux enters as a disturbance voltage added to the
//! modulation output, so the settled change in `I_dc` reads out the
//! disturbance.

use super::pulse::pulse_point;
use super::TrialPlan;
use crate::device::EmulatorConfig;
use crate::error::{ensure_finite, Error, Result};
use crate::noise::OpId;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackParams {
    /// Fixed pulse amplitude (A).
    pub i_sq_probe: f64,
    pub i_dc_start: f64,
    /// Flux-bias correction per unit probability error (A).
    pub gain: f64,
    /// Sign of d p_sw / d I_dc on the locked branch (+1 or -1).
    pub branch_sign: f64,
    /// Interval of I_dc the loop must stay in (A).
    pub branch: (f64, f64),
    pub n_iters: usize,
    /// Disturbance added to the modulation voltage per iteration (V). Missing
    /// entries count as zero.
    pub disturbance: Vec<f64>,
    pub trials: TrialPlan,
}

impl FeedbackParams {
    /// Lock on the rising half of the first triangle period, starting at
    /// `i_dc_start` with the probe at the noise-free switching current there.
    pub fn rising_branch(cfg: &EmulatorConfig, i_dc_start: f64, trials: TrialPlan) -> Result<Self> {
        let v_th = cfg.threshold_mean(i_dc_start)?;
        let half = cfg.tri.period_current() / 2.0;
        Ok(FeedbackParams {
            i_sq_probe: v_th / cfg.r_in,
            i_dc_start,
            gain: 0.0,
            branch_sign: 1.0,
            branch: (0.0, half),
            n_iters: 0,
            disturbance: Vec::new(),
            trials,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackStep {
    pub iteration: usize,
    pub p_hat: f64,
    /// Flux bias applied while `p_hat` was measured (A).
    pub i_dc: f64,
    pub disturbance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEscape {
    pub iteration: usize,
    pub i_dc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackTrace {
    pub steps: Vec<FeedbackStep>,
    /// Set when the correction pushed I_dc out of the branch; the trace
    /// stops at that iteration.
    pub escape: Option<BranchEscape>,
}

impl FeedbackTrace {
    fn window(&self, last: usize) -> &[FeedbackStep] {
        &self.steps[self.steps.len().saturating_sub(last)..]
    }

    /// Mean flux bias over the final `last` iterations.
    pub fn settled_i_dc(&self, last: usize) -> f64 {
        let w = self.window(last);
        w.iter().map(|s| s.i_dc).sum::<f64>() / w.len() as f64
    }

    /// Mean switching probability over the final `last` iterations.
    pub fn settled_p(&self, last: usize) -> f64 {
        let w = self.window(last);
        w.iter().map(|s| s.p_hat).sum::<f64>() / w.len() as f64
    }

    /// Iterations after `from` until the running `window`-mean of `p_hat`
    /// first lies within `tol` of 0.5.
    pub fn settling_iterations(&self, from: usize, window: usize, tol: f64) -> Option<usize> {
        let window = window.max(1);
        let tail = self.steps.get(from..)?;
        tail.windows(window)
            .position(|w| (w.iter().map(|s| s.p_hat).sum::<f64>() / window as f64 - 0.5).abs() <= tol)
            .map(|k| k + window - 1)
    }
}

pub fn flux_feedback(cfg: &EmulatorConfig, params: &FeedbackParams) -> Result<FeedbackTrace> {
    cfg.validate()?;
    params.trials.validate()?;
    ensure_finite("i_sq_probe", params.i_sq_probe)?;
    ensure_finite("gain", params.gain)?;
    let (lo, hi) = params.branch;
    if !(lo < hi) || !(lo..=hi).contains(&params.i_dc_start) {
        return Err(Error::invalid("i_dc_start must lie inside a non-empty branch interval"));
    }
    if params.branch_sign.abs() != 1.0 {
        return Err(Error::invalid("branch_sign must be +1 or -1"));
    }
    if let Some(bad) = params.disturbance.iter().find(|d| !d.is_finite()) {
        return Err(Error::invalid(format!("disturbance contains {bad}")));
    }

    let noise = cfg.noise(params.trials.seed)?;
    let n = params.trials.n_trials as f64;
    let mut i_dc = params.i_dc_start;
    let mut steps = Vec::with_capacity(params.n_iters);
    let mut escape = None;
    for it in 0..params.n_iters {
        let d = params.disturbance.get(it).copied().unwrap_or(0.0);
        let v_th = cfg.threshold_mean(i_dc)? - d;
        let (k, _) = pulse_point(
            cfg,
            &noise,
            OpId::Feedback,
            it as u64,
            params.i_sq_probe,
            v_th,
            &params.trials,
        );
        let p_hat = k as f64 / n;
        steps.push(FeedbackStep {
            iteration: it,
            p_hat,
            i_dc,
            disturbance: d,
        });
        let next = i_dc - params.gain * (p_hat - 0.5) * params.branch_sign;
        if !(lo..=hi).contains(&next) {
            log::warn!("flux feedback left the branch at iteration {it}: I_dc = {next:e} A");
            escape = Some(BranchEscape {
                iteration: it,
                i_dc: next,
            });
            break;
        }
        i_dc = next;
    }
    Ok(FeedbackTrace { steps, escape })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy() -> EmulatorConfig {
        EmulatorConfig {
            noise_sigma: 5e-3,
            ..EmulatorConfig::default()
        }
    }

    #[test]
    fn working_point_is_a_fixed_point() {
        // stratified draws put exactly half of an even pulse count below the
        // median, so the loop never moves without a disturbance
        let cfg = noisy();
        let mut p = FeedbackParams::rising_branch(&cfg, 0.25e-3, TrialPlan::new(1000, 1)).unwrap();
        p.gain = 1e-4;
        p.n_iters = 50;
        let trace = flux_feedback(&cfg, &p).unwrap();
        assert!(trace.escape.is_none());
        assert!(trace.steps.iter().all(|s| s.p_hat == 0.5 && s.i_dc == 0.25e-3));
    }

    #[test]
    fn zero_gain_is_open_loop() {
        let cfg = noisy();
        let mut p = FeedbackParams::rising_branch(&cfg, 0.25e-3, TrialPlan::new(500, 2)).unwrap();
        p.n_iters = 60;
        p.disturbance = (0..60).map(|k| if k >= 30 { 10e-3 } else { 0.0 }).collect();
        let trace = flux_feedback(&cfg, &p).unwrap();
        assert!(trace.steps.iter().all(|s| s.i_dc == 0.25e-3));
        let before: f64 = trace.steps[..30].iter().map(|s| s.p_hat).sum::<f64>() / 30.0;
        let after: f64 = trace.steps[30..].iter().map(|s| s.p_hat).sum::<f64>() / 30.0;
        assert!((before - 0.5).abs() < 0.05);
        // threshold down by two sigma
        assert!(after > 0.95, "{after}");
    }

    #[test]
    fn branch_escape_truncates() {
        let cfg = noisy();
        let mut p = FeedbackParams::rising_branch(&cfg, 0.25e-3, TrialPlan::new(200, 3)).unwrap();
        p.gain = 5e-3;
        p.n_iters = 100;
        p.disturbance = vec![30e-3; 100];
        let trace = flux_feedback(&cfg, &p).unwrap();
        let esc = trace.escape.expect("should escape");
        assert_eq!(trace.steps.len(), esc.iteration + 1);
    }

    #[test]
    fn invalid_params() {
        let cfg = noisy();
        let mut p = FeedbackParams::rising_branch(&cfg, 0.25e-3, TrialPlan::new(10, 3)).unwrap();
        p.i_dc_start = 0.9e-3;
        assert!(flux_feedback(&cfg, &p).is_err());
        let mut p = FeedbackParams::rising_branch(&cfg, 0.25e-3, TrialPlan::new(10, 3)).unwrap();
        p.branch_sign = 0.5;
        assert!(flux_feedback(&cfg, &p).is_err());
        let mut p = FeedbackParams::rising_branch(&cfg, 0.25e-3, TrialPlan::new(0, 3)).unwrap();
        p.n_iters = 1;
        assert!(flux_feedback(&cfg, &p).is_err());
    }

    #[test]
    fn settling_helper() {
        let steps = [0.9, 0.8, 0.6, 0.5, 0.5, 0.52]
            .iter()
            .enumerate()
            .map(|(k, p)| FeedbackStep {
                iteration: k,
                p_hat: *p,
                i_dc: 0.0,
                disturbance: 0.0,
            })
            .collect();
        let t = FeedbackTrace { steps, escape: None };
        assert_eq!(t.settling_iterations(0, 1, 0.05), Some(3));
        assert_eq!(t.settling_iterations(0, 2, 0.05), Some(4));
        assert!((t.settled_p(3) - 0.5066).abs() < 1e-3);
    }
}
