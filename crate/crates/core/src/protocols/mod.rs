//! Measurement protocols run against the emulated device.
//!
//! Every protocol is a pure function of `(config, plan, seed)`. Trials are
//! evaluated in parallel; each one owns a fresh [`DeviceState`] and reads its
//! noise from a keyed substream, and partial sums are combined in a fixed
//! order, so the output does not depend on the thread count.
//!
//! [`DeviceState`]: crate::device::DeviceState

mod calibrate;
mod feedback;
mod modmap;
mod pulse;
mod sweep;

pub use calibrate::{calibrate_noise_levels, CalibrationPlan, NoiseLevels};
pub use feedback::{flux_feedback, BranchEscape, FeedbackParams, FeedbackStep, FeedbackTrace};
pub use modmap::{modulation_map, ModulationMap};
pub use pulse::{find_isw, pulse_trial, pulsed_iv, s_curve, FindIswParams, PulseOutcome, SCurve};
pub use sweep::{dc_iv, Ramp, SweepPlan, SweepRecord};

use crate::error::{Error, Result};
use crate::noise::Sampling;

/// Documented default number of pulses per point.
pub const DEFAULT_PULSES: usize = 1000;

/// How many trials to run per point and how their noise is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPlan {
    pub n_trials: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

impl TrialPlan {
    pub fn new(n_trials: usize, seed: u64) -> Self {
        TrialPlan {
            n_trials,
            seed,
            sampling: Sampling::default(),
        }
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("number of trials must be >= 1"));
        }
        Ok(())
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub(crate) fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if let Some(bad) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} grid contains {bad}")));
    }
    Ok(())
}
