use super::sweep::{run_sweep, standard_table};
use super::{Ramp, SweepPlan};
use crate::device::{switching_current, EmulatorConfig};
use crate::error::{Error, Result};
use crate::noise::Sampling;

/// Settings for locating the noise level at which the DC IV loop closes.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPlan {
    pub ramp: Ramp,
    pub i_dc: f64,
    pub n_avg: usize,
    pub seed: u64,
    pub sampling: Sampling,
    /// Closure tolerance on the averaged voltage (V). `None` means 2% of
    /// `I_sw * R_normal` at the plan's flux bias.
    pub closure_tol: Option<f64>,
    /// Bisection stops once the sigma bracket is this narrow (V).
    pub resolution: f64,
    pub max_iter: usize,
}

impl CalibrationPlan {
    pub fn new(ramp: Ramp, n_avg: usize, seed: u64) -> Self {
        CalibrationPlan {
            ramp,
            i_dc: 0.0,
            n_avg,
            seed,
            sampling: Sampling::default(),
            closure_tol: None,
            resolution: 0.1e-3,
            max_iter: 60,
        }
    }

    /// Sweep plan whose `dc_iv` output the calibration bisects on.
    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan {
            currents: self.ramp.currents(),
            i_dc: self.i_dc,
            n_avg: self.n_avg,
            seed: self.seed,
            sampling: self.sampling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevels {
    pub sigma_large: f64,
    pub sigma_medium: f64,
    /// Closure tolerance that was applied (V).
    pub closure_tol: f64,
    /// Hysteresis gap measured at `sigma_large` (V).
    pub gap: f64,
    /// Number of DC sweeps evaluated.
    pub evaluations: usize,
}

/// Smallest threshold-noise sigma at which the averaged up and down DC IV
/// branches agree within the closure tolerance; medium noise is half of it.
///
/// The bisection evaluates exactly `dc_iv(plan.sweep_plan())` at each trial
/// sigma: the unit draws are fixed by the seed and only rescaled, so the gap
/// is a deterministic function of sigma.
pub fn calibrate_noise_levels(cfg: &EmulatorConfig, plan: &CalibrationPlan) -> Result<NoiseLevels> {
    cfg.validate()?;
    if plan.n_avg == 0 {
        return Err(Error::invalid("calibration needs n_avg >= 1"));
    }
    if !(plan.resolution > 0.0) {
        return Err(Error::invalid("calibration resolution must be > 0"));
    }
    let v_th = cfg.threshold_mean(plan.i_dc)?;
    let closure_tol = plan
        .closure_tol
        .unwrap_or(0.02 * switching_current(cfg, v_th) * cfg.r_normal);

    if cfg.r_normal == 0.0 {
        return Ok(NoiseLevels {
            sigma_large: 0.0,
            sigma_medium: 0.0,
            closure_tol,
            gap: 0.0,
            evaluations: 0,
        });
    }

    let sweep = plan.sweep_plan();
    let table = standard_table(&sweep);
    let mut evaluations = 0usize;
    let mut gap_at = |sigma: f64| {
        evaluations += 1;
        let rec = run_sweep(cfg, &sweep.currents, sweep.n_avg, v_th, sigma, Some(&table));
        plan.ramp.hysteresis_gap(&rec)
    };

    let gap0 = gap_at(0.0);
    if gap0 < closure_tol {
        return Ok(NoiseLevels {
            sigma_large: 0.0,
            sigma_medium: 0.0,
            closure_tol,
            gap: gap0,
            evaluations,
        });
    }

    let mut lo = 0.0;
    let mut hi = v_th.max(plan.resolution);
    let mut gap_hi = gap_at(hi);
    let mut iter = 0;
    while gap_hi >= closure_tol {
        iter += 1;
        if iter >= plan.max_iter {
            return Err(Error::CalibrationFailure { iterations: iter });
        }
        lo = hi;
        hi *= 2.0;
        gap_hi = gap_at(hi);
    }
    while hi - lo > plan.resolution {
        iter += 1;
        if iter >= plan.max_iter {
            return Err(Error::CalibrationFailure { iterations: iter });
        }
        let mid = 0.5 * (lo + hi);
        let g = gap_at(mid);
        if g < closure_tol {
            hi = mid;
            gap_hi = g;
        } else {
            lo = mid;
        }
    }
    log::debug!("noise calibration: sigma_large = {hi:e} V, gap {gap_hi:e} V after {evaluations} sweeps");
    Ok(NoiseLevels {
        sigma_large: hi,
        sigma_medium: hi / 2.0,
        closure_tol,
        gap: gap_hi,
        evaluations,
    })
}
