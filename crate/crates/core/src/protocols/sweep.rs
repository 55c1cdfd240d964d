use rayon::prelude::*;

use super::{check_grid, linspace, TrialPlan};
use crate::device::{DeviceState, EmulatorConfig};
use crate::error::{ensure_finite, Error, Result};
use crate::noise::{standard_block, OpId};

/// Reps per parallel work unit. Fixed so the summation order never depends on
/// the thread count.
const REP_CHUNK: usize = 128;

/// A quasi-static DC bias sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Bias currents in the order they are applied (A).
    pub currents: Vec<f64>,
    pub i_dc: f64,
    /// Repetitions of the whole sweep; each one starts superconducting.
    pub n_avg: usize,
    pub seed: u64,
    pub sampling: crate::noise::Sampling,
}

impl SweepPlan {
    pub fn new(currents: Vec<f64>, n_avg: usize, seed: u64) -> Self {
        SweepPlan {
            currents,
            i_dc: 0.0,
            n_avg,
            seed,
            sampling: Default::default(),
        }
    }

    fn trials(&self) -> TrialPlan {
        TrialPlan::new(self.n_avg, self.seed).with_sampling(self.sampling)
    }
}

/// Averaged voltage and switching fraction per sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub currents: Vec<f64>,
    pub mean_v: Vec<f64>,
    /// Fraction of repetitions (or pulses) in the resistive state.
    pub fraction: Vec<f64>,
}

impl SweepRecord {
    pub fn len(&self) -> usize {
        self.currents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.currents.is_empty()
    }
}

/// Up-then-down current ramp over a fixed grid. The turning point is applied
/// once.
#[derive(Debug, Clone, PartialEq)]
pub struct Ramp {
    pub up: Vec<f64>,
}

impl Ramp {
    pub fn new(i_min: f64, i_max: f64, points: usize) -> Result<Self> {
        ensure_finite("i_min", i_min)?;
        ensure_finite("i_max", i_max)?;
        if points < 2 || i_max <= i_min {
            return Err(Error::invalid("ramp needs >= 2 points and i_max > i_min"));
        }
        Ok(Ramp {
            up: linspace(i_min, i_max, points),
        })
    }

    pub fn currents(&self) -> Vec<f64> {
        self.up
            .iter()
            .chain(self.up.iter().rev().skip(1))
            .copied()
            .collect()
    }

    /// Index of the ramp point where the down-branch starts.
    pub fn turn(&self) -> usize {
        self.up.len() - 1
    }

    /// Split a record taken along [`currents`](Self::currents) into the up
    /// and down branches, both ordered by the up grid.
    pub fn branches<'a>(&self, values: &'a [f64]) -> (&'a [f64], Vec<f64>) {
        let n = self.up.len();
        let up = &values[..n];
        let down = values[n - 1..].iter().rev().copied().collect();
        (up, down)
    }

    /// Largest |up - down| difference of averaged voltage on the same grid
    /// current.
    pub fn hysteresis_gap(&self, record: &SweepRecord) -> f64 {
        let (up, down) = self.branches(&record.mean_v);
        up.iter()
            .zip(&down)
            .map(|(u, d)| (u - d).abs())
            .fold(0.0, f64::max)
    }
}

/// Averaged DC IV sweep. Within a repetition the device state carries from
/// point to point, with a fresh threshold draw at every point.
pub fn dc_iv(plan: &SweepPlan, cfg: &EmulatorConfig) -> Result<SweepRecord> {
    cfg.validate()?;
    plan.trials().validate()?;
    check_grid("i_sq", &plan.currents)?;
    let v_th = cfg.threshold_mean(plan.i_dc)?;
    let table = draw_table(plan, cfg.noise_sigma);
    Ok(run_sweep(cfg, &plan.currents, plan.n_avg, v_th, cfg.noise_sigma, table.as_deref()))
}

/// Unit-variance draws `[point][rep]`, or `None` when the sweep is noiseless.
pub(crate) fn draw_table(plan: &SweepPlan, sigma: f64) -> Option<Vec<Vec<f64>>> {
    (sigma > 0.0).then(|| standard_table(plan))
}

pub(crate) fn standard_table(plan: &SweepPlan) -> Vec<Vec<f64>> {
    (0..plan.currents.len())
        .into_par_iter()
        .map(|k| standard_block(plan.seed, OpId::DcIv, k as u64, plan.n_avg, plan.sampling))
        .collect()
}

pub(crate) fn run_sweep(
    cfg: &EmulatorConfig,
    currents: &[f64],
    n_avg: usize,
    v_th: f64,
    sigma: f64,
    table: Option<&[Vec<f64>]>,
) -> SweepRecord {
    let n_pts = currents.len();
    let chunks: Vec<(Vec<f64>, Vec<usize>)> = (0..n_avg.div_ceil(REP_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum_v = vec![0.0; n_pts];
            let mut resistive = vec![0usize; n_pts];
            let mut device = DeviceState::new();
            for rep in c * REP_CHUNK..((c + 1) * REP_CHUNK).min(n_avg) {
                device.reset();
                for (k, &i) in currents.iter().enumerate() {
                    let v_n = table.map_or(0.0, |t| sigma * t[k][rep]);
                    let out = device.step_with_threshold(cfg, i, v_th + v_n);
                    sum_v[k] += out.v_sq;
                    resistive[k] += out.phase.is_resistive() as usize;
                }
            }
            (sum_v, resistive)
        })
        .collect();

    let mut sum_v = vec![0.0; n_pts];
    let mut resistive = vec![0usize; n_pts];
    for (s, r) in chunks {
        for k in 0..n_pts {
            sum_v[k] += s[k];
            resistive[k] += r[k];
        }
    }
    let n = n_avg as f64;
    SweepRecord {
        currents: currents.to_vec(),
        mean_v: sum_v.into_iter().map(|s| s / n).collect(),
        fraction: resistive.into_iter().map(|r| r as f64 / n).collect(),
    }
}
