use rayon::prelude::*;

use super::pulse::{crossing, pulse_point};
use super::{check_grid, TrialPlan};
use crate::device::EmulatorConfig;
use crate::error::Result;
use crate::noise::OpId;

/// Switching probability over (flux bias, pulse amplitude).
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMap {
    pub i_dc: Vec<f64>,
    pub i_sq: Vec<f64>,
    /// `p_sw[row][col]` for `i_dc[row]`, `i_sq[col]`.
    pub p_sw: Vec<Vec<f64>>,
    pub n_pulses: usize,
}

impl ModulationMap {
    /// Pulse amplitude where each row first reaches `level`, linearly
    /// interpolated on the `i_sq` grid. `None` if the row never gets there.
    pub fn contour(&self, level: f64) -> Vec<Option<f64>> {
        self.p_sw
            .iter()
            .map(|row| crossing(&self.i_sq, row, level))
            .collect()
    }
}

pub fn modulation_map(
    cfg: &EmulatorConfig,
    i_dc_grid: &[f64],
    i_sq_grid: &[f64],
    plan: &TrialPlan,
) -> Result<ModulationMap> {
    cfg.validate()?;
    plan.validate()?;
    check_grid("i_dc", i_dc_grid)?;
    check_grid("i_sq", i_sq_grid)?;
    let noise = cfg.noise(plan.seed)?;
    let thresholds = i_dc_grid
        .iter()
        .map(|&i| cfg.threshold_mean(i))
        .collect::<Result<Vec<_>>>()?;
    let n_sq = i_sq_grid.len();
    let n = plan.n_trials as f64;
    let p_sw = thresholds
        .par_iter()
        .enumerate()
        .map(|(row, &v_th)| {
            i_sq_grid
                .iter()
                .enumerate()
                .map(|(col, &i)| {
                    let point = (row * n_sq + col) as u64;
                    let (k, _) = pulse_point(cfg, &noise, OpId::ModulationMap, point, i, v_th, plan);
                    k as f64 / n
                })
                .collect()
        })
        .collect();
    Ok(ModulationMap {
        i_dc: i_dc_grid.to_vec(),
        i_sq: i_sq_grid.to_vec(),
        p_sw,
        n_pulses: plan.n_trials,
    })
}
