//! Seeded Gaussian threshold noise with keyed substreams.
//!
//! Every draw is addressed by `(seed, op, point, trial, draw index)`. A
//! substream for `(op, point, trial)` is an independent ChaCha8 generator whose
//! key is a splitmix64 mix of the address, so results never depend on the order
//! in which trials are evaluated or on the number of worker threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Protocol identifiers used as the first substream key component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum OpId {
    Pulse = 1,
    DcIv = 2,
    ModulationMap = 3,
    FindIsw = 4,
    Histogram = 5,
    Feedback = 6,
    Session = 7,
    Calibration = 8,
}

/// How the draws of one point are spread over its trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Each trial has its own substream; draws are i.i.d. across trials.
    Independent,
    /// Latin-hypercube: the `n` trials of a point receive one draw from each
    /// of `n` equiprobable strata, in a random order. Each trial's draw is
    /// still exactly Gaussian and trials at different points stay independent,
    /// so every trial trajectory has the same law as under `Independent`; only
    /// the ensemble average has lower variance.
    #[default]
    Stratified,
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" | "independent" => Ok(Sampling::Independent),
            "stratified" | "lhs" => Ok(Sampling::Stratified),
            other => Err(Error::invalid(format!("unknown sampling mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Sampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sampling::Independent => "iid",
            Sampling::Stratified => "stratified",
        })
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STRATA_TAG: u64 = 0x5354_5241_5441_0000;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn substream_key(seed: u64, op: OpId, point: u64, trial: u64) -> u64 {
    let mut k = splitmix(seed);
    k = splitmix(k ^ op as u64);
    k = splitmix(k ^ point);
    splitmix(k ^ trial)
}

/// Sequential standard-normal draws of one substream.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sigma: f64,
}

impl NoiseStream {
    /// Next draw in volts.
    pub fn next_draw(&mut self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sigma * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSource {
    /// Standard deviation of the threshold noise (V).
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSource {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::range("noise_sigma", "must be finite and >= 0"));
        }
        Ok(NoiseSource { sigma, seed })
    }

    pub fn stream(&self, op: OpId, point: u64, trial: u64) -> NoiseStream {
        NoiseStream {
            rng: ChaCha8Rng::seed_from_u64(substream_key(self.seed, op, point, trial)),
            sigma: self.sigma,
        }
    }

    /// First draw of the `(op, point, trial)` substream, in volts.
    pub fn draw(&self, op: OpId, point: u64, trial: u64) -> f64 {
        self.stream(op, point, trial).next_draw()
    }

    /// Unit-variance draws for trials `0..n` of one point.
    pub fn standard_block(&self, op: OpId, point: u64, n: usize, sampling: Sampling) -> Vec<f64> {
        standard_block(self.seed, op, point, n, sampling)
    }

    /// Draws in volts for trials `0..n` of one point.
    pub fn block(&self, op: OpId, point: u64, n: usize, sampling: Sampling) -> Vec<f64> {
        if self.sigma == 0.0 {
            return vec![0.0; n];
        }
        let mut z = self.standard_block(op, point, n, sampling);
        z.iter_mut().for_each(|v| *v *= self.sigma);
        z
    }
}

pub(crate) fn standard_block(seed: u64, op: OpId, point: u64, n: usize, sampling: Sampling) -> Vec<f64> {
    match sampling {
        Sampling::Independent => (0..n as u64)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(substream_key(seed, op, point, t));
                StandardNormal.sample(&mut rng)
            })
            .collect(),
        Sampling::Stratified => {
            let normal = Normal::standard();
            let mut rng = ChaCha8Rng::seed_from_u64(substream_key(seed, op, point, STRATA_TAG));
            let mut strata: Vec<u32> = (0..n as u32).collect();
            strata.shuffle(&mut rng);
            strata
                .into_iter()
                .map(|s| {
                    let jitter: f64 = rng.sample(Open01);
                    normal.inverse_cdf((s as f64 + jitter) / n as f64)
                })
                .collect()
        }
    }
}
