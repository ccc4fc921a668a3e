//! Parameter distributions. Slot `s` is sampled from its own stream seeded by
//! `(seed, s)`, so draws are independent across slots and reproducible.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::seed::{mix_seed, rng_from};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SamplingLaw {
    UniformAngle { lo: f64, hi: f64 },
    DiscreteSet { values: Vec<f64> },
    Gaussian { mean: f64, std: f64 },
}

impl SamplingLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            SamplingLaw::UniformAngle { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(SimError::Argument(format!("uniform range [{lo}, {hi}] invalid")));
                }
            }
            SamplingLaw::DiscreteSet { values } => {
                if values.is_empty() {
                    return Err(SimError::Argument("discrete set is empty".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::Argument("discrete set has non-finite values".into()));
                }
            }
            SamplingLaw::Gaussian { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && *std >= 0.0) {
                    return Err(SimError::Argument(format!("gaussian mean {mean}, std {std} invalid")));
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            SamplingLaw::UniformAngle { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            SamplingLaw::DiscreteSet { values } => values[rng.random_range(0..values.len())],
            SamplingLaw::Gaussian { mean, std } => {
                if *std == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *std).expect("validated").sample(rng)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDistribution {
    #[serde(flatten)]
    pub law: SamplingLaw,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<usize, SamplingLaw>,
}

impl ParamDistribution {
    pub fn new(law: SamplingLaw) -> Self {
        ParamDistribution { law, overrides: BTreeMap::new() }
    }

    /// Uniform over `[0, 2*pi)`.
    pub fn uniform_angle() -> Self {
        Self::new(SamplingLaw::UniformAngle { lo: 0.0, hi: 2.0 * PI })
    }

    /// The set `{0, pi/2, pi, 3pi/2, 2pi}`.
    pub fn quarter_turns() -> Self {
        Self::new(SamplingLaw::DiscreteSet { values: vec![0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI] })
    }

    /// Zero-mean Gaussian with variance `c / depth`; `c = 1/4` by default.
    pub fn gaussian_init(depth: usize, c: Option<f64>) -> Self {
        let c = c.unwrap_or(0.25);
        Self::new(SamplingLaw::Gaussian { mean: 0.0, std: (c / depth.max(1) as f64).sqrt() })
    }

    /// Uniform in `[-w, w]` with `w = c / (n * m * depth)`, `c = pi` by default.
    pub fn small_angle(n: usize, m: usize, depth: usize, c: Option<f64>) -> Self {
        let w = c.unwrap_or(PI) / (n * m * depth).max(1) as f64;
        Self::new(SamplingLaw::UniformAngle { lo: -w, hi: w })
    }

    pub fn with_override(mut self, slot: usize, law: SamplingLaw) -> Self {
        self.overrides.insert(slot, law);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        self.overrides.values().try_for_each(SamplingLaw::validate)
    }

    pub fn law_for(&self, slot: usize) -> &SamplingLaw {
        self.overrides.get(&slot).unwrap_or(&self.law)
    }

    pub fn sample_slot(&self, slot: usize, seed: u64) -> f64 {
        let mut rng = rng_from(mix_seed(seed, slot as u64));
        self.law_for(slot).draw(&mut rng)
    }

    /// Parameter vector of length `n_params`, a pure function of `seed`.
    pub fn sample(&self, n_params: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        Ok((0..n_params).map(|s| self.sample_slot(s, seed)).collect())
    }
}

pub fn sample_params(dist: &ParamDistribution, n_params: usize, seed: u64) -> Result<Vec<f64>> {
    dist.sample(n_params, seed)
}
