use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::state::Covariate;

/// Source of incoming-subject covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateSampler {
    /// Scalar `N(mean, sd²)`; the default is standard normal.
    Normal { mean: f64, sd: f64 },
    /// Joint distribution `p[t][w]` of two categorical covariates, stored row-major.
    Categorical { rows: usize, cols: usize, probs: Vec<f64> },
}

impl CovariateSampler {
    pub fn standard_normal() -> Self {
        CovariateSampler::Normal { mean: 0.0, sd: 1.0 }
    }

    /// Uniform over a `rows × cols` grid of strata.
    pub fn uniform_strata(rows: usize, cols: usize) -> Result<Self> {
        let k = rows * cols;
        Self::categorical(rows, cols, vec![1.0 / k as f64; k])
    }

    pub fn categorical(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        if rows < 1 || cols < 1 || probs.len() != rows * cols {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for a {rows}x{cols} table",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(CovariateSampler::Categorical { rows, cols, probs })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovariateSampler::Normal { mean, sd } => {
                if mean.is_finite() && sd.is_finite() && *sd > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidDistribution(format!("normal({mean}, {sd})")))
                }
            }
            CovariateSampler::Categorical { rows, cols, probs } => {
                Self::categorical(*rows, *cols, probs.clone()).map(|_| ())
            }
        }
    }

    /// Table dimensions for categorical samplers.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self {
            CovariateSampler::Categorical { rows, cols, .. } => Some((*rows, *cols)),
            CovariateSampler::Normal { .. } => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.shape().is_some()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Covariate> {
        match self {
            &CovariateSampler::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
                Ok(Covariate::Scalar { z: d.sample(rng) })
            }
            CovariateSampler::Categorical { cols, probs, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                // rounding can leave u ≥ Σp; fall back to the last positive cell
                if u >= acc {
                    idx = probs.iter().rposition(|&p| p > 0.0).unwrap_or(idx);
                }
                Ok(Covariate::Stratum { t: idx / cols, w: idx % cols })
            }
        }
    }
}

/// Running summary `S_n` of the covariates seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSummary {
    n: u64,
    sum: f64,
    sum_sq: f64,
    strata: Option<(usize, usize, Vec<u64>)>,
}

impl CovariateSummary {
    pub fn continuous() -> Self {
        Self { n: 0, sum: 0.0, sum_sq: 0.0, strata: None }
    }

    pub fn categorical(rows: usize, cols: usize) -> Self {
        Self { n: 0, sum: 0.0, sum_sq: 0.0, strata: Some((rows, cols, vec![0; rows * cols])) }
    }

    pub fn for_sampler(sampler: &CovariateSampler) -> Self {
        match sampler.shape() {
            Some((r, c)) => Self::categorical(r, c),
            None => Self::continuous(),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn update(&self, z: &Covariate) -> Result<Self> {
        let mut next = self.clone();
        next.observe(z)?;
        Ok(next)
    }

    pub fn observe(&mut self, z: &Covariate) -> Result<()> {
        match (&mut self.strata, *z) {
            (None, Covariate::Scalar { z }) => {
                self.sum += z;
                self.sum_sq += z * z;
            }
            (Some((rows, cols, counts)), Covariate::Stratum { t, w }) => {
                if t >= *rows || w >= *cols {
                    return Err(Error::StratumOutOfRange { t, w, rows: *rows, cols: *cols });
                }
                counts[t * *cols + w] += 1;
            }
            (None, _) => return Err(Error::ModelInput("stratum label given to a continuous summary".into())),
            (Some(_), _) => return Err(Error::ModelInput("scalar covariate given to a categorical summary".into())),
        }
        self.n += 1;
        Ok(())
    }

    pub fn first_moment(&self) -> Option<f64> {
        (self.strata.is_none() && self.n > 0).then(|| self.sum / self.n as f64)
    }

    pub fn second_moment(&self) -> Option<f64> {
        (self.strata.is_none() && self.n > 0).then(|| self.sum_sq / self.n as f64)
    }

    /// Empirical joint frequencies `p̂_{jl}`, row-major.
    pub fn stratum_freqs(&self) -> Option<Vec<f64>> {
        let (_, _, counts) = self.strata.as_ref()?;
        if self.n == 0 {
            return None;
        }
        Some(counts.iter().map(|&c| c as f64 / self.n as f64).collect())
    }
}
