use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::Covariate;

use super::estimate::ParamEstimate;

/// Bernoulli responses with per-arm success probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub p_a: f64,
    pub p_b: f64,
}

impl BinaryModel {
    /// Accepts the closed interval; limits additionally require interior values
    /// (see [`BinaryModel::check_interior`]).
    pub fn new(p_a: f64, p_b: f64) -> Result<Self> {
        for (name, p) in [("p_a", p_a), ("p_b", p_b)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ModelInput(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(Self { p_a, p_b })
    }

    pub fn check_interior(&self) -> Result<()> {
        if self.p_a > 0.0 && self.p_a < 1.0 && self.p_b > 0.0 && self.p_b < 1.0 {
            Ok(())
        } else {
            Err(Error::ModelInput("success probabilities must lie strictly inside (0, 1)".into()))
        }
    }
}

/// `E(Y) = μ_arm + z·β_arm` with a scalar covariate and Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearInteractionModel {
    pub mu_a: f64,
    pub mu_b: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub noise_sd: f64,
}

impl LinearInteractionModel {
    pub fn new(mu_a: f64, mu_b: f64, beta_a: f64, beta_b: f64, noise_sd: f64) -> Result<Self> {
        if beta_a == beta_b {
            return Err(Error::DegenerateModel("beta_a must differ from beta_b".into()));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::ModelInput(format!("noise_sd = {noise_sd} must be nonnegative")));
        }
        Ok(Self { mu_a, mu_b, beta_a, beta_b, noise_sd })
    }
}

/// Known vector function `f̃(z)` of the covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// Scalar covariate `z ↦ [z]`.
    Identity,
    /// Dummy coding of two categorical covariates with `rows` and `cols`
    /// levels: indicators of `t_1..t_J`, of `w_1..w_L`, and optionally of
    /// every interaction `t_j·w_l` with `j, l ≥ 1`.
    Dummies { rows: usize, cols: usize, interactions: bool },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match *self {
            FeatureMap::Identity => 1,
            FeatureMap::Dummies { rows, cols, interactions } => {
                let (j, l) = (rows - 1, cols - 1);
                j + l + if interactions { j * l } else { 0 }
            }
        }
    }

    pub fn apply(&self, covariate: &Covariate) -> Result<Vec<f64>> {
        match (self, covariate) {
            (FeatureMap::Identity, Covariate::Scalar { z }) => Ok(vec![*z]),
            (&FeatureMap::Dummies { rows, cols, interactions }, &Covariate::Stratum { t, w }) => {
                if t >= rows || w >= cols {
                    return Err(Error::StratumOutOfRange { t, w, rows, cols });
                }
                let mut v = vec![0.0; self.dim()];
                if t >= 1 {
                    v[t - 1] = 1.0;
                }
                if w >= 1 {
                    v[rows - 1 + w - 1] = 1.0;
                }
                if interactions && t >= 1 && w >= 1 {
                    v[rows - 1 + cols - 1 + (t - 1) * (cols - 1) + (w - 1)] = 1.0;
                }
                Ok(v)
            }
            _ => Err(Error::ModelInput("covariate kind does not match the feature map".into())),
        }
    }
}

/// `E(Y) = μ_arm + f̃(z)ᵗβ` with a common slope vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCommonSlopeModel {
    pub mu_a: f64,
    pub mu_b: f64,
    pub beta: Vec<f64>,
    pub features: FeatureMap,
    pub noise_sd: f64,
}

impl LinearCommonSlopeModel {
    pub fn new(mu_a: f64, mu_b: f64, beta: Vec<f64>, features: FeatureMap, noise_sd: f64) -> Result<Self> {
        if beta.len() != features.dim() {
            return Err(Error::ModelInput(format!(
                "beta has {} entries, feature map has dimension {}",
                beta.len(),
                features.dim()
            )));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::ModelInput(format!("noise_sd = {noise_sd} must be nonnegative")));
        }
        Ok(Self { mu_a, mu_b, beta, features, noise_sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseModel {
    Binary(BinaryModel),
    LinearInteraction(LinearInteractionModel),
    LinearCommonSlope(LinearCommonSlopeModel),
}

/// Parameter layout of the estimator attached to a response model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelShape {
    Binary,
    /// `(μ_A, μ_B, β_A, β_B)`.
    Interaction,
    /// `(μ_A, μ_B, β...)`.
    CommonSlope { features: FeatureMap },
}

impl ResponseModel {
    pub fn shape(&self) -> ModelShape {
        match self {
            ResponseModel::Binary(_) => ModelShape::Binary,
            ResponseModel::LinearInteraction(_) => ModelShape::Interaction,
            ResponseModel::LinearCommonSlope(m) => ModelShape::CommonSlope { features: m.features.clone() },
        }
    }

    pub fn needs_covariate(&self) -> bool {
        !matches!(self, ResponseModel::Binary(_))
    }

    /// The generating parameters in estimator layout.
    pub fn true_params(&self) -> ParamEstimate {
        match self {
            ResponseModel::Binary(m) => ParamEstimate::Binary { p_a: m.p_a, p_b: m.p_b },
            ResponseModel::LinearInteraction(m) => ParamEstimate::Linear {
                coef: vec![m.mu_a, m.mu_b, m.beta_a, m.beta_b],
                shape: ModelShape::Interaction,
                ridged: false,
            },
            ResponseModel::LinearCommonSlope(m) => {
                let mut coef = vec![m.mu_a, m.mu_b];
                coef.extend_from_slice(&m.beta);
                ParamEstimate::Linear { coef, shape: self.shape(), ridged: false }
            }
        }
    }
}

/// Draws one response for a subject on `arm` (0 = A, 1 = B).
pub fn sample_response<R: Rng + ?Sized>(
    model: &ResponseModel,
    arm: usize,
    covariate: Option<&Covariate>,
    rng: &mut R,
) -> Result<f64> {
    if arm > 1 {
        return Err(Error::ArmOutOfRange { arm, arms: 2 });
    }
    let on_a = arm == 0;
    match model {
        ResponseModel::Binary(m) => {
            let p = if on_a { m.p_a } else { m.p_b };
            Ok(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
        }
        ResponseModel::LinearInteraction(m) => {
            let z = covariate
                .and_then(|c| c.scalar())
                .ok_or_else(|| Error::ModelInput("linear interaction model needs a scalar covariate".into()))?;
            let mean = if on_a { m.mu_a + z * m.beta_a } else { m.mu_b + z * m.beta_b };
            let noise: f64 = StandardNormal.sample(rng);
            Ok(mean + m.noise_sd * noise)
        }
        ResponseModel::LinearCommonSlope(m) => {
            let c = covariate
                .ok_or_else(|| Error::ModelInput("common-slope model needs a covariate".into()))?;
            let f = m.features.apply(c)?;
            let base = if on_a { m.mu_a } else { m.mu_b };
            let mean = base + f.iter().zip(&m.beta).map(|(a, b)| a * b).sum::<f64>();
            let noise: f64 = StandardNormal.sample(rng);
            Ok(mean + m.noise_sd * noise)
        }
    }
}
