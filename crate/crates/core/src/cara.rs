//! Covariate-adjusted response-adaptive rules for a continuous covariate.

use rand::Rng;

use crate::downcrossing::{find_downcrossing, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::limit::{Limit, LimitMethod};
use crate::models::{normal_cdf, CovariateSampler, ParamEstimate, ResponseModel, TargetFunction};
use crate::state::Covariate;

#[derive(Debug, Clone)]
pub enum CaraRule {
    /// "The larger the better": A whenever its estimated mean response is higher.
    Eth,
    /// Assigns with probability `π*(γ̂, z)`.
    ZhangTarget { target: TargetFunction },
    /// Covariate-adjusted DBCD: `φ(x; a, b)` with `a = ρ̂_n`, `b = π*(γ̂, z)`.
    ZhangHu { nu: f64, target: TargetFunction },
}

/// `b(a/x)^ν / [b(a/x)^ν + (1 − b)((1 − a)/(1 − x))^ν]`.
pub fn zhang_hu_function(x: f64, a: f64, b: f64, nu: f64) -> f64 {
    if nu == 0.0 {
        return b;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let log_ratio = ((1.0 - b) / b).ln() + nu * ((1.0 - a) * x / (a * (1.0 - x))).ln();
    1.0 / (1.0 + log_ratio.exp())
}

impl CaraRule {
    pub fn name(&self) -> &'static str {
        match self {
            CaraRule::Eth => "ETH",
            CaraRule::ZhangTarget { .. } => "ZhangTarget",
            CaraRule::ZhangHu { .. } => "ZhangHu",
        }
    }

    pub fn target(&self) -> Option<&TargetFunction> {
        match self {
            CaraRule::Eth => None,
            CaraRule::ZhangTarget { target } | CaraRule::ZhangHu { target, .. } => Some(target),
        }
    }

    pub fn needs_rho(&self) -> bool {
        matches!(self, CaraRule::ZhangHu { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.target() {
            t.validate()?;
        }
        match self {
            CaraRule::ZhangHu { nu, .. } if !(*nu >= 0.0 && nu.is_finite()) => {
                Err(Error::InvalidRule(format!("ν = {nu} must be nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

/// Probability of arm A for the incoming subject with covariate `z`.
/// `rho` is the running `ρ̂_n`, required by the Zhang–Hu rule only.
pub fn cara_probability(
    rule: &CaraRule,
    pi_n: f64,
    est: &ParamEstimate,
    rho: Option<f64>,
    z: &Covariate,
) -> Result<f64> {
    match rule {
        CaraRule::Eth => {
            let d = est.treatment_difference(Some(z))?;
            Ok(if d > 0.0 {
                1.0
            } else if d < 0.0 {
                0.0
            } else {
                0.5
            })
        }
        CaraRule::ZhangTarget { target } => target.eval(est, Some(z)),
        CaraRule::ZhangHu { nu, target } => {
            let a = rho.ok_or_else(|| Error::InsufficientData("ρ̂ has not been computed".into()))?;
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::TargetRange(a));
            }
            let b = target.eval(est, Some(z))?;
            Ok(zhang_hu_function(pi_n, a, b, *nu))
        }
    }
}

/// `ρ̂_n = n⁻¹ Σ π*(γ̂_n, z_i)` re-evaluated under the current estimate.
///
/// Past covariates are kept rather than past target values, because every
/// term changes when `γ̂_n` does.
#[derive(Debug, Clone, Default)]
pub struct RhoTracker {
    covariates: Vec<Covariate>,
}

impl RhoTracker {
    pub fn observe(&mut self, z: Covariate) {
        self.covariates.push(z);
    }

    pub fn rho(&self, target: &TargetFunction, est: &ParamEstimate) -> Result<f64> {
        if !target.depends_on_covariate() {
            return target.eval(est, None);
        }
        if self.covariates.is_empty() {
            return Err(Error::InsufficientData("no covariates observed".into()));
        }
        let mut sum = 0.0;
        for z in &self.covariates {
            sum += target.eval(est, Some(z))?;
        }
        Ok(sum / self.covariates.len() as f64)
    }
}

fn eth_limit_normal(mu_diff: f64, beta_diff: f64, mean: f64, sd: f64) -> Result<f64> {
    if beta_diff == 0.0 {
        return Err(Error::DegenerateModel("beta_a must differ from beta_b".into()));
    }
    Ok(normal_cdf((mu_diff + beta_diff * mean) / (beta_diff.abs() * sd)))
}

/// `1 − Φ((μ_B − μ_A)/|β_A − β_B|)` for a standard-normal covariate.
pub fn eth_limit(mu_a: f64, mu_b: f64, beta_a: f64, beta_b: f64) -> Result<f64> {
    eth_limit_normal(mu_a - mu_b, beta_a - beta_b, 0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averaged {
    pub mean: f64,
    pub standard_error: f64,
}

/// `E_Z[φ(π; γ, z)]` over a fixed covariate sample (common random numbers).
pub fn averaged_rule_on(
    rule: &CaraRule,
    pi: f64,
    est: &ParamEstimate,
    rho: Option<f64>,
    zs: &[Covariate],
) -> Result<Averaged> {
    if zs.is_empty() {
        return Err(Error::Config("averaged rule needs at least one covariate sample".into()));
    }
    let values = zs
        .iter()
        .map(|z| cara_probability(rule, pi, est, rho, z))
        .collect::<Result<Vec<f64>>>()?;
    if values.iter().all(|&v| v == values[0]) {
        return Ok(Averaged { mean: values[0], standard_error: 0.0 });
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(Averaged { mean, standard_error: (var / m).sqrt() })
}

/// Monte Carlo average of the rule over fresh covariate draws.
#[allow(clippy::too_many_arguments)]
pub fn averaged_rule<R: Rng + ?Sized>(
    rule: &CaraRule,
    pi: f64,
    est: &ParamEstimate,
    rho: Option<f64>,
    sampler: &CovariateSampler,
    mc_samples: usize,
    rng: &mut R,
) -> Result<Averaged> {
    let zs = draw(sampler, mc_samples, rng)?;
    averaged_rule_on(rule, pi, est, rho, &zs)
}

fn draw<R: Rng + ?Sized>(sampler: &CovariateSampler, m: usize, rng: &mut R) -> Result<Vec<Covariate>> {
    if m == 0 {
        return Err(Error::Config("mc_samples must be at least 1".into()));
    }
    (0..m).map(|_| sampler.sample(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaraLimitMode {
    ClosedForm,
    /// Downcrossing of the averaged rule. With `linear_in_features` the rule
    /// is instead evaluated once at the mean covariate.
    Solver { linear_in_features: bool },
}

/// `E_Z[π*(γ, Z)]` with its Monte Carlo standard error.
fn expected_target(target: &TargetFunction, est: &ParamEstimate, zs: &[Covariate]) -> Result<Averaged> {
    if !target.depends_on_covariate() {
        return Ok(Averaged { mean: target.eval(est, None)?, standard_error: 0.0 });
    }
    averaged_rule_on(&CaraRule::ZhangTarget { target: target.clone() }, 0.5, est, None, zs)
}

pub fn cara_limit<R: Rng + ?Sized>(
    rule: &CaraRule,
    model: &ResponseModel,
    sampler: &CovariateSampler,
    mode: CaraLimitMode,
    mc_samples: usize,
    rng: &mut R,
) -> Result<Limit> {
    rule.validate()?;
    sampler.validate()?;
    let est = model.true_params();
    let zs = draw(sampler, mc_samples, rng)?;
    let rho = match rule {
        CaraRule::ZhangHu { target, .. } => Some(expected_target(target, &est, &zs)?.mean),
        _ => None,
    };
    match mode {
        CaraLimitMode::ClosedForm => {
            let (t, se) = match rule {
                CaraRule::Eth => {
                    let (ResponseModel::LinearInteraction(m), CovariateSampler::Normal { mean, sd }) = (model, sampler)
                    else {
                        return Err(Error::Config(
                            "closed-form ETH limit needs the interaction model and a normal covariate".into(),
                        ));
                    };
                    (eth_limit_normal(m.mu_a - m.mu_b, m.beta_a - m.beta_b, *mean, *sd)?, 0.0)
                }
                CaraRule::ZhangTarget { target } | CaraRule::ZhangHu { target, .. } => {
                    let a = expected_target(target, &est, &zs)?;
                    (a.mean, a.standard_error)
                }
            };
            let method = if se > 0.0 {
                LimitMethod::MonteCarlo { standard_error: se, crossing: None }
            } else {
                LimitMethod::ClosedForm
            };
            Ok(Limit { values: vec![t], scalar: t, residual: 0.0, method })
        }
        CaraLimitMode::Solver { linear_in_features } => {
            let mean_z = if linear_in_features {
                let m = zs.iter().map(|z| z.scalar()).sum::<Option<f64>>().ok_or_else(|| {
                    Error::Config("linear-in-features mode needs a scalar covariate".into())
                })? / zs.len() as f64;
                Some(vec![Covariate::Scalar { z: m }])
            } else {
                None
            };
            let sample = mean_z.as_deref().unwrap_or(&zs);
            let f = |x: f64| averaged_rule_on(rule, x, &est, rho, sample).map(|a| a.mean).unwrap_or(f64::NAN);
            let r = find_downcrossing(&f, DEFAULT_TOL)?;
            let se = averaged_rule_on(rule, r.t, &est, rho, &zs)?.standard_error;
            Ok(Limit {
                values: vec![r.t],
                scalar: r.t,
                residual: r.residual,
                method: LimitMethod::MonteCarlo { standard_error: se, crossing: Some(r.kind) },
            })
        }
    }
}
