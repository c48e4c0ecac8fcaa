//! Response-adaptive rules: the probability reads `π_n` and the current
//! parameter estimate `γ̂_n`, usually through a target `y = π*(γ̂_n)`.

use crate::downcrossing::{find_downcrossing, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::func::{check_symmetric_decreasing, RealFn};
use crate::limit::Limit;
use crate::models::{ParamEstimate, TargetFunction};

#[derive(Debug, Clone)]
pub enum RaRule {
    /// `ρ·g1(p̂_A − p̂_B) + (1 − ρ)·g2(2x − 1)`.
    Dawd { rho: f64, g1: RealFn, g2: RealFn },
    /// Doubly adaptive biased coin with the power allocation function.
    Dbcd { nu: f64, target: TargetFunction },
    /// `αy` above the target, `y` on it, `1 − α(1 − y)` below it.
    Erade { alpha: f64, target: TargetFunction },
    /// `y^τ` above the target, `y` on it, `y^{1/τ}` below it.
    Power { tau: f64, target: TargetFunction },
    /// Assigns with probability equal to the estimated target.
    Sml { target: TargetFunction },
}

/// DBCD allocation function
/// `y(y/x)^ν / [y(y/x)^ν + (1 − y)((1 − y)/(1 − x))^ν]`,
/// with the limits `1` at `x = 0` and `0` at `x = 1`.
pub fn dbcd_function(x: f64, y: f64, nu: f64) -> f64 {
    if nu == 0.0 {
        return y;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    // ratio of the B term to the A term, evaluated in logs for stability
    let log_ratio = ((1.0 - y) / y).ln() + nu * ((x * (1.0 - y)) / (y * (1.0 - x))).ln();
    1.0 / (1.0 + log_ratio.exp())
}

impl RaRule {
    pub fn name(&self) -> &'static str {
        match self {
            RaRule::Dawd { .. } => "DAWD",
            RaRule::Dbcd { .. } => "DBCD",
            RaRule::Erade { .. } => "ERADE",
            RaRule::Power { .. } => "PowerRule",
            RaRule::Sml { .. } => "SML",
        }
    }

    /// DAWD with `g1(u) = (1 + u)/2` and `g2(u) = (1 − u)/2`.
    pub fn dawd_default(rho: f64) -> Self {
        RaRule::Dawd { rho, g1: RealFn::linear_increasing(), g2: RealFn::linear_decreasing() }
    }

    pub fn target(&self) -> Option<&TargetFunction> {
        match self {
            RaRule::Dawd { .. } => None,
            RaRule::Dbcd { target, .. }
            | RaRule::Erade { target, .. }
            | RaRule::Power { target, .. }
            | RaRule::Sml { target } => Some(target),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.target() {
            t.validate()?;
            if t.depends_on_covariate() && !matches!(t, TargetFunction::Custom { .. }) {
                return Err(Error::InvalidRule(format!(
                    "target {} reads covariates; use a covariate-adjusted rule",
                    t.name()
                )));
            }
        }
        match self {
            RaRule::Dawd { rho, g1, g2 } => {
                if !(0.0..1.0).contains(rho) {
                    return Err(Error::InvalidRule(format!("DAWD weight ρ = {rho} outside [0, 1)")));
                }
                check_dawd_functions(g1, g2)
            }
            RaRule::Dbcd { nu, .. } if !(*nu >= 0.0 && nu.is_finite()) => {
                Err(Error::InvalidRule(format!("DBCD ν = {nu} must be nonnegative")))
            }
            RaRule::Erade { alpha, .. } if !(0.0..1.0).contains(alpha) => {
                Err(Error::InvalidRule(format!("ERADE α = {alpha} outside [0, 1)")))
            }
            RaRule::Power { tau, .. } if !(*tau >= 1.0 && tau.is_finite()) => {
                Err(Error::InvalidRule(format!("power τ = {tau} must be at least 1")))
            }
            _ => Ok(()),
        }
    }

    /// The value the rule reads from the estimate: `π*(γ̂)` for target
    /// rules, the estimated treatment difference for DAWD.
    pub fn signal(&self, est: &ParamEstimate) -> Result<f64> {
        match self.target() {
            Some(t) => t.eval(est, None),
            None => est.treatment_difference(None),
        }
    }

    /// `φ(x; y)` with `y` the signal.
    pub fn probability_at(&self, x: f64, y: f64) -> f64 {
        match *self {
            RaRule::Dawd { rho, ref g1, ref g2 } => rho * g1.eval(y) + (1.0 - rho) * g2.eval(2.0 * x - 1.0),
            RaRule::Dbcd { nu, .. } => dbcd_function(x, y, nu),
            RaRule::Erade { alpha, .. } => {
                if x > y {
                    alpha * y
                } else if x < y {
                    1.0 - alpha * (1.0 - y)
                } else {
                    y
                }
            }
            RaRule::Power { tau, .. } => {
                if x > y {
                    y.powf(tau)
                } else if x < y {
                    y.powf(1.0 / tau)
                } else {
                    y
                }
            }
            RaRule::Sml { .. } => y,
        }
    }
}

fn check_dawd_functions(g1: &RealFn, g2: &RealFn) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    if !close(g1.eval(0.0), 0.5) || !close(g2.eval(0.0), 0.5) {
        return Err(Error::InvalidRule("DAWD needs g1(0) = g2(0) = 1/2".into()));
    }
    if !close(g1.eval(1.0), 1.0) || !close(g2.eval(-1.0), 1.0) {
        return Err(Error::InvalidRule("DAWD needs g1(1) = g2(−1) = 1".into()));
    }
    let g = g1.clone();
    let mirrored = RealFn::new(format!("{}(−u)", g1.name()), move |u| g.eval(-u));
    check_symmetric_decreasing(&mirrored, 1.0, false)?;
    check_symmetric_decreasing(g2, 1.0, true)
}

/// Allocation probability for arm A given `π_n` and the signal of the estimate.
pub fn ra_probability(rule: &RaRule, pi_n: f64, signal: f64) -> Result<f64> {
    if rule.target().is_some() && !(signal > 0.0 && signal < 1.0) {
        return Err(Error::TargetRange(signal));
    }
    if !(0.0..=1.0).contains(&pi_n) {
        return Err(Error::Domain { x: pi_n, value: pi_n });
    }
    Ok(rule.probability_at(pi_n, signal))
}

pub fn ra_limit(rule: &RaRule, true_params: &ParamEstimate) -> Result<f64> {
    Ok(ra_limit_detail(rule, true_params)?.scalar)
}

/// Target rules converge to `π*(γ)`; DAWD to the root of `φ(x; γ) = x`.
pub fn ra_limit_detail(rule: &RaRule, true_params: &ParamEstimate) -> Result<Limit> {
    rule.validate()?;
    if let Some((a, b)) = true_params.binary() {
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(Error::ModelInput("success probabilities must lie strictly inside (0, 1)".into()));
        }
    }
    let y = rule.signal(true_params)?;
    match rule {
        RaRule::Dawd { .. } => {
            let r = find_downcrossing(&|x: f64| rule.probability_at(x, y), DEFAULT_TOL)?;
            Ok(Limit::from_scalar(&r))
        }
        _ => Ok(Limit::closed_form(y)),
    }
}
