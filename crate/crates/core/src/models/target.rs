use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::state::Covariate;

use super::estimate::ParamEstimate;
use super::normal::normal_cdf;

type TargetFn = dyn Fn(&ParamEstimate, Option<&Covariate>) -> f64 + Send + Sync;

/// Target allocation `π*(γ)` or `π*(γ, z)`.
#[derive(Clone)]
pub enum TargetFunction {
    Constant(f64),
    /// `√p_A / (√p_A + √p_B)`, the allocation minimising expected failures
    /// at fixed variance of the difference of success rates.
    Rsihr,
    /// `σ_A / (σ_A + σ_B)` with `σ² = p(1 − p)`, minimising the variance
    /// of the difference at fixed sample size.
    Neyman,
    /// `Φ(d(z) / scale)` where `d(z)` is the estimated mean advantage of A.
    Probit { scale: f64 },
    Custom { name: String, f: Arc<TargetFn>, continuous: bool },
}

const PROBIT_CLIP: f64 = 1e-9;

impl TargetFunction {
    pub fn custom(
        name: impl Into<String>,
        continuous: bool,
        f: impl Fn(&ParamEstimate, Option<&Covariate>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TargetFunction::Custom { name: name.into(), f: Arc::new(f), continuous }
    }

    pub fn name(&self) -> String {
        match self {
            TargetFunction::Constant(c) => format!("constant:{c}"),
            TargetFunction::Rsihr => "rsihr".into(),
            TargetFunction::Neyman => "neyman".into(),
            TargetFunction::Probit { scale } => format!("probit:{scale}"),
            TargetFunction::Custom { name, .. } => name.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetFunction::Constant(c) if !(c > 0.0 && c < 1.0) => Err(Error::TargetRange(c)),
            TargetFunction::Probit { scale } if !(scale.is_finite() && scale > 0.0) => {
                Err(Error::InvalidRule(format!("probit scale {scale} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Declared continuity in the parameters; custom targets carry an
    /// unverified claim.
    pub fn is_continuous(&self) -> bool {
        match self {
            TargetFunction::Custom { continuous, .. } => *continuous,
            _ => true,
        }
    }

    pub fn uses_estimates(&self) -> bool {
        !matches!(self, TargetFunction::Constant(_))
    }

    pub fn depends_on_covariate(&self) -> bool {
        matches!(self, TargetFunction::Probit { .. } | TargetFunction::Custom { .. })
    }

    /// Evaluates the target; the value must lie strictly inside `(0, 1)`.
    pub fn eval(&self, est: &ParamEstimate, z: Option<&Covariate>) -> Result<f64> {
        let binary = || {
            est.binary()
                .ok_or_else(|| Error::ModelInput(format!("target {} needs binary estimates", self.name())))
        };
        let v = match self {
            TargetFunction::Constant(c) => *c,
            TargetFunction::Rsihr => {
                let (a, b) = binary()?;
                a.sqrt() / (a.sqrt() + b.sqrt())
            }
            TargetFunction::Neyman => {
                let (a, b) = binary()?;
                let (sa, sb) = ((a * (1.0 - a)).sqrt(), (b * (1.0 - b)).sqrt());
                sa / (sa + sb)
            }
            TargetFunction::Probit { scale } => {
                let d = est.treatment_difference(z)?;
                normal_cdf(d / scale).clamp(PROBIT_CLIP, 1.0 - PROBIT_CLIP)
            }
            TargetFunction::Custom { f, .. } => f(est, z),
        };
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(Error::TargetRange(v))
        }
    }

    /// Parses `constant:c`, `rsihr`, `neyman` or `probit[:scale]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidRule(format!("bad parameter in target `{spec}`")))
        };
        let t = match (head, arg) {
            ("constant", Some(a)) => TargetFunction::Constant(num(a)?),
            ("rsihr", None) => TargetFunction::Rsihr,
            ("neyman", None) => TargetFunction::Neyman,
            ("probit", None) => TargetFunction::Probit { scale: 1.0 },
            ("probit", Some(a)) => TargetFunction::Probit { scale: num(a)? },
            _ => return Err(Error::InvalidRule(format!("unknown target `{spec}`"))),
        };
        t.validate()?;
        Ok(t)
    }
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetFunction({})", self.name())
    }
}
