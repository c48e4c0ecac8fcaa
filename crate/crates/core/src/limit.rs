//! Theoretical limits reported by the `*_limit` functions of each design family.

use serde::{Deserialize, Serialize};

use crate::downcrossing::{CrossingKind, DowncrossingResult, VectorDowncrossing, VectorMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitMethod {
    /// Known without solving (e.g. a shared downcrossing at 1/2).
    ClosedForm,
    Scalar { crossing: CrossingKind },
    Vectorial { method: VectorMethod },
    /// Monte Carlo integral over the covariate distribution, optionally
    /// followed by a downcrossing solve.
    MonteCarlo { standard_error: f64, crossing: Option<CrossingKind> },
}

/// Limit of the allocation proportion.
///
/// `values` holds one entry per arm for assignment-adaptive rules, the
/// arm-A limit for two-arm rules, or one entry per stratum (row-major) for
/// stratified rules; `scalar` is the overall arm-A limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub values: Vec<f64>,
    pub scalar: f64,
    pub residual: f64,
    pub method: LimitMethod,
}

impl Limit {
    pub fn closed_form(t: f64) -> Self {
        Self { values: vec![t], scalar: t, residual: 0.0, method: LimitMethod::ClosedForm }
    }

    pub(crate) fn from_scalar(r: &DowncrossingResult) -> Self {
        Self {
            values: vec![r.t],
            scalar: r.t,
            residual: r.residual,
            method: LimitMethod::Scalar { crossing: r.kind },
        }
    }

    pub(crate) fn from_vector(r: &VectorDowncrossing, scalar: f64) -> Self {
        Self {
            values: r.t.clone(),
            scalar,
            residual: r.residual,
            method: LimitMethod::Vectorial { method: r.method },
        }
    }
}
