use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::Limit;

use super::replicate::ReplicationSummary;

/// Bound used by the martingale column of the report.
pub const MARTINGALE_BOUND: f64 = 0.02;

/// Terminal-error statistics for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStats {
    pub limit: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub fraction_within: f64,
    /// Replications contributing (strata can be empty).
    pub count: usize,
}

impl ErrorStats {
    fn from_values(values: impl Iterator<Item = f64>, limit: f64, eps: f64) -> Self {
        let (mut sum, mut max, mut hits, mut count) = (0.0, 0.0_f64, 0usize, 0usize);
        for v in values {
            let e = (v - limit).abs();
            sum += e;
            max = max.max(e);
            hits += usize::from(e <= eps);
            count += 1;
        }
        let denom = count.max(1) as f64;
        Self { limit, mean_abs_error: sum / denom, max_abs_error: max, fraction_within: hits as f64 / denom, count }
    }
}

/// Empirical reading of `π_n → t`: terminal errors over replications at a
/// fixed horizon, with tolerance `epsilon`. Not a proof of a.s. convergence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub epsilon: f64,
    pub horizon: usize,
    pub replications: usize,
    pub scalar_limit: f64,
    /// Arm A, or the overall proportion for stratified designs.
    pub overall: ErrorStats,
    pub per_arm: Vec<ErrorStats>,
    pub per_stratum: Option<Vec<ErrorStats>>,
    /// Largest `|n⁻¹D(level)|` over replications, levels of `T` then `W`.
    pub max_marginal_imbalance: Option<Vec<f64>>,
    pub martingale_max_abs: f64,
    pub martingale_fraction_within: f64,
    pub criterion: String,
}

/// Compares terminal proportions with a theoretical limit.
///
/// Limits with one value per stratum need a stratified summary; otherwise
/// the limit has one value per arm or a single arm-A value.
pub fn convergence_report(summary: &ReplicationSummary, limit: &Limit, eps: f64) -> Result<ConvergenceReport> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("epsilon {eps} must be positive")));
    }
    let arms = summary.final_pi.first().map_or(0, Vec::len);
    let k = limit.values.len();
    let arm_limits: Vec<f64> = match (&summary.strata_shape, k) {
        (Some((r, c)), k) if k == r * c && !(k == arms && k != 1) => {
            vec![limit.scalar, 1.0 - limit.scalar]
        }
        (_, k) if k == arms => limit.values.clone(),
        (None, 1) if arms == 2 => vec![limit.values[0], 1.0 - limit.values[0]],
        _ => {
            return Err(Error::Shape(format!(
                "limit has {k} values; summary has {arms} arms and strata {:?}",
                summary.strata_shape
            )))
        }
    };
    let per_arm: Vec<ErrorStats> = arm_limits
        .iter()
        .enumerate()
        .map(|(a, &t)| ErrorStats::from_values(summary.final_pi.iter().map(|p| p[a]), t, eps))
        .collect();
    let per_stratum = match (&summary.final_strata, summary.strata_shape) {
        (Some(finals), Some((r, c))) if k == r * c => Some(
            (0..k)
                .map(|i| ErrorStats::from_values(finals.iter().filter_map(|f| f[i]), limit.values[i], eps))
                .collect(),
        ),
        _ => None,
    };
    let max_marginal_imbalance = summary.final_marginals.as_ref().map(|ms| {
        let width = ms.first().map_or(0, Vec::len);
        (0..width).map(|i| ms.iter().map(|m| m[i].abs()).fold(0.0, f64::max)).collect()
    });
    let mart_hits = summary.martingale.iter().filter(|m| m.abs() < MARTINGALE_BOUND).count();
    Ok(ConvergenceReport {
        epsilon: eps,
        horizon: summary.horizon,
        replications: summary.replications,
        scalar_limit: limit.scalar,
        overall: per_arm[0].clone(),
        per_arm,
        per_stratum,
        max_marginal_imbalance,
        martingale_max_abs: summary.martingale.iter().map(|m| m.abs()).fold(0.0, f64::max),
        martingale_fraction_within: mart_hits as f64 / summary.replications.max(1) as f64,
        criterion: format!(
            "terminal |pi_N - t| <= {eps} at N = {} over {} replications",
            summary.horizon, summary.replications
        ),
    })
}

impl ConvergenceReport {
    /// One-line verdict for terminals.
    pub fn verdict(&self) -> String {
        format!(
            "limit {:.6}  mean |pi_N - t| {:.5}  within {}: {:.1}%  (N = {}, R = {})",
            self.scalar_limit,
            self.overall.mean_abs_error,
            self.epsilon,
            100.0 * self.overall.fraction_within,
            self.horizon,
            self.replications
        )
    }
}
