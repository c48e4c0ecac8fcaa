use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::strata::Axis;

use super::engine::{martingale_residual, run_trial, TrialConfig, Trajectory};

/// Terminal statistics of `R` independent trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub replications: usize,
    pub horizon: usize,
    pub base_seed: u64,
    /// Per replication, per arm.
    pub final_pi: Vec<Vec<f64>>,
    /// Per replication, per stratum (row-major); `None` for an empty stratum.
    pub final_strata: Option<Vec<Vec<Option<f64>>>>,
    pub strata_shape: Option<(usize, usize)>,
    /// Per replication: `n⁻¹D` for each level of `T`, then each level of `W`.
    pub final_marginals: Option<Vec<Vec<f64>>>,
    /// Per replication `D_N = N_A − N_B` (two-arm designs).
    pub final_imbalance: Vec<i64>,
    /// Per replication `n⁻¹M_N`.
    pub martingale: Vec<f64>,
    pub ridged_steps: Vec<u64>,
}

impl ReplicationSummary {
    /// Summarises trajectories in replication order.
    pub fn from_trajectories(trajectories: &[Trajectory], base_seed: u64) -> Result<Self> {
        let first = trajectories.first().ok_or_else(|| Error::Config("no replications".into()))?;
        let mut s = Self {
            replications: trajectories.len(),
            horizon: first.horizon() as usize,
            base_seed,
            final_pi: Vec::new(),
            final_strata: first.final_table.as_ref().map(|_| Vec::new()),
            strata_shape: first.strata_shape,
            final_marginals: first.final_table.as_ref().map(|_| Vec::new()),
            final_imbalance: Vec::new(),
            martingale: Vec::new(),
            ridged_steps: Vec::new(),
        };
        for t in trajectories {
            s.final_pi.push(t.final_pi());
            let c = &t.final_counts;
            s.final_imbalance.push(if c.len() == 2 { c[0] as i64 - c[1] as i64 } else { 0 });
            s.martingale.push(martingale_residual(t)?);
            s.ridged_steps.push(t.ridged_steps);
            if let Some(snap) = &t.final_table {
                let table = snap.table()?;
                if let Some(v) = s.final_strata.as_mut() {
                    v.push(table.cell_proportions());
                }
                let mut m = Vec::with_capacity(table.rows() + table.cols());
                for j in 0..table.rows() {
                    m.push(table.marginal_imbalance(Axis::Row, j)?);
                }
                for l in 0..table.cols() {
                    m.push(table.marginal_imbalance(Axis::Col, l)?);
                }
                if let Some(v) = s.final_marginals.as_mut() {
                    v.push(m);
                }
            }
        }
        Ok(s)
    }

    /// Share of replications whose arm-`arm` terminal proportion lies
    /// within `eps` of `limit`.
    pub fn fraction_within(&self, arm: usize, limit: f64, eps: f64) -> f64 {
        let hits = self.final_pi.iter().filter(|p| (p[arm] - limit).abs() <= eps).count();
        hits as f64 / self.replications as f64
    }
}

fn replica(config: &TrialConfig, base_seed: u64, r: usize) -> TrialConfig {
    let mut c = config.clone();
    c.seed = base_seed;
    c.stream = r as u64;
    c
}

/// Runs `R` trials in parallel; replication `r` uses stream `r` of
/// `base_seed`, so results do not depend on the thread count.
pub fn run_replications_detailed(config: &TrialConfig, replications: usize, base_seed: u64) -> Result<Vec<Trajectory>> {
    if replications == 0 {
        return Err(Error::Config("replication count must be at least 1".into()));
    }
    config.validate()?;
    (0..replications)
        .into_par_iter()
        .map(|r| run_trial(&replica(config, base_seed, r)).map_err(|e| Error::Replication { index: r, source: Box::new(e) }))
        .collect()
}

pub fn run_replications(config: &TrialConfig, replications: usize, base_seed: u64) -> Result<ReplicationSummary> {
    let trajectories = run_replications_detailed(config, replications, base_seed)?;
    ReplicationSummary::from_trajectories(&trajectories, base_seed)
}
