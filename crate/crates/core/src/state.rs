//! Allocation bookkeeping shared by every design class.
//!
//! Counts are kept as exact integers; proportions are derived on demand so
//! long runs never accumulate floating-point drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running assignment counts for `K` arms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationState {
    n: u64,
    counts: Vec<u64>,
}

impl AllocationState {
    pub fn new(arms: usize) -> Result<Self> {
        if arms < 2 {
            return Err(Error::UnsupportedArity { expected: 2, found: arms });
        }
        Ok(Self { n: 0, counts: vec![0; arms] })
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::UnsupportedArity { expected: 2, found: counts.len() });
        }
        let n = counts.iter().sum();
        Ok(Self { n, counts })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Returns the state after one more assignment to `arm`.
    pub fn update(&self, arm: usize) -> Result<Self> {
        let mut next = self.clone();
        next.record(arm)?;
        Ok(next)
    }

    /// In-place form of [`update`](Self::update), used by the trial loop.
    pub fn record(&mut self, arm: usize) -> Result<()> {
        let arms = self.counts.len();
        let slot = self
            .counts
            .get_mut(arm)
            .ok_or(Error::ArmOutOfRange { arm, arms })?;
        *slot += 1;
        self.n += 1;
        Ok(())
    }

    /// Per-arm proportions `counts / n`.
    pub fn proportion(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::UndefinedProportion);
        }
        let n = self.n as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / n).collect())
    }

    /// Proportion of arm 0 with the convention `π_0 = 0`.
    pub fn proportion_or_zero(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.counts[0] as f64 / self.n as f64
        }
    }

    /// Two-arm imbalance `D_n = 2·counts[0] − n`.
    pub fn imbalance(&self) -> Result<i64> {
        if self.counts.len() != 2 {
            return Err(Error::UnsupportedArity { expected: 2, found: self.counts.len() });
        }
        Ok(2 * self.counts[0] as i64 - self.n as i64)
    }
}

/// Covariate observed on one subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Covariate {
    /// Continuous scalar covariate.
    Scalar { z: f64 },
    /// Joint level `(t_j, w_l)` of two categorical covariates.
    Stratum { t: usize, w: usize },
}

impl Covariate {
    pub fn scalar(self) -> Option<f64> {
        match self {
            Covariate::Scalar { z } => Some(z),
            Covariate::Stratum { .. } => None,
        }
    }

    pub fn stratum(self) -> Option<(usize, usize)> {
        match self {
            Covariate::Stratum { t, w } => Some((t, w)),
            Covariate::Scalar { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub step: u64,
    pub arm: usize,
    pub covariate: Option<Covariate>,
    /// Observed response; binary outcomes are stored as 0.0 / 1.0.
    pub response: Option<f64>,
}

/// Ordered assignment records together with the state they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHistory {
    records: Vec<AssignmentRecord>,
    state: AllocationState,
}

impl TrialHistory {
    pub fn new(arms: usize) -> Result<Self> {
        Ok(Self { records: Vec::new(), state: AllocationState::new(arms)? })
    }

    /// Appends a record; steps must be strictly increasing.
    pub fn push(&mut self, record: AssignmentRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::Config(format!(
                    "record step {} does not follow step {}",
                    record.step, last.step
                )));
            }
        }
        self.state.record(record.arm)?;
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[AssignmentRecord] {
        &self.records
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records assigned to `arm` that carry a response.
    pub fn responses_for(&self, arm: usize) -> impl Iterator<Item = &AssignmentRecord> {
        self.records
            .iter()
            .filter(move |r| r.arm == arm && r.response.is_some())
    }

    /// Replays every record from scratch.
    pub fn replay_state(&self) -> Result<AllocationState> {
        let mut s = AllocationState::new(self.state.arms())?;
        for r in &self.records {
            s.record(r.arm)?;
        }
        Ok(s)
    }
}
