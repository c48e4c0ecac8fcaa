use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aa::aa_probability_or_convention;
use crate::cara::{cara_probability, RhoTracker};
use crate::error::{Error, Result};
use crate::models::{
    block_probabilities, initial_stage, sample_response, CovariateSampler, Estimator, ParamEstimate, ResponseModel,
};
use crate::ra::ra_probability;
use crate::state::{AllocationState, Covariate};
use crate::strata::{strata_probability, StratumTable};

use super::design::{Design, DesignClass};

pub const DEFAULT_STRIDE: usize = 10;

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub design: Design,
    pub arms: usize,
    pub horizon: usize,
    /// Initial-stage subjects per arm.
    pub initial_per_arm: usize,
    pub response: Option<ResponseModel>,
    pub covariates: Option<CovariateSampler>,
    pub seed: u64,
    /// Independent stream under the same seed; replications use their index.
    pub stream: u64,
    pub record_stride: usize,
    /// Added to the arm-A probability before drawing while the martingale
    /// still uses the nominal one. Diagnostic only; leave at 0.
    pub draw_shift: f64,
}

impl TrialConfig {
    pub fn new(design: Design, horizon: usize) -> Self {
        Self {
            arms: design.arms(),
            design,
            horizon,
            initial_per_arm: 0,
            response: None,
            covariates: None,
            seed: 0,
            stream: 0,
            record_stride: DEFAULT_STRIDE,
            draw_shift: 0.0,
        }
    }

    pub fn with_response(mut self, model: ResponseModel) -> Self {
        self.response = Some(model);
        self
    }

    pub fn with_covariates(mut self, sampler: CovariateSampler) -> Self {
        self.covariates = Some(sampler);
        self
    }

    pub fn with_initial(mut self, m: usize) -> Self {
        self.initial_per_arm = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Checks the run shape and the design/model compatibility matrix.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.record_stride == 0 {
            return cfg("record_stride must be at least 1".into());
        }
        if self.horizon <= self.arms * self.initial_per_arm {
            return cfg(format!(
                "horizon {} must exceed the initial stage of {} subjects",
                self.horizon,
                self.arms * self.initial_per_arm
            ));
        }
        if self.arms != self.design.arms() {
            return Err(Error::UnsupportedArity { expected: self.design.arms(), found: self.arms });
        }
        if !(self.draw_shift.is_finite() && self.draw_shift.abs() <= 1.0) {
            return cfg(format!("draw_shift {} outside [-1, 1]", self.draw_shift));
        }
        if let Some(s) = &self.covariates {
            s.validate()?;
        }
        let shape = self.covariates.as_ref().and_then(|s| s.shape());
        self.design.validate(shape)?;

        let class = self.design.class();
        if let Some(m) = &self.response {
            if m.needs_covariate() && self.covariates.is_none() {
                return cfg("[covariates] section is required by the response model".into());
            }
            if self.arms != 2 {
                return Err(Error::UnsupportedArity { expected: 2, found: self.arms });
            }
        }
        if matches!(class, DesignClass::Ra | DesignClass::Cara) && self.design.uses_estimates() {
            if self.response.is_none() {
                return cfg(format!("{} design needs a [model] section with a response model", class.label()));
            }
            if self.initial_per_arm == 0 {
                return cfg(format!("{} design needs an initial stage (m >= 1)", class.label()));
            }
        }
        if matches!(class, DesignClass::Ca | DesignClass::Cara) && self.covariates.is_none() {
            return cfg(format!("{} design needs a [covariates] section", class.label()));
        }
        if let (Design::Strata(_), Some(s)) = (&self.design, &self.covariates) {
            if !s.is_categorical() {
                return cfg("stratified designs need categorical covariates".into());
            }
        }
        if let (Design::Cara(_), Some(m)) = (&self.design, &self.response) {
            if !m.needs_covariate() {
                return cfg("covariate-adjusted designs need a linear response model".into());
            }
        }
        Ok(())
    }

    fn rngs(&self) -> (ChaCha8Rng, ChaCha8Rng) {
        // assignment draws and data (covariates, responses) use separate
        // streams so an AA design's draws do not depend on the data model
        let mut assign = ChaCha8Rng::seed_from_u64(self.seed);
        assign.set_stream(self.stream.wrapping_mul(2));
        let mut data = ChaCha8Rng::seed_from_u64(self.seed);
        data.set_stream(self.stream.wrapping_mul(2).wrapping_add(1));
        (assign, data)
    }
}

/// Recorded path of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub arms: usize,
    pub steps: Vec<u64>,
    /// Per-arm `π_n` at the recorded steps.
    pub pi_path: Vec<Vec<f64>>,
    /// Per-stratum `π_n(j, l)` (row-major, `None` for empty strata).
    pub strata_path: Option<Vec<Vec<Option<f64>>>>,
    pub strata_shape: Option<(usize, usize)>,
    /// Parameter estimate used for the assignment at each recorded step.
    pub estimate_path: Option<Vec<Vec<f64>>>,
    /// `M_n = Σ (δ_i − φ_i)` for arm A.
    pub martingale_path: Option<Vec<f64>>,
    pub final_counts: Vec<u64>,
    pub final_table: Option<StratumTableSnapshot>,
    /// Largest `|δ_i − φ_i|` seen.
    pub max_increment: f64,
    /// Steps whose estimate needed the ridge fallback.
    pub ridged_steps: u64,
}

/// Plain-data copy of the final stratum table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratumTableSnapshot {
    pub rows: usize,
    pub cols: usize,
    pub sizes: Vec<u64>,
    pub a_counts: Vec<u64>,
}

impl StratumTableSnapshot {
    pub fn table(&self) -> Result<StratumTable> {
        let cells: Vec<_> = self.sizes.iter().copied().zip(self.a_counts.iter().copied()).collect();
        StratumTable::from_counts(self.rows, self.cols, &cells)
    }
}

impl Trajectory {
    pub fn horizon(&self) -> u64 {
        self.final_counts.iter().sum()
    }

    /// Terminal `π_N` per arm.
    pub fn final_pi(&self) -> Vec<f64> {
        let n = self.horizon() as f64;
        self.final_counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Copies the stratum of `z` or fails with a configuration error.
fn stratum_of(z: Option<&Covariate>) -> Result<(usize, usize)> {
    z.and_then(|c| c.stratum())
        .ok_or_else(|| Error::Config("stratified design received a non-categorical covariate".into()))
}

struct Recorder {
    stride: u64,
    horizon: u64,
    traj: Trajectory,
}

impl Recorder {
    fn due(&self, step: u64) -> bool {
        step.is_multiple_of(self.stride) || step == self.horizon
    }

    fn push(
        &mut self,
        step: u64,
        state: &AllocationState,
        table: Option<&StratumTable>,
        est: Option<&ParamEstimate>,
        m: f64,
    ) {
        let t = &mut self.traj;
        t.steps.push(step);
        let n = state.n() as f64;
        t.pi_path.push(state.counts().iter().map(|&c| c as f64 / n).collect());
        if let (Some(path), Some(table)) = (t.strata_path.as_mut(), table) {
            path.push(table.cell_proportions());
        }
        if let Some(path) = t.estimate_path.as_mut() {
            path.push(est.map(|e| e.coefficients()).unwrap_or_default());
        }
        if let Some(path) = t.martingale_path.as_mut() {
            path.push(m);
        }
    }
}

/// Runs one seeded trial.
///
/// Each step samples the incoming covariate, evaluates the design from the
/// information its class may read (the estimate is the one available before
/// this subject's response), draws the assignment, samples the response and
/// updates the running summaries.
pub fn run_trial(config: &TrialConfig) -> Result<Trajectory> {
    config.validate()?;
    let (mut assign_rng, mut data_rng) = config.rngs();
    let arms = config.arms;
    let design = &config.design;
    let shape = config.covariates.as_ref().and_then(|s| s.shape());
    let needs_est = design.uses_estimates();

    let mut state = AllocationState::new(arms)?;
    let mut table = match shape {
        Some((r, c)) => Some(StratumTable::new(r, c)?),
        None => None,
    };
    let mut estimator = match &config.response {
        Some(m) if needs_est => Some(Estimator::for_model(m)?),
        _ => None,
    };
    let mut rho = RhoTracker::default();
    let mut rec = Recorder {
        stride: config.record_stride as u64,
        horizon: config.horizon as u64,
        traj: Trajectory {
            arms,
            steps: Vec::new(),
            pi_path: Vec::new(),
            strata_path: table.as_ref().map(|_| Vec::new()),
            strata_shape: shape,
            estimate_path: estimator.as_ref().map(|_| Vec::new()),
            martingale_path: Some(Vec::new()),
            final_counts: Vec::new(),
            final_table: None,
            max_increment: 0.0,
            ridged_steps: 0,
        },
    };

    let initial = initial_stage(
        config.initial_per_arm,
        arms,
        config.covariates.as_ref(),
        config.response.as_ref(),
        &mut data_rng,
    )?;
    let seq: Vec<usize> = initial.records().iter().map(|r| r.arm).collect();
    let mut m = 0.0;
    for (record, p0) in initial.records().iter().zip(block_probabilities(&seq, arms)) {
        let inc = f64::from(record.arm == 0) - p0;
        m += inc;
        rec.traj.max_increment = rec.traj.max_increment.max(inc.abs());
        state.record(record.arm)?;
        if let Some(t) = table.as_mut() {
            let (j, l) = stratum_of(record.covariate.as_ref())?;
            t.record(j, l, record.arm)?;
        }
        if let (Some(e), Some(y)) = (estimator.as_mut(), record.response) {
            e.observe(record.arm, record.covariate.as_ref(), y)?;
        }
        if let Some(z) = record.covariate {
            rho.observe(z);
        }
        if rec.due(record.step) {
            rec.push(record.step, &state, table.as_ref(), None, m);
        }
    }

    let mut probs = vec![0.0; arms];
    for step in initial.len() as u64 + 1..=config.horizon as u64 {
        let z = config.covariates.as_ref().map(|s| s.sample(&mut data_rng)).transpose()?;
        let est = estimator.as_ref().map(|e| e.current()).transpose()?;
        if est.as_ref().is_some_and(|e| e.is_ridged()) {
            rec.traj.ridged_steps += 1;
        }
        match design {
            Design::Aa(rule) => probs.copy_from_slice(&aa_probability_or_convention(rule, &state)?),
            Design::Ra(rule) => {
                let est = est.as_ref().ok_or(Error::NeedsHistory)?;
                let p = ra_probability(rule, state.proportion_or_zero(), rule.signal(est)?)?;
                probs.copy_from_slice(&[p, 1.0 - p]);
            }
            Design::Cara(rule) => {
                let est = est.as_ref().ok_or(Error::NeedsHistory)?;
                let z = z.as_ref().ok_or_else(|| Error::Config("missing covariate".into()))?;
                let r = match rule.target() {
                    Some(target) if rule.needs_rho() => Some(rho.rho(target, est)?),
                    _ => None,
                };
                let p = cara_probability(rule, state.proportion_or_zero(), est, r, z)?;
                probs.copy_from_slice(&[p, 1.0 - p]);
            }
            Design::Strata(rule) => {
                let cell = stratum_of(z.as_ref())?;
                let t = table.as_ref().ok_or_else(|| Error::Config("missing stratum table".into()))?;
                let p = strata_probability(rule, t, cell, est.as_ref())?;
                probs.copy_from_slice(&[p, 1.0 - p]);
            }
        }

        let arm = draw(&probs, config.draw_shift, &mut assign_rng);
        let inc = f64::from(arm == 0) - probs[0];
        m += inc;
        rec.traj.max_increment = rec.traj.max_increment.max(inc.abs());

        let y = config
            .response
            .as_ref()
            .map(|model| sample_response(model, arm, z.as_ref(), &mut data_rng))
            .transpose()?;
        state.record(arm)?;
        if let Some(t) = table.as_mut() {
            let (j, l) = stratum_of(z.as_ref())?;
            t.record(j, l, arm)?;
        }
        if let (Some(e), Some(y)) = (estimator.as_mut(), y) {
            e.observe(arm, z.as_ref(), y)?;
        }
        if let Some(z) = z {
            rho.observe(z);
        }
        if rec.due(step) {
            rec.push(step, &state, table.as_ref(), est.as_ref(), m);
        }
    }

    let mut traj = rec.traj;
    traj.final_counts = state.counts().to_vec();
    traj.final_table = table.map(|t| StratumTableSnapshot {
        rows: t.rows(),
        cols: t.cols(),
        sizes: t.sizes().to_vec(),
        a_counts: t.a_counts().to_vec(),
    });
    Ok(traj)
}

fn draw<R: Rng + ?Sized>(probs: &[f64], shift: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if probs.len() == 2 {
        let p = (probs[0] + shift).clamp(0.0, 1.0);
        return usize::from(u >= p);
    }
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left the cumulative sum just below 1
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// `n⁻¹M_N`.
pub fn martingale_residual(traj: &Trajectory) -> Result<f64> {
    let m = traj
        .martingale_path
        .as_ref()
        .and_then(|p| p.last())
        .ok_or(Error::MissingDiagnostic)?;
    let n = *traj.steps.last().ok_or(Error::MissingDiagnostic)?;
    Ok(m / n as f64)
}
