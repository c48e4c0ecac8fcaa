use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::state::{AssignmentRecord, TrialHistory};

use super::covariate::CovariateSampler;
use super::response::{sample_response, ResponseModel};

/// `m` permuted blocks of size `K`: exactly `m` subjects per arm, in random
/// order within each block. Covariates and responses are drawn when the
/// corresponding models are given.
pub fn initial_stage<R: Rng + ?Sized>(
    m: usize,
    arms: usize,
    covariates: Option<&CovariateSampler>,
    response: Option<&ResponseModel>,
    rng: &mut R,
) -> Result<TrialHistory> {
    let mut history = TrialHistory::new(arms)?;
    if response.is_some() && arms != 2 {
        return Err(Error::UnsupportedArity { expected: 2, found: arms });
    }
    let mut block: Vec<usize> = (0..arms).collect();
    let mut step = 0u64;
    for _ in 0..m {
        block.shuffle(rng);
        for &arm in &block {
            step += 1;
            let covariate = covariates.map(|s| s.sample(rng)).transpose()?;
            let response = response
                .map(|model| sample_response(model, arm, covariate.as_ref(), rng))
                .transpose()?;
            history.push(AssignmentRecord { step, arm, covariate, response })?;
        }
    }
    Ok(history)
}

/// Conditional probability of arm 0 at each step of a permuted-block
/// sequence, given the earlier assignments of the same block.
pub fn block_probabilities(arms_seq: &[usize], arms: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(arms_seq.len());
    for block in arms_seq.chunks(arms) {
        let mut seen = false;
        for (i, &a) in block.iter().enumerate() {
            out.push(if seen { 0.0 } else { 1.0 / (arms - i) as f64 });
            seen |= a == 0;
        }
    }
    out
}
