//! Response models, covariate samplers, estimators and target allocations
//! consumed by the response-adaptive and covariate-adjusted rules.

mod covariate;
mod estimate;
mod initial;
pub mod normal;
mod response;
mod target;

pub use covariate::{CovariateSampler, CovariateSummary};
pub use estimate::{
    dummy_features, estimate_binary, estimate_least_squares, BinaryAccumulator, Estimator,
    LeastSquaresAccumulator, ParamEstimate, EPS_CLIP, LS_RIDGE,
};
pub use initial::{block_probabilities, initial_stage};
pub use normal::normal_cdf;
pub use response::{
    sample_response, BinaryModel, FeatureMap, LinearCommonSlopeModel, LinearInteractionModel,
    ModelShape, ResponseModel,
};
pub use target::TargetFunction;
