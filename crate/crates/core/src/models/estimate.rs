use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Covariate, TrialHistory};

use super::response::{FeatureMap, ModelShape, ResponseModel};

/// Clipping applied to binary success frequencies.
pub const EPS_CLIP: f64 = 0.01;
/// Ridge added to the normal equations when the plain solve is singular.
pub const LS_RIDGE: f64 = 1e-12;
/// Smallest-to-largest singular value ratio treated as rank deficient.
const RANK_RATIO: f64 = 1e-10;

/// Current parameter estimate `γ̂_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamEstimate {
    None,
    Binary { p_a: f64, p_b: f64 },
    /// Coefficients in the layout of `shape`; `ridged` marks a regularised solve.
    Linear { coef: Vec<f64>, shape: ModelShape, ridged: bool },
}

impl ParamEstimate {
    pub fn binary(&self) -> Option<(f64, f64)> {
        match *self {
            ParamEstimate::Binary { p_a, p_b } => Some((p_a, p_b)),
            _ => None,
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            ParamEstimate::None => Vec::new(),
            ParamEstimate::Binary { p_a, p_b } => vec![*p_a, *p_b],
            ParamEstimate::Linear { coef, .. } => coef.clone(),
        }
    }

    pub fn is_ridged(&self) -> bool {
        matches!(self, ParamEstimate::Linear { ridged: true, .. })
    }

    /// Estimated mean advantage of A over B for a subject with covariate `z`.
    pub fn treatment_difference(&self, z: Option<&Covariate>) -> Result<f64> {
        match self {
            ParamEstimate::None => Err(Error::InsufficientData("no parameter estimate".into())),
            ParamEstimate::Binary { p_a, p_b } => Ok(p_a - p_b),
            ParamEstimate::Linear { coef, shape: ModelShape::Interaction, .. } => {
                let z = z
                    .and_then(|c| c.scalar())
                    .ok_or_else(|| Error::ModelInput("interaction model needs a scalar covariate".into()))?;
                Ok(coef[0] - coef[1] + z * (coef[2] - coef[3]))
            }
            ParamEstimate::Linear { coef, .. } => Ok(coef[0] - coef[1]),
        }
    }
}

/// Per-arm success frequencies clipped to `[EPS_CLIP, 1 − EPS_CLIP]`.
pub fn estimate_binary(history: &TrialHistory) -> Result<ParamEstimate> {
    let mut acc = BinaryAccumulator::default();
    for r in history.records() {
        if let Some(y) = r.response {
            acc.push(r.arm, y)?;
        }
    }
    acc.estimate()
}

/// Ordinary least squares over every record that carries a response.
pub fn estimate_least_squares(history: &TrialHistory, shape: &ModelShape) -> Result<ParamEstimate> {
    let mut acc = LeastSquaresAccumulator::new(shape.clone())?;
    for r in history.records() {
        if let Some(y) = r.response {
            acc.push(r.arm, r.covariate.as_ref(), y)?;
        }
    }
    acc.solve()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinaryAccumulator {
    successes: [u64; 2],
    trials: [u64; 2],
}

impl BinaryAccumulator {
    pub fn push(&mut self, arm: usize, y: f64) -> Result<()> {
        if arm > 1 {
            return Err(Error::ArmOutOfRange { arm, arms: 2 });
        }
        self.trials[arm] += 1;
        if y > 0.5 {
            self.successes[arm] += 1;
        }
        Ok(())
    }

    pub fn estimate(&self) -> Result<ParamEstimate> {
        let freq = |arm: usize| -> Result<f64> {
            if self.trials[arm] == 0 {
                return Err(Error::InsufficientData(format!("no responses on arm {arm}")));
            }
            let p = self.successes[arm] as f64 / self.trials[arm] as f64;
            Ok(p.clamp(EPS_CLIP, 1.0 - EPS_CLIP))
        };
        Ok(ParamEstimate::Binary { p_a: freq(0)?, p_b: freq(1)? })
    }
}

/// Incremental normal equations `XᵗX γ = Xᵗy`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresAccumulator {
    shape: ModelShape,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    rows: usize,
}

impl LeastSquaresAccumulator {
    pub fn new(shape: ModelShape) -> Result<Self> {
        let p = match &shape {
            ModelShape::Binary => {
                return Err(Error::ModelInput("least squares needs a linear model shape".into()))
            }
            ModelShape::Interaction => 4,
            ModelShape::CommonSlope { features } => 2 + features.dim(),
        };
        Ok(Self { shape, xtx: DMatrix::zeros(p, p), xty: DVector::zeros(p), rows: 0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn design_row(&self, arm: usize, z: Option<&Covariate>) -> Result<DVector<f64>> {
        if arm > 1 {
            return Err(Error::ArmOutOfRange { arm, arms: 2 });
        }
        let d = if arm == 0 { 1.0 } else { 0.0 };
        match &self.shape {
            ModelShape::Interaction => {
                let z = z
                    .and_then(|c| c.scalar())
                    .ok_or_else(|| Error::ModelInput("interaction model needs a scalar covariate".into()))?;
                Ok(DVector::from_vec(vec![d, 1.0 - d, d * z, (1.0 - d) * z]))
            }
            ModelShape::CommonSlope { features } => {
                let z = z.ok_or_else(|| Error::ModelInput("common-slope model needs a covariate".into()))?;
                let mut row = vec![d, 1.0 - d];
                row.extend(features.apply(z)?);
                Ok(DVector::from_vec(row))
            }
            ModelShape::Binary => unreachable!("rejected in new"),
        }
    }

    pub fn push(&mut self, arm: usize, z: Option<&Covariate>, y: f64) -> Result<()> {
        let x = self.design_row(arm, z)?;
        self.xtx.ger(1.0, &x, &x, 1.0);
        self.xty.axpy(y, &x, 1.0);
        self.rows += 1;
        Ok(())
    }

    fn is_singular(&self) -> bool {
        // symmetric PSD: singular values are the eigenvalues
        let ev = self.xtx.clone().symmetric_eigenvalues();
        let max = ev.max();
        max <= 0.0 || ev.min() / max < RANK_RATIO
    }

    fn wrap(&self, coef: DVector<f64>, ridged: bool) -> ParamEstimate {
        ParamEstimate::Linear { coef: coef.iter().copied().collect(), shape: self.shape.clone(), ridged }
    }

    /// Plain solve; rank deficiency is an error.
    pub fn solve(&self) -> Result<ParamEstimate> {
        if self.is_singular() {
            return Err(Error::SingularDesign);
        }
        let coef = self.xtx.clone().cholesky().ok_or(Error::SingularDesign)?.solve(&self.xty);
        Ok(self.wrap(coef, false))
    }

    /// Plain solve, or the ridge-regularised solve flagged with `ridged`.
    pub fn solve_or_ridge(&self) -> Result<ParamEstimate> {
        match self.solve() {
            Err(Error::SingularDesign) => {
                let p = self.xtx.nrows();
                let a = &self.xtx + DMatrix::identity(p, p) * LS_RIDGE;
                let coef = a.lu().solve(&self.xty).ok_or(Error::SingularDesign)?;
                if coef.iter().all(|c| c.is_finite()) {
                    Ok(self.wrap(coef, true))
                } else {
                    Err(Error::SingularDesign)
                }
            }
            other => other,
        }
    }
}

/// Streaming estimator matched to a response model.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Binary(BinaryAccumulator),
    LeastSquares(LeastSquaresAccumulator),
}

impl Estimator {
    pub fn for_model(model: &ResponseModel) -> Result<Self> {
        Ok(match model.shape() {
            ModelShape::Binary => Estimator::Binary(BinaryAccumulator::default()),
            shape => Estimator::LeastSquares(LeastSquaresAccumulator::new(shape)?),
        })
    }

    pub fn observe(&mut self, arm: usize, z: Option<&Covariate>, y: f64) -> Result<()> {
        match self {
            Estimator::Binary(a) => a.push(arm, y),
            Estimator::LeastSquares(a) => a.push(arm, z, y),
        }
    }

    /// Estimate used by the trial loop; linear models fall back to the ridge solve.
    pub fn current(&self) -> Result<ParamEstimate> {
        match self {
            Estimator::Binary(a) => a.estimate(),
            Estimator::LeastSquares(a) => a.solve_or_ridge(),
        }
    }
}

/// Convenience for feature maps used by the built-in strata models.
pub fn dummy_features(rows: usize, cols: usize, interactions: bool) -> FeatureMap {
    FeatureMap::Dummies { rows, cols, interactions }
}
