//! Assignment-adaptive rules: the probability of the next assignment depends
//! on past assignments only.

use crate::downcrossing::{find_downcrossing, find_vectorial_downcrossing, DEFAULT_TOL, DEFAULT_VECTOR_TOL};
use crate::error::{Error, Result};
use crate::func::{check_symmetric_decreasing, RealFn};
use crate::limit::Limit;
use crate::state::AllocationState;

/// Grid half-width on which ABCD's `F` is checked.
const ABCD_CHECK_RANGE: f64 = 25.0;
/// Relative tolerance of the `Ñ_n = n·t*` equality test.
const TARGET_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum AaRule {
    /// Fair coin.
    CompleteRandomization,
    /// Efron's biased coin: `p` toward the under-represented arm, 1/2 on ties.
    Efron { p: f64 },
    /// Biased coin targeting `target`: `p_high` below it, `p_low` above it.
    EfronExtended { target: f64, p_low: f64, p_high: f64 },
    /// `φ(x) = f(2x − 1)` for a decreasing `f` with `f(−u) = 1 − f(u)`.
    WeiAdaptive { f: RealFn },
    /// Adjustable biased coin `φ_n = F(D_n)`.
    Abcd { f: RealFn },
    /// 1 while arm A is not ahead, 1/2 once it is.
    OneSidedCoin,
    /// `ψ_j(x) ∝ x_j⁻¹ − 1` over `arms` treatments.
    WeiMulti1 { arms: usize },
    /// `ψ_j(x) = (1 − x_j)/(K − 1)` over `arms` treatments.
    WeiMulti2 { arms: usize },
    /// Piecewise-linear `φ` through `(x, φ(x))` knots sorted by `x`.
    Tabulated { points: Vec<(f64, f64)> },
}

impl AaRule {
    pub fn name(&self) -> &'static str {
        match self {
            AaRule::CompleteRandomization => "CR",
            AaRule::Efron { .. } => "Efron",
            AaRule::EfronExtended { .. } => "EfronExtended",
            AaRule::WeiAdaptive { .. } => "WeiAdaptive",
            AaRule::Abcd { .. } => "ABCD",
            AaRule::OneSidedCoin => "OneSidedCoin",
            AaRule::WeiMulti1 { .. } => "WeiMulti1",
            AaRule::WeiMulti2 { .. } => "WeiMulti2",
            AaRule::Tabulated { .. } => "Tabulated",
        }
    }

    pub fn arms(&self) -> usize {
        match *self {
            AaRule::WeiMulti1 { arms } | AaRule::WeiMulti2 { arms } => arms,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AaRule::CompleteRandomization | AaRule::OneSidedCoin => Ok(()),
            &AaRule::Efron { p } => {
                if (0.5..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::InvalidRule(format!("Efron bias {p} outside [1/2, 1]")))
                }
            }
            &AaRule::EfronExtended { target, p_low, p_high } => {
                let ordered = 0.0 <= p_low && p_low <= target && target <= p_high && p_high <= 1.0;
                if ordered && (p_low < target || target < p_high) {
                    Ok(())
                } else {
                    Err(Error::InvalidRule(format!(
                        "need 0 ≤ p_low ≤ target ≤ p_high ≤ 1 with one strict: ({p_low}, {target}, {p_high})"
                    )))
                }
            }
            AaRule::WeiAdaptive { f } => check_symmetric_decreasing(f, 1.0, false),
            AaRule::Abcd { f } => check_symmetric_decreasing(f, ABCD_CHECK_RANGE, false),
            &AaRule::WeiMulti1 { arms } | &AaRule::WeiMulti2 { arms } => {
                if arms >= 2 {
                    Ok(())
                } else {
                    Err(Error::UnsupportedArity { expected: 2, found: arms })
                }
            }
            AaRule::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidRule("tabulated rule needs at least two knots".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidRule("tabulated knots must have increasing x".into()));
                }
                if points.iter().any(|&(x, y)| !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y)) {
                    return Err(Error::InvalidRule("tabulated knots must lie in [0, 1]²".into()));
                }
                Ok(())
            }
        }
    }

    /// `φ(x)` for two-arm rules, with `n` the step index (used by ABCD only).
    /// Multi-arm rules return an error.
    pub fn allocation_fn(&self, x: f64, n: u64) -> Result<f64> {
        Ok(match self {
            AaRule::CompleteRandomization => 0.5,
            &AaRule::Efron { p } => {
                if x < 0.5 {
                    p
                } else if x > 0.5 {
                    1.0 - p
                } else {
                    0.5
                }
            }
            &AaRule::EfronExtended { target, p_low, p_high } => {
                if x < target {
                    p_high
                } else if x > target {
                    p_low
                } else {
                    target
                }
            }
            AaRule::WeiAdaptive { f } => f.eval(2.0 * x - 1.0),
            AaRule::Abcd { f } => f.eval(n as f64 * (2.0 * x - 1.0)),
            AaRule::OneSidedCoin => {
                if x <= 0.5 {
                    1.0
                } else {
                    0.5
                }
            }
            AaRule::Tabulated { points } => interpolate(points, x),
            AaRule::WeiMulti1 { .. } | AaRule::WeiMulti2 { .. } => {
                return Err(Error::UnsupportedArity { expected: 2, found: self.arms() })
            }
        })
    }

    /// Multi-arm map `ψ(x)` on the simplex; two-arm rules return `(φ, 1 − φ)`.
    pub fn vector_fn(&self, x: &[f64], n: u64) -> Result<Vec<f64>> {
        if x.len() != self.arms() {
            return Err(Error::UnsupportedArity { expected: self.arms(), found: x.len() });
        }
        match *self {
            AaRule::WeiMulti1 { .. } => {
                let zeros = x.iter().filter(|&&v| v <= 0.0).count();
                if zeros > 0 {
                    let share = 1.0 / zeros as f64;
                    return Ok(x.iter().map(|&v| if v <= 0.0 { share } else { 0.0 }).collect());
                }
                let w: Vec<f64> = x.iter().map(|&v| 1.0 / v - 1.0).collect();
                let s: f64 = w.iter().sum();
                Ok(w.iter().map(|wi| wi / s).collect())
            }
            AaRule::WeiMulti2 { arms } => Ok(x.iter().map(|&v| (1.0 - v) / (arms - 1) as f64).collect()),
            _ => {
                let p = self.allocation_fn(x[0], n)?;
                Ok(vec![p, 1.0 - p])
            }
        }
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= x);
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Probability vector for the next assignment given the current counts.
///
/// Case splits of the coin rules are decided on integer counts: Efron's tie
/// is `D_n = 0`, the extended coin's is `Ñ_n = n·t*` up to a relative
/// `1e-9`. Rules that read `π_n` need `n ≥ 1`.
pub fn aa_probability(rule: &AaRule, state: &AllocationState) -> Result<Vec<f64>> {
    if state.n() == 0 && !matches!(rule, AaRule::CompleteRandomization) {
        return Err(Error::NeedsHistory);
    }
    probability_from_counts(rule, state)
}

/// As [`aa_probability`] but defined at `n = 0` through `π_0 = 0` (two-arm
/// rules) and a uniform draw (multi-arm rules); the trial engine uses this.
pub fn aa_probability_or_convention(rule: &AaRule, state: &AllocationState) -> Result<Vec<f64>> {
    if state.n() == 0 && rule.arms() > 2 {
        if state.arms() != rule.arms() {
            return Err(Error::UnsupportedArity { expected: rule.arms(), found: state.arms() });
        }
        return Ok(vec![1.0 / rule.arms() as f64; rule.arms()]);
    }
    probability_from_counts(rule, state)
}

fn probability_from_counts(rule: &AaRule, state: &AllocationState) -> Result<Vec<f64>> {
    if state.arms() != rule.arms() {
        return Err(Error::UnsupportedArity { expected: rule.arms(), found: state.arms() });
    }
    let n = state.n();
    let c0 = state.counts()[0];
    let p = match rule {
        &AaRule::Efron { p } => {
            let d = state.imbalance()?;
            match d.signum() {
                -1 => p,
                1 => 1.0 - p,
                _ => 0.5,
            }
        }
        &AaRule::EfronExtended { target, p_low, p_high } => {
            let goal = n as f64 * target;
            let gap = c0 as f64 - goal;
            if gap.abs() <= TARGET_TIE_TOL * goal.max(1.0) {
                target
            } else if gap < 0.0 {
                p_high
            } else {
                p_low
            }
        }
        AaRule::Abcd { f } => f.eval(state.imbalance()? as f64),
        AaRule::OneSidedCoin => {
            if 2 * c0 <= n {
                1.0
            } else {
                0.5
            }
        }
        AaRule::WeiMulti1 { .. } | AaRule::WeiMulti2 { .. } => {
            let x = state.proportion()?;
            return rule.vector_fn(&x, n);
        }
        _ => rule.allocation_fn(state.proportion_or_zero(), n)?,
    };
    Ok(vec![p, 1.0 - p])
}

/// Limit of `π_n`: one entry per arm.
pub fn aa_limit(rule: &AaRule) -> Result<Vec<f64>> {
    Ok(aa_limit_detail(rule)?.values)
}

pub fn aa_limit_detail(rule: &AaRule) -> Result<Limit> {
    rule.validate()?;
    match rule {
        // every φ_n shares the downcrossing 1/2
        AaRule::Abcd { .. } => {
            let mut l = Limit::closed_form(0.5);
            l.values = vec![0.5, 0.5];
            Ok(l)
        }
        AaRule::WeiMulti1 { arms } | AaRule::WeiMulti2 { arms } => {
            let f = |x: &[f64]| rule.vector_fn(x, 0).unwrap_or_else(|_| vec![f64::NAN; x.len()]);
            let r = find_vectorial_downcrossing(f, *arms, DEFAULT_VECTOR_TOL, 2000)?;
            let s = r.t[0];
            Ok(Limit::from_vector(&r, s))
        }
        _ => {
            let r = find_downcrossing(&|x: f64| rule.allocation_fn(x, 0).unwrap_or(f64::NAN), DEFAULT_TOL)?;
            let mut l = Limit::from_scalar(&r);
            l.values = vec![r.t, 1.0 - r.t];
            Ok(l)
        }
    }
}
