//! Downcrossing solvers.
//!
//! A point `t` is a downcrossing of `ψ: [0,1] → [0,1]` when `ψ(x) ≥ t` for
//! every `x < t` and `ψ(x) ≤ t` for every `x > t`. For a nonincreasing `ψ` it
//! is unique, it is the almost-sure limit of the allocation proportion of the
//! design driven by `ψ`, and it coincides with the root of `ψ(x) = x` when one
//! exists. Step functions (Efron's coin, ERADE) may jump across the diagonal
//! without touching it; the solver reports those as [`CrossingKind::Jump`].
//!
//! The vectorial solver handles maps `[0,1]^K → [0,1]^K` whose `j`-th
//! component is nonincreasing in `x_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar solver default.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Sup-norm default for the vectorial solver.
pub const DEFAULT_VECTOR_TOL: f64 = 1e-8;
/// Smallest tolerance accepted by the scalar solver.
pub const MIN_TOL: f64 = 1e-14;
/// Iteration cap for bisection; only reachable with NaN-producing evaluators.
pub const MAX_BISECTIONS: usize = 200;
/// Probe-grid size for the monotonicity spot check.
pub const PROBE_POINTS: usize = 64;
/// Drop of `f` across `[t − tol, t + tol]` above which `t` is classified as a jump.
pub const JUMP_GAP: f64 = 1e-6;
/// Damping factor of the vectorial fixed-point iteration.
pub const DAMPING: f64 = 0.5;
/// Round-robin bisection sweeps tried after damped iteration fails.
pub const MAX_SWEEPS: usize = 50;
/// Slack applied to the inequality checks of [`verify_downcrossing`].
pub const VERIFY_SLACK: f64 = 1e-12;

const POST_VERIFY_GRID: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    /// `ψ(t) = t` within tolerance and `ψ` is continuous there.
    FixedPoint,
    /// `ψ` jumps across the diagonal at `t`.
    Jump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DowncrossingResult {
    pub t: f64,
    /// `|ψ(t) − t|`; can be large for jumps.
    pub residual: f64,
    pub bracket_width: f64,
    pub iterations: usize,
    pub kind: CrossingKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorMethod {
    DampedIteration,
    CoordinateBisection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDowncrossing {
    pub t: Vec<f64>,
    /// `‖ψ(t) − t‖∞`.
    pub residual: f64,
    pub iterations: usize,
    pub method: VectorMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: f64,
    pub value: f64,
    /// `true` when `x < t` (and `value < t`), `false` when `x > t` (and `value > t`).
    pub left_of_t: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub holds: bool,
    pub violations: Vec<Violation>,
}

/// A map from `[0, 1]` into `[0, 1]`.
pub trait ScalarMap {
    fn eval(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ScalarMap for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

fn checked<M: ScalarMap + ?Sized>(f: &M, x: f64) -> Result<f64> {
    let y = f.eval(x);
    if (0.0..=1.0).contains(&y) {
        Ok(y)
    } else {
        Err(Error::Domain { x, value: y })
    }
}

fn probe_monotone<M: ScalarMap + ?Sized>(f: &M) -> Result<()> {
    let mut prev = (0.0, checked(f, 0.0)?);
    for i in 1..PROBE_POINTS {
        let x = i as f64 / (PROBE_POINTS - 1) as f64;
        let y = checked(f, x)?;
        if y > prev.1 + 1e-12 {
            return Err(Error::NotMonotone { x0: prev.0, f0: prev.1, x1: x, f1: y });
        }
        prev = (x, y);
    }
    Ok(())
}

/// Locates the interior downcrossing of a nonincreasing map by bisection on
/// the sign of `f(x) − x`.
pub fn find_downcrossing<M: ScalarMap + ?Sized>(f: &M, tol: f64) -> Result<DowncrossingResult> {
    if !tol.is_finite() || !(MIN_TOL..1.0).contains(&tol) {
        return Err(Error::InvalidTolerance(tol));
    }
    probe_monotone(f)?;

    // g(lo) ≥ 0 ≥ g(hi) with g(x) = f(x) − x.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut iterations = 0;
    let mut exact = None;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let g = checked(f, mid)? - mid;
        if g > 0.0 {
            lo = mid;
        } else if g < 0.0 {
            hi = mid;
        } else {
            exact = Some(mid);
            break;
        }
    }
    let (t, bracket_width) = match exact {
        Some(t) => (t, 0.0),
        None => (0.5 * (lo + hi), hi - lo),
    };
    if bracket_width > tol {
        return Err(Error::NoConvergence { last: vec![t], residual: bracket_width });
    }
    if t < tol || t > 1.0 - tol {
        return Err(Error::BoundaryDowncrossing { t });
    }

    let residual = (checked(f, t)? - t).abs();
    let left = checked(f, (t - tol).max(0.0))?;
    let right = checked(f, (t + tol).min(1.0))?;
    let straddles = left >= t - tol && right <= t + tol;
    let kind = if straddles && (left - right > JUMP_GAP || residual > tol) {
        CrossingKind::Jump
    } else {
        CrossingKind::FixedPoint
    };

    let check = verify_with_slack(f, t, uniform_grid(POST_VERIFY_GRID), tol.max(VERIFY_SLACK))?;
    if let Some(v) = check.violations.first() {
        return Err(Error::NotMonotone {
            x0: if v.left_of_t { v.x } else { t },
            f0: if v.left_of_t { v.value } else { t },
            x1: if v.left_of_t { t } else { v.x },
            f1: if v.left_of_t { t } else { v.value },
        });
    }

    Ok(DowncrossingResult { t, residual, bracket_width, iterations, kind })
}

/// Downcrossing of `x ↦ f(x; params)` at fixed parameter values.
pub fn find_generalized_downcrossing<P: ?Sized>(
    f: impl Fn(f64, &P) -> f64,
    params: &P,
    tol: f64,
) -> Result<DowncrossingResult> {
    find_downcrossing(&|x: f64| f(x, params), tol)
}

fn uniform_grid(points: usize) -> impl Iterator<Item = f64> {
    let denom = (points.max(2) - 1) as f64;
    (0..points.max(2)).map(move |i| i as f64 / denom)
}

fn interior_grid(points: usize) -> impl Iterator<Item = f64> {
    let denom = (points + 1) as f64;
    (1..=points).map(move |i| i as f64 / denom)
}

fn verify_with_slack<M: ScalarMap + ?Sized>(
    f: &M,
    t: f64,
    grid: impl Iterator<Item = f64>,
    slack: f64,
) -> Result<Verification> {
    let mut violations = Vec::new();
    for x in grid {
        if (x - t).abs() < 1e-15 {
            continue;
        }
        let value = checked(f, x)?;
        if x < t && value < t - slack {
            violations.push(Violation { x, value, left_of_t: true });
        } else if x > t && value > t + slack {
            violations.push(Violation { x, value, left_of_t: false });
        }
    }
    Ok(Verification { holds: violations.is_empty(), violations })
}

/// Checks the downcrossing inequalities for `t` on a uniform grid of
/// `grid_size` points spanning `[0, 1]` (grid points equal to `t` skipped).
pub fn verify_downcrossing<M: ScalarMap + ?Sized>(f: &M, t: f64, grid_size: usize) -> Result<Verification> {
    if grid_size < 2 {
        return Err(Error::Config("verification grid needs at least 2 points".into()));
    }
    verify_with_slack(f, t, uniform_grid(grid_size), VERIFY_SLACK)
}

fn eval_vector<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64]) -> Result<Vec<f64>> {
    let y = f(x);
    if y.len() != x.len() {
        return Err(Error::Shape(format!("map returned {} components for {} inputs", y.len(), x.len())));
    }
    for (i, &v) in y.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain { x: x[i], value: v });
        }
    }
    Ok(y)
}

fn sup_residual(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Bisection for coordinate `j` with the other coordinates frozen.
fn bisect_coordinate<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &mut [f64], j: usize, tol: f64) -> Result<()> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut it = 0;
    while hi - lo > tol && it < MAX_BISECTIONS {
        it += 1;
        let mid = 0.5 * (lo + hi);
        x[j] = mid;
        let g = eval_vector(f, x)?[j] - mid;
        if g > 0.0 {
            lo = mid;
        } else if g < 0.0 {
            hi = mid;
        } else {
            return Ok(());
        }
    }
    x[j] = 0.5 * (lo + hi);
    Ok(())
}

/// Vectorial downcrossing by damped fixed-point iteration
/// `x ← (1 − λ)x + λF(x)`, falling back to round-robin coordinate bisection.
/// The result is verified coordinatewise with the other coordinates frozen.
pub fn find_vectorial_downcrossing<F: Fn(&[f64]) -> Vec<f64>>(
    f: F,
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<VectorDowncrossing> {
    if dim == 0 {
        return Err(Error::Shape("vectorial map of dimension 0".into()));
    }
    if !tol.is_finite() || !(MIN_TOL..1.0).contains(&tol) {
        return Err(Error::InvalidTolerance(tol));
    }
    let mut x = vec![0.5; dim];
    let mut residual = f64::INFINITY;
    let mut found = None;
    for it in 0..=max_iter {
        let y = eval_vector(&f, &x)?;
        residual = sup_residual(&x, &y);
        if residual <= tol {
            found = Some((it, VectorMethod::DampedIteration));
            break;
        }
        if it == max_iter {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = (1.0 - DAMPING) * *xi + DAMPING * yi;
        }
    }
    if found.is_none() {
        x = vec![0.5; dim];
        for sweep in 1..=MAX_SWEEPS {
            for j in 0..dim {
                bisect_coordinate(&f, &mut x, j, tol * 1e-2)?;
            }
            residual = sup_residual(&x, &eval_vector(&f, &x)?);
            if residual <= tol {
                found = Some((sweep, VectorMethod::CoordinateBisection));
                break;
            }
        }
    }
    let Some((iterations, method)) = found else {
        return Err(Error::NoConvergence { last: x, residual });
    };

    for j in 0..dim {
        let scalar = |s: f64| {
            let mut probe = x.clone();
            probe[j] = s;
            f(&probe)[j]
        };
        let check = verify_with_slack(&scalar, x[j], interior_grid(65), 10.0 * tol + VERIFY_SLACK)?;
        if let Some(v) = check.violations.first() {
            return Err(Error::InvalidWitness(format!(
                "component {j}: value {} at x = {} violates the downcrossing at {}",
                v.value, v.x, x[j]
            )));
        }
    }

    Ok(VectorDowncrossing { t: x, residual, iterations, method })
}

/// Limit for `φ = h1 ∘ h2` with `h1` decreasing and `h2` continuous and
/// increasing, given a witness `d` with `h1(d) = h2⁻¹(d)`. Returns `h2⁻¹(d)`
/// after checking it against the scalar solver applied to `h1 ∘ h2`.
pub fn composite_downcrossing(
    h1: impl Fn(f64) -> f64,
    h2: impl Fn(f64) -> f64,
    d: f64,
    tol: f64,
) -> Result<f64> {
    let (h2_lo, h2_hi) = (h2(0.0), h2(1.0));
    if !(h2_lo <= d && d <= h2_hi) {
        return Err(Error::InvalidWitness(format!("{d} is outside the range [{h2_lo}, {h2_hi}] of h2")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= f64::EPSILON {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h2(mid) < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let inverse = 0.5 * (lo + hi);
    let h1d = h1(d);
    if (h1d - inverse).abs() > tol {
        return Err(Error::InvalidWitness(format!("h1(d) = {h1d} differs from h2^-1(d) = {inverse}")));
    }
    let solved = find_downcrossing(&|x: f64| h1(h2(x)), tol)?;
    if (solved.t - inverse).abs() > 10.0 * tol {
        return Err(Error::InvalidWitness(format!(
            "solver downcrossing {} disagrees with h2^-1(d) = {inverse}",
            solved.t
        )));
    }
    Ok(inverse)
}
