//! Stratified allocation with two categorical covariates `T` (rows) and
//! `W` (columns): stratum bookkeeping, imbalance measures and the balancing
//! and target-driven stratified rules.

use nalgebra::{DMatrix, DVector};

use crate::downcrossing::{find_vectorial_downcrossing, DEFAULT_VECTOR_TOL};
use crate::error::{Error, Result};
use crate::func::{check_symmetric_decreasing, power_family, RealFn};
use crate::limit::{Limit, LimitMethod};
use crate::models::{FeatureMap, ParamEstimate, TargetFunction};
use crate::ra::dbcd_function;
use crate::state::Covariate;

/// Ridge added to a singular `FᵗF` in the general Atkinson rule.
pub const ATKINSON_RIDGE: f64 = 1e-8;
const RANK_RATIO: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Levels of `T`.
    Row,
    /// Levels of `W`.
    Col,
}

/// Stratum sizes `N(j, l)` and arm-A counts `Ñ(j, l)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumTable {
    rows: usize,
    cols: usize,
    sizes: Vec<u64>,
    a_counts: Vec<u64>,
    n: u64,
}

impl StratumTable {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 1 || cols < 1 {
            return Err(Error::Shape(format!("{rows}x{cols} stratum table")));
        }
        let k = rows * cols;
        Ok(Self { rows, cols, sizes: vec![0; k], a_counts: vec![0; k], n: 0 })
    }

    /// Builds a table from row-major `(N, Ñ)` pairs.
    pub fn from_counts(rows: usize, cols: usize, cells: &[(u64, u64)]) -> Result<Self> {
        let mut t = Self::new(rows, cols)?;
        if cells.len() != rows * cols {
            return Err(Error::Shape(format!("{} cells for a {rows}x{cols} table", cells.len())));
        }
        for (i, &(size, a)) in cells.iter().enumerate() {
            if a > size {
                return Err(Error::Shape(format!("cell {i} has {a} A-assignments out of {size}")));
            }
            t.sizes[i] = size;
            t.a_counts[i] = a;
            t.n += size;
        }
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    fn index(&self, t: usize, w: usize) -> Result<usize> {
        if t >= self.rows || w >= self.cols {
            return Err(Error::StratumOutOfRange { t, w, rows: self.rows, cols: self.cols });
        }
        Ok(t * self.cols + w)
    }

    pub fn update(&self, t: usize, w: usize, arm: usize) -> Result<Self> {
        let mut next = self.clone();
        next.record(t, w, arm)?;
        Ok(next)
    }

    pub fn record(&mut self, t: usize, w: usize, arm: usize) -> Result<()> {
        if arm > 1 {
            return Err(Error::ArmOutOfRange { arm, arms: 2 });
        }
        let i = self.index(t, w)?;
        self.sizes[i] += 1;
        if arm == 0 {
            self.a_counts[i] += 1;
        }
        self.n += 1;
        Ok(())
    }

    /// `(N(j, l), Ñ(j, l))`.
    pub fn cell(&self, t: usize, w: usize) -> Result<(u64, u64)> {
        let i = self.index(t, w)?;
        Ok((self.sizes[i], self.a_counts[i]))
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn a_counts(&self) -> &[u64] {
        &self.a_counts
    }

    /// `π(j, l)` for nonempty strata, row-major.
    pub fn cell_proportions(&self) -> Vec<Option<f64>> {
        self.sizes
            .iter()
            .zip(&self.a_counts)
            .map(|(&s, &a)| (s > 0).then(|| a as f64 / s as f64))
            .collect()
    }

    /// `p̂_{jl} = N(j, l)/n`, row-major.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::UndefinedProportion);
        }
        Ok(self.sizes.iter().map(|&s| s as f64 / self.n as f64).collect())
    }

    fn d(size: u64, a: u64) -> i64 {
        2 * a as i64 - size as i64
    }

    /// `D(j, l) = 2Ñ(j, l) − N(j, l)`.
    pub fn cell_imbalance(&self, t: usize, w: usize) -> Result<i64> {
        let (s, a) = self.cell(t, w)?;
        Ok(Self::d(s, a))
    }

    /// Integer imbalance over one level of `T` or `W`.
    pub fn level_imbalance(&self, axis: Axis, level: usize) -> Result<i64> {
        let (bound, other) = match axis {
            Axis::Row => (self.rows, self.cols),
            Axis::Col => (self.cols, self.rows),
        };
        if level >= bound {
            let (t, w) = if axis == Axis::Row { (level, 0) } else { (0, level) };
            return Err(Error::StratumOutOfRange { t, w, rows: self.rows, cols: self.cols });
        }
        let mut d = 0;
        for k in 0..other {
            let (t, w) = if axis == Axis::Row { (level, k) } else { (k, level) };
            d += self.cell_imbalance(t, w)?;
        }
        Ok(d)
    }

    /// `D_n = 2Ñ_n − n`.
    pub fn global_count_imbalance(&self) -> i64 {
        Self::d(self.n, self.a_counts.iter().sum())
    }

    /// `n⁻¹D(level) = Σ [2π(j, l) − 1]·p̂_{jl}` over the cells of the level;
    /// empty cells contribute 0.
    pub fn marginal_imbalance(&self, axis: Axis, level: usize) -> Result<f64> {
        let freqs = self.frequencies()?;
        let pis = self.cell_proportions();
        self.level_imbalance(axis, level)?;
        let cells: Vec<usize> = match axis {
            Axis::Row => (0..self.cols).map(|w| level * self.cols + w).collect(),
            Axis::Col => (0..self.rows).map(|t| t * self.cols + level).collect(),
        };
        Ok(cells
            .into_iter()
            .map(|i| pis[i].map_or(0.0, |p| (2.0 * p - 1.0) * freqs[i]))
            .sum())
    }

    /// `n⁻¹D_n = 2π_n − 1`.
    pub fn global_imbalance(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::UndefinedProportion);
        }
        Ok(2.0 * self.a_counts.iter().sum::<u64>() as f64 / self.n as f64 - 1.0)
    }

    /// The same quantity assembled from cells, `ΣΣ [2π(j, l) − 1]·p̂_{jl}`.
    pub fn global_imbalance_from_cells(&self) -> Result<f64> {
        let freqs = self.frequencies()?;
        Ok(self
            .cell_proportions()
            .iter()
            .zip(&freqs)
            .map(|(p, f)| p.map_or(0.0, |p| (2.0 * p - 1.0) * f))
            .sum())
    }
}

/// Weights of the global, `T`-marginal, `W`-marginal and within-stratum imbalances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceWeights {
    pub global: f64,
    pub t: f64,
    pub w: f64,
    pub stratum: f64,
}

impl ImbalanceWeights {
    pub fn new(global: f64, t: f64, w: f64, stratum: f64) -> Result<Self> {
        let ws = [global, t, w, stratum];
        if ws.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (ws.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidRule(format!("imbalance weights {ws:?} must be nonnegative and sum to 1")));
        }
        Ok(Self { global, t, w, stratum })
    }
}

/// `(JL + J + L)ω_g + Jω_W + Lω_T < 1/2` with `J = rows − 1`, `L = cols − 1`.
pub fn huhu_weight_condition(j: usize, l: usize, weights: &ImbalanceWeights) -> bool {
    let (j, l) = (j as f64, l as f64);
    (j * l + j + l) * weights.global + j * weights.w + l * weights.t < 0.5
}

/// Stratum functions of the covariate-adaptive biased coin.
#[derive(Debug, Clone)]
pub enum CabcdFunction {
    /// `F^q` with `q(p) = 1/p`, using known stratum probabilities (row-major).
    PowerKnown { probs: Vec<f64> },
    /// `F^q` with `q(p) = 1/p` and `p` replaced by the running `p̂_{jl}`.
    PowerEstimated,
    /// The same decreasing symmetric `F` in every stratum.
    Shared(RealFn),
}

#[derive(Debug, Clone)]
pub enum StrataRule {
    /// Minimisation on `D(t_j) + D(w_l)` with bias `p`.
    PocockSimon { p: f64 },
    /// Biased coin on a weighted sum of global, marginal and stratum imbalances.
    HuHu { p: f64, weights: ImbalanceWeights },
    /// `F_{jl}(D(j, l))`.
    CAbcd { f: CabcdFunction },
    /// Atkinson's rule in its stratified form `(1 − π)² / ((1 − π)² + π²)`.
    Atkinson,
    /// Atkinson's rule computed from `(1; f̃(z))ᵗ(FᵗF)⁻¹b` with dummy coding
    /// of both covariates and, optionally, all interactions.
    AtkinsonGeneral { interactions: bool },
    /// Per-stratum DBCD with exponent `(1 − p̂_{jl})/p̂_{jl}` toward
    /// `targets[j·cols + l]`.
    Rdbcd { targets: Vec<TargetFunction> },
}

fn coin(p: f64, s: f64) -> f64 {
    if s < -TIE_TOL {
        p
    } else if s > TIE_TOL {
        1.0 - p
    } else {
        0.5
    }
}

/// `(1 − s)² / ((1 − s)² + (1 + s)²)`.
fn atkinson_from_score(s: f64) -> f64 {
    let (a, b) = ((1.0 - s).powi(2), (1.0 + s).powi(2));
    a / (a + b)
}

/// Atkinson's stratified probability for a cell with proportion `pi`.
pub fn atkinson_stratified(pi: f64) -> f64 {
    let (a, b) = ((1.0 - pi).powi(2), pi.powi(2));
    a / (a + b)
}

/// Row `(1; f̃(z))` of the general Atkinson design matrix.
fn atkinson_row(rows: usize, cols: usize, interactions: bool, t: usize, w: usize) -> Result<Vec<f64>> {
    let mut r = vec![1.0];
    r.extend(FeatureMap::Dummies { rows, cols, interactions }.apply(&Covariate::Stratum { t, w })?);
    Ok(r)
}

/// General Atkinson probability and whether the ridge fallback was used.
///
/// `weights[i]` and `imbalances[i]` play the roles of `N(j, l)` and `D(j, l)`;
/// passing `p̂_{jl}` and `p̂_{jl}(2π − 1)` gives the same score. `FᵗF` counts
/// as singular when Cholesky fails or a pivot falls below `1e-12` times the
/// largest diagonal entry.
fn atkinson_general_weighted(
    rows: usize,
    cols: usize,
    interactions: bool,
    weights: &[f64],
    imbalances: &[f64],
    t: usize,
    w: usize,
) -> Result<(f64, bool)> {
    let design: Vec<DVector<f64>> = (0..rows * cols)
        .map(|i| atkinson_row(rows, cols, interactions, i / cols, i % cols).map(DVector::from_vec))
        .collect::<Result<_>>()?;
    let k = design[0].len();
    let mut ftf = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (i, r) in design.iter().enumerate() {
        if weights[i] != 0.0 {
            ftf.ger(weights[i], r, r, 1.0);
            b.axpy(imbalances[i], r, 1.0);
        }
    }
    let scale = ftf.diagonal().max();
    let chol = ftf.clone().cholesky().filter(|c| {
        let l = c.l_dirty();
        (0..k).all(|i| l[(i, i)] * l[(i, i)] >= RANK_RATIO * scale)
    });
    let (sol, singular) = match chol {
        Some(c) if scale > 0.0 => (c.solve(&b), false),
        _ => {
            let a = &ftf + DMatrix::identity(k, k) * ATKINSON_RIDGE;
            (a.lu().solve(&b).ok_or(Error::SingularDesign)?, true)
        }
    };
    Ok((atkinson_from_score(design[t * cols + w].dot(&sol)), singular))
}

/// General Atkinson rule on a table; the flag reports a ridged solve.
pub fn atkinson_general(table: &StratumTable, t: usize, w: usize, interactions: bool) -> Result<(f64, bool)> {
    table.index(t, w)?;
    if table.n == 0 {
        return Ok((0.5, false));
    }
    let weights: Vec<f64> = table.sizes.iter().map(|&s| s as f64).collect();
    let d: Vec<f64> = table
        .sizes
        .iter()
        .zip(&table.a_counts)
        .map(|(&s, &a)| StratumTable::d(s, a) as f64)
        .collect();
    atkinson_general_weighted(table.rows, table.cols, interactions, &weights, &d, t, w)
}

impl StrataRule {
    pub fn name(&self) -> &'static str {
        match self {
            StrataRule::PocockSimon { .. } => "PocockSimon",
            StrataRule::HuHu { .. } => "HuHu",
            StrataRule::CAbcd { .. } => "CABCD",
            StrataRule::Atkinson => "Atkinson",
            StrataRule::AtkinsonGeneral { .. } => "AtkinsonGeneral",
            StrataRule::Rdbcd { .. } => "RDBCD",
        }
    }

    /// Reads responses through an estimated target.
    pub fn uses_estimates(&self) -> bool {
        match self {
            StrataRule::Rdbcd { targets } => targets.iter().any(|t| t.uses_estimates()),
            _ => false,
        }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let bias = |p: f64| {
            if (0.5..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidRule(format!("bias {p} outside [1/2, 1]")))
            }
        };
        match self {
            StrataRule::PocockSimon { p } => bias(*p),
            StrataRule::HuHu { p, weights } => {
                bias(*p)?;
                ImbalanceWeights::new(weights.global, weights.t, weights.w, weights.stratum).map(|_| ())
            }
            StrataRule::CAbcd { f } => match f {
                CabcdFunction::PowerKnown { probs } => {
                    if probs.len() != rows * cols || probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
                        Err(Error::InvalidDistribution("C-ABCD needs a positive probability per stratum".into()))
                    } else {
                        Ok(())
                    }
                }
                CabcdFunction::PowerEstimated => Ok(()),
                CabcdFunction::Shared(f) => check_symmetric_decreasing(f, 25.0, false),
            },
            StrataRule::Atkinson | StrataRule::AtkinsonGeneral { .. } => Ok(()),
            StrataRule::Rdbcd { targets } => {
                if targets.len() != rows * cols {
                    return Err(Error::Shape(format!("{} targets for {} strata", targets.len(), rows * cols)));
                }
                targets.iter().try_for_each(|t| t.validate())
            }
        }
    }

    fn cabcd_value(f: &CabcdFunction, d: f64, cell: usize, p_hat: f64) -> f64 {
        match f {
            CabcdFunction::PowerKnown { probs } => power_family(d, 1.0 / probs[cell]),
            CabcdFunction::PowerEstimated => {
                if p_hat > 0.0 {
                    power_family(d, 1.0 / p_hat)
                } else {
                    0.5
                }
            }
            CabcdFunction::Shared(f) => f.eval(d),
        }
    }

    /// `φ_{jl}` as a function of the cell proportions `pis` and stratum
    /// frequencies `freqs` (both row-major), for a trial of size `n`.
    /// Used for limits and property checks; the trial loop uses
    /// [`strata_probability`], which works on integer counts.
    pub fn cell_map(
        &self,
        rows: usize,
        cols: usize,
        pis: &[f64],
        freqs: &[f64],
        n: f64,
        est: Option<&ParamEstimate>,
    ) -> Result<Vec<f64>> {
        let k = rows * cols;
        if pis.len() != k || freqs.len() != k {
            return Err(Error::Shape(format!("expected {k} cells")));
        }
        let dev: Vec<f64> = pis.iter().zip(freqs).map(|(p, f)| (p - 0.5) * f).collect();
        let row_sum = |j: usize| (0..cols).map(|l| dev[j * cols + l]).sum::<f64>();
        let col_sum = |l: usize| (0..rows).map(|j| dev[j * cols + l]).sum::<f64>();
        let total: f64 = dev.iter().sum();
        let mut out = Vec::with_capacity(k);
        for j in 0..rows {
            for l in 0..cols {
                let i = j * cols + l;
                let v = match self {
                    StrataRule::PocockSimon { p } => coin(*p, row_sum(j) + col_sum(l)),
                    StrataRule::HuHu { p, weights: wt } => coin(
                        *p,
                        wt.global * total + wt.t * row_sum(j) + wt.w * col_sum(l) + wt.stratum * dev[i],
                    ),
                    StrataRule::CAbcd { f } => Self::cabcd_value(f, 2.0 * n * dev[i], i, freqs[i]),
                    StrataRule::Atkinson => atkinson_stratified(pis[i]),
                    StrataRule::AtkinsonGeneral { interactions } => {
                        let d: Vec<f64> = dev.iter().map(|v| 2.0 * v).collect();
                        atkinson_general_weighted(rows, cols, *interactions, freqs, &d, j, l)?.0
                    }
                    StrataRule::Rdbcd { targets } => {
                        let y = rdbcd_target(&targets[i], est, j, l)?;
                        rdbcd_function(pis[i], y, freqs[i])
                    }
                };
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// RDBCD allocation function: DBCD form with exponent `ν(z) = (1 − z)/z`.
pub fn rdbcd_function(x: f64, y: f64, z: f64) -> f64 {
    dbcd_function(x, y, (1.0 - z) / z)
}

fn rdbcd_target(target: &TargetFunction, est: Option<&ParamEstimate>, t: usize, w: usize) -> Result<f64> {
    let none = ParamEstimate::None;
    target.eval(est.unwrap_or(&none), Some(&Covariate::Stratum { t, w }))
}

/// Probability of arm A for the incoming subject in stratum `(t, w)`.
/// Sign tests use integer imbalances; an empty stratum gives 1/2 for the
/// rules that read its own proportion.
pub fn strata_probability(
    rule: &StrataRule,
    table: &StratumTable,
    stratum: (usize, usize),
    est: Option<&ParamEstimate>,
) -> Result<f64> {
    let (t, w) = stratum;
    let i = table.index(t, w)?;
    let (size, a) = (table.sizes[i], table.a_counts[i]);
    let d_cell = StratumTable::d(size, a);
    Ok(match rule {
        StrataRule::PocockSimon { p } => {
            let s = table.level_imbalance(Axis::Row, t)? + table.level_imbalance(Axis::Col, w)?;
            coin(*p, s as f64)
        }
        StrataRule::HuHu { p, weights: wt } => {
            let s = wt.global * table.global_count_imbalance() as f64
                + wt.t * table.level_imbalance(Axis::Row, t)? as f64
                + wt.w * table.level_imbalance(Axis::Col, w)? as f64
                + wt.stratum * d_cell as f64;
            coin(*p, s)
        }
        StrataRule::CAbcd { f } => {
            let p_hat = if table.n > 0 { size as f64 / table.n as f64 } else { 0.0 };
            StrataRule::cabcd_value(f, d_cell as f64, i, p_hat)
        }
        StrataRule::Atkinson => {
            if size == 0 {
                0.5
            } else {
                atkinson_stratified(a as f64 / size as f64)
            }
        }
        StrataRule::AtkinsonGeneral { interactions } => atkinson_general(table, t, w, *interactions)?.0,
        StrataRule::Rdbcd { targets } => {
            if size == 0 {
                0.5
            } else {
                let y = rdbcd_target(&targets[i], est, t, w)?;
                rdbcd_function(a as f64 / size as f64, y, size as f64 / table.n as f64)
            }
        }
    })
}

/// Per-stratum limits (row-major) and the `p`-weighted overall limit.
///
/// Balancing rules converge to 1/2 in every stratum; RDBCD to its target
/// table. Continuous rules are solved with the vectorial solver, step rules
/// report the residual of the map at the all-1/2 point.
pub fn strata_limit(
    rule: &StrataRule,
    rows: usize,
    cols: usize,
    probs: &[f64],
    true_params: Option<&ParamEstimate>,
) -> Result<Limit> {
    rule.validate(rows, cols)?;
    if probs.len() != rows * cols {
        return Err(Error::Shape(format!("{} probabilities for {} strata", probs.len(), rows * cols)));
    }
    if let Some(i) = probs.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "stratum ({}, {}) has probability {}",
            i / cols,
            i % cols,
            probs[i]
        )));
    }
    if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution("stratum probabilities do not sum to 1".into()));
    }
    let weighted = |t: &[f64]| t.iter().zip(probs).map(|(a, b)| a * b).sum::<f64>();
    match rule {
        StrataRule::Atkinson | StrataRule::AtkinsonGeneral { .. } | StrataRule::Rdbcd { .. } => {
            let f = |x: &[f64]| {
                rule.cell_map(rows, cols, x, probs, 1.0, true_params)
                    .unwrap_or_else(|_| vec![f64::NAN; x.len()])
            };
            let r = find_vectorial_downcrossing(f, rows * cols, DEFAULT_VECTOR_TOL, 2000)?;
            Ok(Limit::from_vector(&r, weighted(&r.t)))
        }
        _ => {
            let t = vec![0.5; rows * cols];
            // C-ABCD's D = n·p·(2π − 1) vanishes at 1/2 for every n
            let y = rule.cell_map(rows, cols, &t, probs, 1.0, true_params)?;
            let residual = y.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
            Ok(Limit { scalar: weighted(&t), values: t, residual, method: LimitMethod::ClosedForm })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weights(g: f64, t: f64, w: f64, s: f64) -> ImbalanceWeights {
        ImbalanceWeights::new(g, t, w, s).unwrap()
    }

    #[test]
    fn table_updates() {
        let t = StratumTable::new(2, 2).unwrap().update(0, 0, 0).unwrap();
        assert_eq!(t.cell(0, 0).unwrap(), (1, 1));
        assert!(matches!(t.update(2, 0, 0), Err(Error::StratumOutOfRange { .. })));
    }

    #[test]
    fn marginal_examples() {
        // π(0,0) = 0.6, π(0,1) = 0.4, each stratum a quarter of n = 20
        let t = StratumTable::from_counts(2, 2, &[(5, 3), (5, 2), (5, 2), (5, 3)]).unwrap();
        assert!(t.marginal_imbalance(Axis::Row, 0).unwrap().abs() < 1e-15);
        let t = StratumTable::from_counts(2, 1, &[(4, 3), (4, 1)]).unwrap();
        assert!(t.marginal_imbalance(Axis::Col, 0).unwrap().abs() < 1e-15);
        assert_eq!(t.level_imbalance(Axis::Col, 0).unwrap(), 0);
        let t = StratumTable::from_counts(1, 2, &[(7, 5), (3, 2)]).unwrap();
        assert!((t.global_imbalance().unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn pocock_simon_cases() {
        let r = StrataRule::PocockSimon { p: 0.8 };
        // D(t_0) = 2, D(w_0) = −3 on a 2×2 table
        let t = StratumTable::from_counts(2, 2, &[(2, 0), (4, 4), (2, 0), (1, 1)]).unwrap();
        assert_eq!(t.level_imbalance(Axis::Row, 0).unwrap(), 2);
        assert_eq!(t.level_imbalance(Axis::Col, 0).unwrap(), -4);
        assert_eq!(strata_probability(&r, &t, (0, 0), None).unwrap(), 0.8);
        let t = StratumTable::from_counts(2, 2, &[(2, 1), (2, 1), (2, 1), (2, 1)]).unwrap();
        assert_eq!(strata_probability(&r, &t, (1, 1), None).unwrap(), 0.5);
        let t = StratumTable::from_counts(2, 2, &[(2, 2), (2, 2), (2, 2), (2, 1)]).unwrap();
        assert!((strata_probability(&r, &t, (0, 0), None).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn huhu_weighted_sum() {
        let wt = weights(0.05, 0.1, 0.1, 0.75);
        let r = StrataRule::HuHu { p: 0.8, weights: wt };
        let balanced = StratumTable::from_counts(2, 2, &[(2, 1); 4]).unwrap();
        assert_eq!(strata_probability(&r, &balanced, (0, 1), None).unwrap(), 0.5);
        // D = 2, D(t_0) = −4, D(w_0) = 0, D(0,0) = −1
        let t = StratumTable::from_counts(2, 2, &[(3, 1), (3, 0), (3, 2), (3, 3)]).unwrap();
        assert_eq!(
            (
                t.global_count_imbalance(),
                t.level_imbalance(Axis::Row, 0).unwrap(),
                t.level_imbalance(Axis::Col, 0).unwrap(),
                t.cell_imbalance(0, 0).unwrap()
            ),
            (0, -4, 0, -1)
        );
        let t = StratumTable::from_counts(2, 2, &[(3, 1), (3, 0), (3, 2), (5, 5)]).unwrap();
        assert_eq!(t.global_count_imbalance(), 2);
        assert_eq!(strata_probability(&r, &t, (0, 0), None).unwrap(), 0.8);
    }

    #[test]
    fn weight_condition_examples() {
        assert!(huhu_weight_condition(1, 1, &weights(0.05, 0.1, 0.1, 0.75)));
        assert!(!huhu_weight_condition(1, 1, &weights(0.1, 0.1, 0.1, 0.7)));
        assert!(huhu_weight_condition(1, 1, &weights(0.0, 0.0, 0.0, 1.0)));
        assert!(!huhu_weight_condition(1, 1, &weights(0.25, 0.25, 0.25, 0.25)));
        assert!(ImbalanceWeights::new(0.5, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn cabcd_power_family() {
        let r = StrataRule::CAbcd { f: CabcdFunction::PowerKnown { probs: vec![0.25; 4] } };
        let t = StratumTable::from_counts(2, 2, &[(2, 2), (0, 0), (0, 0), (2, 0)]).unwrap();
        assert!((strata_probability(&r, &t, (0, 0), None).unwrap() - 1.0 / 17.0).abs() < 1e-15);
        assert!((strata_probability(&r, &t, (1, 1), None).unwrap() - 16.0 / 17.0).abs() < 1e-15);
        assert_eq!(strata_probability(&r, &t, (0, 1), None).unwrap(), 0.5);
    }

    #[test]
    fn atkinson_forms() {
        assert_eq!(atkinson_stratified(0.5), 0.5);
        let want = 0.16 / (0.16 + 0.36);
        assert!((atkinson_stratified(0.6) - want).abs() < 1e-15);
        assert!((atkinson_from_score(0.2) - want).abs() < 1e-15);
        let t = StratumTable::from_counts(2, 2, &[(5, 3), (4, 1), (6, 3), (3, 3)]).unwrap();
        for (j, l) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let a = strata_probability(&StrataRule::Atkinson, &t, (j, l), None).unwrap();
            let (g, ridged) = atkinson_general(&t, j, l, true).unwrap();
            assert!(!ridged);
            assert!((a - g).abs() < 1e-9);
        }
        let sparse = StratumTable::from_counts(2, 2, &[(5, 3), (0, 0), (6, 3), (3, 3)]).unwrap();
        assert!(atkinson_general(&sparse, 0, 0, true).unwrap().1);
    }

    #[test]
    fn rdbcd_fixed_point_and_limits() {
        for &x in &[0.2, 0.5, 0.77] {
            assert!((rdbcd_function(x, x, 0.3) - x).abs() < 1e-12);
        }
        let targets: Vec<_> = [0.4, 0.6, 0.5, 0.7].iter().map(|&c| TargetFunction::Constant(c)).collect();
        let r = StrataRule::Rdbcd { targets };
        let l = strata_limit(&r, 2, 2, &[0.25; 4], None).unwrap();
        for (a, b) in l.values.iter().zip([0.4, 0.6, 0.5, 0.7]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((l.scalar - 0.55).abs() < 1e-8);
    }

    #[test]
    fn balance_limits() {
        let l = strata_limit(&StrataRule::PocockSimon { p: 0.8 }, 2, 3, &[1.0 / 6.0; 6], None).unwrap();
        assert_eq!(l.values, vec![0.5; 6]);
        assert!((l.scalar - 0.5).abs() < 1e-15 && l.residual == 0.0);
        let l = strata_limit(&StrataRule::Atkinson, 2, 2, &[0.1, 0.2, 0.3, 0.4], None).unwrap();
        assert!(l.values.iter().all(|v| (v - 0.5).abs() < 1e-8));
        let l = strata_limit(&StrataRule::AtkinsonGeneral { interactions: false }, 2, 2, &[0.1, 0.2, 0.3, 0.4], None)
            .unwrap();
        assert!(l.values.iter().all(|v| (v - 0.5).abs() < 1e-8));
        assert!(matches!(
            strata_limit(&StrataRule::Atkinson, 2, 2, &[0.0, 0.2, 0.4, 0.4], None),
            Err(Error::InvalidDistribution(_))
        ));
    }

    proptest! {
        #[test]
        fn imbalance_identities(cells in proptest::collection::vec((0u64..30, 0u64..30), 6)) {
            let cells: Vec<(u64, u64)> = cells.into_iter().map(|(s, a)| (s + a, a)).collect();
            let t = StratumTable::from_counts(2, 3, &cells).unwrap();
            prop_assume!(t.n() > 0);
            let n = t.n() as f64;
            for j in 0..2 {
                let d = t.level_imbalance(Axis::Row, j).unwrap() as f64;
                prop_assert!((d - n * t.marginal_imbalance(Axis::Row, j).unwrap()).abs() < 1e-9);
            }
            for l in 0..3 {
                let d = t.level_imbalance(Axis::Col, l).unwrap() as f64;
                prop_assert!((d - n * t.marginal_imbalance(Axis::Col, l).unwrap()).abs() < 1e-9);
            }
            prop_assert!((t.global_imbalance().unwrap() - t.global_imbalance_from_cells().unwrap()).abs() < 1e-12);
            prop_assert_eq!(t.sizes().iter().sum::<u64>(), t.n());
        }
    }
}
