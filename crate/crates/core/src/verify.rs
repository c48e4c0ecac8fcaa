//! Grid and random-input property checks for a design's allocation
//! function: probability range, monotonicity in the allocation proportion,
//! symmetry, fixed points and the downcrossing at the theoretical limit.

use rand::Rng;
use serde::Serialize;

use crate::aa::{aa_limit_detail, aa_probability_or_convention, AaRule};
use crate::cara::{cara_probability, zhang_hu_function, CaraRule};
use crate::downcrossing::verify_downcrossing;
use crate::error::Result;
use crate::models::{ModelShape, ParamEstimate};
use crate::ra::{ra_probability, RaRule};
use crate::sim::Design;
use crate::state::{AllocationState, Covariate};
use crate::strata::{
    atkinson_general, rdbcd_function, strata_probability, CabcdFunction, StrataRule, StratumTable,
};

const MAX_WITNESSES: usize = 5;
const EQ_TOL: f64 = 1e-12;
/// Slack allowed before a decrease counts as an increase.
const MONO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    /// Up to five failing inputs.
    pub witnesses: Vec<String>,
}

impl PropertyCheck {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), passed: true, checked: 0, witnesses: Vec::new() }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.passed = false;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub design: String,
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Inputs the checks need beyond the rule itself.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    /// Points per axis of the deterministic grids.
    pub grid: usize,
    /// Random inputs for the range check.
    pub random_cases: usize,
    pub strata_shape: (usize, usize),
    /// Parameters at which limits and signals are evaluated.
    pub true_params: Option<ParamEstimate>,
}

impl Default for VerifyContext {
    fn default() -> Self {
        Self { grid: 101, random_cases: 10_000, strata_shape: (2, 2), true_params: None }
    }
}

fn grid(points: usize) -> Vec<f64> {
    // interior points of (0, 1), always including 1/2 for odd counts
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

fn in_unit(p: f64) -> bool {
    (0.0..=1.0).contains(&p) && p.is_finite()
}

/// Nonincreasing check of `f` along an increasing grid.
fn monotone_along(check: &mut PropertyCheck, xs: &[f64], mut f: impl FnMut(f64) -> f64, label: &str) {
    let mut prev: Option<(f64, f64)> = None;
    for &x in xs {
        let y = f(x);
        if let Some((px, py)) = prev {
            check.check(y <= py + MONO_SLACK, || format!("{label}: phi({px:.4}) = {py:.6} < phi({x:.4}) = {y:.6}"));
        }
        prev = Some((x, y));
    }
}

/// Runs every property declared for `design`.
pub fn verify_design<R: Rng + ?Sized>(design: &Design, ctx: &VerifyContext, rng: &mut R) -> Result<VerifyReport> {
    let checks = match design {
        Design::Aa(r) => verify_aa(r, ctx, rng)?,
        Design::Ra(r) => verify_ra(r, ctx, rng)?,
        Design::Cara(r) => verify_cara(r, ctx, rng)?,
        Design::Strata(r) => verify_strata(r, ctx, rng)?,
    };
    Ok(VerifyReport { design: design.name().to_string(), checks })
}

fn verify_aa<R: Rng + ?Sized>(rule: &AaRule, ctx: &VerifyContext, rng: &mut R) -> Result<Vec<PropertyCheck>> {
    rule.validate()?;
    let k = rule.arms();
    let xs = grid(ctx.grid);
    let mut range = PropertyCheck::new("probability range and sum to one");
    for _ in 0..ctx.random_cases {
        let n = rng.random_range(0..500u64);
        let mut counts = vec![0u64; k];
        for _ in 0..n {
            counts[rng.random_range(0..k)] += 1;
        }
        let p = aa_probability_or_convention(rule, &AllocationState::from_counts(counts.clone())?)?;
        let ok = p.iter().all(|&v| in_unit(v)) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        range.check(ok, || format!("counts {counts:?} -> {p:?}"));
    }
    let mut out = vec![range];

    let mut mono = PropertyCheck::new("nonincreasing in pi");
    if k == 2 {
        for n in [1u64, 10, 100] {
            monotone_along(&mut mono, &xs, |x| rule.allocation_fn(x, n).unwrap_or(f64::NAN), &format!("n = {n}"));
        }
    } else {
        // own share grows, the rest split evenly
        for arm in 0..k {
            let f = |x: f64| {
                let rest = (1.0 - x) / (k - 1) as f64;
                let v: Vec<f64> = (0..k).map(|i| if i == arm { x } else { rest }).collect();
                rule.vector_fn(&v, 1).map(|p| p[arm]).unwrap_or(f64::NAN)
            };
            monotone_along(&mut mono, &xs, f, &format!("arm {arm}"));
        }
    }
    out.push(mono);

    if matches!(
        rule,
        AaRule::CompleteRandomization | AaRule::Efron { .. } | AaRule::WeiAdaptive { .. } | AaRule::Abcd { .. }
    ) {
        let mut sym = PropertyCheck::new("symmetry phi(1 - x) = 1 - phi(x)");
        for n in [1u64, 10, 100] {
            for &x in &xs {
                let (a, b) = (rule.allocation_fn(x, n)?, rule.allocation_fn(1.0 - x, n)?);
                sym.check((a + b - 1.0).abs() <= 1e-12, || format!("x = {x}, n = {n}: {a} + {b}"));
            }
        }
        out.push(sym);
    }

    let mut down = PropertyCheck::new("downcrossing at the limit");
    match aa_limit_detail(rule) {
        Err(e) => down.check(false, || format!("no limit: {e}")),
        Ok(limit) if k == 2 => {
            let n = if matches!(rule, AaRule::Abcd { .. }) { 100 } else { 1 };
            let f = |x: f64| rule.allocation_fn(x, n).unwrap_or(f64::NAN);
            let v = verify_downcrossing(&f, limit.scalar, ctx.grid * 10)?;
            down.check(v.holds, || format!("t = {}: {} violations", limit.scalar, v.violations.len()));
        }
        Ok(limit) => {
            let y = rule.vector_fn(&limit.values, 1)?;
            let r = y.iter().zip(&limit.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            down.check(r <= 1e-8, || format!("residual {r} at {:?}", limit.values));
        }
    }
    out.push(down);
    Ok(out)
}

fn verify_ra<R: Rng + ?Sized>(rule: &RaRule, ctx: &VerifyContext, rng: &mut R) -> Result<Vec<PropertyCheck>> {
    rule.validate()?;
    let xs = grid(ctx.grid);
    let ys = grid(ctx.grid.min(25));
    let is_dawd = matches!(rule, RaRule::Dawd { .. });
    // DAWD reads an estimated difference in (−1, 1), the others a target in (0, 1)
    let signal = |y: f64| if is_dawd { 2.0 * y - 1.0 } else { y };

    let mut range = PropertyCheck::new("probability range");
    for _ in 0..ctx.random_cases {
        let (x, y) = (rng.random::<f64>(), signal(rng.random::<f64>()));
        let p = ra_probability(rule, x, y);
        range.check(p.as_ref().is_ok_and(|&p| in_unit(p)), || format!("x = {x}, y = {y}: {p:?}"));
    }
    let mut mono = PropertyCheck::new("nonincreasing in pi");
    for &y in &ys {
        monotone_along(&mut mono, &xs, |x| rule.probability_at(x, signal(y)), &format!("y = {}", signal(y)));
    }
    let mut out = vec![range, mono];

    if is_dawd {
        let mut g = PropertyCheck::new("g1/g2 conditions");
        g.check(rule.validate().is_ok(), || "validation failed".into());
        out.push(g);
        return Ok(out);
    }

    let mut incr = PropertyCheck::new("nondecreasing in the target");
    for &x in &xs {
        monotone_along(&mut incr, &ys, |y| -rule.probability_at(x, y), &format!("x = {x}"));
    }
    let mut fixed = PropertyCheck::new("phi(x; x) = x");
    for &x in &xs {
        let v = rule.probability_at(x, x);
        fixed.check((v - x).abs() <= 1e-12, || format!("phi({x}; {x}) = {v}"));
    }
    out.extend([incr, fixed]);

    if matches!(rule, RaRule::Dbcd { .. } | RaRule::Erade { .. }) {
        let mut sym = PropertyCheck::new("phi(x; y) = 1 - phi(1 - x; 1 - y)");
        for &x in &xs {
            for &y in &ys {
                let (a, b) = (rule.probability_at(x, y), rule.probability_at(1.0 - x, 1.0 - y));
                sym.check((a + b - 1.0).abs() <= 1e-12, || format!("x = {x}, y = {y}"));
            }
        }
        out.push(sym);
    }
    if matches!(rule, RaRule::Dbcd { .. }) {
        out.push(continuity_check(|x, y| rule.probability_at(x, y), &xs, &ys));
    }
    Ok(out)
}

/// Small steps must give small changes: `|φ(x + h) − φ(x)| ≤ 1e-4` for `h = 1e-7`
/// in either argument.
fn continuity_check(f: impl Fn(f64, f64) -> f64, xs: &[f64], ys: &[f64]) -> PropertyCheck {
    const H: f64 = 1e-7;
    let mut c = PropertyCheck::new("continuous on (0, 1)^2");
    for &x in xs {
        for &y in ys {
            let v = f(x, y);
            let dx = (f(x + H, y) - v).abs();
            let dy = (f(x, y + H) - v).abs();
            c.check(dx <= 1e-4 && dy <= 1e-4, || format!("jump near ({x}, {y}): {dx}, {dy}"));
        }
    }
    c
}

fn random_linear<R: Rng + ?Sized>(rng: &mut R) -> ParamEstimate {
    let coef = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
    ParamEstimate::Linear { coef, shape: ModelShape::Interaction, ridged: false }
}

fn verify_cara<R: Rng + ?Sized>(rule: &CaraRule, ctx: &VerifyContext, rng: &mut R) -> Result<Vec<PropertyCheck>> {
    rule.validate()?;
    let xs = grid(ctx.grid);
    let ys = grid(ctx.grid.min(50));
    let mut range = PropertyCheck::new("probability range");
    for _ in 0..ctx.random_cases {
        let est = ctx.true_params.clone().unwrap_or_else(|| random_linear(rng));
        let z = Covariate::Scalar { z: rng.random_range(-4.0..4.0) };
        let (x, a) = (rng.random::<f64>(), rng.random_range(0.01..0.99));
        let p = cara_probability(rule, x, &est, Some(a), &z);
        range.check(p.as_ref().is_ok_and(|&p| in_unit(p)), || format!("x = {x}, z = {z:?}: {p:?}"));
    }
    let mut out = vec![range];
    if let CaraRule::ZhangHu { nu, .. } = *rule {
        let mut mono = PropertyCheck::new("nonincreasing in pi");
        for &a in &ys {
            for &b in &ys {
                monotone_along(&mut mono, &xs, |x| zhang_hu_function(x, a, b, nu), &format!("a = {a}, b = {b}"));
            }
        }
        let mut fixed = PropertyCheck::new("phi(a; a, b) = b");
        for &a in &ys {
            for &b in &ys {
                let v = zhang_hu_function(a, a, b, nu);
                fixed.check((v - b).abs() <= EQ_TOL, || format!("a = {a}, b = {b}: {v}"));
            }
        }
        out.extend([mono, fixed]);
    }
    Ok(out)
}

fn random_table<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<StratumTable> {
    let cells: Vec<(u64, u64)> = (0..rows * cols)
        .map(|_| {
            let s = rng.random_range(0..40u64);
            (s, rng.random_range(0..=s))
        })
        .collect();
    StratumTable::from_counts(rows, cols, &cells)
}

fn verify_strata<R: Rng + ?Sized>(rule: &StrataRule, ctx: &VerifyContext, rng: &mut R) -> Result<Vec<PropertyCheck>> {
    let (rows, cols) = ctx.strata_shape;
    rule.validate(rows, cols)?;
    let k = rows * cols;
    let est = ctx.true_params.as_ref();
    let mut range = PropertyCheck::new("probability range");
    for _ in 0..ctx.random_cases {
        let t = random_table(rows, cols, rng)?;
        let cell = (rng.random_range(0..rows), rng.random_range(0..cols));
        let p = strata_probability(rule, &t, cell, est);
        range.check(p.as_ref().is_ok_and(|&p| in_unit(p)), || format!("{t:?} at {cell:?}: {p:?}"));
    }
    let mut out = vec![range];

    // the own-cell proportion moves, everything else stays at a random state
    let xs = grid(ctx.grid.min(51));
    let mut mono = PropertyCheck::new("nonincreasing in the stratum's pi");
    for _ in 0..20 {
        let mut pis: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let freqs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let n = rng.random_range(10.0..500.0);
        for i in 0..k {
            let saved = pis[i];
            let f = |x: f64| {
                pis[i] = x;
                rule.cell_map(rows, cols, &pis, &freqs, n, est).map(|v| v[i]).unwrap_or(f64::NAN)
            };
            monotone_along(&mut mono, &xs, f, &format!("cell {i}"));
            pis[i] = saved;
        }
    }
    out.push(mono);

    match rule {
        StrataRule::PocockSimon { .. } | StrataRule::HuHu { .. } => {
            let mut bal = PropertyCheck::new("1/2 on balanced tables");
            for _ in 0..200 {
                let cells: Vec<(u64, u64)> = (0..k)
                    .map(|_| {
                        let h = rng.random_range(0..20u64);
                        (2 * h, h)
                    })
                    .collect();
                let t = StratumTable::from_counts(rows, cols, &cells)?;
                for j in 0..rows {
                    for l in 0..cols {
                        let p = strata_probability(rule, &t, (j, l), est)?;
                        bal.check(p == 0.5, || format!("{cells:?} at ({j}, {l}): {p}"));
                    }
                }
            }
            out.push(bal);
        }
        StrataRule::CAbcd { f } => {
            let mut sym = PropertyCheck::new("F(-x) = 1 - F(x)");
            let probs = match f {
                CabcdFunction::PowerKnown { probs } => probs.clone(),
                _ => vec![1.0 / k as f64; k],
            };
            for i in 0..k {
                for d in -30i64..=30 {
                    let (cells_p, cells_m) = cabcd_pair(rows, cols, i, d);
                    let t_p = StratumTable::from_counts(rows, cols, &cells_p)?;
                    let t_m = StratumTable::from_counts(rows, cols, &cells_m)?;
                    let cell = (i / cols, i % cols);
                    let (a, b) = (strata_probability(rule, &t_p, cell, est)?, strata_probability(rule, &t_m, cell, est)?);
                    sym.check((a + b - 1.0).abs() <= 1e-12, || format!("cell {i}, D = {d}: {a} + {b} (p = {})", probs[i]));
                }
            }
            out.push(sym);
        }
        StrataRule::Atkinson | StrataRule::AtkinsonGeneral { interactions: true } => {
            let mut eq = PropertyCheck::new("stratified and general forms agree");
            for _ in 0..100 {
                let cells: Vec<(u64, u64)> = (0..k)
                    .map(|_| {
                        let s = rng.random_range(1..30u64);
                        (s, rng.random_range(0..=s))
                    })
                    .collect();
                let t = StratumTable::from_counts(rows, cols, &cells)?;
                for j in 0..rows {
                    for l in 0..cols {
                        let a = strata_probability(&StrataRule::Atkinson, &t, (j, l), None)?;
                        let (g, _) = atkinson_general(&t, j, l, true)?;
                        eq.check((a - g).abs() <= 1e-9, || format!("{cells:?} at ({j}, {l}): {a} vs {g}"));
                    }
                }
            }
            out.push(eq);
        }
        StrataRule::Rdbcd { .. } => out.extend(rdbcd_conditions(ctx.grid.min(21))),
        _ => {}
    }
    Ok(out)
}

/// Two tables where stratum `i` has imbalance `d` and `−d`, same size.
fn cabcd_pair(rows: usize, cols: usize, i: usize, d: i64) -> (Vec<(u64, u64)>, Vec<(u64, u64)>) {
    let size = 40 + d.rem_euclid(2) as u64;
    let a_plus = ((size as i64 + d) / 2) as u64;
    let mut p = vec![(10, 5); rows * cols];
    let mut m = p.clone();
    p[i] = (size, a_plus);
    m[i] = (size, size - a_plus);
    (p, m)
}

/// Conditions i–iv of the stratified DBCD family on a grid.
pub fn rdbcd_conditions(points: usize) -> Vec<PropertyCheck> {
    let g = grid(points);
    let mut dec_x = PropertyCheck::new("decreasing in x");
    let mut inc_y = PropertyCheck::new("increasing in y");
    let mut fixed = PropertyCheck::new("phi(x; x, z) = x");
    let mut z_dir = PropertyCheck::new("decreasing in z below the target, increasing above");
    let mut sym = PropertyCheck::new("phi(x; y, z) = 1 - phi(1 - x; 1 - y, z)");
    for &z in &g {
        for &y in &g {
            monotone_along(&mut dec_x, &g, |x| rdbcd_function(x, y, z), &format!("y = {y}, z = {z}"));
        }
        for &x in &g {
            monotone_along(&mut inc_y, &g, |y| -rdbcd_function(x, y, z), &format!("x = {x}, z = {z}"));
            let v = rdbcd_function(x, x, z);
            fixed.check((v - x).abs() <= 1e-12, || format!("x = {x}, z = {z}: {v}"));
            for &y in &g {
                let (a, b) = (rdbcd_function(x, y, z), rdbcd_function(1.0 - x, 1.0 - y, z));
                sym.check((a + b - 1.0).abs() <= 1e-12, || format!("x = {x}, y = {y}, z = {z}"));
            }
        }
    }
    for &x in &g {
        for &y in &g {
            if x < y {
                monotone_along(&mut z_dir, &g, |z| rdbcd_function(x, y, z), &format!("x = {x} < y = {y}"));
            } else if x > y {
                monotone_along(&mut z_dir, &g, |z| -rdbcd_function(x, y, z), &format!("x = {x} > y = {y}"));
            }
        }
    }
    vec![dec_x, inc_y, fixed, z_dir, sym]
}
