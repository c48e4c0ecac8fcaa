//! Acceptance suite: one PASS/FAIL line per criterion. Reference values are
//! computed here independently of the library (closed forms, Cardano,
//! Newton iterations) rather than read back from it.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use allocsim::aa::{aa_limit_detail, AaRule};
use allocsim::cara::{cara_limit, eth_limit, zhang_hu_function, CaraLimitMode, CaraRule};
use allocsim::downcrossing::{find_downcrossing, find_vectorial_downcrossing, CrossingKind, DEFAULT_TOL};
use allocsim::func::RealFn;
use allocsim::limit::{Limit, LimitMethod};
use allocsim::models::{BinaryModel, CovariateSampler, LinearInteractionModel, ResponseModel, TargetFunction};
use allocsim::ra::{ra_limit, RaRule};
use allocsim::sim::{
    convergence_report, run_replications, run_replications_detailed, Design, ReplicationSummary, TrialConfig,
};
use allocsim::strata::{
    atkinson_general, huhu_weight_condition, strata_limit, strata_probability, Axis, CabcdFunction,
    ImbalanceWeights, StrataRule, StratumTable,
};
use allocsim::verify::{verify_design, VerifyContext};
use allocsim::Result;

/// `1 − Φ(1/2)`.
const ETH_ORACLE: f64 = 0.308_537_538_725_986_9;
/// `√0.7 / (√0.7 + √0.5)`.
const RSIHR_ORACLE: f64 = 0.541_960_108_450_192;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { ok, detail: detail.into() })
}

/// Root of `g` on `[lo, hi]` by Newton steps from the midpoint, with a
/// numerical derivative; used only to build reference values.
fn newton(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let h = 1e-7;
        let d = (g(x + h) - g(x - h)) / (2.0 * h);
        let step = g(x) / d;
        x -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    x
}

type Map = Box<dyn Fn(f64) -> f64>;

fn oracle_maps() -> Vec<(&'static str, Map, f64)> {
    let s5 = 5f64.sqrt();
    let s2 = 2f64.sqrt();
    // real root of x³ + x − 1 by Cardano
    let q = (31.0f64 / 108.0).sqrt();
    let cubic = (0.5 + q).cbrt() + (0.5 - q).cbrt();
    vec![
        ("1 - x", Box::new(|x| 1.0 - x), 0.5),
        ("1 - x^2", Box::new(|x| 1.0 - x * x), (s5 - 1.0) / 2.0),
        ("cos x", Box::new(f64::cos), 0.739_085_133_215_160_6),
        ("exp(-x)", Box::new(|x: f64| (-x).exp()), 0.567_143_290_409_783_8),
        ("(1 - x)/2", Box::new(|x| (1.0 - x) / 2.0), 1.0 / 3.0),
        ("1/(1 + x)", Box::new(|x| 1.0 / (1.0 + x)), (s5 - 1.0) / 2.0),
        ("(1 - x)^2", Box::new(|x| (1.0 - x) * (1.0 - x)), (3.0 - s5) / 2.0),
        ("1 - x^3", Box::new(|x| 1.0 - x * x * x), cubic),
        ("0.9 - 0.5x", Box::new(|x| 0.9 - 0.5 * x), 0.6),
        ("1/(1 + e^x)", Box::new(|x: f64| 1.0 / (1.0 + x.exp())), newton(|x| x * (1.0 + x.exp()) - 1.0, 0.0, 1.0)),
        ("1/(1 + 2x)", Box::new(|x| 1.0 / (1.0 + 2.0 * x)), 0.5),
        ("(1 - x^2)/2", Box::new(|x| 0.5 * (1.0 - x * x)), s2 - 1.0),
        ("exp(-2x)", Box::new(|x: f64| (-2.0 * x).exp()), newton(|x| x - (-2.0 * x).exp(), 0.0, 1.0)),
        ("1 - sqrt x", Box::new(|x: f64| 1.0 - x.sqrt()), (3.0 - s5) / 2.0),
        ("(1 - x)/(1 + x)", Box::new(|x| (1.0 - x) / (1.0 + x)), s2 - 1.0),
        ("1 - sin x", Box::new(|x: f64| 1.0 - x.sin()), newton(|x| x + x.sin() - 1.0, 0.0, 1.0)),
        ("0.7 - 0.5x", Box::new(|x| 0.7 - 0.5 * x), 7.0 / 15.0),
        ("2/(3 + x)", Box::new(|x| 2.0 / (3.0 + x)), (17f64.sqrt() - 3.0) / 2.0),
        ("1 - x^4", Box::new(|x: f64| 1.0 - x.powi(4)), newton(|x| x.powi(4) + x - 1.0, 0.0, 1.0)),
        ("1/(1 + x + x^2)", Box::new(|x| 1.0 / (1.0 + x + x * x)), newton(|x| x * x * x + x * x + x - 1.0, 0.0, 1.0)),
    ]
}

fn c1_downcrossing_oracles() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut bad = Vec::new();
    let maps = oracle_maps();
    for (name, f, t) in &maps {
        let r = find_downcrossing(&|x: f64| f(x), DEFAULT_TOL)?;
        let err = (r.t - t).abs();
        worst = worst.max(err);
        if err > 1e-10 {
            bad.push(format!("{name}: {} vs {t}", r.t));
        }
    }
    let mut steps_ok = true;
    for p in [0.6, 0.75, 0.9] {
        let efron = move |x: f64| if x < 0.5 { p } else if x > 0.5 { 1.0 - p } else { 0.5 };
        let r = find_downcrossing(&efron, DEFAULT_TOL)?;
        steps_ok &= r.t == 0.5 && r.bracket_width <= 1e-10 && r.kind == CrossingKind::Jump;
        // a step without the tie value still brackets the jump
        let open = move |x: f64| if x < 0.5 { p } else { 1.0 - p };
        let r = find_downcrossing(&open, DEFAULT_TOL)?;
        steps_ok &= (r.t - 0.5).abs() <= 1e-10 && r.bracket_width <= 1e-10;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && steps_ok && secs < 1.0,
        format!("{} maps, worst error {worst:.2e}, steps exact: {steps_ok}, {secs:.3}s {bad:?}", maps.len()),
    )
}

fn mean_abs(s: &ReplicationSummary, arm: usize, t: f64) -> f64 {
    s.final_pi.iter().map(|p| (p[arm] - t).abs()).sum::<f64>() / s.replications as f64
}

fn c2_efron() -> Result<Outcome> {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, p) in [0.6, 0.75, 0.9].into_iter().enumerate() {
        let design = Design::Aa(AaRule::Efron { p });
        let limit = aa_limit_detail(&AaRule::Efron { p })?;
        let s = run_replications(&TrialConfig::new(design, 5000), 500, 100 + i as u64)?;
        let rep = convergence_report(&s, &limit, 0.05)?;
        ok &= limit.scalar == 0.5 && rep.overall.mean_abs_error < 0.01 && rep.overall.fraction_within >= 0.95;
        parts.push(format!("p={p}: mean {:.5}, within {:.3}", rep.overall.mean_abs_error, rep.overall.fraction_within));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && secs < 10.0, format!("{}; {secs:.2}s", parts.join("; ")))
}

fn c3_extended_efron() -> Result<Outcome> {
    let rule = AaRule::EfronExtended { target: 0.7, p_low: 0.5, p_high: 0.9 };
    let limit = aa_limit_detail(&rule)?;
    let s = run_replications(&TrialConfig::new(Design::Aa(rule), 5000), 300, 300)?;
    let m = mean_abs(&s, 0, 0.7);
    outcome(m < 0.015 && (limit.scalar - 0.7).abs() < 1e-10, format!("limit {:.10}, mean |pi - 0.7| {m:.5}", limit.scalar))
}

fn c4_wei_abcd() -> Result<Outcome> {
    let wei = AaRule::WeiAdaptive { f: RealFn::linear_decreasing() };
    let abcd = AaRule::Abcd { f: RealFn::logistic(1.0) };
    let sw = run_replications(&TrialConfig::new(Design::Aa(wei.clone()), 5000), 300, 400)?;
    let sa = run_replications(&TrialConfig::new(Design::Aa(abcd.clone()), 5000), 300, 401)?;
    let (mw, ma) = (mean_abs(&sw, 0, 0.5), mean_abs(&sa, 0, 0.5));
    let max_d = sa.final_imbalance.iter().map(|d| d.abs()).max().unwrap_or(0);
    let limits = aa_limit_detail(&wei)?.scalar == 0.5 && aa_limit_detail(&abcd)?.scalar == 0.5;
    outcome(
        mw < 0.01 && ma < 0.01 && max_d <= 10 && limits,
        format!("Wei mean {mw:.5}, ABCD mean {ma:.5}, ABCD max |D_N| {max_d}"),
    )
}

fn c5_wei_multi() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, rule) in [AaRule::WeiMulti1 { arms: 3 }, AaRule::WeiMulti2 { arms: 3 }].into_iter().enumerate() {
        let limit = aa_limit_detail(&rule)?;
        let solver_err = limit.values.iter().map(|v| (v - 1.0 / 3.0).abs()).fold(0.0, f64::max);
        let s = run_replications(&TrialConfig::new(Design::Aa(rule.clone()), 6000), 200, 500 + i as u64)?;
        let rep = convergence_report(&s, &limit, 0.02)?;
        let worst = rep.per_arm.iter().map(|a| a.mean_abs_error).fold(0.0, f64::max);
        ok &= solver_err <= 1e-8 && worst < 0.02 && matches!(limit.method, LimitMethod::Vectorial { .. });
        parts.push(format!("{}: solver err {solver_err:.1e}, worst arm mean {worst:.5}", rule.name()));
    }
    outcome(ok, parts.join("; "))
}

fn binary(p_a: f64, p_b: f64) -> Result<ResponseModel> {
    Ok(ResponseModel::Binary(BinaryModel::new(p_a, p_b)?))
}

fn c6_response_adaptive() -> Result<Outcome> {
    let model = binary(0.7, 0.5)?;
    let mut ok = true;
    let mut parts = Vec::new();
    let cases: Vec<(RaRule, ResponseModel, f64)> = vec![
        (RaRule::Dbcd { nu: 2.0, target: TargetFunction::Rsihr }, model.clone(), RSIHR_ORACLE),
        (RaRule::Erade { alpha: 0.4, target: TargetFunction::Rsihr }, model.clone(), RSIHR_ORACLE),
        (RaRule::dawd_default(0.5), binary(0.7, 0.3)?, 0.85 / 1.5),
        (RaRule::Power { tau: 2.0, target: TargetFunction::Constant(0.64) }, model.clone(), 0.64),
    ];
    for (i, (rule, m, oracle)) in cases.into_iter().enumerate() {
        let lib_limit = ra_limit(&rule, &m.true_params())?;
        let cfg = TrialConfig::new(Design::Ra(rule.clone()), 8000).with_response(m).with_initial(5);
        let s = run_replications(&cfg, 300, 600 + i as u64)?;
        let err = mean_abs(&s, 0, oracle);
        ok &= err < 0.02 && (lib_limit - oracle).abs() < 1e-9;
        parts.push(format!("{}: limit {lib_limit:.6}, mean err {err:.5}", rule.name()));
    }
    outcome(ok, parts.join("; "))
}

fn eth_model() -> Result<ResponseModel> {
    Ok(ResponseModel::LinearInteraction(LinearInteractionModel::new(0.0, 1.0, 1.0, -1.0, 1.0)?))
}

fn c7_eth() -> Result<Outcome> {
    let model = eth_model()?;
    let sampler = CovariateSampler::standard_normal();
    let closed = eth_limit(0.0, 1.0, 1.0, -1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let solved = cara_limit(
        &CaraRule::Eth,
        &model,
        &sampler,
        CaraLimitMode::Solver { linear_in_features: false },
        100_000,
        &mut rng,
    )?;
    let se = match solved.method {
        LimitMethod::MonteCarlo { standard_error, .. } => standard_error,
        _ => f64::NAN,
    };
    let agree = (solved.scalar - closed).abs() <= 3.0 * se;
    let cfg = TrialConfig::new(Design::Cara(CaraRule::Eth), 10_000)
        .with_response(model)
        .with_covariates(sampler)
        .with_initial(10);
    let s = run_replications(&cfg, 300, 701)?;
    let err = mean_abs(&s, 0, ETH_ORACLE);
    outcome(
        err < 0.03 && agree && (closed - ETH_ORACLE).abs() < 1e-12,
        format!("closed {closed:.9}, solver {:.6} (se {se:.2e}), mean err {err:.5}", solved.scalar),
    )
}

fn c8_zhang_hu() -> Result<Outcome> {
    let rule = CaraRule::ZhangHu { nu: 2.0, target: TargetFunction::Constant(0.6) };
    let cfg = TrialConfig::new(Design::Cara(rule), 8000)
        .with_response(eth_model()?)
        .with_covariates(CovariateSampler::standard_normal())
        .with_initial(5);
    let s = run_replications(&cfg, 300, 800)?;
    let err = mean_abs(&s, 0, 0.6);
    let mut worst = 0.0_f64;
    for i in 1..=50 {
        for j in 1..=50 {
            let (y, b) = (i as f64 / 51.0, j as f64 / 51.0);
            worst = worst.max((zhang_hu_function(y, y, b, 2.0) - b).abs());
        }
    }
    outcome(err < 0.02 && worst <= 1e-12, format!("mean err {err:.5}, fixed-point identity worst {worst:.1e}"))
}

fn strata_config(rule: StrataRule, horizon: usize) -> Result<TrialConfig> {
    Ok(TrialConfig::new(Design::Strata(rule), horizon).with_covariates(CovariateSampler::uniform_strata(2, 2)?))
}

/// Worst per-stratum mean error against the limit, and the largest
/// terminal marginal imbalance over replications.
fn strata_stats(rule: StrataRule, horizon: usize, reps: usize, seed: u64) -> Result<(f64, f64, Limit)> {
    let limit = strata_limit(&rule, 2, 2, &[0.25; 4], None)?;
    let s = run_replications(&strata_config(rule, horizon)?, reps, seed)?;
    let rep = convergence_report(&s, &limit, 0.03)?;
    let worst = rep.per_stratum.as_ref().map_or(f64::NAN, |v| v.iter().map(|c| c.mean_abs_error).fold(0.0, f64::max));
    let marg = rep.max_marginal_imbalance.as_ref().map_or(f64::NAN, |v| v.iter().copied().fold(0.0, f64::max));
    Ok((worst, marg, limit))
}

fn c9_pocock_simon() -> Result<Outcome> {
    let (worst, marg, limit) = strata_stats(StrataRule::PocockSimon { p: 0.8 }, 4000, 300, 900)?;
    let limit_ok = limit.values.iter().all(|&v| v == 0.5);
    outcome(
        worst < 0.03 && marg < 0.02 && limit_ok,
        format!("worst stratum mean err {worst:.5}, max |n^-1 D(level)| {marg:.5}"),
    )
}

fn c10_hu_hu() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (w, expect)) in [((0.05, 0.1, 0.1, 0.75), true), ((0.25, 0.25, 0.25, 0.25), false)].into_iter().enumerate() {
        let weights = ImbalanceWeights::new(w.0, w.1, w.2, w.3)?;
        let cond = huhu_weight_condition(1, 1, &weights);
        let (worst, _, _) = strata_stats(StrataRule::HuHu { p: 0.85, weights }, 4000, 300, 1000 + i as u64)?;
        ok &= cond == expect && worst < 0.03;
        parts.push(format!("weights {w:?}: condition {cond}, worst stratum mean err {worst:.5}"));
    }
    outcome(ok, parts.join("; "))
}

fn c11_atkinson() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1100);
    let mut worst_gap = 0.0_f64;
    for _ in 0..100 {
        let (rows, cols) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let cells: Vec<(u64, u64)> = (0..rows * cols)
            .map(|_| {
                let s = rng.random_range(1..25u64);
                (s, rng.random_range(0..=s))
            })
            .collect();
        let t = StratumTable::from_counts(rows, cols, &cells)?;
        for j in 0..rows {
            for l in 0..cols {
                let a = strata_probability(&StrataRule::Atkinson, &t, (j, l), None)?;
                let (g, _) = atkinson_general(&t, j, l, true)?;
                worst_gap = worst_gap.max((a - g).abs());
            }
        }
    }
    let (w1, _, _) = strata_stats(StrataRule::Atkinson, 4000, 200, 1101)?;
    let (w2, _, _) = strata_stats(StrataRule::AtkinsonGeneral { interactions: true }, 4000, 200, 1102)?;
    outcome(
        worst_gap <= 1e-9 && w1 < 0.03 && w2 < 0.03,
        format!("forms differ by at most {worst_gap:.1e}; worst stratum mean err {w1:.5} / {w2:.5}"),
    )
}

fn c12_rdbcd() -> Result<Outcome> {
    let table = [0.4, 0.6, 0.5, 0.7];
    let rule = StrataRule::Rdbcd { targets: table.iter().map(|&c| TargetFunction::Constant(c)).collect() };
    let limit = strata_limit(&rule, 2, 2, &[0.25; 4], None)?;
    let s = run_replications(&strata_config(rule, 6000)?, 200, 1200)?;
    let rep = convergence_report(&s, &limit, 0.03)?;
    let worst = rep.per_stratum.as_ref().map_or(f64::NAN, |v| v.iter().map(|c| c.mean_abs_error).fold(0.0, f64::max));
    let oracle = table.iter().sum::<f64>() / 4.0;
    let overall = s.final_pi.iter().map(|p| p[0]).sum::<f64>() / s.replications as f64;
    outcome(
        worst < 0.03 && (overall - oracle).abs() < 0.02 && (limit.scalar - oracle).abs() < 1e-8,
        format!("limit {:.8}, worst stratum mean err {worst:.5}, mean pi_N {overall:.5}", limit.scalar),
    )
}

/// Every design from the criteria above, configured as there.
fn all_designs() -> Result<Vec<(String, TrialConfig)>> {
    let normal = CovariateSampler::standard_normal();
    let mut out: Vec<(String, TrialConfig)> = Vec::new();
    let mut push = |cfg: TrialConfig| out.push((cfg.design.name().to_string(), cfg));
    for p in [0.6, 0.75, 0.9] {
        push(TrialConfig::new(Design::Aa(AaRule::Efron { p }), 0));
    }
    push(TrialConfig::new(Design::Aa(AaRule::EfronExtended { target: 0.7, p_low: 0.5, p_high: 0.9 }), 0));
    push(TrialConfig::new(Design::Aa(AaRule::WeiAdaptive { f: RealFn::linear_decreasing() }), 0));
    push(TrialConfig::new(Design::Aa(AaRule::Abcd { f: RealFn::logistic(1.0) }), 0));
    push(TrialConfig::new(Design::Aa(AaRule::WeiMulti1 { arms: 3 }), 0));
    push(TrialConfig::new(Design::Aa(AaRule::WeiMulti2 { arms: 3 }), 0));
    let m = binary(0.7, 0.5)?;
    for rule in [
        RaRule::Dbcd { nu: 2.0, target: TargetFunction::Rsihr },
        RaRule::Erade { alpha: 0.4, target: TargetFunction::Rsihr },
        RaRule::Power { tau: 2.0, target: TargetFunction::Constant(0.64) },
    ] {
        push(TrialConfig::new(Design::Ra(rule), 0).with_response(m.clone()).with_initial(5));
    }
    push(TrialConfig::new(Design::Ra(RaRule::dawd_default(0.5)), 0).with_response(binary(0.7, 0.3)?).with_initial(5));
    for rule in [CaraRule::Eth, CaraRule::ZhangHu { nu: 2.0, target: TargetFunction::Constant(0.6) }] {
        push(
            TrialConfig::new(Design::Cara(rule), 0)
                .with_response(eth_model()?)
                .with_covariates(normal.clone())
                .with_initial(10),
        );
    }
    for rule in [
        StrataRule::PocockSimon { p: 0.8 },
        StrataRule::HuHu { p: 0.85, weights: ImbalanceWeights::new(0.05, 0.1, 0.1, 0.75)? },
        StrataRule::HuHu { p: 0.85, weights: ImbalanceWeights::new(0.25, 0.25, 0.25, 0.25)? },
        StrataRule::Atkinson,
        StrataRule::AtkinsonGeneral { interactions: true },
        StrataRule::Rdbcd { targets: [0.4, 0.6, 0.5, 0.7].iter().map(|&c| TargetFunction::Constant(c)).collect() },
    ] {
        push(strata_config(rule, 0)?);
    }
    Ok(out)
}

fn c13_martingale() -> Result<Outcome> {
    const N: usize = 100_000;
    const R: usize = 100;
    let mut ok = true;
    let mut worst_share = 1.0_f64;
    let mut worst_abs = 0.0_f64;
    let designs = all_designs()?;
    for (i, (name, mut cfg)) in designs.iter().cloned().enumerate() {
        cfg.horizon = N;
        cfg.record_stride = N;
        let s = run_replications(&cfg, R, 1300 + i as u64)?;
        let share = s.martingale.iter().filter(|m| m.abs() < 0.02).count() as f64 / R as f64;
        worst_abs = s.martingale.iter().fold(worst_abs, |a, m| a.max(m.abs()));
        if share < 0.99 {
            ok = false;
            println!("    martingale: {name} within 0.02 in {share:.2} of replications");
        }
        worst_share = worst_share.min(share);
    }
    // fault injection: the engine draws from φ + 0.1 but accounts with φ
    let mut detected = true;
    for design in [Design::Aa(AaRule::CompleteRandomization), Design::Aa(AaRule::Efron { p: 0.75 })] {
        let mut cfg = TrialConfig::new(design, N).with_seed(1399).with_stride(N);
        cfg.draw_shift = 0.1;
        let t = run_replications_detailed(&cfg, 1, 1399)?;
        let r = allocsim::sim::martingale_residual(&t[0])?;
        detected &= r > 0.05;
    }
    outcome(
        ok && detected,
        format!(
            "{} designs at N = {N}, R = {R}: worst share within 0.02 = {worst_share:.2}, max |n^-1 M_N| {worst_abs:.4}; fault detected: {detected}",
            designs.len()
        ),
    )
}

fn c14_properties() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1400);
    let ctx = VerifyContext { random_cases: 100_000, ..Default::default() };
    let mut failures = Vec::new();
    let mut checks = 0usize;
    let mut designs: Vec<Design> = all_designs()?.into_iter().map(|(_, c)| c.design).collect();
    designs.extend([
        Design::Aa(AaRule::CompleteRandomization),
        Design::Aa(AaRule::OneSidedCoin),
        Design::Ra(RaRule::Sml { target: TargetFunction::Constant(0.55) }),
        Design::Cara(CaraRule::ZhangTarget { target: TargetFunction::Probit { scale: 1.0 } }),
        Design::Strata(StrataRule::CAbcd { f: CabcdFunction::PowerKnown { probs: vec![0.25; 4] } }),
        Design::Strata(StrataRule::CAbcd { f: CabcdFunction::PowerEstimated }),
        Design::Strata(StrataRule::CAbcd { f: CabcdFunction::Shared(RealFn::logistic(1.0)) }),
    ]);
    for d in &designs {
        let report = verify_design(d, &ctx, &mut rng)?;
        for c in &report.checks {
            checks += c.checked;
            if !c.passed {
                failures.push(format!("{} / {}: {:?}", report.design, c.name, c.witnesses.first()));
            }
        }
    }
    // the additive Atkinson form leaves the decreasing branch once its fitted
    // imbalance exceeds 1 in magnitude; the grid must report that
    let additive = verify_design(&Design::Strata(StrataRule::AtkinsonGeneral { interactions: false }), &ctx, &mut rng)?;
    let additive_flagged = additive.checks.iter().any(|c| c.name.starts_with("nonincreasing") && !c.passed);

    // imbalance identities on random tables
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let (rows, cols) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let cells: Vec<(u64, u64)> = (0..rows * cols)
            .map(|_| {
                let s = rng.random_range(0..60u64);
                (s, rng.random_range(0..=s))
            })
            .collect();
        let t = StratumTable::from_counts(rows, cols, &cells)?;
        if t.n() == 0 {
            continue;
        }
        let n = t.n() as f64;
        for j in 0..rows {
            let d = cells[j * cols..(j + 1) * cols].iter().map(|&(s, a)| 2 * a as i64 - s as i64).sum::<i64>();
            worst = worst.max((d as f64 - n * t.marginal_imbalance(Axis::Row, j)?).abs());
        }
        for l in 0..cols {
            let d = (0..rows).map(|j| cells[j * cols + l]).map(|(s, a)| 2 * a as i64 - s as i64).sum::<i64>();
            worst = worst.max((d as f64 - n * t.marginal_imbalance(Axis::Col, l)?).abs());
        }
        let a_total: u64 = cells.iter().map(|c| c.1).sum();
        worst = worst.max((2.0 * a_total as f64 / n - 1.0 - t.global_imbalance_from_cells()?).abs());
    }
    // the vectorial solver on the stratified Atkinson map reproduces 1/2
    let atk = |x: &[f64]| x.iter().map(|&p| (1.0 - p).powi(2) / ((1.0 - p).powi(2) + p * p)).collect::<Vec<_>>();
    let v = find_vectorial_downcrossing(atk, 4, 1e-8, 2000)?;
    let vec_ok = v.t.iter().all(|t| (t - 0.5).abs() <= 1e-8);
    outcome(
        failures.is_empty() && worst <= 1e-9 && vec_ok && additive_flagged,
        format!(
            "{} designs, {checks} property evaluations, identity worst {worst:.1e}, failures {failures:?}; \
             additive Atkinson non-monotonicity reported: {additive_flagged}",
            designs.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, fn() -> Result<Outcome>)> = vec![
        ("downcrossing solver oracle suite", c1_downcrossing_oracles),
        ("Efron biased coin converges to 1/2", c2_efron),
        ("extended Efron coin converges to 0.7", c3_extended_efron),
        ("Wei adaptive coin and ABCD converge to 1/2", c4_wei_abcd),
        ("three-arm Wei urn rules converge to 1/3", c5_wei_multi),
        ("DBCD, ERADE, DAWD and power rule reach their targets", c6_response_adaptive),
        ("ETH rule converges to 1 - Phi(1/2)", c7_eth),
        ("covariate-adjusted DBCD converges to its target", c8_zhang_hu),
        ("Pocock-Simon balances strata and margins", c9_pocock_simon),
        ("Hu-Hu balances strata with and without the weight condition", c10_hu_hu),
        ("Atkinson stratified and general forms agree and balance", c11_atkinson),
        ("stratified DBCD reaches its target table", c12_rdbcd),
        ("martingale residual and fault injection", c13_martingale),
        ("property suites", c14_properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(o) => (o.ok, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {name}: {detail} [{:.2}s]", i + 1, start.elapsed().as_secs_f64());
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
