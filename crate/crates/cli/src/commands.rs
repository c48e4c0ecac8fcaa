use std::io::Write;
use std::path::{Path, PathBuf};

use allocsim::aa::aa_limit_detail;
use allocsim::cara::cara_limit;
use allocsim::limit::{Limit, LimitMethod};
use allocsim::models::CovariateSampler;
use allocsim::ra::ra_limit_detail;
use allocsim::sim::{
    catalogue, convergence_report, run_replications_detailed, summary_json, write_trajectory_csv, Design,
    ReplicationSummary, SCHEMA_VERSION,
};
use allocsim::strata::strata_limit;
use allocsim::verify::{verify_design, VerifyContext, VerifyReport};
use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::output::Artifacts;
use crate::spec::{ExperimentSpec, Format};

fn rng(spec: &ExperimentSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(spec.run.seed)
}

pub fn compute_limit(spec: &ExperimentSpec) -> Result<Limit> {
    let design = spec.design()?;
    let model = spec.model()?;
    let covariates = spec.covariates()?;
    let need_model = || model.clone().ok_or_else(|| anyhow!("{} needs a [model] section for its limit", design.name()));
    let limit = match &design {
        Design::Aa(r) => aa_limit_detail(r)?,
        Design::Ra(r) => ra_limit_detail(r, &need_model()?.true_params())?,
        Design::Cara(r) => {
            let sampler = covariates.ok_or_else(|| anyhow!("{} needs a [covariates] section", design.name()))?;
            cara_limit(r, &need_model()?, &sampler, spec.cara_mode(), spec.run.mc_samples, &mut rng(spec))?
        }
        Design::Strata(r) => {
            let Some(CovariateSampler::Categorical { rows, cols, probs }) = covariates else {
                return Err(anyhow!("{} needs categorical [covariates]", design.name()));
            };
            let params = model.map(|m| m.true_params());
            strata_limit(r, rows, cols, &probs, params.as_ref())?
        }
    };
    Ok(limit)
}

fn method_label(m: &LimitMethod) -> String {
    match m {
        LimitMethod::ClosedForm => "closed form".into(),
        LimitMethod::Scalar { crossing } => format!("scalar downcrossing ({crossing:?})"),
        LimitMethod::Vectorial { method } => format!("vectorial downcrossing ({method:?})"),
        LimitMethod::MonteCarlo { standard_error, crossing } => match crossing {
            Some(c) => format!("Monte Carlo, se {standard_error:.2e}, downcrossing ({c:?})"),
            None => format!("Monte Carlo, se {standard_error:.2e}"),
        },
    }
}

fn out_dir(spec: &ExperimentSpec) -> Option<PathBuf> {
    spec.run.out.as_ref().map(PathBuf::from)
}

/// Writes artifacts through `f`, removing everything on failure.
fn with_artifacts<T>(dir: &Path, f: impl FnOnce(&mut Artifacts) -> Result<T>) -> Result<T> {
    let mut a = Artifacts::create(dir)?;
    match f(&mut a) {
        Ok(v) => Ok(v),
        Err(e) => {
            a.discard();
            Err(e)
        }
    }
}

pub fn simulate(spec: &ExperimentSpec) -> Result<()> {
    let cfg = spec.trial_config()?;
    let limit = compute_limit(spec).context("computing the limit for the convergence report")?;
    let trajectories = run_replications_detailed(&cfg, spec.run.reps, spec.run.seed)?;
    let summary = ReplicationSummary::from_trajectories(&trajectories, spec.run.seed)?;
    let report = convergence_report(&summary, &limit, spec.run.epsilon)?;
    let mut doc = summary_json(&summary, Some(&report), Some(spec))?;
    doc["limit"] = serde_json::to_value(&limit)?;

    let dir = out_dir(spec).unwrap_or_else(|| PathBuf::from("allocsim-out"));
    let keep = spec.run.trajectories.min(trajectories.len());
    with_artifacts(&dir, |a| {
        a.write_json("summary.json", &doc)?;
        match spec.run.format {
            Format::Csv => {
                for (r, t) in trajectories.iter().take(keep).enumerate() {
                    a.write(&format!("trajectory_{r:03}.csv"), |w| Ok(write_trajectory_csv(t, w)?))?;
                }
            }
            Format::Json if keep > 0 => {
                let body = json!({ "schema_version": SCHEMA_VERSION, "trajectories": &trajectories[..keep] });
                a.write_json("trajectories.json", &body)?;
            }
            Format::Json => {}
        }
        Ok(())
    })?;
    println!("{}: {}", cfg.design.name(), report.verdict());
    Ok(())
}

pub fn limit(spec: &ExperimentSpec) -> Result<()> {
    let design = spec.design()?;
    let limit = compute_limit(spec)?;
    let mut out = String::new();
    out.push_str(&format!("design    {}\n", design.name()));
    let shape = match spec.covariates()? {
        Some(CovariateSampler::Categorical { rows, cols, .. }) if matches!(design, Design::Strata(_)) => {
            Some((rows, cols))
        }
        _ => None,
    };
    match shape {
        Some((_, cols)) => {
            out.push_str(&format!("limit     {:.6} overall\n", limit.scalar));
            for row in limit.values.chunks(cols) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                out.push_str(&format!("          {}\n", cells.join("  ")));
            }
        }
        None if limit.values.len() > 2 => {
            let cells: Vec<String> = limit.values.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!("limit     {}\n", cells.join("  ")));
        }
        None => out.push_str(&format!("limit     {:.6}\n", limit.scalar)),
    }
    out.push_str(&format!("method    {}\n", method_label(&limit.method)));
    out.push_str(&format!("residual  {:.3e}\n", limit.residual));
    if let Some(dir) = out_dir(spec) {
        let doc = json!({ "schema_version": SCHEMA_VERSION, "spec": spec, "limit": limit });
        with_artifacts(&dir, |a| a.write_json("limit.json", &doc).map(|_| ()))?;
    }
    print!("{out}");
    Ok(())
}

/// Returns whether every property passed.
pub fn verify(spec: &ExperimentSpec) -> Result<bool> {
    let design = spec.design()?;
    let ctx = VerifyContext {
        grid: spec.run.verify_grid,
        random_cases: spec.run.verify_cases,
        strata_shape: match spec.covariates()? {
            Some(CovariateSampler::Categorical { rows, cols, .. }) => (rows, cols),
            _ => (2, 2),
        },
        true_params: spec.model()?.map(|m| m.true_params()),
    };
    let report = verify_design(&design, &ctx, &mut rng(spec))?;
    if let Some(dir) = out_dir(spec) {
        let doc = json!({ "schema_version": SCHEMA_VERSION, "spec": spec, "report": report });
        with_artifacts(&dir, |a| a.write_json("verify.json", &doc).map(|_| ()))?;
    }
    print!("{}", render_report(&report));
    Ok(report.all_passed())
}

fn render_report(report: &VerifyReport) -> String {
    let mut s = format!("{}\n", report.design);
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("  {status}  {} ({} evaluations)\n", c.name, c.checked));
        for w in &c.witnesses {
            s.push_str(&format!("        witness: {w}\n"));
        }
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    s.push_str(&format!("{} properties, {} failed\n", report.checks.len(), failed));
    s
}

pub fn list_designs(format: Format) -> Result<()> {
    let entries = catalogue();
    let mut out = std::io::stdout().lock();
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &entries)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "{:<16} {:<5} {:<36} reference", "design", "class", "parameters")?;
            for e in &entries {
                writeln!(out, "{:<16} {:<5} {:<36} {}", e.name, e.class.label(), e.parameters, e.reference)?;
            }
        }
    }
    Ok(())
}
