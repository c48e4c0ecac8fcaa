use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::engine::Trajectory;
use super::replicate::ReplicationSummary;
use super::report::ConvergenceReport;

pub const SCHEMA_VERSION: u32 = 1;

/// Writes a trajectory in long format: one row per recorded step and arm
/// (or stratum), preceded by a `# schema_version: N` comment line.
///
/// Columns: `step,arm_or_stratum,pi,estimate_0..estimate_{k-1},martingale`.
/// Stratum labels are `s<j>_<l>`; empty strata leave `pi` blank.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    writeln!(out, "# schema_version: {SCHEMA_VERSION}")?;
    let width = traj.estimate_path.as_ref().map_or(0, |p| p.iter().map(Vec::len).max().unwrap_or(0));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "arm_or_stratum".into(), "pi".into()];
    header.extend((0..width).map(|i| format!("estimate_{i}")));
    header.push("martingale".into());
    w.write_record(&header)?;

    let fmt = |v: f64| format!("{v}");
    for (i, &step) in traj.steps.iter().enumerate() {
        let tail = |row: &mut Vec<String>| {
            let est = traj.estimate_path.as_ref().map(|p| &p[i]);
            for k in 0..width {
                row.push(est.and_then(|e| e.get(k)).map_or(String::new(), |v| fmt(*v)));
            }
            row.push(traj.martingale_path.as_ref().map_or(String::new(), |p| fmt(p[i])));
        };
        for (arm, &pi) in traj.pi_path[i].iter().enumerate() {
            let mut row = vec![step.to_string(), format!("arm{arm}"), fmt(pi)];
            tail(&mut row);
            w.write_record(&row)?;
        }
        if let (Some(path), Some((_, cols))) = (&traj.strata_path, traj.strata_shape) {
            for (c, pi) in path[i].iter().enumerate() {
                let mut row = vec![step.to_string(), format!("s{}_{}", c / cols, c % cols), pi.map_or(String::new(), fmt)];
                tail(&mut row);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDocument<'a, S: Serialize> {
    schema_version: u32,
    spec: Option<&'a S>,
    summary: &'a ReplicationSummary,
    report: Option<&'a ConvergenceReport>,
}

/// JSON document with the summary, the report and the resolved spec.
pub fn summary_json<S: Serialize>(
    summary: &ReplicationSummary,
    report: Option<&ConvergenceReport>,
    spec: Option<&S>,
) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(SummaryDocument { schema_version: SCHEMA_VERSION, spec, summary, report })?)
}
