//! Experiment specs: a sectioned TOML (or JSON) document with `[design]`,
//! `[model]`, `[covariates]` and `[run]` tables.
//!
//! Values resolve in this order, later winning: built-in defaults, the spec
//! file, `--set section.key=value` overrides, then the dedicated flags
//! (`--seed`, `--reps`, `--horizon`, `--out`, `--format`).

use std::path::Path;

use allocsim::aa::AaRule;
use allocsim::cara::{CaraLimitMode, CaraRule};
use allocsim::func::RealFn;
use allocsim::models::{
    BinaryModel, CovariateSampler, FeatureMap, LinearCommonSlopeModel, LinearInteractionModel, ResponseModel,
    TargetFunction,
};
use allocsim::ra::RaRule;
use allocsim::sim::{Design, TrialConfig};
use allocsim::strata::{CabcdFunction, ImbalanceWeights, StrataRule};
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub design: DesignSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<CovariateSpec>,
    #[serde(default)]
    pub run: RunSpec,
}

fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn three() -> usize {
    3
}
fn yes() -> bool {
    true
}
fn rsihr() -> String {
    "rsihr".into()
}
fn linear() -> String {
    "linear".into()
}
fn logistic() -> String {
    "logistic".into()
}
fn linear_increasing() -> String {
    "linear_increasing".into()
}
fn efron_p() -> f64 {
    2.0 / 3.0
}
fn ps_p() -> f64 {
    0.8
}
fn huhu_weights() -> [f64; 4] {
    [0.05, 0.1, 0.1, 0.75]
}
fn power_known() -> String {
    "power_known".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DesignSpec {
    #[serde(rename = "CR")]
    Cr {},
    Efron {
        #[serde(default = "efron_p")]
        p: f64,
    },
    EfronExtended {
        target: f64,
        p_low: f64,
        p_high: f64,
    },
    WeiAdaptive {
        #[serde(default = "linear")]
        f: String,
    },
    #[serde(rename = "ABCD")]
    Abcd {
        #[serde(default = "logistic")]
        f: String,
    },
    OneSidedCoin {},
    WeiMulti1 {
        #[serde(default = "three")]
        arms: usize,
    },
    WeiMulti2 {
        #[serde(default = "three")]
        arms: usize,
    },
    /// Piecewise-linear `φ(π)` through `[π, φ]` knots.
    Tabulated {
        points: Vec<[f64; 2]>,
    },
    #[serde(rename = "DAWD")]
    Dawd {
        #[serde(default = "half")]
        rho: f64,
        #[serde(default = "linear_increasing")]
        g1: String,
        #[serde(default = "linear")]
        g2: String,
    },
    #[serde(rename = "DBCD")]
    Dbcd {
        #[serde(default = "two")]
        nu: f64,
        #[serde(default = "rsihr")]
        target: String,
    },
    #[serde(rename = "ERADE")]
    Erade {
        alpha: f64,
        #[serde(default = "rsihr")]
        target: String,
    },
    PowerRule {
        #[serde(default = "two")]
        tau: f64,
        #[serde(default = "rsihr")]
        target: String,
    },
    #[serde(rename = "SML")]
    Sml {
        #[serde(default = "rsihr")]
        target: String,
    },
    #[serde(rename = "ETH")]
    Eth {},
    ZhangTarget {
        target: String,
    },
    ZhangHu {
        #[serde(default = "two")]
        nu: f64,
        target: String,
    },
    PocockSimon {
        #[serde(default = "ps_p")]
        p: f64,
    },
    HuHu {
        #[serde(default = "ps_p")]
        p: f64,
        /// Global, first margin, second margin, stratum.
        #[serde(default = "huhu_weights")]
        weights: [f64; 4],
    },
    /// `f` is `power_known`, `power_estimated` or a shared function.
    #[serde(rename = "CABCD")]
    Cabcd {
        #[serde(default = "power_known")]
        f: String,
    },
    Atkinson {},
    AtkinsonGeneral {
        #[serde(default = "yes")]
        interactions: bool,
    },
    /// One target per stratum, row-major.
    #[serde(rename = "RDBCD")]
    Rdbcd {
        targets: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Binary {
        p_a: f64,
        p_b: f64,
    },
    LinearInteraction {
        mu_a: f64,
        mu_b: f64,
        beta_a: f64,
        beta_b: f64,
        #[serde(default = "one")]
        noise_sd: f64,
    },
    CommonSlope {
        mu_a: f64,
        mu_b: f64,
        beta: Vec<f64>,
        features: FeatureMap,
        #[serde(default = "one")]
        noise_sd: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateSpec {
    Normal {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
    /// Joint stratum probabilities, row-major; uniform when omitted.
    Categorical {
        rows: usize,
        cols: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    Closed,
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: usize,
    /// Initial-stage subjects per arm; 5 for designs that read estimates, else 0.
    pub initial: Option<usize>,
    pub reps: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub stride: usize,
    /// Replications whose full trajectories are exported.
    pub trajectories: usize,
    pub limit_mode: LimitMode,
    pub mc_samples: usize,
    pub verify_cases: usize,
    pub verify_grid: usize,
    pub out: Option<String>,
    pub format: Format,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            horizon: 1000,
            initial: None,
            reps: 100,
            seed: 0,
            epsilon: 0.05,
            stride: 10,
            trajectories: 1,
            limit_mode: LimitMode::Closed,
            mc_samples: 20_000,
            verify_cases: 10_000,
            verify_grid: 101,
            out: None,
            format: Format::Csv,
        }
    }
}

/// Flag values that override the spec file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub horizon: Option<usize>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

fn parse_document(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {} as JSON", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {} as TOML", path.display()))
    }
}

/// Literal for an override value: JSON if it parses, a bare string otherwise.
fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn apply_set(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form section.key=value"))?;
    let mut node = doc;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` has an empty component");
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| anyhow!("override `{key}` does not name a table entry"))?;
    obj.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

impl ExperimentSpec {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut doc = parse_document(path)?;
        if !doc.is_object() {
            bail!("{}: top level must be a table", path.display());
        }
        for s in &overrides.set {
            apply_set(&mut doc, s)?;
        }
        if doc.get("design").is_none() {
            bail!("spec is missing the [design] section");
        }
        let mut spec: ExperimentSpec =
            serde_path_to_error::deserialize(doc).map_err(|e| anyhow!("invalid spec at `{}`: {}", e.path(), e.inner()))?;
        let run = &mut spec.run;
        if let Some(v) = overrides.seed {
            run.seed = v;
        }
        if let Some(v) = overrides.reps {
            run.reps = v;
        }
        if let Some(v) = overrides.horizon {
            run.horizon = v;
        }
        if let Some(v) = &overrides.out {
            run.out = Some(v.clone());
        }
        if let Some(v) = overrides.format {
            run.format = v;
        }
        if spec.run.initial.is_none() {
            let uses = spec.design()?.uses_estimates();
            spec.run.initial = Some(if uses { 5 } else { 0 });
        }
        Ok(spec)
    }

    pub fn design(&self) -> Result<Design> {
        build_design(&self.design, self.covariates.as_ref()).context("in [design]")
    }

    pub fn model(&self) -> Result<Option<ResponseModel>> {
        let Some(m) = &self.model else { return Ok(None) };
        let model = match m {
            ModelSpec::Binary { p_a, p_b } => ResponseModel::Binary(BinaryModel::new(*p_a, *p_b)?),
            ModelSpec::LinearInteraction { mu_a, mu_b, beta_a, beta_b, noise_sd } => {
                ResponseModel::LinearInteraction(LinearInteractionModel::new(*mu_a, *mu_b, *beta_a, *beta_b, *noise_sd)?)
            }
            ModelSpec::CommonSlope { mu_a, mu_b, beta, features, noise_sd } => ResponseModel::LinearCommonSlope(
                LinearCommonSlopeModel::new(*mu_a, *mu_b, beta.clone(), features.clone(), *noise_sd)?,
            ),
        };
        Ok(Some(model))
    }

    pub fn covariates(&self) -> Result<Option<CovariateSampler>> {
        let Some(c) = &self.covariates else { return Ok(None) };
        let s = match c {
            CovariateSpec::Normal { mean, sd } => {
                let s = CovariateSampler::Normal { mean: *mean, sd: *sd };
                s.validate()?;
                s
            }
            CovariateSpec::Categorical { rows, cols, probs: None } => CovariateSampler::uniform_strata(*rows, *cols)?,
            CovariateSpec::Categorical { rows, cols, probs: Some(p) } => {
                CovariateSampler::categorical(*rows, *cols, p.clone())?
            }
        };
        Ok(Some(s))
    }

    /// Trial configuration for replication-level runs; validated.
    pub fn trial_config(&self) -> Result<TrialConfig> {
        let mut cfg = TrialConfig::new(self.design()?, self.run.horizon)
            .with_initial(self.run.initial.unwrap_or(0))
            .with_seed(self.run.seed)
            .with_stride(self.run.stride);
        if let Some(m) = self.model().context("in [model]")? {
            cfg = cfg.with_response(m);
        }
        if let Some(c) = self.covariates().context("in [covariates]")? {
            cfg = cfg.with_covariates(c);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cara_mode(&self) -> CaraLimitMode {
        match self.run.limit_mode {
            LimitMode::Closed => CaraLimitMode::ClosedForm,
            LimitMode::Solver => CaraLimitMode::Solver { linear_in_features: false },
        }
    }
}

fn target(s: &str) -> Result<TargetFunction> {
    TargetFunction::parse(s).with_context(|| format!("target `{s}`"))
}

fn function(s: &str) -> Result<RealFn> {
    RealFn::parse(s).with_context(|| format!("function `{s}`"))
}

fn build_design(d: &DesignSpec, covariates: Option<&CovariateSpec>) -> Result<Design> {
    let design = match d {
        DesignSpec::Cr {} => Design::Aa(AaRule::CompleteRandomization),
        DesignSpec::Efron { p } => Design::Aa(AaRule::Efron { p: *p }),
        DesignSpec::EfronExtended { target, p_low, p_high } => {
            Design::Aa(AaRule::EfronExtended { target: *target, p_low: *p_low, p_high: *p_high })
        }
        DesignSpec::WeiAdaptive { f } => Design::Aa(AaRule::WeiAdaptive { f: function(f)? }),
        DesignSpec::Abcd { f } => Design::Aa(AaRule::Abcd { f: function(f)? }),
        DesignSpec::OneSidedCoin {} => Design::Aa(AaRule::OneSidedCoin),
        DesignSpec::WeiMulti1 { arms } => Design::Aa(AaRule::WeiMulti1 { arms: *arms }),
        DesignSpec::WeiMulti2 { arms } => Design::Aa(AaRule::WeiMulti2 { arms: *arms }),
        DesignSpec::Tabulated { points } => {
            Design::Aa(AaRule::Tabulated { points: points.iter().map(|p| (p[0], p[1])).collect() })
        }
        DesignSpec::Dawd { rho, g1, g2 } => Design::Ra(RaRule::Dawd { rho: *rho, g1: function(g1)?, g2: function(g2)? }),
        DesignSpec::Dbcd { nu, target: t } => Design::Ra(RaRule::Dbcd { nu: *nu, target: target(t)? }),
        DesignSpec::Erade { alpha, target: t } => Design::Ra(RaRule::Erade { alpha: *alpha, target: target(t)? }),
        DesignSpec::PowerRule { tau, target: t } => Design::Ra(RaRule::Power { tau: *tau, target: target(t)? }),
        DesignSpec::Sml { target: t } => Design::Ra(RaRule::Sml { target: target(t)? }),
        DesignSpec::Eth {} => Design::Cara(CaraRule::Eth),
        DesignSpec::ZhangTarget { target: t } => Design::Cara(CaraRule::ZhangTarget { target: target(t)? }),
        DesignSpec::ZhangHu { nu, target: t } => Design::Cara(CaraRule::ZhangHu { nu: *nu, target: target(t)? }),
        DesignSpec::PocockSimon { p } => Design::Strata(StrataRule::PocockSimon { p: *p }),
        DesignSpec::HuHu { p, weights: [g, t, w, s] } => {
            Design::Strata(StrataRule::HuHu { p: *p, weights: ImbalanceWeights::new(*g, *t, *w, *s)? })
        }
        DesignSpec::Cabcd { f } => {
            let f = match f.as_str() {
                "power_known" => {
                    let probs = match covariates {
                        Some(CovariateSpec::Categorical { rows, cols, probs }) => {
                            probs.clone().unwrap_or_else(|| vec![1.0 / (rows * cols) as f64; rows * cols])
                        }
                        _ => bail!("CABCD with power_known needs categorical [covariates]"),
                    };
                    CabcdFunction::PowerKnown { probs }
                }
                "power_estimated" => CabcdFunction::PowerEstimated,
                other => CabcdFunction::Shared(function(other)?),
            };
            Design::Strata(StrataRule::CAbcd { f })
        }
        DesignSpec::Atkinson {} => Design::Strata(StrataRule::Atkinson),
        DesignSpec::AtkinsonGeneral { interactions } => {
            Design::Strata(StrataRule::AtkinsonGeneral { interactions: *interactions })
        }
        DesignSpec::Rdbcd { targets } => {
            Design::Strata(StrataRule::Rdbcd { targets: targets.iter().map(|t| target(t)).collect::<Result<_>>()? })
        }
    };
    let shape = match covariates {
        Some(CovariateSpec::Categorical { rows, cols, .. }) => Some((*rows, *cols)),
        _ => None,
    };
    if matches!(design, Design::Strata(_)) && shape.is_none() {
        bail!("{} is stratified and needs a categorical [covariates] section", design.name());
    }
    design.validate(shape)?;
    Ok(design)
}
