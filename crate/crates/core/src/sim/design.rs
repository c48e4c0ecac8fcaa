use serde::Serialize;

use crate::aa::AaRule;
use crate::cara::CaraRule;
use crate::error::{Error, Result};
use crate::ra::RaRule;
use crate::strata::StrataRule;

/// Information a design may read when assigning the next subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignClass {
    /// Past assignments only.
    #[serde(rename = "AA")]
    Aa,
    /// Past assignments and responses.
    #[serde(rename = "RA")]
    Ra,
    /// Past assignments and covariates, including the incoming subject's.
    #[serde(rename = "CA")]
    Ca,
    /// Everything.
    #[serde(rename = "CARA")]
    Cara,
}

impl DesignClass {
    pub fn label(self) -> &'static str {
        match self {
            DesignClass::Aa => "AA",
            DesignClass::Ra => "RA",
            DesignClass::Ca => "CA",
            DesignClass::Cara => "CARA",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Design {
    Aa(AaRule),
    Ra(RaRule),
    Cara(CaraRule),
    Strata(StrataRule),
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Aa(r) => r.name(),
            Design::Ra(r) => r.name(),
            Design::Cara(r) => r.name(),
            Design::Strata(r) => r.name(),
        }
    }

    pub fn class(&self) -> DesignClass {
        match self {
            Design::Aa(_) => DesignClass::Aa,
            Design::Ra(_) => DesignClass::Ra,
            Design::Cara(_) => DesignClass::Cara,
            Design::Strata(StrataRule::Rdbcd { .. }) => DesignClass::Cara,
            Design::Strata(_) => DesignClass::Ca,
        }
    }

    pub fn arms(&self) -> usize {
        match self {
            Design::Aa(r) => r.arms(),
            _ => 2,
        }
    }

    /// Whether the rule reads a parameter estimate.
    pub fn uses_estimates(&self) -> bool {
        match self {
            Design::Aa(_) => false,
            Design::Ra(_) | Design::Cara(_) => true,
            Design::Strata(r) => r.uses_estimates(),
        }
    }

    /// Rule-level validation; `shape` is the stratum grid for stratified rules.
    pub fn validate(&self, shape: Option<(usize, usize)>) -> Result<()> {
        match self {
            Design::Aa(r) => r.validate(),
            Design::Ra(r) => r.validate(),
            Design::Cara(r) => r.validate(),
            Design::Strata(r) => {
                let (rows, cols) =
                    shape.ok_or_else(|| Error::Config("stratified designs need categorical covariates".into()))?;
                r.validate(rows, cols)
            }
        }
    }
}

/// One line of the design catalogue.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogueEntry {
    pub name: &'static str,
    pub class: DesignClass,
    pub parameters: &'static str,
    pub reference: &'static str,
}

/// Every design kind the engine can run.
pub fn catalogue() -> Vec<CatalogueEntry> {
    use DesignClass::*;
    let e = |name, class, parameters, reference| CatalogueEntry { name, class, parameters, reference };
    vec![
        e("CR", Aa, "none", "complete randomization"),
        e("Efron", Aa, "p in [1/2, 1]", "Efron (1971) biased coin"),
        e("EfronExtended", Aa, "target t*, p_low, p_high", "biased coin toward an unequal target"),
        e("WeiAdaptive", Aa, "f decreasing, symmetric", "Wei (1978) adaptive biased coin"),
        e("ABCD", Aa, "F decreasing, symmetric", "Baldi Antognini & Giovagnoli (2004) adjustable biased coin"),
        e("OneSidedCoin", Aa, "none", "deterministic toward A below balance, fair coin above"),
        e("WeiMulti1", Aa, "arms K >= 2", "Wei, Smythe & Smith (1986) multi-arm urn, first rule"),
        e("WeiMulti2", Aa, "arms K >= 2", "Wei, Smythe & Smith (1986) multi-arm urn, second rule"),
        e("DAWD", Ra, "rho in [0, 1), g1, g2", "Geraldes et al. (2006) weighted differences"),
        e("DBCD", Ra, "nu >= 0, target", "Hu & Zhang (2004) doubly adaptive biased coin"),
        e("ERADE", Ra, "alpha in [0, 1), target", "Hu, Zhang & He (2009) efficient randomized adaptive design"),
        e("PowerRule", Ra, "tau >= 1, target", "power-type coin toward a target"),
        e("SML", Ra, "target", "sequential maximum likelihood allocation"),
        e("ETH", Cara, "none (linear model)", "allocation to the estimated better treatment for each covariate"),
        e("ZhangTarget", Cara, "target pi*(gamma, z)", "Zhang et al. (2007) CARA design"),
        e("ZhangHu", Cara, "nu >= 0, target pi*(gamma, z)", "Zhang & Hu (2009) CARA biased coin"),
        e("PocockSimon", Ca, "p in [1/2, 1]", "Pocock & Simon (1975) minimization"),
        e("HuHu", Ca, "p, weights (global, T, W, stratum)", "Hu & Hu (2012) covariate-adaptive design"),
        e("CABCD", Ca, "F per stratum or q(p) = 1/p", "Baldi Antognini & Zagoraiou (2011) covariate-adaptive biased coin"),
        e("Atkinson", Ca, "none", "Atkinson (1982) optimum biased coin, stratified form"),
        e("AtkinsonGeneral", Ca, "interactions: bool", "Atkinson (1982) optimum biased coin, linear-model form"),
        e("RDBCD", Cara, "target per stratum", "Baldi Antognini & Zagoraiou (2012) reinforced doubly-adaptive biased coin"),
    ]
}
