//! Tariff configuration files.
//!
//! A tariff is described by one TOML document:
//!
//! ```toml
//! lambda = 0.1                    # a priori annual claim frequency
//! thresholds = [1.0, 2.0, 4.0]    # claim type boundaries c_1 < ... < c_m
//!
//! [severity]
//! kind = "exponential"
//! mean = 2.0
//!
//! [mixing]                        # accident proneness, unit mean
//! kind = "exponential_unit"       # or "gamma_unit_mean" (with shape) or "dirac"
//!
//! [scale]
//! levels = 4
//! penalties = [1, 2, 3, 3]        # levels climbed per claim of type 0..m
//!
//! [deductible]                    # optional
//! principle = "proportional_top"  # manual | single_type | proportional_top | greedy_top | uniform
//! alphas = 0.05                   # scalar or one value per malus level
//! # manual = [[0, 0.3, 1.3, "free"], ...]   one row per malus level, lowest first
//! # d = [0.0, 0.5, 1.5, 2.1]                 uniform only: fixed deductible row
//!
//! [numerics]                      # optional
//! quadrature_order = 256
//! bisection_tol = 1e-12
//! residual_tol = 1e-9
//!
//! [simulation]                    # optional
//! n_policies = 100000
//! burn_in_years = 200
//! sample_years = 100
//! seed = 1
//! initial_level = 0
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deductible::{
    allocate_greedy_top, allocate_manual, allocate_proportional_top, allocate_single_type,
    uniform_schedule, DeductibleSchedule, ManualEntry,
};
use crate::error::{Error, Result};
use crate::relativity::{
    steady_state_profile, MixingDistribution, SteadyStateProfile, DEFAULT_ORDER, MIN_ORDER,
};
use crate::rootfind::DEFAULT_TOL;
use crate::scale::ScaleRules;
use crate::severity::{type_probabilities, ClaimSeverityModel, ClaimTypePartition, SeverityLaw};
use crate::simulate::SimulationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffConfig {
    pub lambda: f64,
    pub severity: ClaimSeverityModel,
    pub thresholds: Vec<f64>,
    pub mixing: MixingDistribution,
    pub scale: ScaleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deductible: Option<DeductibleSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub levels: usize,
    pub penalties: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Principle {
    Manual,
    SingleType,
    ProportionalTop,
    GreedyTop,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alphas {
    Scalar(f64),
    List(Vec<f64>),
}

/// A manual deductible entry: a number, or the string `"free"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManualValue {
    Number(f64),
    Word(String),
}

impl ManualValue {
    fn entry(&self) -> Result<ManualEntry> {
        match self {
            ManualValue::Number(v) => Ok(ManualEntry::Fixed(*v)),
            ManualValue::Word(w) if w.eq_ignore_ascii_case("free") => Ok(ManualEntry::Free),
            ManualValue::Word(w) => Err(Error::Config(format!(
                "manual deductible entry {w:?} is neither a number nor \"free\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeductibleSpec {
    pub principle: Principle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Alphas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual: Option<Vec<Vec<ManualValue>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default = "default_tol")]
    pub bisection_tol: f64,
    /// Largest accepted indifference residual for supplied schedules.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_residual_tol() -> f64 {
    crate::deductible::SYNTHESIS_TOL
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            quadrature_order: default_order(),
            bisection_tol: default_tol(),
            residual_tol: default_residual_tol(),
        }
    }
}

impl TariffConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Schema checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        let schema = |msg: String| Err(Error::Config(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return schema(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.scale.penalties.len() != self.thresholds.len() + 1 {
            return schema(format!(
                "scale.penalties has {} entries, expected thresholds + 1 = {}",
                self.scale.penalties.len(),
                self.thresholds.len() + 1
            ));
        }
        if self.numerics.quadrature_order < MIN_ORDER {
            return schema(format!(
                "numerics.quadrature_order must be at least {MIN_ORDER}, got {}",
                self.numerics.quadrature_order
            ));
        }
        if !(self.numerics.bisection_tol > 0.0) || !(self.numerics.residual_tol > 0.0) {
            return schema("numerics tolerances must be positive".into());
        }
        self.severity.validate()?;
        self.mixing.validate()?;
        if let Some(sim) = &self.simulation {
            sim.validate(self.scale.levels)?;
        }
        if let Some(spec) = &self.deductible {
            spec.validate(self.thresholds.len() + 1)?;
        }
        Ok(())
    }
}

impl DeductibleSpec {
    fn validate(&self, num_types: usize) -> Result<()> {
        let needs_alphas = self.principle != Principle::Uniform;
        if needs_alphas && self.alphas.is_none() {
            return Err(Error::Config(format!(
                "deductible.alphas is required for principle {:?}",
                self.principle
            )));
        }
        if !needs_alphas && self.alphas.is_some() {
            return Err(Error::Config(
                "deductible.alphas is fixed by the uniform principle and must be omitted".into(),
            ));
        }
        match (self.principle, &self.manual) {
            (Principle::Manual, None) => {
                return Err(Error::Config(
                    "deductible.manual is required for principle manual".into(),
                ))
            }
            (Principle::Manual, Some(rows)) => {
                for (k, row) in rows.iter().enumerate() {
                    if row.len() != num_types {
                        return Err(Error::Config(format!(
                            "deductible.manual row {k} has {} entries, expected {num_types}",
                            row.len()
                        )));
                    }
                    row.iter()
                        .map(ManualValue::entry)
                        .collect::<Result<Vec<_>>>()?;
                }
            }
            (_, Some(_)) => {
                return Err(Error::Config(
                    "deductible.manual only applies to principle manual".into(),
                ))
            }
            _ => {}
        }
        match (self.principle, &self.d) {
            (Principle::Uniform, Some(d)) if d.len() != num_types => Err(Error::Config(format!(
                "deductible.d has {} entries, expected {num_types}",
                d.len()
            ))),
            (Principle::Uniform, _) | (_, None) => Ok(()),
            (_, Some(_)) => Err(Error::Config(
                "deductible.d only applies to principle uniform".into(),
            )),
        }
    }

    /// One alpha per malus level, lowest level first.
    fn per_level(&self, count: usize) -> Result<Vec<f64>> {
        match &self.alphas {
            Some(Alphas::Scalar(a)) => Ok(vec![*a; count]),
            Some(Alphas::List(v)) if v.len() == count => Ok(v.clone()),
            Some(Alphas::List(v)) => Err(Error::Config(format!(
                "deductible.alphas has {} entries for {count} malus levels",
                v.len()
            ))),
            None => Err(Error::Config("deductible.alphas missing".into())),
        }
    }

    /// The top-level reduction for top-only principles: a scalar, a single
    /// value, or a per-level list that is zero below the top.
    fn top_alpha(&self, count: usize) -> Result<f64> {
        match &self.alphas {
            Some(Alphas::Scalar(a)) => Ok(*a),
            Some(Alphas::List(v)) if v.len() == 1 => Ok(v[0]),
            Some(Alphas::List(v)) if v.len() == count && v[..count - 1].iter().all(|a| *a == 0.0) => {
                Ok(v[count - 1])
            }
            Some(Alphas::List(_)) => Err(Error::Config(
                "top-only principles take one alpha, or a per-level list that is zero below the top"
                    .into(),
            )),
            None => Err(Error::Config("deductible.alphas missing".into())),
        }
    }
}

/// A configured tariff with its steady state solved.
#[derive(Debug, Clone)]
pub struct Tariff {
    pub config: TariffConfig,
    pub model: ClaimSeverityModel,
    pub partition: ClaimTypePartition,
    pub rules: ScaleRules,
    pub profile: SteadyStateProfile,
}

/// A schedule plus the proportionality coefficient and its ceiling when the
/// proportional principle produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub schedule: DeductibleSchedule,
    pub proportional: Option<(f64, f64)>,
}

impl Tariff {
    pub fn new(config: TariffConfig) -> Result<Self> {
        config.validate()?;
        let model = config.severity;
        let partition = type_probabilities(&model, &config.thresholds)?;
        let rules = ScaleRules::new(config.scale.levels, config.scale.penalties.clone())?;
        let profile = steady_state_profile(
            config.lambda,
            &rules,
            &partition,
            &config.mixing,
            config.numerics.quadrature_order,
        )?;
        Ok(Self {
            config,
            model,
            partition,
            rules,
            profile,
        })
    }

    pub fn mean_claim(&self) -> f64 {
        self.model.mean()
    }

    /// Runs the configured allocation principle.
    pub fn allocate(&self) -> Result<Allocation> {
        let spec = self
            .config
            .deductible
            .as_ref()
            .ok_or_else(|| Error::Config("no [deductible] section".into()))?;
        let r = &self.profile.relativities;
        let s0 = self.profile.malus_entry.ok_or(Error::NoMalusZone)?;
        let count = r.len() - s0;
        let tol = self.config.numerics.bisection_tol;
        let (model, partition) = (&self.model, &self.partition);
        let plain = |schedule| Allocation {
            schedule,
            proportional: None,
        };
        match spec.principle {
            Principle::SingleType => {
                allocate_single_type(&spec.per_level(count)?, r, model, partition).map(plain)
            }
            Principle::ProportionalTop => {
                let a =
                    allocate_proportional_top(spec.top_alpha(count)?, r, model, partition, tol)?;
                Ok(Allocation {
                    schedule: a.schedule,
                    proportional: Some((a.coefficient, a.ceiling)),
                })
            }
            Principle::GreedyTop => {
                allocate_greedy_top(spec.top_alpha(count)?, r, model, partition).map(plain)
            }
            Principle::Uniform => {
                uniform_schedule(r, model, partition, spec.d.as_deref(), tol).map(plain)
            }
            Principle::Manual => {
                let rows = spec
                    .manual
                    .as_ref()
                    .ok_or_else(|| Error::Config("deductible.manual missing".into()))?
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(ManualValue::entry)
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                allocate_manual(
                    &spec.per_level(count)?,
                    &rows,
                    r,
                    model,
                    partition,
                    tol,
                    self.config.numerics.residual_tol,
                )
                .map(plain)
            }
        }
    }
}
