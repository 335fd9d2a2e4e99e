//! Bonus-malus rating systems with several claim types and level-dependent
//! per-claim deductibles.
//!
//! The pipeline runs bottom-up:
//!
//! * [`severity`] classifies claim sizes into types and provides the truncated
//!   moments used everywhere else.
//! * [`scale`] builds the one-step transition matrix of the scale for a given
//!   annual frequency and solves for its stationary distribution.
//! * [`relativity`] mixes those stationary laws over the accident-proneness
//!   distribution to get level proportions and quadratic-loss relativities.
//! * [`deductible`] turns part of the malus premium into per-claim deductibles
//!   so that each malus level is indifferent between the two.
//! * [`simulate`] is a Monte Carlo cross-check of all of the above.

pub mod config;
pub mod deductible;
pub mod error;
pub mod quadrature;
pub mod relativity;
pub mod report;
pub mod rootfind;
pub mod scale;
pub mod severity;
pub mod simulate;
pub mod tables;

pub use deductible::{DeductibleSchedule, ValidationReport};
pub use error::{Error, Result};
pub use relativity::{MixingDistribution, SteadyStateProfile};
pub use scale::{ScaleRules, TransitionMatrix};
pub use severity::{ClaimSeverityModel, ClaimTypePartition, SeverityLaw, Upper};
pub use simulate::{SimulationConfig, SimulationReport};
