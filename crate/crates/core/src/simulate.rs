//! Monte Carlo portfolio simulation through the scale.
//!
//! Each policy draws its accident proneness once, then lives through
//! `burn_in_years + sample_years` years. Statistics are gathered only over the
//! sample years and standard errors treat policies as the independent units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deductible::DeductibleSchedule;
use crate::error::{Error, Result};
use crate::relativity::MixingDistribution;
use crate::scale::ScaleRules;
use crate::severity::{ClaimSeverityModel, ClaimTypePartition, SeverityLaw, Upper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_policies: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in_years: usize,
    pub sample_years: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_level: usize,
}

fn default_burn_in() -> usize {
    200
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_policies: 100_000,
            burn_in_years: default_burn_in(),
            sample_years: 100,
            seed: 0,
            initial_level: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self, levels: usize) -> Result<()> {
        if self.n_policies == 0 {
            return Err(Error::InvalidParameter(
                "n_policies must be at least 1".into(),
            ));
        }
        if self.sample_years == 0 {
            return Err(Error::InvalidParameter(
                "sample_years must be at least 1".into(),
            ));
        }
        if self.initial_level >= levels {
            return Err(Error::InvalidParameter(format!(
                "initial level {} outside 0..{levels}",
                self.initial_level
            )));
        }
        Ok(())
    }
}

/// Empirical counterparts of the stationary proportions, relativities and
/// deductible recoveries. Levels never visited report `NaN` relativities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub policy_years: u64,
    pub empirical_proportions: Vec<f64>,
    pub proportion_se: Vec<f64>,
    /// Mean `theta` of the policy-years spent at each level.
    pub empirical_relativities: Vec<f64>,
    pub relativity_se: Vec<f64>,
    /// First level of `mean_deductible_paid`.
    pub malus_entry: Option<usize>,
    /// Deductible paid per policy-year at each malus level, empty without a schedule.
    pub mean_deductible_paid: Vec<f64>,
    pub deductible_se: Vec<f64>,
}

/// What a single policy contributes: per level, years spent, theta-weighted
/// years and deductible paid.
struct PolicyTally {
    years: Vec<u32>,
    theta: f64,
    paid: Vec<f64>,
}

fn draw_theta(mixing: &MixingDistribution, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match *mixing {
        MixingDistribution::ExponentialUnit => Exp1.sample(rng),
        MixingDistribution::GammaUnitMean { shape } => Gamma::new(shape, 1.0 / shape)
            .map_err(|e| Error::InvalidParameter(format!("gamma mixing: {e}")))?
            .sample(rng),
        MixingDistribution::Dirac => 1.0,
    })
}

/// Severity conditioned on `lower < C <= upper` by inverting the survival function.
fn draw_in_band(model: &ClaimSeverityModel, lower: f64, upper: Upper, rng: &mut ChaCha8Rng) -> f64 {
    let s_lower = model.survival(lower);
    let s_upper = match upper {
        Upper::Finite(b) => model.survival(b),
        Upper::Infinity => 0.0,
    };
    // open at the lower edge: u in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let c = model.inverse_survival(s_upper + u * (s_lower - s_upper));
    match upper {
        Upper::Finite(b) => c.clamp(lower, b),
        Upper::Infinity => c.max(lower),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_policy(
    index: u64,
    config: &SimulationConfig,
    lambda: f64,
    rules: &ScaleRules,
    partition: &ClaimTypePartition,
    model: &ClaimSeverityModel,
    mixing: &MixingDistribution,
    schedule: Option<&DeductibleSchedule>,
) -> Result<PolicyTally> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let theta = draw_theta(mixing, &mut rng)?;
    let streams: Vec<Option<Poisson<f64>>> = partition
        .probabilities()
        .iter()
        .map(|q| Poisson::new(lambda * theta * q).ok())
        .collect();
    let bands: Vec<(f64, Upper)> = (0..partition.num_types())
        .map(|i| partition.band(i))
        .collect();

    let levels = rules.levels();
    let mut tally = PolicyTally {
        years: vec![0; levels],
        theta,
        paid: vec![0.0; levels],
    };
    let mut counts = vec![0u64; streams.len()];
    let mut level = config.initial_level;
    for year in 0..config.burn_in_years + config.sample_years {
        for (n, stream) in counts.iter_mut().zip(&streams) {
            *n = stream.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        }
        let sampling = year >= config.burn_in_years;
        if sampling {
            tally.years[level] += 1;
            if let Some(row) = schedule.and_then(|s| s.row(level)) {
                for (i, &n) in counts.iter().enumerate() {
                    let d = row[i];
                    if d <= 0.0 {
                        continue;
                    }
                    let (lower, upper) = bands[i];
                    for _ in 0..n {
                        let severity = draw_in_band(model, lower, upper, &mut rng);
                        tally.paid[level] += severity.min(d);
                    }
                }
            }
        }
        level = rules.next_level(level, &counts);
    }
    Ok(tally)
}

/// Ratio estimate `sum a / sum b` with its delta-method standard error over
/// independent units.
fn ratio_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let sum_b: f64 = b.iter().sum();
    if sum_b == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let ratio = a.iter().sum::<f64>() / sum_b;
    let n = a.len() as f64;
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - ratio * y).powi(2)).sum();
    let se = if n > 1.0 {
        (ss * n / (n - 1.0)).sqrt() / sum_b
    } else {
        f64::NAN
    };
    (ratio, se)
}

/// Simulates `config.n_policies` independent policies.
///
/// Each policy has its own ChaCha stream keyed by `(seed, policy index)` and
/// results are combined in index order, so the report does not depend on the
/// number of worker threads.
pub fn simulate_portfolio(
    config: &SimulationConfig,
    lambda: f64,
    rules: &ScaleRules,
    partition: &ClaimTypePartition,
    model: &ClaimSeverityModel,
    mixing: &MixingDistribution,
    schedule: Option<&DeductibleSchedule>,
) -> Result<SimulationReport> {
    config.validate(rules.levels())?;
    mixing.validate()?;
    model.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequency must be positive, got {lambda}"
        )));
    }
    if rules.penalties().len() != partition.num_types() {
        return Err(Error::InvalidParameter(format!(
            "{} penalties for {} claim types",
            rules.penalties().len(),
            partition.num_types()
        )));
    }
    if let Some(s) = schedule {
        if s.num_types() != partition.num_types() || s.top() != rules.top() {
            return Err(Error::InvalidParameter(
                "schedule does not match the scale and claim types".into(),
            ));
        }
    }

    let tallies: Vec<PolicyTally> = (0..config.n_policies as u64)
        .into_par_iter()
        .map(|i| simulate_policy(i, config, lambda, rules, partition, model, mixing, schedule))
        .collect::<Result<_>>()?;

    let levels = rules.levels();
    let sample = config.sample_years as f64;
    let n = tallies.len() as f64;
    let mut proportions = Vec::with_capacity(levels);
    let mut proportion_se = Vec::with_capacity(levels);
    let mut relativities = Vec::with_capacity(levels);
    let mut relativity_se = Vec::with_capacity(levels);
    for l in 0..levels {
        let share: Vec<f64> = tallies.iter().map(|t| t.years[l] as f64 / sample).collect();
        let mean = share.iter().sum::<f64>() / n;
        let var = share.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        proportions.push(mean);
        proportion_se.push((var / n).sqrt());

        let years: Vec<f64> = tallies.iter().map(|t| t.years[l] as f64).collect();
        let weighted: Vec<f64> = tallies
            .iter()
            .map(|t| t.theta * t.years[l] as f64)
            .collect();
        let (r, se) = ratio_with_se(&weighted, &years);
        relativities.push(r);
        relativity_se.push(se);
    }

    let mut mean_deductible_paid = Vec::new();
    let mut deductible_se = Vec::new();
    if let Some(s) = schedule {
        for l in s.malus_entry()..=s.top() {
            let years: Vec<f64> = tallies.iter().map(|t| t.years[l] as f64).collect();
            let paid: Vec<f64> = tallies.iter().map(|t| t.paid[l]).collect();
            let (m, se) = ratio_with_se(&paid, &years);
            mean_deductible_paid.push(m);
            deductible_se.push(se);
        }
    }

    Ok(SimulationReport {
        policy_years: config.n_policies as u64 * config.sample_years as u64,
        empirical_proportions: proportions,
        proportion_se,
        empirical_relativities: relativities,
        relativity_se,
        malus_entry: schedule.map(DeductibleSchedule::malus_entry),
        mean_deductible_paid,
        deductible_se,
    })
}
