//! Steady-state level proportions and quadratic-loss relativities, obtained
//! by mixing the conditional stationary laws over accident proneness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::quadrature::UnitIntervalRule;
use crate::scale::{build_transition_matrix, stationary_distribution, ScaleRules};
use crate::severity::ClaimTypePartition;

pub const DEFAULT_ORDER: usize = 256;
pub const MIN_ORDER: usize = 16;
/// Largest change tolerated when the quadrature order is doubled.
pub const DIVERGENCE_TOL: f64 = 1e-6;

/// Law of the accident proneness `Theta`, always with unit mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingDistribution {
    /// `F(theta) = 1 - e^{-theta}`.
    ExponentialUnit,
    /// Gamma with shape `k` and rate `k`.
    GammaUnitMean { shape: f64 },
    /// Point mass at 1: a homogeneous portfolio.
    Dirac,
}

impl MixingDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MixingDistribution::GammaUnitMean { shape } if !(shape > 0.0 && shape.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "gamma mixing shape must be positive, got {shape}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        1.0
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.quantile_pair(u, 1.0 - u)
    }

    /// Quantile at `u`, given both `u` and `1 - u` to full precision.
    pub fn quantile_pair(&self, u: f64, upper: f64) -> f64 {
        match *self {
            MixingDistribution::ExponentialUnit => {
                if upper < 0.5 {
                    -upper.ln()
                } else {
                    -(-u).ln_1p()
                }
            }
            MixingDistribution::GammaUnitMean { shape } => gamma_quantile(shape, u, upper),
            MixingDistribution::Dirac => 1.0,
        }
    }
}

/// Quantile of Gamma(shape, rate = shape), inverting whichever tail is smaller.
fn gamma_quantile(shape: f64, u: f64, upper: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if upper <= 0.0 {
        return f64::INFINITY;
    }
    // g(theta) increasing in theta, zero at the quantile
    let g = |theta: f64| {
        if u <= 0.5 {
            gamma_lr(shape, shape * theta) - u
        } else {
            upper - gamma_ur(shape, shape * theta)
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `∫ g(theta) dF(theta)`, evaluated as `∫_0^1 g(Q(u)) du`.
pub fn mix_integral<G>(g: G, mixing: &MixingDistribution, order: usize) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    check_order(order)?;
    mixing.validate()?;
    let rule = UnitIntervalRule::new(order);
    let mut total = 0.0;
    for i in 0..rule.len() {
        let theta = mixing.quantile_pair(rule.lower[i], rule.upper[i]);
        let value = g(theta);
        if !value.is_finite() {
            return Err(Error::NonFiniteIntegrand(theta));
        }
        total += rule.weights[i] * value;
    }
    Ok(total)
}

fn check_order(order: usize) -> Result<()> {
    if order < MIN_ORDER {
        return Err(Error::InvalidParameter(format!(
            "quadrature order must be at least {MIN_ORDER}, got {order}"
        )));
    }
    Ok(())
}

/// Portfolio at steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateProfile {
    pub lambda: f64,
    pub proportions: Vec<f64>,
    pub relativities: Vec<f64>,
    /// First level with relativity above 1, if any.
    pub malus_entry: Option<usize>,
}

impl SteadyStateProfile {
    pub fn levels(&self) -> usize {
        self.proportions.len()
    }

    /// Net premium `lambda * r_l * E[C]` of a level.
    pub fn premium(&self, level: usize, mean_claim: f64) -> f64 {
        self.lambda * self.relativities[level] * mean_claim
    }

    /// `sum_l pi_l r_l`, which equals `E[Theta] = 1`.
    pub fn global_balance(&self) -> f64 {
        self.proportions
            .iter()
            .zip(&self.relativities)
            .map(|(p, r)| p * r)
            .sum()
    }
}

/// Proportions and relativities at a single quadrature order.
pub fn profile_at_order(
    lambda: f64,
    rules: &ScaleRules,
    partition: &ClaimTypePartition,
    mixing: &MixingDistribution,
    order: usize,
) -> Result<SteadyStateProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "a priori frequency must be positive, got {lambda}"
        )));
    }
    check_order(order)?;
    mixing.validate()?;
    let rule = UnitIntervalRule::new(order);

    let per_node: Vec<(f64, Vec<f64>)> = (0..rule.len())
        .into_par_iter()
        .map(|i| {
            let theta = mixing.quantile_pair(rule.lower[i], rule.upper[i]);
            let matrix = build_transition_matrix(rules, lambda * theta, partition)?;
            Ok((theta, stationary_distribution(&matrix)?))
        })
        .collect::<Result<_>>()?;

    let levels = rules.levels();
    let mut mass = vec![0.0; levels];
    let mut weighted = vec![0.0; levels];
    for ((theta, pi), w) in per_node.iter().zip(&rule.weights) {
        if !theta.is_finite() {
            return Err(Error::NonFiniteIntegrand(*theta));
        }
        for l in 0..levels {
            mass[l] += w * pi[l];
            weighted[l] += w * theta * pi[l];
        }
    }
    let relativities: Vec<f64> = weighted.iter().zip(&mass).map(|(n, d)| n / d).collect();
    if let Some(l) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "level {l} has no steady-state mass"
        )));
    }
    Ok(SteadyStateProfile {
        lambda,
        malus_entry: malus_entry_level(&relativities).ok(),
        proportions: mass,
        relativities,
    })
}

/// Steady-state profile, self-checked against a run at twice the order.
pub fn steady_state_profile(
    lambda: f64,
    rules: &ScaleRules,
    partition: &ClaimTypePartition,
    mixing: &MixingDistribution,
    order: usize,
) -> Result<SteadyStateProfile> {
    let profile = profile_at_order(lambda, rules, partition, mixing, order)?;
    let check = profile_at_order(lambda, rules, partition, mixing, 2 * order)?;
    let pairs = [
        ("proportion", &profile.proportions, &check.proportions),
        ("relativity", &profile.relativities, &check.relativities),
    ];
    for (name, a, b) in pairs {
        for (l, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            let change = (x - y).abs();
            if change > DIVERGENCE_TOL {
                return Err(Error::QuadratureDivergence {
                    quantity: format!("{name} at level {l}"),
                    change,
                });
            }
        }
    }
    Ok(profile)
}

/// `s_0 = min{l : r_l > 1}`.
pub fn malus_entry_level(relativities: &[f64]) -> Result<usize> {
    if relativities.is_empty() {
        return Err(Error::InvalidParameter("empty relativity vector".into()));
    }
    relativities
        .iter()
        .position(|&r| r > 1.0)
        .ok_or(Error::NoMalusZone)
}
