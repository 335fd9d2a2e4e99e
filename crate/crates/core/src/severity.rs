//! Claim severity: the claim-size law, its split into claim types, and the
//! truncated moments the deductible machinery is built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of a severity band. The last claim type is unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upper {
    Finite(f64),
    Infinity,
}

impl Upper {
    pub fn is_finite(&self) -> bool {
        matches!(self, Upper::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Upper::Finite(b) => b,
            Upper::Infinity => f64::INFINITY,
        }
    }
}

/// What a continuous claim-size law must provide for the rest of the crate.
///
/// `limited_moment(d)` is `E[C; C <= d]`, i.e. the first moment of the claim
/// restricted to `[0, d]` (not divided by the probability).
pub trait SeverityLaw {
    fn cdf(&self, x: f64) -> f64;

    fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    fn mean(&self) -> f64;

    fn limited_moment(&self, d: f64) -> f64;

    /// Inverse of the survival function: the `x` with `P[C > x] = p`.
    fn inverse_survival(&self, p: f64) -> f64;

    /// `E[C | a < C <= b]` without input checks.
    fn conditional_band_mean(&self, a: f64, b: Upper) -> f64 {
        let (mass, moment) = match b {
            Upper::Finite(b) => (
                self.survival(a) - self.survival(b),
                self.limited_moment(b) - self.limited_moment(a),
            ),
            Upper::Infinity => (self.survival(a), self.mean() - self.limited_moment(a)),
        };
        moment / mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimSeverityModel {
    Exponential { mean: f64 },
}

impl ClaimSeverityModel {
    pub fn exponential(mean: f64) -> Result<Self> {
        let model = ClaimSeverityModel::Exponential { mean };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClaimSeverityModel::Exponential { mean } if mean > 0.0 && mean.is_finite() => Ok(()),
            ClaimSeverityModel::Exponential { mean } => Err(Error::InvalidParameter(format!(
                "exponential severity mean must be positive and finite, got {mean}"
            ))),
        }
    }
}

/// `1 - e^{-x}(1 + x)` without cancellation near zero.
fn exp_limited_ratio(x: f64) -> f64 {
    if x < 0.05 {
        // sum_{k>=2} (-1)^k (k-1) x^k / k!
        let mut term = x; // x^k / k! at k = 1
        let mut sum = 0.0;
        for k in 2..20 {
            term *= x / k as f64;
            let signed = if k % 2 == 0 { term } else { -term };
            sum += (k - 1) as f64 * signed;
        }
        sum
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

impl SeverityLaw for ClaimSeverityModel {
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            ClaimSeverityModel::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / mean).exp_m1()
                }
            }
        }
    }

    fn survival(&self, x: f64) -> f64 {
        match *self {
            ClaimSeverityModel::Exponential { mean } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x / mean).exp()
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            ClaimSeverityModel::Exponential { mean } => mean,
        }
    }

    fn limited_moment(&self, d: f64) -> f64 {
        match *self {
            ClaimSeverityModel::Exponential { mean } => {
                if d <= 0.0 {
                    0.0
                } else if d.is_infinite() {
                    mean
                } else {
                    mean * exp_limited_ratio(d / mean)
                }
            }
        }
    }

    fn inverse_survival(&self, p: f64) -> f64 {
        match *self {
            ClaimSeverityModel::Exponential { mean } => -mean * p.ln(),
        }
    }

    fn conditional_band_mean(&self, a: f64, b: Upper) -> f64 {
        match (*self, b) {
            (ClaimSeverityModel::Exponential { mean }, Upper::Infinity) => mean + a,
            (ClaimSeverityModel::Exponential { mean }, Upper::Finite(b)) => {
                // mu + (a e^{-a/mu} - b e^{-b/mu}) / (e^{-a/mu} - e^{-b/mu}),
                // scaled by e^{a/mu} so nothing underflows far in the tail.
                let decay = (-(b - a) / mean).exp();
                let width = -(-(b - a) / mean).exp_m1();
                mean + (a - b * decay) / width
            }
        }
    }
}

/// Claim-type thresholds `c_1* < ... < c_m*` and the induced type
/// probabilities `q_0, ..., q_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimTypePartition {
    thresholds: Vec<f64>,
    probabilities: Vec<f64>,
}

impl ClaimTypePartition {
    /// Number of claim types minus one (`m`).
    pub fn m(&self) -> usize {
        self.thresholds.len()
    }

    pub fn num_types(&self) -> usize {
        self.probabilities.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn q(&self, claim_type: usize) -> f64 {
        self.probabilities[claim_type]
    }

    /// Severity band `(lower, upper]` of a claim type.
    pub fn band(&self, claim_type: usize) -> (f64, Upper) {
        let m = self.m();
        let lower = if claim_type == 0 {
            0.0
        } else {
            self.thresholds[claim_type - 1]
        };
        let upper = if claim_type == m {
            Upper::Infinity
        } else {
            Upper::Finite(self.thresholds[claim_type])
        };
        (lower, upper)
    }

    /// Largest admissible deductible for a claim type: `c_1*` for types 0 and 1,
    /// `c_i*` for type `i >= 2`. Each cap is at most the band's lower edge (type 0
    /// excepted), so the insurer always pays something.
    pub fn deductible_cap(&self, claim_type: usize) -> f64 {
        if claim_type == 0 {
            self.thresholds[0]
        } else {
            self.thresholds[claim_type - 1]
        }
    }
}

/// Splits claims into `m + 1` types at the given thresholds.
pub fn type_probabilities(
    model: &ClaimSeverityModel,
    thresholds: &[f64],
) -> Result<ClaimTypePartition> {
    model.validate()?;
    let increasing = thresholds.windows(2).all(|w| w[0] < w[1]);
    if thresholds.is_empty()
        || !increasing
        || thresholds[0] <= 0.0
        || thresholds.iter().any(|c| !c.is_finite())
    {
        return Err(Error::NonIncreasingThresholds(thresholds.to_vec()));
    }

    let mut probabilities = Vec::with_capacity(thresholds.len() + 1);
    probabilities.push(model.cdf(thresholds[0]));
    for w in thresholds.windows(2) {
        probabilities.push(model.survival(w[0]) - model.survival(w[1]));
    }
    probabilities.push(model.survival(thresholds[thresholds.len() - 1]));

    if let Some((index, &probability)) = probabilities.iter().enumerate().find(|(_, &q)| q <= 0.0) {
        return Err(Error::DegenerateType { index, probability });
    }

    Ok(ClaimTypePartition {
        thresholds: thresholds.to_vec(),
        probabilities,
    })
}

/// `E[C; C <= d]`.
pub fn truncated_mean(model: &ClaimSeverityModel, d: f64) -> Result<f64> {
    if d < 0.0 || d.is_nan() {
        return Err(Error::NegativeDeductible(d));
    }
    Ok(model.limited_moment(d))
}

/// `E[C | a < C <= b]`.
pub fn band_mean(model: &ClaimSeverityModel, a: f64, b: Upper) -> Result<f64> {
    let upper = b.value();
    if a < 0.0 || a.is_nan() || upper.is_nan() || a >= upper {
        return Err(Error::InvalidParameter(format!(
            "band requires 0 <= a < b, got ({a}, {upper}]"
        )));
    }
    let mass = match b {
        Upper::Finite(b) => model.survival(a) - model.survival(b),
        Upper::Infinity => model.survival(a),
    };
    if mass <= 0.0 {
        return Err(Error::EmptyBand { lower: a, upper });
    }
    Ok(model.conditional_band_mean(a, b))
}

/// The largest value the indifference right-hand side can take:
/// `E[C; C <= c_1*] + c_1* q_1 + ... + c_m* q_m`.
pub fn max_penalty_f(model: &ClaimSeverityModel, partition: &ClaimTypePartition) -> f64 {
    let head = model.limited_moment(partition.thresholds[0]);
    head + partition
        .thresholds
        .iter()
        .zip(&partition.probabilities[1..])
        .map(|(c, q)| c * q)
        .sum::<f64>()
}
