//! Level-dependent per-claim deductibles traded against premium reductions.
//!
//! In the malus zone (levels `s0..=s`) a policyholder pays `(1 - alpha_l)` of
//! the level premium and in exchange each claim of type `i` carries a
//! deductible `d_{l,i}`. The indifference condition ties the two together:
//!
//! ```text
//! alpha_l E[C] = E[C; C <= d_{l,0}] + d_{l,0} (q_0 - F(d_{l,0})) + sum_{i>=1} d_{l,i} q_i
//! ```
//!
//! Every allocator here returns a schedule that satisfies that identity and
//! the ordering constraints checked by [`validate_schedule`].

use crate::error::{Error, Result};
use crate::relativity::malus_entry_level;
use crate::rootfind::{solve_increasing, DEFAULT_TOL};
use crate::severity::{max_penalty_f, ClaimSeverityModel, ClaimTypePartition, SeverityLaw};

/// Residual tolerance for schedules synthesized by this module.
pub const SYNTHESIS_TOL: f64 = 1e-9;
/// Slack allowed on inequality checks so exact boundary values pass.
const ORDER_SLACK: f64 = 1e-12;

/// Premium reductions and deductibles for the malus levels `malus_entry..=top`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeductibleSchedule {
    malus_entry: usize,
    alphas: Vec<f64>,
    deductibles: Vec<Vec<f64>>,
}

impl DeductibleSchedule {
    /// `alphas[k]` and `deductibles[k]` belong to level `malus_entry + k`.
    pub fn new(malus_entry: usize, alphas: Vec<f64>, deductibles: Vec<Vec<f64>>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != deductibles.len() {
            return Err(Error::InvalidParameter(format!(
                "{} alphas for {} deductible rows",
                alphas.len(),
                deductibles.len()
            )));
        }
        let width = deductibles[0].len();
        if width < 2 || deductibles.iter().any(|row| row.len() != width) {
            return Err(Error::InvalidParameter(
                "every deductible row needs one entry per claim type".into(),
            ));
        }
        if alphas
            .iter()
            .chain(deductibles.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "schedule contains non-finite values".into(),
            ));
        }
        Ok(Self {
            malus_entry,
            alphas,
            deductibles,
        })
    }

    pub fn malus_entry(&self) -> usize {
        self.malus_entry
    }

    /// Highest level covered, `s`.
    pub fn top(&self) -> usize {
        self.malus_entry + self.alphas.len() - 1
    }

    pub fn num_types(&self) -> usize {
        self.deductibles[0].len()
    }

    /// Premium reduction at any level; zero in the bonus zone.
    pub fn alpha(&self, level: usize) -> f64 {
        level
            .checked_sub(self.malus_entry)
            .and_then(|k| self.alphas.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    /// Deductible of a claim type at any level; zero in the bonus zone.
    pub fn deductible(&self, level: usize, claim_type: usize) -> f64 {
        level
            .checked_sub(self.malus_entry)
            .and_then(|k| self.deductibles.get(k))
            .map(|row| row[claim_type])
            .unwrap_or(0.0)
    }

    pub fn row(&self, level: usize) -> Option<&[f64]> {
        level
            .checked_sub(self.malus_entry)
            .and_then(|k| self.deductibles.get(k))
            .map(Vec::as_slice)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.deductibles
    }
}

fn check_assumption2_row(
    level: Option<usize>,
    partition: &ClaimTypePartition,
    d: &[f64],
) -> Result<()> {
    if d.len() != partition.num_types() {
        return Err(Error::InvalidParameter(format!(
            "{} deductibles for {} claim types",
            d.len(),
            partition.num_types()
        )));
    }
    if let Some(detail) = row_bound_violation(partition, d) {
        return Err(Error::Assumption2Violation { level, detail });
    }
    if let Some(detail) = row_order_violation(d) {
        return Err(Error::Assumption2Violation { level, detail });
    }
    Ok(())
}

/// Assumption 2(i): `0 <= d_i <= cap_i`.
fn row_bound_violation(partition: &ClaimTypePartition, d: &[f64]) -> Option<String> {
    d.iter().enumerate().find_map(|(i, &v)| {
        let cap = partition.deductible_cap(i);
        (v < 0.0 || v > cap * (1.0 + ORDER_SLACK) + ORDER_SLACK)
            .then(|| format!("(i) d_{i} = {v} outside [0, {cap}]"))
    })
}

/// Assumption 2(ii): deductibles nondecreasing in claim type.
fn row_order_violation(d: &[f64]) -> Option<String> {
    d.windows(2).enumerate().find_map(|(i, w)| {
        (w[0] > w[1] + ORDER_SLACK)
            .then(|| format!("(ii) d_{i} = {} > d_{} = {}", w[0], i + 1, w[1]))
    })
}

/// Right-hand side of the indifference identity, no checks.
pub fn indifference_rhs_unchecked(
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    d: &[f64],
) -> f64 {
    let d0 = d[0];
    let head = model.limited_moment(d0) + d0 * (partition.q(0) - model.cdf(d0));
    head + d[1..]
        .iter()
        .zip(&partition.probabilities()[1..])
        .map(|(d, q)| d * q)
        .sum::<f64>()
}

/// Expected deductible paid per claim, `alpha_l E[C]` at indifference.
pub fn indifference_rhs(
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    d: &[f64],
) -> Result<f64> {
    check_assumption2_row(None, partition, d)?;
    Ok(indifference_rhs_unchecked(model, partition, d))
}

/// `(q_0 - F(d)) d + E[C; C <= d]`, the type-0 contribution for `d in [0, c_1*]`.
fn type_zero_term(model: &ClaimSeverityModel, partition: &ClaimTypePartition, d: f64) -> f64 {
    model.limited_moment(d) + d * (partition.q(0) - model.cdf(d))
}

/// Upper bound on `alpha_l`: `min{1 - 1/r_l, f/E[C]}`, or with `top_only`
/// `min{1 - r_{s-1}/r_s, f/E[C]}`.
///
/// A level with `r_l = 1` gets bound 0; levels with `r_l < 1` are rejected.
pub fn alpha_upper_bound(
    level: usize,
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    top_only: bool,
) -> Result<f64> {
    let top = relativities
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidParameter("empty relativity vector".into()))?;
    if level > top {
        return Err(Error::InvalidParameter(format!(
            "level {level} above top level {top}"
        )));
    }
    let r = relativities[level];
    if r < 1.0 {
        let malus_entry = malus_entry_level(relativities).unwrap_or(relativities.len());
        return Err(Error::NotInMalusZone { level, malus_entry });
    }
    let claims_bound = max_penalty_f(model, partition) / model.mean();
    let premium_bound = if top_only {
        if level != top {
            return Err(Error::InvalidParameter(format!(
                "top-level bound asked for level {level}, top is {top}"
            )));
        }
        let below = if top == 0 {
            1.0
        } else {
            relativities[top - 1].max(1.0)
        };
        1.0 - below / r
    } else {
        1.0 - 1.0 / r
    };
    Ok(premium_bound.max(0.0).min(claims_bound))
}

/// Outcome of every check on one malus level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCheck {
    pub level: usize,
    pub alpha: f64,
    /// `rhs(d_l) - alpha_l E[C]`.
    pub residual: f64,
    pub residual_ok: bool,
    pub alpha_range: bool,
    pub assumption1: bool,
    pub assumption2_bounds: bool,
    pub assumption2_row: bool,
    pub assumption2_column: bool,
    pub top_type_bound: bool,
    pub alpha_nondecreasing: bool,
}

impl LevelCheck {
    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let checks = [
            (self.residual_ok, "indifference residual"),
            (self.alpha_range, "alpha range"),
            (self.assumption1, "assumption 1"),
            (self.assumption2_bounds, "assumption 2(i)"),
            (self.assumption2_row, "assumption 2(ii)"),
            (self.assumption2_column, "assumption 2(iii)"),
            (self.top_type_bound, "top-type bound"),
            (self.alpha_nondecreasing, "alpha nondecreasing"),
        ];
        checks
            .iter()
            .filter(|(ok, _)| !ok)
            .map(|(_, name)| *name)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub expected_malus_entry: Option<usize>,
    pub malus_entry_ok: bool,
    pub residual_tol: f64,
    pub levels: Vec<LevelCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.malus_entry_ok && self.levels.iter().all(LevelCheck::passed)
    }

    /// One line per failed check, e.g. `level 2: assumption 2(iii)`.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.malus_entry_ok {
            out.push(format!(
                "malus entry: schedule does not start at level {:?}",
                self.expected_malus_entry
            ));
        }
        for check in &self.levels {
            for name in check.failures() {
                out.push(format!("level {}: {name}", check.level));
            }
        }
        out
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.levels
            .iter()
            .map(|c| c.residual.abs())
            .fold(0.0, f64::max)
    }
}

/// Checks a schedule against the indifference identity, both assumptions and
/// two consequences of them.
pub fn validate_schedule(
    schedule: &DeductibleSchedule,
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    residual_tol: f64,
) -> Result<ValidationReport> {
    if schedule.num_types() != partition.num_types() {
        return Err(Error::InvalidParameter(format!(
            "schedule has {} claim types, partition {}",
            schedule.num_types(),
            partition.num_types()
        )));
    }
    if schedule.top() + 1 != relativities.len() {
        return Err(Error::InvalidParameter(format!(
            "schedule tops out at level {}, scale has {} levels",
            schedule.top(),
            relativities.len()
        )));
    }
    let expected_malus_entry = malus_entry_level(relativities).ok();
    let mean = model.mean();
    let m = partition.m();
    let cap_m = partition.deductible_cap(m);
    let q_m = partition.q(m);

    let mut levels = Vec::with_capacity(schedule.alphas.len());
    let mut floor = 1.0;
    for (k, (&alpha, row)) in schedule
        .alphas
        .iter()
        .zip(&schedule.deductibles)
        .enumerate()
    {
        let level = schedule.malus_entry + k;
        let residual = indifference_rhs_unchecked(model, partition, row) - alpha * mean;
        let reduced = (1.0 - alpha) * relativities[level];
        let assumption1 = reduced >= floor - ORDER_SLACK;
        floor = floor.max(reduced);
        let assumption2_column = k == 0
            || row
                .iter()
                .zip(&schedule.deductibles[k - 1])
                .all(|(d, prev)| *d >= prev - ORDER_SLACK);
        let top_type_bound =
            row[m] <= (alpha * mean / q_m).min(cap_m) + residual_tol / q_m + ORDER_SLACK;
        let alpha_nondecreasing = k == 0 || alpha >= schedule.alphas[k - 1] - ORDER_SLACK;
        levels.push(LevelCheck {
            level,
            alpha,
            residual,
            residual_ok: residual.abs() <= residual_tol,
            alpha_range: (0.0..1.0).contains(&alpha),
            assumption1,
            assumption2_bounds: row_bound_violation(partition, row).is_none(),
            assumption2_row: row_order_violation(row).is_none(),
            assumption2_column,
            top_type_bound,
            alpha_nondecreasing,
        });
    }
    Ok(ValidationReport {
        expected_malus_entry,
        malus_entry_ok: expected_malus_entry == Some(schedule.malus_entry),
        residual_tol,
        levels,
    })
}

/// Converts the first failed check into an error.
fn ensure_valid(
    schedule: &DeductibleSchedule,
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    residual_tol: f64,
) -> Result<()> {
    let report = validate_schedule(schedule, relativities, model, partition, residual_tol)?;
    if !report.malus_entry_ok {
        return Err(Error::InvalidSchedule(report.failures().join("; ")));
    }
    for check in &report.levels {
        let level = check.level;
        if !check.assumption1 {
            let floor = if level == schedule.malus_entry {
                1.0
            } else {
                (1.0 - schedule.alpha(level - 1)) * relativities[level - 1]
            };
            return Err(Error::Assumption1Violation {
                level,
                value: (1.0 - check.alpha) * relativities[level],
                floor,
            });
        }
        if !check.assumption2_bounds || !check.assumption2_row {
            let row = schedule.row(level).unwrap_or_default();
            let detail = row_bound_violation(partition, row)
                .or_else(|| row_order_violation(row))
                .unwrap_or_default();
            return Err(Error::Assumption2Violation {
                level: Some(level),
                detail,
            });
        }
        if !check.assumption2_column {
            let claim_type = (0..schedule.num_types())
                .find(|&i| schedule.deductible(level, i) < schedule.deductible(level - 1, i))
                .unwrap_or(0);
            return Err(Error::MonotonicityViolation {
                claim_type,
                lower_level: level - 1,
                upper_level: level,
            });
        }
        if !check.passed() {
            return Err(Error::InvalidSchedule(format!(
                "level {level}: {}",
                check.failures().join(", ")
            )));
        }
    }
    Ok(())
}

fn malus_levels(relativities: &[f64]) -> Result<(usize, usize)> {
    let s0 = malus_entry_level(relativities)?;
    Ok((s0, relativities.len() - 1))
}

fn check_alpha(level: usize, alpha: f64, bound: f64, strict: bool) -> Result<()> {
    let above = if strict {
        alpha >= bound && alpha > 0.0
    } else {
        alpha > bound + ORDER_SLACK
    };
    if !(alpha >= 0.0) || above {
        return Err(Error::AlphaOutOfRange {
            level,
            alpha,
            bound,
        });
    }
    Ok(())
}

/// Deductibles only on the largest claim type: `d_{l,m} = alpha_l E[C] / q_m`.
///
/// `alphas` covers the malus levels `s0..=s` in order.
pub fn allocate_single_type(
    alphas: &[f64],
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
) -> Result<DeductibleSchedule> {
    let (s0, s) = malus_levels(relativities)?;
    expect_malus_len(alphas, s0, s)?;
    let m = partition.m();
    let mean = model.mean();
    let q_m = partition.q(m);
    let claims_bound = partition.deductible_cap(m) * q_m / mean;

    let mut rows = Vec::with_capacity(alphas.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        let level = s0 + k;
        let bound = (1.0 - 1.0 / relativities[level]).min(claims_bound);
        check_alpha(level, alpha, bound, false)?;
        if k > 0 && alpha < alphas[k - 1] {
            return Err(Error::MonotonicityViolation {
                claim_type: m,
                lower_level: level - 1,
                upper_level: level,
            });
        }
        let mut row = vec![0.0; partition.num_types()];
        row[m] = (alpha * mean / q_m).min(partition.deductible_cap(m));
        rows.push(row);
    }
    let schedule = DeductibleSchedule::new(s0, alphas.to_vec(), rows)?;
    ensure_valid(&schedule, relativities, model, partition, SYNTHESIS_TOL)?;
    Ok(schedule)
}

fn expect_malus_len(alphas: &[f64], s0: usize, s: usize) -> Result<()> {
    if alphas.len() != s - s0 + 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} alphas for malus levels {s0}..={s}, got {}",
            s - s0 + 1,
            alphas.len()
        )));
    }
    Ok(())
}

/// Conditional mean claim of every type.
pub fn band_means(model: &ClaimSeverityModel, partition: &ClaimTypePartition) -> Vec<f64> {
    (0..partition.num_types())
        .map(|i| {
            let (lower, upper) = partition.band(i);
            model.conditional_band_mean(lower, upper)
        })
        .collect()
}

/// Largest proportionality coefficient keeping `x * E[C | type i] <= cap_i`
/// for every type.
pub fn proportional_ceiling(model: &ClaimSeverityModel, partition: &ClaimTypePartition) -> f64 {
    let means = band_means(model, partition);
    (1..partition.num_types())
        .map(|i| partition.thresholds()[i - 1] / means[i])
        .fold(f64::INFINITY, f64::min)
}

/// Proportional allocation at the top level.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalAllocation {
    /// Proportionality coefficient `x`.
    pub coefficient: f64,
    /// Its admissible maximum `x_0`.
    pub ceiling: f64,
    pub schedule: DeductibleSchedule,
}

/// Solves `alpha E[C] = rhs(x * band_means)` for `x` in `[0, x0]`.
fn solve_proportional(
    target: f64,
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    tol: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let means = band_means(model, partition);
    let ceiling = proportional_ceiling(model, partition);
    let rhs = |x: f64| {
        let d: Vec<f64> = means.iter().map(|b| x * b).collect();
        indifference_rhs_unchecked(model, partition, &d)
    };
    let reachable = rhs(ceiling);
    if target > reachable {
        return Err(Error::InfeasibleProportional {
            alpha: target / model.mean(),
            reachable: reachable / model.mean(),
        });
    }
    let x = solve_increasing(rhs, target, 0.0, ceiling, tol)?;
    let mut d: Vec<f64> = means.iter().map(|b| x * b).collect();
    // x <= x0 keeps every entry under its cap; clamp rounding at the boundary
    for (i, v) in d.iter_mut().enumerate() {
        *v = v.min(partition.deductible_cap(i));
    }
    Ok((x, ceiling, d))
}

fn top_only_schedule(s0: usize, s: usize, alpha: f64, row: Vec<f64>) -> Result<DeductibleSchedule> {
    let width = row.len();
    let mut alphas = vec![0.0; s - s0 + 1];
    let mut rows = vec![vec![0.0; width]; s - s0 + 1];
    alphas[s - s0] = alpha;
    rows[s - s0] = row;
    DeductibleSchedule::new(s0, alphas, rows)
}

/// Deductibles at the top level only, proportional to the mean claim of
/// each type (first allocation principle).
///
/// `alpha_s` must lie strictly below the top-level bound.
pub fn allocate_proportional_top(
    alpha_s: f64,
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    tol: f64,
) -> Result<ProportionalAllocation> {
    let (s0, s) = malus_levels(relativities)?;
    let bound = alpha_upper_bound(s, relativities, model, partition, true)?;
    check_alpha(s, alpha_s, bound, true)?;
    let (coefficient, ceiling, row) =
        solve_proportional(alpha_s * model.mean(), model, partition, tol)?;
    let schedule = top_only_schedule(s0, s, alpha_s, row)?;
    ensure_valid(&schedule, relativities, model, partition, SYNTHESIS_TOL)?;
    Ok(ProportionalAllocation {
        coefficient,
        ceiling,
        schedule,
    })
}

/// Deductible row that recovers `budget` by saturating the largest claim types
/// first and leaving small claims untouched where possible.
fn greedy_row(
    budget: f64,
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
) -> Result<Vec<f64>> {
    let mut row = vec![0.0; partition.num_types()];
    let mut remaining = budget;
    for k in (1..partition.num_types()).rev() {
        if remaining <= 0.0 {
            return Ok(row);
        }
        let cap = partition.deductible_cap(k);
        let q = partition.q(k);
        if remaining <= cap * q {
            row[k] = (remaining / q).min(cap);
            return Ok(row);
        }
        row[k] = cap;
        remaining -= cap * q;
    }
    if remaining > 0.0 {
        let cap = partition.deductible_cap(0);
        let full = type_zero_term(model, partition, cap);
        row[0] = if remaining >= full {
            cap
        } else {
            solve_increasing(
                |d| type_zero_term(model, partition, d),
                remaining,
                0.0,
                cap,
                DEFAULT_TOL * cap.max(1.0),
            )?
        };
    }
    Ok(row)
}

/// Deductibles at the top level only, large claims first (second allocation
/// principle).
pub fn allocate_greedy_top(
    alpha_s: f64,
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
) -> Result<DeductibleSchedule> {
    let (s0, s) = malus_levels(relativities)?;
    let bound = alpha_upper_bound(s, relativities, model, partition, true)?;
    check_alpha(s, alpha_s, bound, false)?;
    let row = greedy_row(alpha_s * model.mean(), model, partition)?;
    let schedule = top_only_schedule(s0, s, alpha_s, row)?;
    ensure_valid(&schedule, relativities, model, partition, SYNTHESIS_TOL)?;
    Ok(schedule)
}

/// The same reduction and deductibles at every malus level.
///
/// If `f/E[C] <= 1 - 1/r_{s0}` the reduction is `f/E[C]` and every deductible
/// sits at its cap. Otherwise the reduction is `1 - 1/r_{s0}` and the
/// deductibles are `manual_d` when given, else the proportional row, else the
/// large-claims-first row.
pub fn uniform_schedule(
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    manual_d: Option<&[f64]>,
    tol: f64,
) -> Result<DeductibleSchedule> {
    let (s0, s) = malus_levels(relativities)?;
    let mean = model.mean();
    let claims_bound = max_penalty_f(model, partition) / mean;
    let premium_bound = 1.0 - 1.0 / relativities[s0];

    let (alpha, row) = if claims_bound <= premium_bound {
        let caps: Vec<f64> = (0..partition.num_types())
            .map(|i| partition.deductible_cap(i))
            .collect();
        (claims_bound, caps)
    } else {
        (premium_bound, Vec::new())
    };
    let row = match manual_d {
        Some(d) => {
            check_assumption2_row(Some(s0), partition, d)?;
            let residual = indifference_rhs_unchecked(model, partition, d) - alpha * mean;
            if residual.abs() > SYNTHESIS_TOL {
                return Err(Error::ManualDInconsistent { alpha, residual });
            }
            d.to_vec()
        }
        None if !row.is_empty() => row,
        None => match solve_proportional(alpha * mean, model, partition, tol) {
            Ok((_, _, d)) => d,
            Err(Error::InfeasibleProportional { .. }) => {
                greedy_row(alpha * mean, model, partition)?
            }
            Err(e) => return Err(e),
        },
    };
    let n = s - s0 + 1;
    let schedule = DeductibleSchedule::new(s0, vec![alpha; n], vec![row; n])?;
    ensure_valid(&schedule, relativities, model, partition, SYNTHESIS_TOL)?;
    Ok(schedule)
}

/// One entry of a hand-specified deductible row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManualEntry {
    Fixed(f64),
    /// Solved from the indifference identity.
    Free,
}

/// Hand-picked deductibles with at most one free coordinate per malus level.
///
/// A free coordinate of type `i >= 1` enters the identity linearly and is
/// solved directly; a free type-0 coordinate is found by bisection. Rows with
/// no free coordinate are taken as given and checked against `residual_tol`.
pub fn allocate_manual(
    alphas: &[f64],
    rows: &[Vec<ManualEntry>],
    relativities: &[f64],
    model: &ClaimSeverityModel,
    partition: &ClaimTypePartition,
    tol: f64,
    residual_tol: f64,
) -> Result<DeductibleSchedule> {
    let (s0, s) = malus_levels(relativities)?;
    expect_malus_len(alphas, s0, s)?;
    if rows.len() != alphas.len() {
        return Err(Error::InvalidParameter(format!(
            "{} manual rows for {} malus levels",
            rows.len(),
            alphas.len()
        )));
    }
    let mean = model.mean();
    let mut solved = Vec::with_capacity(rows.len());
    for (k, (entries, &alpha)) in rows.iter().zip(alphas).enumerate() {
        let level = s0 + k;
        if entries.len() != partition.num_types() {
            return Err(Error::InvalidParameter(format!(
                "level {level}: {} entries for {} claim types",
                entries.len(),
                partition.num_types()
            )));
        }
        let free: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, ManualEntry::Free))
            .map(|(i, _)| i)
            .collect();
        if free.len() > 1 {
            return Err(Error::InvalidParameter(format!(
                "level {level}: {} free deductibles, at most one allowed",
                free.len()
            )));
        }
        let bound = (1.0 - 1.0 / relativities[level]).min(max_penalty_f(model, partition) / mean);
        check_alpha(level, alpha, bound, false)?;
        let mut row: Vec<f64> = entries
            .iter()
            .map(|e| match e {
                ManualEntry::Fixed(v) => *v,
                ManualEntry::Free => 0.0,
            })
            .collect();
        if let Some(&i) = free.first() {
            let target = alpha * mean;
            let cap = partition.deductible_cap(i);
            let with = |v: f64| {
                let mut d = row.clone();
                d[i] = v;
                indifference_rhs_unchecked(model, partition, &d)
            };
            let (lo, hi) = (with(0.0), with(cap));
            if target < lo - residual_tol || target > hi + residual_tol {
                return Err(Error::AlphaOutOfRange {
                    level,
                    alpha,
                    bound: hi / mean,
                });
            }
            row[i] = if i == 0 {
                solve_increasing(with, target.clamp(lo, hi), 0.0, cap, tol)?
            } else {
                ((target - lo) / partition.q(i)).clamp(0.0, cap)
            };
        }
        solved.push(row);
    }
    let schedule = DeductibleSchedule::new(s0, alphas.to_vec(), solved)?;
    ensure_valid(&schedule, relativities, model, partition, residual_tol)?;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::severity::type_probabilities;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const R3: [f64; 4] = [0.8050, 1.6543, 1.8899, 2.1844];

    fn setup(thresholds: &[f64]) -> (ClaimSeverityModel, ClaimTypePartition) {
        let model = ClaimSeverityModel::exponential(2.0).unwrap();
        let partition = type_probabilities(&model, thresholds).unwrap();
        (model, partition)
    }

    fn fixed(v: &[f64]) -> Vec<ManualEntry> {
        v.iter().map(|&x| ManualEntry::Fixed(x)).collect()
    }

    #[test]
    fn rhs_at_zero_and_caps() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        assert_eq!(indifference_rhs(&model, &p, &[0.0; 4]).unwrap(), 0.0);
        let caps = [1.0, 1.0, 2.0, 4.0];
        assert_relative_eq!(
            indifference_rhs(&model, &p, &caps).unwrap(),
            max_penalty_f(&model, &p),
            max_relative = 1e-14
        );
        let v = indifference_rhs(&model, &p, &[0.0, 0.0, 0.0, 0.7389]).unwrap();
        assert!((v - 0.05 * 2.0).abs() < 5e-5);
    }

    #[test]
    fn rhs_rejects_assumption_two() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        assert!(matches!(
            indifference_rhs(&model, &p, &[0.0, 1.5, 1.5, 1.5]),
            Err(Error::Assumption2Violation { level: None, .. })
        ));
        assert!(matches!(
            indifference_rhs(&model, &p, &[0.0, 0.5, 0.2, 1.0]),
            Err(Error::Assumption2Violation { .. })
        ));
        assert!(indifference_rhs(&model, &p, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn top_level_bound_coarse_tariff() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let b = alpha_upper_bound(3, &R3, &model, &p, true).unwrap();
        assert!((b - 0.1348).abs() < 5e-4);
        assert_relative_eq!(b, 1.0 - R3[2] / R3[3], max_relative = 1e-14);
        let l1 = alpha_upper_bound(1, &R3, &model, &p, false).unwrap();
        assert_relative_eq!(l1, 1.0 - 1.0 / 1.6543, max_relative = 1e-14);
        assert!(0.35 <= l1);
        assert_eq!(
            alpha_upper_bound(1, &[0.5, 1.0, 1.2], &model, &p, false).unwrap(),
            0.0
        );
        assert!(matches!(
            alpha_upper_bound(0, &R3, &model, &p, false),
            Err(Error::NotInMalusZone {
                level: 0,
                malus_entry: 1
            })
        ));
        assert!(alpha_upper_bound(2, &R3, &model, &p, true).is_err());
    }

    #[test]
    fn single_type_tables_five_and_six() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let s = allocate_single_type(&[0.06, 0.13, 0.24], &R3, &model, &p).unwrap();
        for (l, e) in [(1, 0.8867), (2, 1.9212), (3, 3.5467)] {
            assert!((s.deductible(l, 3) - e).abs() < 5e-4);
            assert_eq!(s.deductible(l, 0), 0.0);
        }
        let s = allocate_single_type(&[0.24, 0.25, 0.26], &R3, &model, &p).unwrap();
        for (l, e) in [(1, 3.5467), (2, 3.6945), (3, 3.8423)] {
            assert!((s.deductible(l, 3) - e).abs() < 5e-4);
        }
        let s = allocate_single_type(&[0.0, 0.0, 0.0], &R3, &model, &p).unwrap();
        assert!(s.rows().iter().flatten().all(|&d| d == 0.0));
    }

    #[test]
    fn single_type_rejections() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        assert!(matches!(
            allocate_single_type(&[0.06, 0.13, 0.3], &R3, &model, &p),
            Err(Error::AlphaOutOfRange { level: 3, .. })
        ));
        assert!(matches!(
            allocate_single_type(&[0.13, 0.06, 0.2], &R3, &model, &p),
            Err(Error::MonotonicityViolation { claim_type: 3, .. })
        ));
        assert!(allocate_single_type(&[0.1, 0.1], &R3, &model, &p).is_err());
    }

    #[test]
    fn proportional_coarse_tariff() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let a = allocate_proportional_top(0.05, &R3, &model, &p, 1e-12).unwrap();
        assert!((a.coefficient - 0.050066).abs() < 1e-5);
        assert!((a.ceiling - 0.6667).abs() < 5e-4);
        let expected = [0.0230, 0.0730, 0.1420, 0.3004];
        for (i, e) in expected.iter().enumerate() {
            assert!((a.schedule.deductible(3, i) - e).abs() < 5e-4);
        }
        assert_eq!(a.schedule.alpha(2), 0.0);
        let a = allocate_proportional_top(0.13, &R3, &model, &p, 1e-12).unwrap();
        assert!((a.coefficient - 0.130443).abs() < 1e-5);
        let expected = [0.0598, 0.1903, 0.3699, 0.7827];
        for (i, e) in expected.iter().enumerate() {
            assert!((a.schedule.deductible(3, i) - e).abs() < 5e-4);
        }
    }

    #[test]
    fn proportional_rejects_at_or_above_bound() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let b = alpha_upper_bound(3, &R3, &model, &p, true).unwrap();
        assert!(matches!(
            allocate_proportional_top(b, &R3, &model, &p, 1e-12),
            Err(Error::AlphaOutOfRange { .. })
        ));
        assert!(allocate_proportional_top(b + 0.01, &R3, &model, &p, 1e-12).is_err());
    }

    #[test]
    fn proportional_infeasible_when_bands_are_tight() {
        // Very wide top band: x0 is small, so the proportional row caps out early.
        let model = ClaimSeverityModel::exponential(2.0).unwrap();
        let p = type_probabilities(&model, &[0.05, 0.1]).unwrap();
        let r = [0.5, 3.0, 9.0];
        let b = alpha_upper_bound(2, &r, &model, &p, true).unwrap();
        let err = allocate_proportional_top(0.99 * b, &r, &model, &p, 1e-12).unwrap_err();
        assert!(
            matches!(err, Error::InfeasibleProportional { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn proportional_root_is_unique() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let means = band_means(&model, &p);
        let x0 = proportional_ceiling(&model, &p);
        let rhs = |x: f64| {
            let d: Vec<f64> = means.iter().map(|b| x * b).collect();
            indifference_rhs_unchecked(&model, &p, &d)
        };
        let target = 0.1;
        let up = crate::rootfind::bisect(|x| rhs(x) - target, 0.0, x0, 1e-14).unwrap();
        let down = crate::rootfind::bisect(|x| target - rhs(x), x0, 0.0, 1e-14).unwrap();
        assert!((up - down).abs() < 1e-10);
    }

    #[test]
    fn greedy_tables_three_and_four() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let s = allocate_greedy_top(0.05, &R3, &model, &p).unwrap();
        assert_eq!(s.row(3).unwrap()[..3], [0.0, 0.0, 0.0]);
        assert!((s.deductible(3, 3) - 0.7389).abs() < 5e-4);
        let s = allocate_greedy_top(0.13, &R3, &model, &p).unwrap();
        assert!((s.deductible(3, 3) - 1.9212).abs() < 5e-4);
    }

    #[test]
    fn greedy_saturation_boundary() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        // raise r_2 irrelevant: make the top bound generous
        let r = [0.5, 1.2, 1.4, 10.0];
        let alpha = 4.0 * p.q(3) / model.mean();
        let s = allocate_greedy_top(alpha, &r, &model, &p).unwrap();
        assert_relative_eq!(s.deductible(3, 3), 4.0, max_relative = 1e-14);
        assert_eq!(s.row(3).unwrap()[..3], [0.0, 0.0, 0.0]);
        // spill into type 0
        let f = max_penalty_f(&model, &p) / model.mean();
        let alpha = f - 0.01;
        let s = allocate_greedy_top(alpha, &r, &model, &p).unwrap();
        let row = s.row(3).unwrap();
        assert_eq!(row[1..], [1.0, 2.0, 4.0]);
        assert!(row[0] > 0.0 && row[0] < 1.0);
        let rhs = indifference_rhs(&model, &p, row).unwrap();
        assert!((rhs - alpha * model.mean()).abs() < 1e-9);
        // exactly the claims bound is accepted
        let s = allocate_greedy_top(f, &r, &model, &p).unwrap();
        assert_relative_eq!(s.deductible(3, 0), 1.0, max_relative = 1e-9);
        assert!(allocate_greedy_top(f + 1e-3, &r, &model, &p).is_err());
    }

    #[test]
    fn uniform_branches() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let f = max_penalty_f(&model, &p) / model.mean();
        // second branch on the coarse tariff
        let s = uniform_schedule(&R3, &model, &p, None, 1e-12).unwrap();
        let alpha = 1.0 - 1.0 / R3[1];
        assert!(f > alpha);
        assert!((alpha - 0.3955).abs() < 5e-5);
        for l in 1..=3 {
            assert_relative_eq!(s.alpha(l), alpha);
        }
        // branch 1: huge relativity at s0
        let r = [0.5, 8.0, 9.0, 10.0];
        let s = uniform_schedule(&r, &model, &p, None, 1e-12).unwrap();
        assert_relative_eq!(s.alpha(1), f);
        assert_eq!(s.row(3).unwrap(), &[1.0, 1.0, 2.0, 4.0]);
        // manual zeros cannot pay for a positive reduction
        assert!(matches!(
            uniform_schedule(&R3, &model, &p, Some(&[0.0; 4]), 1e-12),
            Err(Error::ManualDInconsistent { .. })
        ));
    }

    #[test]
    fn uniform_manual_row_accepted() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let alpha = 1.0 - 1.0 / R3[1];
        let d3 = (alpha * 2.0 - 0.5 * p.q(1) - 1.5 * p.q(2)) / p.q(3);
        let row = [0.0, 0.5, 1.5, d3];
        let s = uniform_schedule(&R3, &model, &p, Some(&row), 1e-12).unwrap();
        assert_eq!(s.row(2).unwrap(), &row);
    }

    #[test]
    fn manual_table_nine() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let rows: Vec<Vec<ManualEntry>> = [[0.3, 1.3], [0.5, 1.4], [0.7, 1.5]]
            .iter()
            .map(|&[a, b]| {
                vec![
                    ManualEntry::Fixed(0.0),
                    ManualEntry::Fixed(a),
                    ManualEntry::Fixed(b),
                    ManualEntry::Free,
                ]
            })
            .collect();
        let s = allocate_manual(&[0.35, 0.40, 0.45], &rows, &R3, &model, &p, 1e-12, 1e-9).unwrap();
        for (l, e) in [(1, 2.4096), (2, 2.6239), (3, 2.8383)] {
            assert!((s.deductible(l, 3) - e).abs() < 5e-3);
        }
    }

    #[test]
    fn manual_free_type_zero() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let alpha = 0.28;
        let row = vec![
            ManualEntry::Free,
            ManualEntry::Fixed(0.5),
            ManualEntry::Fixed(0.8),
            ManualEntry::Fixed(1.2),
        ];
        let rows = vec![row.clone(), row.clone(), row];
        let s = allocate_manual(&[alpha; 3], &rows, &R3, &model, &p, 1e-13, 1e-9).unwrap();
        let rhs = indifference_rhs(&model, &p, s.row(3).unwrap()).unwrap();
        assert!((rhs - alpha * 2.0).abs() < 1e-9);
        // two free entries
        let rows = vec![
            fixed(&[0.0; 4]),
            fixed(&[0.0; 4]),
            vec![
                ManualEntry::Free,
                ManualEntry::Free,
                ManualEntry::Fixed(2.0),
                ManualEntry::Fixed(3.0),
            ],
        ];
        assert!(allocate_manual(&[0.0, 0.0, alpha], &rows, &R3, &model, &p, 1e-13, 1e-9).is_err());
    }

    fn table_nine() -> DeductibleSchedule {
        DeductibleSchedule::new(
            1,
            vec![0.35, 0.40, 0.45],
            vec![
                vec![0.0, 0.3, 1.3, 2.4096],
                vec![0.0, 0.5, 1.4, 2.6239],
                vec![0.0, 0.7, 1.5, 2.8383],
            ],
        )
        .unwrap()
    }

    #[test]
    fn validate_printed_table_nine() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let report = validate_schedule(&table_nine(), &R3, &model, &p, 5e-3).unwrap();
        assert!(report.passed(), "{:?}", report.failures());
        assert!(report.max_abs_residual() < 5e-3);
    }

    #[test]
    fn validate_flags_column_decrease() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let mut rows = table_nine().rows().to_vec();
        rows[1][3] = 2.9; // d_{2,3} > d_{3,3}
        let s = DeductibleSchedule::new(1, vec![0.35, 0.40, 0.45], rows).unwrap();
        let report = validate_schedule(&s, &R3, &model, &p, 5e-3).unwrap();
        assert!(!report.passed());
        assert!(report
            .failures()
            .iter()
            .any(|f| f == "level 3: assumption 2(iii)"));
    }

    #[test]
    fn validate_flags_alpha_above_claims_bound() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        let f = max_penalty_f(&model, &p) / model.mean();
        let r = [0.5, 8.0, 9.0, 10.0];
        let caps = vec![1.0, 1.0, 2.0, 4.0];
        let alpha = f + 1e-3;
        let s = DeductibleSchedule::new(1, vec![alpha; 3], vec![caps; 3]).unwrap();
        let report = validate_schedule(&s, &r, &model, &p, 1e-9).unwrap();
        assert!(report.levels.iter().all(|c| !c.residual_ok));
    }

    #[test]
    fn validate_flags_assumption_one() {
        let (model, p) = setup(&[1.0, 2.0, 4.0]);
        // (1 - 0.45) * 1.6543 < 1
        let s =
            DeductibleSchedule::new(1, vec![0.45, 0.45, 0.45], vec![vec![0.0, 0.0, 0.0, 0.0]; 3])
                .unwrap();
        let report = validate_schedule(&s, &R3, &model, &p, 1e-9).unwrap();
        assert!(report
            .failures()
            .iter()
            .any(|f| f == "level 1: assumption 1"));
    }

    fn ordered_row(p: &ClaimTypePartition, raw: &[f64]) -> Vec<f64> {
        // map unit-interval draws into a row satisfying assumption 2(i)-(ii)
        let mut row = Vec::with_capacity(raw.len());
        let mut floor = 0.0f64;
        for (i, u) in raw.iter().enumerate() {
            let cap = p.deductible_cap(i);
            let v = floor + u * (cap - floor);
            row.push(v);
            floor = v;
        }
        row
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn rhs_is_monotone(
            a in proptest::collection::vec(0.0f64..1.0, 4),
            b in proptest::collection::vec(0.0f64..1.0, 4),
        ) {
            let (model, p) = setup(&[1.0, 2.0, 4.0]);
            let x = ordered_row(&p, &a);
            let y = ordered_row(&p, &b);
            let lo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u.min(*v)).collect();
            let hi: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u.max(*v)).collect();
            let f_lo = indifference_rhs(&model, &p, &lo).unwrap();
            let f_hi = indifference_rhs(&model, &p, &hi).unwrap();
            prop_assert!(f_lo <= f_hi + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn allocators_round_trip(frac in 0.0f64..1.0) {
            let (model, p) = setup(&[1.0, 2.0, 4.0]);
            let bound = alpha_upper_bound(3, &R3, &model, &p, true).unwrap();
            let alpha = frac * bound;
            let prop = allocate_proportional_top(alpha, &R3, &model, &p, 1e-12).unwrap();
            let greedy = allocate_greedy_top(alpha, &R3, &model, &p).unwrap();
            for s in [&prop.schedule, &greedy] {
                let rhs = indifference_rhs(&model, &p, s.row(3).unwrap()).unwrap();
                prop_assert!((rhs - alpha * 2.0).abs() < 1e-9);
                let report = validate_schedule(s, &R3, &model, &p, 1e-9).unwrap();
                prop_assert!(report.passed());
            }
        }
    }
}
