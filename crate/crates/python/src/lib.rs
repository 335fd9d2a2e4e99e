//! Python bindings: tariffs, deductible schedules and the building blocks
//! behind them.

use bonus_malus::config::{Tariff as CoreTariff, TariffConfig};
use bonus_malus::deductible::{
    self, allocate_greedy_top, allocate_manual, allocate_proportional_top, allocate_single_type,
    uniform_schedule, DeductibleSchedule, ManualEntry,
};
use bonus_malus::report::tariff_table;
use bonus_malus::scale::{build_transition_matrix, stationary_distribution as core_stationary};
use bonus_malus::severity::{self, type_probabilities as core_type_probabilities};
use bonus_malus::simulate::{simulate_portfolio, SimulationConfig};
use bonus_malus::{tables, ClaimSeverityModel, Error, ScaleRules, Upper};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(bonus_malus_py, BonusMalusError, PyValueError);

fn err(e: Error) -> PyErr {
    BonusMalusError::new_err(format!("{}: {e}", e.code()))
}

fn exponential(mean: f64) -> PyResult<ClaimSeverityModel> {
    ClaimSeverityModel::exponential(mean).map_err(err)
}

/// Deductibles and premium reductions for the malus levels.
#[pyclass(
    name = "Schedule",
    module = "bonus_malus_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct Schedule {
    inner: DeductibleSchedule,
}

#[pymethods]
impl Schedule {
    /// `alphas[k]` and `deductibles[k]` belong to level `malus_entry + k`.
    #[new]
    fn new(malus_entry: usize, alphas: Vec<f64>, deductibles: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = DeductibleSchedule::new(malus_entry, alphas, deductibles).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn malus_entry(&self) -> usize {
        self.inner.malus_entry()
    }

    #[getter]
    fn top(&self) -> usize {
        self.inner.top()
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.alphas().to_vec()
    }

    #[getter]
    fn deductibles(&self) -> Vec<Vec<f64>> {
        self.inner.rows().to_vec()
    }

    fn alpha(&self, level: usize) -> f64 {
        self.inner.alpha(level)
    }

    fn deductible(&self, level: usize, claim_type: usize) -> f64 {
        self.inner.deductible(level, claim_type)
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(malus_entry={}, alphas={:?}, deductibles={:?})",
            self.inner.malus_entry(),
            self.inner.alphas(),
            self.inner.rows()
        )
    }
}

/// A tariff with its steady state solved.
#[pyclass(name = "Tariff", module = "bonus_malus_py", frozen)]
struct Tariff {
    inner: CoreTariff,
}

fn wrap(schedule: DeductibleSchedule) -> Schedule {
    Schedule { inner: schedule }
}

impl Tariff {
    fn relativities_ref(&self) -> &[f64] {
        &self.inner.profile.relativities
    }
}

#[pymethods]
impl Tariff {
    /// Builds a tariff from a TOML document.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let config = TariffConfig::from_toml_str(text).map_err(err)?;
        Ok(Self {
            inner: CoreTariff::new(config).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        let config = TariffConfig::from_path(path).map_err(err)?;
        Ok(Self {
            inner: CoreTariff::new(config).map_err(err)?,
        })
    }

    /// One of the twelve built-in reference tariffs.
    #[staticmethod]
    fn reference(number: usize) -> PyResult<Self> {
        let config = tables::reference_table(number)
            .and_then(|t| t.config())
            .map_err(err)?;
        Ok(Self {
            inner: CoreTariff::new(config).map_err(err)?,
        })
    }

    #[getter]
    fn frequency(&self) -> f64 {
        self.inner.config.lambda
    }

    #[getter]
    fn mean_claim(&self) -> f64 {
        self.inner.mean_claim()
    }

    #[getter]
    fn type_probabilities(&self) -> Vec<f64> {
        self.inner.partition.probabilities().to_vec()
    }

    #[getter]
    fn proportions(&self) -> Vec<f64> {
        self.inner.profile.proportions.clone()
    }

    #[getter]
    fn relativities(&self) -> Vec<f64> {
        self.inner.profile.relativities.clone()
    }

    #[getter]
    fn malus_entry(&self) -> Option<usize> {
        self.inner.profile.malus_entry
    }

    /// `lambda * r_l * E[C]`.
    fn premium(&self, level: usize) -> PyResult<f64> {
        if level >= self.inner.profile.levels() {
            return Err(err(Error::InvalidParameter(format!("no level {level}"))));
        }
        Ok(self.inner.profile.premium(level, self.inner.mean_claim()))
    }

    /// Upper bound on the premium reduction at a malus level.
    #[pyo3(signature = (level, top_only = false))]
    fn alpha_upper_bound(&self, level: usize, top_only: bool) -> PyResult<f64> {
        deductible::alpha_upper_bound(
            level,
            self.relativities_ref(),
            &self.inner.model,
            &self.inner.partition,
            top_only,
        )
        .map_err(err)
    }

    /// Runs the allocation principle of the `[deductible]` section.
    fn allocate(&self) -> PyResult<Schedule> {
        Ok(wrap(self.inner.allocate().map_err(err)?.schedule))
    }

    fn allocate_single_type(&self, alphas: Vec<f64>) -> PyResult<Schedule> {
        let t = &self.inner;
        allocate_single_type(&alphas, self.relativities_ref(), &t.model, &t.partition)
            .map(wrap)
            .map_err(err)
    }

    /// Returns `(schedule, x, x0)`.
    fn allocate_proportional_top(&self, alpha: f64) -> PyResult<(Schedule, f64, f64)> {
        let t = &self.inner;
        let tol = t.config.numerics.bisection_tol;
        let a =
            allocate_proportional_top(alpha, self.relativities_ref(), &t.model, &t.partition, tol)
                .map_err(err)?;
        Ok((wrap(a.schedule), a.coefficient, a.ceiling))
    }

    fn allocate_greedy_top(&self, alpha: f64) -> PyResult<Schedule> {
        let t = &self.inner;
        allocate_greedy_top(alpha, self.relativities_ref(), &t.model, &t.partition)
            .map(wrap)
            .map_err(err)
    }

    #[pyo3(signature = (d = None))]
    fn uniform_schedule(&self, d: Option<Vec<f64>>) -> PyResult<Schedule> {
        let t = &self.inner;
        let tol = t.config.numerics.bisection_tol;
        uniform_schedule(
            self.relativities_ref(),
            &t.model,
            &t.partition,
            d.as_deref(),
            tol,
        )
        .map(wrap)
        .map_err(err)
    }

    /// `rows` hold one list per malus level; `None` marks the solved entry.
    fn allocate_manual(&self, alphas: Vec<f64>, rows: Vec<Vec<Option<f64>>>) -> PyResult<Schedule> {
        let t = &self.inner;
        let entries: Vec<Vec<ManualEntry>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| v.map_or(ManualEntry::Free, ManualEntry::Fixed))
                    .collect()
            })
            .collect();
        allocate_manual(
            &alphas,
            &entries,
            self.relativities_ref(),
            &t.model,
            &t.partition,
            t.config.numerics.bisection_tol,
            t.config.numerics.residual_tol,
        )
        .map(wrap)
        .map_err(err)
    }

    /// Per-level residuals and checks; `passed` and `failures` summarize them.
    #[pyo3(signature = (schedule, residual_tol = 1e-9))]
    fn validate<'py>(
        &self,
        py: Python<'py>,
        schedule: &Schedule,
        residual_tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let t = &self.inner;
        let report = deductible::validate_schedule(
            &schedule.inner,
            self.relativities_ref(),
            &t.model,
            &t.partition,
            residual_tol,
        )
        .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("passed", report.passed())?;
        out.set_item("failures", report.failures())?;
        out.set_item(
            "residuals",
            report.levels.iter().map(|c| c.residual).collect::<Vec<_>>(),
        )?;
        Ok(out)
    }

    /// Monte Carlo run; returns empirical statistics with standard errors.
    #[pyo3(signature = (n_policies, sample_years = 100, burn_in_years = 200, seed = 0, schedule = None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        n_policies: usize,
        sample_years: usize,
        burn_in_years: usize,
        seed: u64,
        schedule: Option<&Schedule>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let t = &self.inner;
        let config = SimulationConfig {
            n_policies,
            burn_in_years,
            sample_years,
            seed,
            initial_level: 0,
        };
        let report = py
            .detach(|| {
                simulate_portfolio(
                    &config,
                    t.config.lambda,
                    &t.rules,
                    &t.partition,
                    &t.model,
                    &t.config.mixing,
                    schedule.map(|s| &s.inner),
                )
            })
            .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("proportions", report.empirical_proportions)?;
        out.set_item("proportion_se", report.proportion_se)?;
        out.set_item("relativities", report.empirical_relativities)?;
        out.set_item("relativity_se", report.relativity_se)?;
        out.set_item("mean_deductible_paid", report.mean_deductible_paid)?;
        out.set_item("deductible_se", report.deductible_se)?;
        Ok(out)
    }

    /// Level table as CSV, top level first.
    #[pyo3(signature = (schedule = None, full_precision = false))]
    fn table_csv(&self, schedule: Option<&Schedule>, full_precision: bool) -> PyResult<String> {
        let t = &self.inner;
        tariff_table(&t.profile, t.mean_claim(), schedule.map(|s| &s.inner))
            .to_csv(full_precision)
            .map_err(err)
    }
}

/// Claim type probabilities `q_0..q_m` for exponential claims.
#[pyfunction]
fn type_probabilities(mean: f64, thresholds: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = core_type_probabilities(&exponential(mean)?, &thresholds).map_err(err)?;
    Ok(p.probabilities().to_vec())
}

/// `E[C; C <= d]` for exponential claims.
#[pyfunction]
fn truncated_mean(mean: f64, d: f64) -> PyResult<f64> {
    severity::truncated_mean(&exponential(mean)?, d).map_err(err)
}

/// `E[C | a < C <= b]`; `b = None` means unbounded.
#[pyfunction]
#[pyo3(signature = (mean, a, b = None))]
fn band_mean(mean: f64, a: f64, b: Option<f64>) -> PyResult<f64> {
    let upper = b.map_or(Upper::Infinity, Upper::Finite);
    severity::band_mean(&exponential(mean)?, a, upper).map_err(err)
}

/// Expected deductible paid per claim for a deductible row.
#[pyfunction]
fn indifference_rhs(mean: f64, thresholds: Vec<f64>, d: Vec<f64>) -> PyResult<f64> {
    let model = exponential(mean)?;
    let p = core_type_probabilities(&model, &thresholds).map_err(err)?;
    deductible::indifference_rhs(&model, &p, &d).map_err(err)
}

/// Stationary law of the scale for annual frequency `frequency`.
#[pyfunction]
fn stationary_distribution(
    frequency: f64,
    mean: f64,
    thresholds: Vec<f64>,
    levels: usize,
    penalties: Vec<usize>,
) -> PyResult<Vec<f64>> {
    let p = core_type_probabilities(&exponential(mean)?, &thresholds).map_err(err)?;
    let rules = ScaleRules::new(levels, penalties).map_err(err)?;
    let m = build_transition_matrix(&rules, frequency, &p).map_err(err)?;
    core_stationary(&m).map_err(err)
}

#[pymodule]
fn bonus_malus_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BonusMalusError", m.py().get_type::<BonusMalusError>())?;
    m.add_class::<Schedule>()?;
    m.add_class::<Tariff>()?;
    m.add_function(wrap_pyfunction!(type_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_mean, m)?)?;
    m.add_function(wrap_pyfunction!(band_mean, m)?)?;
    m.add_function(wrap_pyfunction!(indifference_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    Ok(())
}
