//! The bonus-malus scale as a Markov chain.
//!
//! A claim-free year moves the policyholder one level down (never below 0).
//! Each claim of type `i` moves them `penalties[i]` levels up, capped at the
//! top level `s`.

use crate::error::{Error, Result};
use crate::severity::ClaimTypePartition;

/// Transition rules of a scale with `levels = s + 1` levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleRules {
    levels: usize,
    penalties: Vec<usize>,
}

impl ScaleRules {
    pub fn new(levels: usize, penalties: Vec<usize>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "a scale needs at least 2 levels, got {levels}"
            )));
        }
        if penalties.is_empty() {
            return Err(Error::InvalidParameter("no claim type penalties".into()));
        }
        if let Some(i) = penalties.iter().position(|&p| p == 0) {
            return Err(Error::ZeroPenalty(i));
        }
        if penalties.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(format!(
                "penalties must be nondecreasing in claim type, got {penalties:?}"
            )));
        }
        Ok(Self { levels, penalties })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Index of the highest level, `s`.
    pub fn top(&self) -> usize {
        self.levels - 1
    }

    pub fn penalties(&self) -> &[usize] {
        &self.penalties
    }

    /// Level reached from `from` after a year with the given claim counts per type.
    pub fn next_level(&self, from: usize, claims: &[u64]) -> usize {
        let jump: u64 = claims
            .iter()
            .zip(&self.penalties)
            .map(|(&n, &p)| n.saturating_mul(p as u64))
            .fold(0u64, |acc, x| acc.saturating_add(x));
        if jump == 0 {
            from.saturating_sub(1)
        } else {
            let target = (from as u64).saturating_add(jump);
            target.min(self.top() as u64) as usize
        }
    }
}

/// `P[N = j]` for `N ~ Poisson(rate)`.
pub fn thinned_pmf(rate: f64, j: u64) -> f64 {
    if rate == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    let log_factorial: f64 = (1..=j).map(|k| (k as f64).ln()).sum();
    (j as f64 * rate.ln() - rate - log_factorial).exp()
}

/// Row-stochastic one-step transition matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    entries: Vec<f64>,
    support: Vec<bool>,
    frequency: Option<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit rows. The support is read off the entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidParameter(
                "transition matrix must be square".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("row {i} sums to {total}")));
            }
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        let support = entries.iter().map(|&p| p > 0.0).collect();
        Ok(Self {
            size,
            entries,
            support,
            frequency: None,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.size..(from + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.size)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Annual claim frequency `lambda * theta` the matrix was built for.
    pub fn frequency(&self) -> Option<f64> {
        self.frequency
    }

    /// Structural positivity pattern of the entries.
    pub fn support(&self, from: usize, to: usize) -> bool {
        self.support[from * self.size + to]
    }
}

/// Builds `P(lambda*theta; q)` by exact enumeration of the claim vectors that
/// land strictly below the top level; the top column takes the complement.
pub fn build_transition_matrix(
    rules: &ScaleRules,
    frequency: f64,
    partition: &ClaimTypePartition,
) -> Result<TransitionMatrix> {
    if !(frequency >= 0.0) || !frequency.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "claim frequency must be finite and non-negative, got {frequency}"
        )));
    }
    if rules.penalties.len() != partition.num_types() {
        return Err(Error::InvalidParameter(format!(
            "{} penalties for {} claim types",
            rules.penalties.len(),
            partition.num_types()
        )));
    }
    let s = rules.top();
    let size = rules.levels;

    // coeff[k]: sum over claim vectors with total penalty k of prod (x_i^n_i / n_i!),
    // reachable[k]: whether any claim vector has total penalty k.
    let mut coeff = vec![0.0; s];
    let mut reachable = vec![false; s];
    coeff[0] = 1.0;
    reachable[0] = true;
    for (&penalty, &q) in rules.penalties.iter().zip(partition.probabilities()) {
        let rate = frequency * q;
        let mut next_coeff = vec![0.0; s];
        let mut next_reach = vec![false; s];
        for k in 0..s {
            let mut term = 1.0; // rate^n / n!
            let mut n = 0usize;
            while n * penalty <= k {
                next_coeff[k] += coeff[k - n * penalty] * term;
                next_reach[k] |= reachable[k - n * penalty];
                n += 1;
                term *= rate / n as f64;
            }
        }
        coeff = next_coeff;
        reachable = next_reach;
    }

    let stay_free = (-frequency).exp();
    let any_claim = -(-frequency).exp_m1();
    let mut entries = vec![0.0; size * size];
    let mut support = vec![false; size * size];
    for from in 0..size {
        let row = &mut entries[from * size..(from + 1) * size];
        let row_support = &mut support[from * size..(from + 1) * size];
        let down = from.saturating_sub(1);
        row[down] += stay_free;
        row_support[down] = true;

        let mut below_top = 0.0;
        for k in 1..s.saturating_sub(from) {
            let p = stay_free * coeff[k];
            row[from + k] = p;
            row_support[from + k] = frequency > 0.0 && reachable[k];
            below_top += p;
        }
        if from == s {
            row[s] += any_claim;
        } else {
            row[s] = (any_claim - below_top).max(0.0);
        }
        row_support[s] |= frequency > 0.0;
    }

    Ok(TransitionMatrix {
        size,
        entries,
        support,
        frequency: Some(frequency),
    })
}

/// Smallest `n0 <= max_power` such that every entry of `P^n0` is positive,
/// computed on the boolean support.
pub fn is_regular(matrix: &TransitionMatrix, max_power: usize) -> Result<usize> {
    let n = matrix.size;
    let base = &matrix.support;
    let mut power = base.clone();
    for k in 1..=max_power {
        if power.iter().all(|&b| b) {
            return Ok(k);
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] = (0..n).any(|m| power[i * n + m] && base[m * n + j]);
            }
        }
        power = next;
    }
    Err(Error::NotRegularWithin(max_power))
}

pub fn default_max_power(matrix: &TransitionMatrix) -> usize {
    matrix.size * matrix.size
}

/// Stationary law of a regular chain via `pi^T = e^T (I - P + E)^{-1}`.
pub fn stationary_distribution(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    is_regular(matrix, default_max_power(matrix)).map_err(|_| Error::NotRegular)?;
    solve_stationary_system(matrix)
}

/// Solves `(I - P + E)^T x = e` without checking regularity.
pub fn solve_stationary_system(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.size;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let identity = if i == j { 1.0 } else { 0.0 };
            a[i * n + j] = identity - matrix.get(j, i) + 1.0;
        }
    }
    let mut x = solve_dense(a, vec![1.0; n])?;
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    Ok(x)
}

/// Gaussian elimination with partial pivoting on a row-major square system.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::SingularSystem(col));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / a[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= factor * a[col * n + j];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|j| a[r * n + j] * x[j]).sum();
        x[r] = (b[r] - tail) / a[r * n + r];
    }
    Ok(x)
}

/// Closed-form stationary law of the 4-level scale with penalties (1, 2, 3, 3).
pub fn closed_form_stationary_4level(
    frequency: f64,
    partition: &ClaimTypePartition,
) -> Result<[f64; 4]> {
    if partition.num_types() != 4 {
        return Err(Error::InvalidParameter(format!(
            "closed form needs 4 claim types, got {}",
            partition.num_types()
        )));
    }
    if !(frequency >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "negative frequency {frequency}"
        )));
    }
    let y = frequency;
    let (q0, q1) = (partition.q(0), partition.q(1));
    let (e1, e2, e3) = ((-y).exp(), (-2.0 * y).exp(), (-3.0 * y).exp());
    let yq0 = y * q0;
    let delta = 1.0 - 2.0 * yq0 * e2 - y * q1 * e3 - yq0 * yq0 / 2.0 * e3;
    let top = -(-y).exp_m1() - 2.0 * yq0 * e2 + y * (q0 - q1) * e3 - yq0 * yq0 / 2.0 * e3;
    Ok([
        e3 / delta,
        (e2 - e3) / delta,
        (e1 - e2 - yq0 * e3) / delta,
        top / delta,
    ])
}

/// `max_l |(pi^T P)_l - pi_l|`.
pub fn stationarity_residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    let n = matrix.size;
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| pi[i] * matrix.get(i, j)).sum();
            (flow - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::severity::{type_probabilities, ClaimSeverityModel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn coarse_tariff() -> ClaimTypePartition {
        type_probabilities(
            &ClaimSeverityModel::exponential(2.0).unwrap(),
            &[1.0, 2.0, 4.0],
        )
        .unwrap()
    }

    fn four_level_rules() -> ScaleRules {
        ScaleRules::new(4, vec![1, 2, 3, 3]).unwrap()
    }

    /// Brute-force oracle: every claim vector with at most `cap` claims, the
    /// leftover Poisson mass folded into the top level.
    fn brute_force_matrix(rules: &ScaleRules, y: f64, q: &[f64], cap: u64) -> Vec<Vec<f64>> {
        let n = rules.levels();
        let mut rows = vec![vec![0.0; n]; n];
        fn walk(
            rules: &ScaleRules,
            y: f64,
            q: &[f64],
            cap: u64,
            counts: &mut Vec<u64>,
            prob: f64,
            from: usize,
            row: &mut [f64],
        ) {
            let i = counts.len();
            if i == q.len() {
                row[rules.next_level(from, counts)] += prob;
                return;
            }
            let used: u64 = counts.iter().sum();
            for j in 0..=(cap - used) {
                counts.push(j);
                walk(
                    rules,
                    y,
                    q,
                    cap,
                    counts,
                    prob * thinned_pmf(y * q[i], j),
                    from,
                    row,
                );
                counts.pop();
            }
        }
        for (from, row) in rows.iter_mut().enumerate() {
            walk(rules, y, q, cap, &mut Vec::new(), 1.0, from, row);
            let total: f64 = row.iter().sum();
            row[n - 1] += 1.0 - total;
        }
        rows
    }

    #[test]
    fn pmf_values() {
        assert_eq!(thinned_pmf(0.0, 0), 1.0);
        assert_eq!(thinned_pmf(0.0, 3), 0.0);
        let r = 0.1 * 0.3935;
        assert_relative_eq!(thinned_pmf(r, 0), (-r).exp(), max_relative = 1e-15);
        // cumulative oracle: P[N <= 2] - P[N <= 1]
        let cdf = |k: u64| {
            (0..=k)
                .map(|j| (-1f64).exp() / (1..=j).map(|x| x as f64).product::<f64>())
                .sum::<f64>()
        };
        assert_relative_eq!(thinned_pmf(1.0, 2), cdf(2) - cdf(1), max_relative = 1e-14);
        assert_relative_eq!(thinned_pmf(1.0, 2), 0.18394, epsilon = 5e-6);
        let total: f64 = (0..60).map(|j| thinned_pmf(3.5, j)).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rules_validation() {
        assert!(matches!(
            ScaleRules::new(4, vec![1, 0, 3]),
            Err(Error::ZeroPenalty(1))
        ));
        assert!(ScaleRules::new(1, vec![1]).is_err());
        assert!(ScaleRules::new(4, vec![2, 1]).is_err());
        let r = four_level_rules();
        assert_eq!(r.next_level(0, &[0, 0, 0, 0]), 0);
        assert_eq!(r.next_level(2, &[0, 0, 0, 0]), 1);
        assert_eq!(r.next_level(0, &[2, 0, 0, 0]), 2);
        assert_eq!(r.next_level(0, &[1, 1, 0, 0]), 3);
    }

    #[test]
    fn matches_symbolic_four_level_matrix() {
        let p = coarse_tariff();
        let (q0, q1) = (p.q(0), p.q(1));
        for y in [1e-4, 0.05, 0.1, 0.7, 2.5] {
            let m = build_transition_matrix(&four_level_rules(), y, &p).unwrap();
            let e = (-y).exp();
            let expected = [
                [
                    e,
                    y * q0 * e,
                    y * q1 * e + (y * q0).powi(2) / 2.0 * e,
                    1.0 - e - y * (q0 + q1) * e - (y * q0).powi(2) / 2.0 * e,
                ],
                [e, 0.0, y * q0 * e, 1.0 - e - y * q0 * e],
                [0.0, e, 0.0, 1.0 - e],
                [0.0, 0.0, e, 1.0 - e],
            ];
            for (i, row) in expected.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert!((m.get(i, j) - v).abs() < 1e-14, "({i},{j}) at {y}");
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let p = coarse_tariff();
        let rules = four_level_rules();
        let m = build_transition_matrix(&rules, 0.1, &p).unwrap();
        let oracle = brute_force_matrix(&rules, 0.1, p.probabilities(), 30);
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.get(i, j) - oracle[i][j]).abs() < 1e-14);
            }
        }
        // larger scale, uneven penalties
        let rules = ScaleRules::new(7, vec![1, 2, 4, 5]).unwrap();
        let m = build_transition_matrix(&rules, 0.8, &p).unwrap();
        let oracle = brute_force_matrix(&rules, 0.8, p.probabilities(), 30);
        for i in 0..7 {
            for j in 0..7 {
                assert!((m.get(i, j) - oracle[i][j]).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn zero_frequency_is_pure_downshift() {
        let p = coarse_tariff();
        let m = build_transition_matrix(&four_level_rules(), 0.0, &p).unwrap();
        for l in 0..4 {
            assert_eq!(m.get(l, l.saturating_sub(1)), 1.0);
        }
        assert!(matches!(
            is_regular(&m, 100),
            Err(Error::NotRegularWithin(100))
        ));
        assert!(matches!(
            stationary_distribution(&m),
            Err(Error::NotRegular)
        ));
    }

    #[test]
    fn regularity() {
        let p = coarse_tariff();
        let m = build_transition_matrix(&four_level_rules(), 0.3, &p).unwrap();
        let n0 = is_regular(&m, 16).unwrap();
        assert!(n0 <= 4);
        // boolean power oracle, computed directly
        let mut pow = m.rows();
        let mut k = 1;
        while pow.iter().flatten().any(|&v| v <= 0.0) {
            let prev = pow.clone();
            for i in 0..4 {
                for j in 0..4 {
                    pow[i][j] = (0..4).map(|l| prev[i][l] * m.get(l, j)).sum();
                }
            }
            k += 1;
        }
        assert_eq!(n0, k);

        let two = TransitionMatrix::from_rows(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        assert_eq!(is_regular(&two, 4).unwrap(), 1);
    }

    #[test]
    fn support_survives_underflow() {
        let p = coarse_tariff();
        let m = build_transition_matrix(&four_level_rules(), 800.0, &p).unwrap();
        assert_eq!(m.get(3, 2), 0.0);
        assert!(m.support(3, 2));
        assert!(is_regular(&m, 16).is_ok());
    }

    #[test]
    fn cyclic_two_level_solver() {
        let m = TransitionMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pi = solve_stationary_system(&m).unwrap();
        assert_relative_eq!(pi[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pi[1], 0.5, epsilon = 1e-15);
        assert!(stationary_distribution(&m).is_err());
    }

    #[test]
    fn closed_form_matches_generic() {
        let p = coarse_tariff();
        let m = build_transition_matrix(&four_level_rules(), 0.2, &p).unwrap();
        let generic = stationary_distribution(&m).unwrap();
        let closed = closed_form_stationary_4level(0.2, &p).unwrap();
        for (a, b) in generic.iter().zip(closed) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(stationarity_residual(&m, &generic) < 1e-12);
    }

    #[test]
    fn closed_form_example_value() {
        let p = coarse_tariff();
        let y = 0.1;
        let pi = closed_form_stationary_4level(y, &p).unwrap();
        let delta = 1.0
            - 2.0 * y * p.q(0) * (-2.0 * y).exp()
            - y * p.q(1) * (-3.0 * y).exp()
            - (y * p.q(0)).powi(2) / 2.0 * (-3.0 * y).exp();
        assert_relative_eq!(pi[0], (-0.3f64).exp() / delta, max_relative = 1e-14);
        assert_relative_eq!(pi.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn vanishing_frequency_limit() {
        let p = coarse_tariff();
        let closed = closed_form_stationary_4level(1e-9, &p).unwrap();
        let m = build_transition_matrix(&four_level_rules(), 1e-9, &p).unwrap();
        let generic = stationary_distribution(&m).unwrap();
        for pi in [closed.to_vec(), generic] {
            assert!((pi[0] - 1.0).abs() < 1e-8);
            assert!(pi[1..].iter().all(|&v| v < 1e-8));
        }
    }

    #[test]
    fn top_mass_grows_with_frequency() {
        let p = coarse_tariff();
        let mut last = 0.0;
        for k in 1..=100 {
            let y = k as f64 * 0.1;
            let m = build_transition_matrix(&four_level_rules(), y, &p).unwrap();
            let pi = stationary_distribution(&m).unwrap();
            assert!(pi[3] >= last - 1e-15);
            last = pi[3];
        }
    }

    #[test]
    fn mismatched_penalties() {
        let p = coarse_tariff();
        let rules = ScaleRules::new(4, vec![1, 2]).unwrap();
        assert!(build_transition_matrix(&rules, 0.1, &p).is_err());
        assert!(build_transition_matrix(&four_level_rules(), -1.0, &p).is_err());
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(y in 0.0f64..10.0, levels in 2usize..9, extra in 0usize..3) {
            let p = coarse_tariff();
            let rules = ScaleRules::new(levels, vec![1, 1 + extra, 2 + extra, 3 + extra]).unwrap();
            let m = build_transition_matrix(&rules, y, &p).unwrap();
            for i in 0..levels {
                let total: f64 = m.row(i).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(m.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn stationary_residual_small(y in 0.01f64..10.0, levels in 2usize..9) {
            let p = coarse_tariff();
            let rules = ScaleRules::new(levels, vec![1, 2, 3, 3]).unwrap();
            let m = build_transition_matrix(&rules, y, &p).unwrap();
            let pi = stationary_distribution(&m).unwrap();
            prop_assert!(stationarity_residual(&m, &pi) < 1e-10);
            prop_assert!(pi.iter().all(|&v| v >= 0.0));
            prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
