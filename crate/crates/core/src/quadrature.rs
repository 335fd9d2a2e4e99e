//! Fixed-order Gauss–Legendre rules on the unit interval.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                derivative = dp;
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            if dp != 0.0 {
                derivative = dp;
            }
            let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Grading exponent of the endpoint-clustering substitution.
pub const GRADING: i32 = 5;

/// A rule for `∫_0^1 h(u) du` that tolerates integrable endpoint singularities.
///
/// Gauss–Legendre in `t` composed with `u = t^p / (t^p + (1-t)^p)`, whose
/// derivative vanishes to order `p - 1` at both ends. Each node carries both
/// `u` and `1 - u`, computed separately so a quantile evaluated at the upper
/// tail keeps its precision.
#[derive(Debug, Clone)]
pub struct UnitIntervalRule {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitIntervalRule {
    pub fn new(order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let p = GRADING;
        let mut lower = Vec::with_capacity(order);
        let mut upper = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            let t = 0.5 * (1.0 + x);
            let tc = 0.5 * (1.0 - x);
            let a = t.powi(p);
            let b = tc.powi(p);
            let denom = a + b;
            let du = p as f64 * t.powi(p - 1) * tc.powi(p - 1) / (denom * denom);
            lower.push(a / denom);
            upper.push(b / denom);
            weights.push(0.5 * w * du);
        }
        Self {
            lower,
            upper,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
