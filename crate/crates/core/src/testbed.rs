//! Benchmark problems with known solutions, plus quadrature and
//! finite-difference oracles for checking them.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Result};
use crate::linalg;
use crate::problem::{DesignPoint, FeasibleSet, ParameterSample, StochasticProblem};

/// Distribution of the random parameter, as far as quadrature needs to know it.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamMeasure {
    /// Uniform probability measure on a box.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Independent standard normal coordinates.
    StandardNormal { dim: usize },
}

/// Problems whose parameter distribution is known in closed form.
pub trait KnownMeasure: StochasticProblem {
    fn param_measure(&self) -> ParamMeasure;
}

/// Quadrature integration reaches `[-GAUSSIAN_TRUNCATION, GAUSSIAN_TRUNCATION]`
/// for normal coordinates (weights renormalized).
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;

/// `min_{u in [-1/2, 1/2]} 1/2 E[(u - x)^2]`, `x ~ U(-1/2, 1/2)`.
///
/// `J(u) = u^2/2 + 1/24`, `grad J(u) = u`, `u* = 0`, `L = 1`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem1D {
    set: FeasibleSet,
}

impl QuadraticProblem1D {
    pub fn new() -> Self {
        QuadraticProblem1D {
            set: FeasibleSet::cube(-0.5, 0.5, 1).expect("valid box"),
        }
    }
}

impl Default for QuadraticProblem1D {
    fn default() -> Self {
        Self::new()
    }
}

impl StochasticProblem for QuadraticProblem1D {
    fn dim_design(&self) -> usize {
        1
    }
    fn dim_param(&self) -> usize {
        1
    }
    fn sample_param(&self, rng: &mut dyn RngCore) -> ParameterSample {
        ParameterSample::new(vec![rng.random::<f64>() - 0.5])
    }
    fn integrand(&self, u: &[f64], x: &[f64]) -> f64 {
        let d = u[0] - x[0];
        0.5 * d * d
    }
    fn integrand_grad(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        vec![u[0] - x[0]]
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
    fn true_objective(&self, u: &[f64]) -> Option<f64> {
        Some(0.5 * u[0] * u[0] + 1.0 / 24.0)
    }
    fn true_gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        Some(vec![u[0]])
    }
    fn known_minimizer(&self) -> Option<DesignPoint> {
        Some(DesignPoint::new(vec![0.0]))
    }
    fn known_lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn name(&self) -> &str {
        "quadratic"
    }
}

impl KnownMeasure for QuadraticProblem1D {
    fn param_measure(&self) -> ParamMeasure {
        ParamMeasure::Uniform {
            lower: vec![-0.5],
            upper: vec![0.5],
        }
    }
}

/// `min_{u in [-10, 10]^5} E[-20 / (1 + ||u - x||^2)]`, `x ~ U((-1, 1)^5)`.
///
/// The minimizer is `u* = 0`. There is no closed form for `J`; the oracle
/// evaluates it by tensor Gauss-Legendre quadrature, which is expensive
/// (`nodes^5` integrand calls), so runs on this problem usually switch oracle
/// diagnostics off.
#[derive(Debug, Clone)]
pub struct BumpProblem5D {
    set: FeasibleSet,
    oracle_nodes: usize,
}

impl BumpProblem5D {
    pub const DIM: usize = 5;

    pub fn new() -> Self {
        BumpProblem5D {
            set: FeasibleSet::cube(-10.0, 10.0, Self::DIM).expect("valid box"),
            oracle_nodes: 12,
        }
    }

    /// Quadrature nodes per dimension used by `true_objective`/`true_gradient`.
    pub fn with_oracle_nodes(mut self, nodes: usize) -> Self {
        self.oracle_nodes = nodes.max(2);
        self
    }
}

impl Default for BumpProblem5D {
    fn default() -> Self {
        Self::new()
    }
}

impl StochasticProblem for BumpProblem5D {
    fn dim_design(&self) -> usize {
        Self::DIM
    }
    fn dim_param(&self) -> usize {
        Self::DIM
    }
    fn sample_param(&self, rng: &mut dyn RngCore) -> ParameterSample {
        ParameterSample::new((0..Self::DIM).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
    }
    fn integrand(&self, u: &[f64], x: &[f64]) -> f64 {
        let r2: f64 = u.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        -20.0 / (1.0 + r2)
    }
    fn integrand_grad(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        let r2: f64 = u.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let den = (1.0 + r2) * (1.0 + r2);
        u.iter().zip(x).map(|(a, b)| 40.0 * (a - b) / den).collect()
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
    fn true_objective(&self, u: &[f64]) -> Option<f64> {
        quadrature_oracle(self, &DesignPoint::new(u.to_vec()), self.oracle_nodes)
            .ok()
            .map(|(j, _)| j)
    }
    fn true_gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        quadrature_oracle(self, &DesignPoint::new(u.to_vec()), self.oracle_nodes)
            .ok()
            .map(|(_, g)| g)
    }
    fn known_minimizer(&self) -> Option<DesignPoint> {
        Some(DesignPoint::new(vec![0.0; Self::DIM]))
    }
    fn name(&self) -> &str {
        "bump5d"
    }
}

impl KnownMeasure for BumpProblem5D {
    fn param_measure(&self) -> ParamMeasure {
        ParamMeasure::Uniform {
            lower: vec![-1.0; Self::DIM],
            upper: vec![1.0; Self::DIM],
        }
    }
}

/// Rosenbrock function with multiplicative noise on `[-3, 3]^2`:
/// `j(u, x) = (1 + x) ((1 - u1)^2 + 100 (u2 - u1^2)^2)`, `x ~ N(0, 1)`.
///
/// Since `E[1 + x] = 1`, `J` is the deterministic Rosenbrock function with
/// its single stationary point `u* = (1, 1)`.
#[derive(Debug, Clone)]
pub struct NoisyRosenbrock {
    set: FeasibleSet,
}

impl NoisyRosenbrock {
    pub fn new() -> Self {
        NoisyRosenbrock {
            set: FeasibleSet::cube(-3.0, 3.0, 2).expect("valid box"),
        }
    }

    pub fn rosenbrock(u: &[f64]) -> f64 {
        let a = 1.0 - u[0];
        let b = u[1] - u[0] * u[0];
        a * a + 100.0 * b * b
    }

    pub fn rosenbrock_grad(u: &[f64]) -> Vec<f64> {
        let b = u[1] - u[0] * u[0];
        vec![-2.0 * (1.0 - u[0]) - 400.0 * u[0] * b, 200.0 * b]
    }
}

impl Default for NoisyRosenbrock {
    fn default() -> Self {
        Self::new()
    }
}

impl StochasticProblem for NoisyRosenbrock {
    fn dim_design(&self) -> usize {
        2
    }
    fn dim_param(&self) -> usize {
        1
    }
    fn sample_param(&self, rng: &mut dyn RngCore) -> ParameterSample {
        ParameterSample::new(vec![rng.sample(StandardNormal)])
    }
    fn integrand(&self, u: &[f64], x: &[f64]) -> f64 {
        (1.0 + x[0]) * Self::rosenbrock(u)
    }
    fn integrand_grad(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        let f = 1.0 + x[0];
        Self::rosenbrock_grad(u).into_iter().map(|g| f * g).collect()
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
    fn true_objective(&self, u: &[f64]) -> Option<f64> {
        Some(Self::rosenbrock(u))
    }
    fn true_gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        Some(Self::rosenbrock_grad(u))
    }
    fn known_minimizer(&self) -> Option<DesignPoint> {
        Some(DesignPoint::new(vec![1.0, 1.0]))
    }
    fn name(&self) -> &str {
        "rosenbrock"
    }
}

impl KnownMeasure for NoisyRosenbrock {
    fn param_measure(&self) -> ParamMeasure {
        ParamMeasure::StandardNormal { dim: 1 }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// (P_n(x), P_n'(x)) by the three-term recurrence
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `(J(u), grad J(u))` by tensor-product quadrature over the parameter
/// distribution: Gauss-Legendre for uniform coordinates, and for standard
/// normal coordinates Gauss-Legendre on the truncated interval `[-8, 8]`
/// weighted by the normal density and renormalized.
pub fn quadrature_oracle<P: KnownMeasure + ?Sized>(
    problem: &P,
    u: &DesignPoint,
    nodes_per_dim: usize,
) -> Result<(f64, Vec<f64>)> {
    if nodes_per_dim < 2 {
        return invalid("quadrature needs at least 2 nodes per dimension");
    }
    check_dim(problem.dim_design(), u.dim())?;
    let (gx, gw) = gauss_legendre(nodes_per_dim);
    // per-dimension nodes and probability weights
    let axes: Vec<(Vec<f64>, Vec<f64>)> = match problem.param_measure() {
        ParamMeasure::Uniform { lower, upper } => lower
            .iter()
            .zip(&upper)
            .map(|(l, h)| {
                let mid = 0.5 * (l + h);
                let half = 0.5 * (h - l);
                let xs = gx.iter().map(|t| mid + half * t).collect();
                let ws = gw.iter().map(|w| 0.5 * w).collect();
                (xs, ws)
            })
            .collect(),
        ParamMeasure::StandardNormal { dim } => {
            let xs: Vec<f64> = gx.iter().map(|t| GAUSSIAN_TRUNCATION * t).collect();
            let raw: Vec<f64> = xs
                .iter()
                .zip(&gw)
                .map(|(x, w)| w * (-0.5 * x * x).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            let ws: Vec<f64> = raw.iter().map(|w| w / total).collect();
            vec![(xs, ws); dim]
        }
    };
    check_dim(problem.dim_param(), axes.len())?;

    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut j = 0.0;
    let mut g = vec![0.0; u.dim()];
    loop {
        let mut w = 1.0;
        for k in 0..d {
            x[k] = axes[k].0[idx[k]];
            w *= axes[k].1[idx[k]];
        }
        j += w * problem.integrand(u.coords(), &x);
        for (acc, gi) in g.iter_mut().zip(problem.integrand_grad(u.coords(), &x)) {
            *acc += w * gi;
        }
        // odometer increment
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < nodes_per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return Ok((j, g));
            }
        }
    }
}

/// Largest componentwise discrepancy between `integrand_grad` and central
/// differences of `integrand` at `(u, x)`. Components whose analytic value is
/// below `1e-8` in magnitude are compared absolutely, the rest relatively.
pub fn finite_difference_check<P: StochasticProblem + ?Sized>(
    problem: &P,
    u: &DesignPoint,
    x: &ParameterSample,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return invalid("finite-difference step must be positive");
    }
    check_dim(problem.dim_design(), u.dim())?;
    check_dim(problem.dim_param(), x.dim())?;
    if let FeasibleSet::Box { lower, upper } = problem.feasible_set() {
        let margin_ok = u
            .coords()
            .iter()
            .zip(lower.iter().zip(upper))
            .all(|(c, (l, up))| c - l > h && up - c > h);
        if !margin_ok {
            return invalid("point is within h of the boundary");
        }
    } else if !problem.feasible_set().contains(u.coords(), -h) {
        return invalid("point is within h of the boundary");
    }
    let analytic = problem.integrand_grad(u.coords(), x.coords());
    let mut worst: f64 = 0.0;
    let mut probe = u.coords().to_vec();
    for k in 0..u.dim() {
        let c = probe[k];
        probe[k] = c + h;
        let fp = problem.integrand(&probe, x.coords());
        probe[k] = c - h;
        let fm = problem.integrand(&probe, x.coords());
        probe[k] = c;
        let fd = (fp - fm) / (2.0 * h);
        let a = analytic[k];
        let err = if a.abs() < 1e-8 {
            (fd - a).abs()
        } else {
            (fd - a).abs() / a.abs()
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Euclidean distance to the known minimizer, if there is one.
pub fn error_to_minimizer<P: StochasticProblem + ?Sized>(problem: &P, u: &[f64]) -> Option<f64> {
    problem
        .known_minimizer()
        .map(|m| linalg::dist(u, m.coords()))
}
