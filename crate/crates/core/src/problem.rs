//! Problem abstraction: design points, parameter samples, feasible sets and the
//! stochastic integrand `j(u, x)` whose expectation over `x ~ mu` is minimized.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, CsgError, Result};
use crate::linalg;

/// A point of the admissible design set `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint(Vec<f64>);

impl DesignPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        DesignPoint(coords)
    }

    /// Validating constructor: checks the dimension and that every coordinate is finite.
    pub fn checked(coords: Vec<f64>, dim: usize) -> Result<Self> {
        check_dim(dim, coords.len())?;
        if !linalg::all_finite(&coords) {
            return invalid("design point has non-finite coordinates");
        }
        Ok(DesignPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &DesignPoint) -> f64 {
        linalg::dist(&self.0, &other.0)
    }
}

/// A realization `x` of the random parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSample(Vec<f64>);

impl ParameterSample {
    pub fn new(coords: Vec<f64>) -> Self {
        ParameterSample(coords)
    }

    pub fn checked(coords: Vec<f64>, dim: usize) -> Result<Self> {
        check_dim(dim, coords.len())?;
        if !linalg::all_finite(&coords) {
            return invalid("parameter sample has non-finite coordinates");
        }
        Ok(ParameterSample(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Compact convex feasible set with a closed-form Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return invalid("box must have at least one dimension");
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return invalid(format!("box bounds must satisfy lower < upper (coordinate {i})"));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return invalid("ball must have at least one dimension");
        }
        if !linalg::all_finite(&center) {
            return invalid("ball center must be finite");
        }
        if !(radius.is_finite() && radius > 0.0) {
            return invalid("ball radius must be positive");
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
        }
    }

    /// Membership with an absolute slack on each constraint.
    pub fn contains(&self, v: &[f64], slack: f64) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, u))| *x >= l - slack && *x <= u + slack),
            FeasibleSet::Ball { center, radius } => linalg::dist(v, center) <= radius + slack,
        }
    }

    /// Draws a point uniformly from the set.
    pub fn sample_uniform(&self, rng: &mut dyn RngCore) -> DesignPoint {
        use rand::Rng;
        match self {
            FeasibleSet::Box { lower, upper } => DesignPoint(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                    .collect(),
            ),
            FeasibleSet::Ball { center, radius } => loop {
                // rejection from the bounding cube
                let v: Vec<f64> = center
                    .iter()
                    .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                if linalg::dist(&v, center) <= *radius {
                    break DesignPoint(v);
                }
            },
        }
    }
}

/// Orthogonal (Euclidean) projection onto `set`.
pub fn project(set: &FeasibleSet, v: &[f64]) -> Result<DesignPoint> {
    check_dim(set.dim(), v.len())?;
    if !linalg::all_finite(v) {
        return invalid("cannot project a non-finite vector");
    }
    let p = match set {
        FeasibleSet::Box { lower, upper } => v
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(x, (l, u))| x.clamp(*l, *u))
            .collect(),
        FeasibleSet::Ball { center, radius } => {
            let r = linalg::dist(v, center);
            if r <= *radius {
                v.to_vec()
            } else {
                let scale = radius / r;
                v.iter()
                    .zip(center)
                    .map(|(x, c)| c + (x - c) * scale)
                    .collect()
            }
        }
    };
    Ok(DesignPoint(p))
}

/// `||P_U(u - t g) - u||`: zero exactly when `u` is a fixed point of the
/// projected-gradient map for direction `g` and step `t`.
pub fn stationarity_residual(set: &FeasibleSet, u: &DesignPoint, g: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("residual step t must be positive, got {t}"));
    }
    check_dim(u.dim(), g.len())?;
    let p = project(set, &linalg::step(u.coords(), t, g))?;
    Ok(p.distance(u))
}

/// A stochastic optimization problem `min_{u in U} E_{x ~ mu}[ j(u, x) ]`.
///
/// Evaluations must be deterministic in `(u, x)`; all randomness comes from the
/// caller-supplied RNG passed to [`StochasticProblem::sample_param`].
pub trait StochasticProblem: Sync {
    fn dim_design(&self) -> usize;
    fn dim_param(&self) -> usize;
    fn sample_param(&self, rng: &mut dyn RngCore) -> ParameterSample;
    /// `j(u, x)`
    fn integrand(&self, u: &[f64], x: &[f64]) -> f64;
    /// `grad_u j(u, x)`
    fn integrand_grad(&self, u: &[f64], x: &[f64]) -> Vec<f64>;
    fn feasible_set(&self) -> &FeasibleSet;

    /// Exact `J(u)`, when known.
    fn true_objective(&self, _u: &[f64]) -> Option<f64> {
        None
    }
    /// Exact `grad J(u)`, when known.
    fn true_gradient(&self, _u: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn known_minimizer(&self) -> Option<DesignPoint> {
        None
    }
    fn known_lipschitz(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &str {
        "problem"
    }
}

/// Checks that `u` is a valid, feasible design point for `problem`.
pub fn validate_start<P: StochasticProblem + ?Sized>(problem: &P, u: &DesignPoint) -> Result<()> {
    check_dim(problem.dim_design(), u.dim())?;
    if !linalg::all_finite(u.coords()) {
        return invalid("start point has non-finite coordinates");
    }
    if !problem.feasible_set().contains(u.coords(), 1e-12) {
        return Err(CsgError::InvalidInput(format!(
            "start point {:?} lies outside the feasible set",
            u.coords()
        )));
    }
    Ok(())
}
