//! Step-size rules: Armijo/Wolfe-type conditions on the CSG estimates, the
//! bisection backtracking refinement, step schedules and the clamped Lipschitz
//! quotient used to start the scaling-independent line search.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, CsgError, Result};
use crate::history::{AggregateEstimate, SampleHistory};
use crate::linalg;
use crate::problem::{project, DesignPoint, FeasibleSet};

/// Tolerance for deciding that the projection in a trial step was inactive.
pub const INACTIVE_PROJECTION_TOL: f64 = 1e-12;

/// Displacements below this reuse the previous Lipschitz estimate.
pub const MIN_DISPLACEMENT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// Maximum number of trial steps (`T`).
    pub max_trials: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant, `c1 < c2 < 1`.
    pub c2: f64,
    /// Non-monotone memory `K`: the decrease test compares against the largest
    /// of the last `K + 1` objective estimates.
    pub memory: usize,
}

impl LineSearchConfig {
    pub fn new(max_trials: usize, c1: f64, c2: f64, memory: usize) -> Result<Self> {
        let cfg = LineSearchConfig {
            max_trials,
            c1,
            c2,
            memory,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_trials < 1 {
            return invalid("line search needs at least one trial (T >= 1)");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return invalid(format!(
                "line search constants must satisfy 0 < c1 < c2 < 1 (got c1={}, c2={})",
                self.c1, self.c2
            ));
        }
        Ok(())
    }

    /// Step returned when every trial fails the decrease test: `eta0 * 2^-T`.
    pub fn fallback_step(&self, eta0: f64) -> f64 {
        // halving is exact, so repeated halving and one power-of-two scale agree
        let mut eta = eta0;
        for _ in 0..self.max_trials {
            eta *= 0.5;
        }
        eta
    }
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            max_trials: 8,
            c1: 1e-4,
            c2: 0.9,
            memory: 10,
        }
    }
}

/// Step-size schedule `eta_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `eta_n = tau`. A zero step freezes the iterate.
    Constant { tau: f64 },
    /// `eta_n = tau0 / n^d`
    PowerDecay { tau0: f64, d: f64 },
}

impl StepSchedule {
    pub fn constant(tau: f64) -> Result<Self> {
        let s = StepSchedule::Constant { tau };
        s.validate()?;
        Ok(s)
    }

    pub fn power_decay(tau0: f64, d: f64) -> Result<Self> {
        let s = StepSchedule::PowerDecay { tau0, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant { tau } if tau.is_finite() && tau >= 0.0 => Ok(()),
            StepSchedule::Constant { tau } => invalid(format!("constant step must be >= 0, got {tau}")),
            StepSchedule::PowerDecay { tau0, d } => {
                if !(tau0.is_finite() && tau0 > 0.0) {
                    invalid(format!("tau0 must be positive, got {tau0}"))
                } else if !(0.0..=1.0).contains(&d) {
                    invalid(format!("decay exponent must lie in [0, 1], got {d}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Step for iteration `n >= 1`.
    pub fn value(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return invalid("schedules are indexed from n = 1");
        }
        Ok(match *self {
            StepSchedule::Constant { tau } => tau,
            StepSchedule::PowerDecay { tau0, d } => {
                if d == 0.0 {
                    tau0
                } else {
                    tau0 / (n as f64).powf(d)
                }
            }
        })
    }
}

/// Non-monotone sufficient decrease:
/// `j_trial <= max(memory) - c1 * g_hat . (u - s)`.
///
/// `memory` holds the most recent objective estimates, newest first. With a
/// single entry this is the plain Armijo condition.
pub fn check_sw1_star(
    j_trial: f64,
    memory: &[f64],
    g_hat: &[f64],
    u: &DesignPoint,
    s: &DesignPoint,
    c1: f64,
) -> Result<bool> {
    if memory.is_empty() {
        return invalid("sufficient-decrease memory is empty");
    }
    check_dim(u.dim(), s.dim())?;
    check_dim(u.dim(), g_hat.len())?;
    let reference = memory.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let decrease = linalg::dot(g_hat, &linalg::sub(u.coords(), s.coords()));
    Ok(j_trial <= reference - c1 * decrease)
}

/// Curvature condition: `g_trial . (s - u) >= c2 * g_hat . (s - u)`.
pub fn check_sw2(
    g_trial: &[f64],
    g_hat: &[f64],
    u: &DesignPoint,
    s: &DesignPoint,
    c2: f64,
) -> Result<bool> {
    check_dim(u.dim(), s.dim())?;
    check_dim(u.dim(), g_hat.len())?;
    check_dim(u.dim(), g_trial.len())?;
    let d = linalg::sub(s.coords(), u.coords());
    Ok(linalg::dot(g_trial, &d) >= c2 * linalg::dot(g_hat, &d))
}

/// Anything that can produce objective/gradient estimates at trial points.
pub trait TrialEstimator {
    fn estimate_at(&self, s: &DesignPoint) -> Result<AggregateEstimate>;
}

impl TrialEstimator for SampleHistory {
    fn estimate_at(&self, s: &DesignPoint) -> Result<AggregateEstimate> {
        SampleHistory::estimate_at(self, s)
    }
}

/// Bisection bracket at the moment a trial step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionState {
    pub a: f64,
    pub b: f64,
    /// Last step that passed the decrease test but failed the curvature test.
    pub eta_a: f64,
    pub eta: f64,
    /// 1-based trial counter.
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub tau: f64,
    /// Number of trial steps evaluated, at most `T`.
    pub refinements: usize,
}

/// Bisection line search with doubling on the CSG estimates.
///
/// Each trial evaluates `s = P_U(u - eta g_hat)` and the estimates at `s`.
/// A failed decrease test shrinks the bracket from above; when the step stayed
/// inside `U` and the curvature test fails, the bracket grows from below. The
/// first step passing both (or passing the decrease test with an active
/// projection) is accepted. After `T` trials the last step that passed the
/// decrease test is returned if there is one, otherwise the final bisected step
/// `eta0 * 2^-T`.
pub fn backtracking_refine<E: TrialEstimator + ?Sized>(
    est: &E,
    u: &DesignPoint,
    g_hat: &[f64],
    memory: &[f64],
    eta0: f64,
    cfg: &LineSearchConfig,
    set: &FeasibleSet,
) -> Result<LineSearchOutcome> {
    backtracking_refine_observed(est, u, g_hat, memory, eta0, cfg, set, |_| {})
}

/// [`backtracking_refine`] with a callback receiving the bracket before each trial.
#[allow(clippy::too_many_arguments)]
pub fn backtracking_refine_observed<E, F>(
    est: &E,
    u: &DesignPoint,
    g_hat: &[f64],
    memory: &[f64],
    eta0: f64,
    cfg: &LineSearchConfig,
    set: &FeasibleSet,
    mut observe: F,
) -> Result<LineSearchOutcome>
where
    E: TrialEstimator + ?Sized,
    F: FnMut(&BisectionState),
{
    if !(eta0.is_finite() && eta0 > 0.0) {
        return invalid(format!("initial trial step must be positive, got {eta0}"));
    }
    if !linalg::all_finite(g_hat) {
        return invalid("search direction is not finite");
    }
    cfg.validate()?;
    check_dim(u.dim(), g_hat.len())?;

    let mut st = BisectionState {
        a: 0.0,
        b: f64::INFINITY,
        eta_a: f64::INFINITY,
        eta: eta0,
        t: 1,
    };
    while st.t <= cfg.max_trials {
        observe(&st);
        let raw = linalg::step(u.coords(), st.eta, g_hat);
        let s = project(set, &raw)?;
        let trial = est.estimate_at(&s)?;
        if !trial.j_hat.is_finite() || !linalg::all_finite(&trial.g_hat) {
            return Err(CsgError::Evaluation {
                iteration: st.t,
                what: format!("non-finite estimate at trial step {}", st.eta),
            });
        }
        let inactive = linalg::dist(s.coords(), &raw) <= INACTIVE_PROJECTION_TOL;
        if !check_sw1_star(trial.j_hat, memory, g_hat, u, &s, cfg.c1)? {
            st.b = st.eta;
        } else if inactive && !check_sw2(&trial.g_hat, g_hat, u, &s, cfg.c2)? {
            st.a = st.eta;
            st.eta_a = st.eta;
        } else {
            return Ok(LineSearchOutcome {
                tau: st.eta,
                refinements: st.t,
            });
        }
        st.eta = if st.b < f64::INFINITY {
            (st.a + st.b) / 2.0
        } else {
            2.0 * st.a
        };
        st.t += 1;
    }
    let tau = if st.eta_a < f64::INFINITY { st.eta_a } else { st.eta };
    Ok(LineSearchOutcome {
        tau,
        refinements: cfg.max_trials,
    })
}

/// Clamped difference quotient `||G_n - G_{n-1}|| / ||u_n - u_{n-1}||`,
/// projected onto `[c_min, c_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimator {
    c_min: f64,
    c_max: f64,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    current: f64,
}

impl LipschitzEstimator {
    pub fn new(c_min: f64, c_max: f64) -> Result<Self> {
        if !(c_min > 0.0 && c_min < c_max && c_max.is_finite()) {
            return invalid(format!(
                "Lipschitz bounds must satisfy 0 < c_min < c_max (got {c_min}, {c_max})"
            ));
        }
        Ok(LipschitzEstimator {
            c_min,
            c_max,
            prev: None,
            current: c_max,
        })
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.c_min, self.c_max)
    }

    /// Feeds the newest iterate and gradient estimate and returns the updated
    /// constant. The first call has nothing to compare against and returns
    /// `c_max`.
    pub fn update(&mut self, u_new: &DesignPoint, g_new: &[f64]) -> Result<f64> {
        check_dim(u_new.dim(), g_new.len())?;
        if !linalg::all_finite(u_new.coords()) || !linalg::all_finite(g_new) {
            return invalid("Lipschitz update received non-finite input");
        }
        if let Some((pu, pg)) = &self.prev {
            check_dim(pu.len(), u_new.dim())?;
            let du = linalg::dist(u_new.coords(), pu);
            if du >= MIN_DISPLACEMENT {
                let q = linalg::dist(g_new, pg) / du;
                self.current = q.max(self.c_min).min(self.c_max);
            }
        } else {
            self.current = self.c_max;
        }
        self.prev = Some((u_new.coords().to_vec(), g_new.to_vec()));
        Ok(self.current)
    }
}
