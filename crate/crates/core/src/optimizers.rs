//! Optimizer engines and the shared run loop.
//!
//! All CSG variants follow the same iteration: draw `x_n`, sample `j(u_n, x_n)`
//! and its gradient, append them to the history, form the empirical-weight
//! estimates `J_n`, `G_n` at `u_n`, choose a step `tau_n` and move to
//! `P_U(u_n - tau_n G_n)`. They differ only in how `tau_n` is chosen.

use std::collections::VecDeque;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CsgError, Result};
use crate::history::{SampleHistory, SampleRecord};
use crate::linalg;
use crate::linesearch::{
    backtracking_refine, check_sw1_star, LineSearchConfig, LipschitzEstimator, StepSchedule,
};
use crate::problem::{project, stationarity_residual, validate_start, DesignPoint, StochasticProblem};
use crate::rng::{self, Purpose};

pub const DEFAULT_ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OptimizerSpec {
    /// CSG with a constant step.
    CsgConstant { tau: f64 },
    /// CSG with the backtracking line search started at `eta_n` from `schedule`.
    CsgBacktracking {
        schedule: StepSchedule,
        line: LineSearchConfig,
    },
    /// CSG with the backtracking line search started at `1 / C_n`.
    Scibl {
        c_min: f64,
        c_max: f64,
        line: LineSearchConfig,
    },
    /// Projected stochastic gradient.
    Sg { schedule: StepSchedule },
    /// Diagonal AdaGrad.
    AdaGrad { schedule: StepSchedule, eps: f64 },
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerSpec::CsgConstant { tau } => {
                if tau.is_finite() && *tau >= 0.0 {
                    Ok(())
                } else {
                    invalid(format!("constant step must be >= 0, got {tau}"))
                }
            }
            OptimizerSpec::CsgBacktracking { schedule, line } => {
                schedule.validate()?;
                if let StepSchedule::Constant { tau } = schedule {
                    if *tau <= 0.0 {
                        return invalid("line search needs a positive initial step");
                    }
                }
                line.validate()
            }
            OptimizerSpec::Scibl { c_min, c_max, line } => {
                LipschitzEstimator::new(*c_min, *c_max)?;
                line.validate()
            }
            OptimizerSpec::Sg { schedule } => schedule.validate(),
            OptimizerSpec::AdaGrad { schedule, eps } => {
                if !(eps.is_finite() && *eps > 0.0) {
                    return invalid("AdaGrad eps must be positive");
                }
                schedule.validate()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::CsgConstant { .. } => "csg",
            OptimizerSpec::CsgBacktracking { .. } => "bcsg",
            OptimizerSpec::Scibl { .. } => "scibl",
            OptimizerSpec::Sg { .. } => "sg",
            OptimizerSpec::AdaGrad { .. } => "adagrad",
        }
    }

    pub fn line_config(&self) -> Option<&LineSearchConfig> {
        match self {
            OptimizerSpec::CsgBacktracking { line, .. } | OptimizerSpec::Scibl { line, .. } => Some(line),
            _ => None,
        }
    }

    pub fn run<P: StochasticProblem + ?Sized>(
        &self,
        problem: &P,
        cfg: &RunConfig,
        u0: &DesignPoint,
    ) -> Result<IterateTrace> {
        run(problem, self, cfg, u0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_iters: usize,
    pub seed: u64,
    /// Stream index within `seed` for the parameter samples (e.g. the replicate).
    pub stream: u64,
    /// Stop once `||P_U(u_n - G_n) - u_n||` falls to this value.
    pub stop_residual: Option<f64>,
    pub trace_every: usize,
    /// Record errors against the problem's exact objective/gradient when available.
    pub oracle_diagnostics: bool,
    /// Re-evaluate the decrease test at every accepted line-search step.
    pub audit_line_search: bool,
}

impl RunConfig {
    pub fn new(max_iters: usize) -> Self {
        RunConfig {
            max_iters,
            seed: 0,
            stream: 0,
            stop_residual: None,
            trace_every: 1,
            oracle_diagnostics: true,
            audit_line_search: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_stop_residual(mut self, r: f64) -> Self {
        self.stop_residual = Some(r);
        self
    }

    pub fn with_trace_every(mut self, k: usize) -> Self {
        self.trace_every = k;
        self
    }

    pub fn with_oracle_diagnostics(mut self, on: bool) -> Self {
        self.oracle_diagnostics = on;
        self
    }

    pub fn with_line_search_audit(mut self, on: bool) -> Self {
        self.audit_line_search = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return invalid("max_iters must be at least 1");
        }
        if self.trace_every < 1 {
            return invalid("trace_every must be at least 1");
        }
        if let Some(r) = self.stop_residual {
            if !(r >= 0.0) {
                return invalid("stop_residual must be nonnegative");
            }
        }
        Ok(())
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    /// Iterate at which the samples of iteration `n` were drawn.
    pub u: Vec<f64>,
    pub tau: f64,
    /// Initial trial step of the line search.
    pub eta0: Option<f64>,
    /// Objective estimate (the single sample for SG and AdaGrad).
    pub j_hat: f64,
    pub g_hat_norm: f64,
    /// `||P_U(u_n - G_n) - u_n||`
    pub residual: f64,
    pub refinements: usize,
    pub error_to_minimizer: Option<f64>,
    pub j_error: Option<f64>,
    pub g_error: Option<f64>,
    /// `||P_U(u_n - grad J(u_n)) - u_n||` with the exact gradient.
    pub true_residual: Option<f64>,
    /// Outcome of re-checking the decrease test at the accepted step.
    pub sw1_recheck: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateTrace {
    pub optimizer: String,
    pub start: DesignPoint,
    pub rows: Vec<TraceRow>,
    pub final_point: DesignPoint,
    pub iterations: usize,
    pub total_refinements: usize,
    pub history_len: usize,
    pub final_error: Option<f64>,
}

impl IterateTrace {
    /// Distance to the minimizer after `0, 1, ..., iterations` steps. Only
    /// meaningful when every iteration was traced.
    pub fn error_path(&self) -> Option<Vec<f64>> {
        let mut out: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.error_to_minimizer)
            .collect::<Option<_>>()?;
        out.push(self.final_error?);
        Some(out)
    }
}

/// `true` once the budget is spent or the residual threshold is met.
pub fn stop_check(n: usize, residual: f64, cfg: &RunConfig) -> bool {
    n >= cfg.max_iters || cfg.stop_residual.is_some_and(|r| residual <= r)
}

pub fn run_csg_constant<P: StochasticProblem + ?Sized>(
    problem: &P,
    tau: f64,
    cfg: &RunConfig,
    u0: &DesignPoint,
) -> Result<IterateTrace> {
    run(problem, &OptimizerSpec::CsgConstant { tau }, cfg, u0)
}

pub fn run_bcsg<P: StochasticProblem + ?Sized>(
    problem: &P,
    schedule: StepSchedule,
    line: LineSearchConfig,
    cfg: &RunConfig,
    u0: &DesignPoint,
) -> Result<IterateTrace> {
    run(problem, &OptimizerSpec::CsgBacktracking { schedule, line }, cfg, u0)
}

pub fn run_scibl<P: StochasticProblem + ?Sized>(
    problem: &P,
    c_min: f64,
    c_max: f64,
    line: LineSearchConfig,
    cfg: &RunConfig,
    u0: &DesignPoint,
) -> Result<IterateTrace> {
    run(problem, &OptimizerSpec::Scibl { c_min, c_max, line }, cfg, u0)
}

pub fn run_sg<P: StochasticProblem + ?Sized>(
    problem: &P,
    schedule: StepSchedule,
    cfg: &RunConfig,
    u0: &DesignPoint,
) -> Result<IterateTrace> {
    run(problem, &OptimizerSpec::Sg { schedule }, cfg, u0)
}

pub fn run_adagrad<P: StochasticProblem + ?Sized>(
    problem: &P,
    schedule: StepSchedule,
    eps: f64,
    cfg: &RunConfig,
    u0: &DesignPoint,
) -> Result<IterateTrace> {
    run(problem, &OptimizerSpec::AdaGrad { schedule, eps }, cfg, u0)
}

enum StepState {
    Constant(f64),
    Backtracking(StepSchedule, LineSearchConfig),
    Scibl(LipschitzEstimator, LineSearchConfig),
    Sg(StepSchedule),
    AdaGrad(StepSchedule, f64, Vec<f64>),
}

fn non_finite(iteration: usize, what: &str) -> CsgError {
    CsgError::Evaluation {
        iteration,
        what: what.to_string(),
    }
}

/// Runs `spec` on `problem` from `u0`.
pub fn run<P: StochasticProblem + ?Sized>(
    problem: &P,
    spec: &OptimizerSpec,
    cfg: &RunConfig,
    u0: &DesignPoint,
) -> Result<IterateTrace> {
    spec.validate()?;
    cfg.validate()?;
    validate_start(problem, u0)?;
    let set = problem.feasible_set();
    let d = problem.dim_design();

    let mut state = match *spec {
        OptimizerSpec::CsgConstant { tau } => {
            if let Some(l) = problem.known_lipschitz() {
                if tau >= 2.0 / l {
                    warn!("constant step {tau} is not below 2/L = {}", 2.0 / l);
                }
            }
            StepState::Constant(tau)
        }
        OptimizerSpec::CsgBacktracking { schedule, line } => StepState::Backtracking(schedule, line),
        OptimizerSpec::Scibl { c_min, c_max, line } => {
            StepState::Scibl(LipschitzEstimator::new(c_min, c_max)?, line)
        }
        OptimizerSpec::Sg { schedule } => StepState::Sg(schedule),
        OptimizerSpec::AdaGrad { schedule, eps } => StepState::AdaGrad(schedule, eps, vec![0.0; d]),
    };
    let uses_history = matches!(
        state,
        StepState::Constant(_) | StepState::Backtracking(..) | StepState::Scibl(..)
    );

    let mut sampler = rng::stream(cfg.seed, cfg.stream, Purpose::Samples);
    let mut history = SampleHistory::with_capacity(
        d,
        problem.dim_param(),
        if uses_history { cfg.max_iters } else { 0 },
    );
    let memory_len = spec.line_config().map_or(1, |l| l.memory + 1);
    let mut memory: VecDeque<f64> = VecDeque::with_capacity(memory_len);

    let mut u = u0.clone();
    let mut rows = Vec::with_capacity(cfg.max_iters / cfg.trace_every + 2);
    let mut total_refinements = 0usize;
    let mut n = 0usize;
    loop {
        n += 1;
        let x = problem.sample_param(&mut sampler);
        let j = problem.integrand(u.coords(), x.coords());
        let g = problem.integrand_grad(u.coords(), x.coords());
        if !j.is_finite() {
            return Err(non_finite(n, "objective sample"));
        }
        if g.len() != d || !linalg::all_finite(&g) {
            return Err(non_finite(n, "gradient sample"));
        }

        let (j_hat, g_hat) = if uses_history {
            history.push(SampleRecord {
                u: u.clone(),
                x,
                j,
                g,
            })?;
            let w = history.empirical_weights(&u)?;
            let est = history.aggregate(&w)?;
            (est.j_hat, est.g_hat)
        } else {
            (j, g)
        };

        if memory.len() == memory_len {
            memory.pop_back();
        }
        memory.push_front(j_hat);
        let mem = memory.make_contiguous();

        let mut eta0 = None;
        let mut refinements = 0;
        let mut sw1_recheck = None;
        let next = match &mut state {
            StepState::Constant(tau) => {
                let tau = *tau;
                (tau, project(set, &linalg::step(u.coords(), tau, &g_hat))?)
            }
            StepState::Backtracking(schedule, line) => {
                let e0 = schedule.value(n)?;
                eta0 = Some(e0);
                let out = backtracking_refine(&history, &u, &g_hat, mem, e0, line, set)?;
                refinements = out.refinements;
                let s = project(set, &linalg::step(u.coords(), out.tau, &g_hat))?;
                if cfg.audit_line_search {
                    let est = history.estimate_at(&s)?;
                    sw1_recheck = Some(check_sw1_star(est.j_hat, mem, &g_hat, &u, &s, line.c1)?);
                }
                (out.tau, s)
            }
            StepState::Scibl(lip, line) => {
                let c = lip.update(&u, &g_hat)?;
                let e0 = 1.0 / c;
                eta0 = Some(e0);
                let out = backtracking_refine(&history, &u, &g_hat, mem, e0, line, set)?;
                refinements = out.refinements;
                let s = project(set, &linalg::step(u.coords(), out.tau, &g_hat))?;
                if cfg.audit_line_search {
                    let est = history.estimate_at(&s)?;
                    sw1_recheck = Some(check_sw1_star(est.j_hat, mem, &g_hat, &u, &s, line.c1)?);
                }
                (out.tau, s)
            }
            StepState::Sg(schedule) => {
                let tau = schedule.value(n)?;
                (tau, project(set, &linalg::step(u.coords(), tau, &g_hat))?)
            }
            StepState::AdaGrad(schedule, eps, acc) => {
                let tau = schedule.value(n)?;
                for (v, gi) in acc.iter_mut().zip(&g_hat) {
                    *v += gi * gi;
                }
                let raw: Vec<f64> = u
                    .coords()
                    .iter()
                    .zip(&g_hat)
                    .zip(acc.iter())
                    .map(|((ui, gi), v)| ui - tau * gi / (v.sqrt() + *eps))
                    .collect();
                (tau, project(set, &raw)?)
            }
        };
        total_refinements += refinements;

        let residual = stationarity_residual(set, &u, &g_hat, 1.0)?;
        let last = stop_check(n, residual, cfg);
        if n.is_multiple_of(cfg.trace_every) || n == 1 || last {
            let (mut j_error, mut g_error, mut true_residual) = (None, None, None);
            if cfg.oracle_diagnostics {
                if let Some(jt) = problem.true_objective(u.coords()) {
                    j_error = Some((j_hat - jt).abs());
                }
                if let Some(gt) = problem.true_gradient(u.coords()) {
                    g_error = Some(linalg::dist(&g_hat, &gt));
                    true_residual = Some(stationarity_residual(set, &u, &gt, 1.0)?);
                }
            }
            rows.push(TraceRow {
                n,
                u: u.coords().to_vec(),
                tau: next.0,
                eta0,
                j_hat,
                g_hat_norm: linalg::norm(&g_hat),
                residual,
                refinements,
                error_to_minimizer: crate::testbed::error_to_minimizer(problem, u.coords()),
                j_error,
                g_error,
                true_residual,
                sw1_recheck,
            });
        }
        u = next.1;
        if last {
            break;
        }
    }

    Ok(IterateTrace {
        optimizer: spec.name().to_string(),
        start: u0.clone(),
        rows,
        final_error: crate::testbed::error_to_minimizer(problem, u.coords()),
        final_point: u,
        iterations: n,
        total_refinements,
        history_len: history.len(),
    })
}
