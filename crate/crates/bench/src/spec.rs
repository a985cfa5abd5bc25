//! Declarative experiment descriptions.
//!
//! A spec starts from per-experiment defaults, then a JSON config file and
//! finally command-line flags override individual fields (see [`SpecOverrides`]).

use std::path::PathBuf;

use csgopt::linesearch::LineSearchConfig;
use serde::{Deserialize, Serialize};

use crate::output::Format;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// CSG vs SG with constant steps on the 1-D quadratic.
    ConstantSteps,
    /// bCSG vs AdaGrad over a (tau0, d) grid on the 5-D bump problem.
    StabilityGrid,
    /// AdaGrad, bCSG and SCIBL-CSG on the noisy Rosenbrock problem.
    Rosenbrock,
    /// One optimizer on one problem.
    SingleRun,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ConstantSteps => "constant-steps",
            ExperimentKind::StabilityGrid => "stability-grid",
            ExperimentKind::Rosenbrock => "rosenbrock",
            ExperimentKind::SingleRun => "single-run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Bump,
    Rosenbrock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Csg,
    Bcsg,
    Scibl,
    Sg,
    Adagrad,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Csg => "csg",
            OptimizerKind::Bcsg => "bcsg",
            OptimizerKind::Scibl => "scibl",
            OptimizerKind::Sg => "sg",
            OptimizerKind::Adagrad => "adagrad",
        }
    }
}

/// Line-search settings used by the experiments unless overridden.
pub fn default_line_search() -> LineSearchConfig {
    LineSearchConfig::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub replicates: usize,
    pub iters: usize,
    pub base_seed: u64,
    /// Constant step sizes (constant-steps; first entry for csg/sg in single-run).
    pub taus: Vec<f64>,
    pub tau0_grid: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
    pub problem: ProblemKind,
    pub line_search: LineSearchConfig,
    /// Constant initial trial step of bCSG outside the stability grid.
    pub bcsg_eta: f64,
    /// AdaGrad step `adagrad_tau0 / n^adagrad_d` outside the stability grid.
    pub adagrad_tau0: f64,
    pub adagrad_d: f64,
    pub adagrad_eps: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub output_path: PathBuf,
    pub format: Format,
}

/// `n` points spaced logarithmically in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

/// `n` points spaced linearly in `[lo, hi]`.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Parses `log:LO:HI:N`, `lin:LO:HI:N` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, BenchError> {
    let bad = || BenchError::Usage(format!("cannot parse grid '{s}' (use log:LO:HI:N, lin:LO:HI:N or a,b,c)"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [kind @ ("log" | "lin"), lo, hi, n] => {
            let lo: f64 = lo.parse().map_err(|_| bad())?;
            let hi: f64 = hi.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 || (*kind == "log" && (lo <= 0.0 || hi <= 0.0)) {
                return Err(bad());
            }
            if *kind == "log" {
                log_grid(lo, hi, n)
            } else {
                lin_grid(lo, hi, n)
            }
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

impl ExperimentSpec {
    /// Desk-scale defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let ext = "csv";
        let mut spec = ExperimentSpec {
            experiment: kind,
            replicates: 1,
            iters: 500,
            base_seed: 2022,
            taus: vec![0.01, 0.1, 1.0, 1.9, 1.99],
            tau0_grid: log_grid(1e-3, 1e1, 11),
            d_grid: lin_grid(0.0, 1.0, 11),
            optimizers: vec![],
            problem: ProblemKind::Quadratic,
            line_search: default_line_search(),
            bcsg_eta: 1.0 / 40.0,
            adagrad_tau0: 0.1,
            adagrad_d: 0.5,
            adagrad_eps: csgopt::optimizers::DEFAULT_ADAGRAD_EPS,
            c_min: 1e-8,
            c_max: 1e8,
            output_path: PathBuf::from(format!("csgopt-{}.{ext}", kind.as_str())),
            format: Format::Csv,
        };
        match kind {
            ExperimentKind::ConstantSteps => {
                spec.replicates = 200;
                spec.optimizers = vec![OptimizerKind::Csg, OptimizerKind::Sg];
            }
            ExperimentKind::StabilityGrid => {
                spec.replicates = 50;
                spec.problem = ProblemKind::Bump;
                spec.optimizers = vec![OptimizerKind::Bcsg, OptimizerKind::Adagrad];
            }
            ExperimentKind::Rosenbrock => {
                spec.replicates = 100;
                spec.iters = 2000;
                spec.problem = ProblemKind::Rosenbrock;
                spec.optimizers = vec![OptimizerKind::Adagrad, OptimizerKind::Bcsg, OptimizerKind::Scibl];
            }
            ExperimentKind::SingleRun => {
                spec.taus = vec![1.0];
                spec.optimizers = vec![OptimizerKind::Bcsg];
            }
        }
        spec
    }

    /// Replicate counts used in the original studies.
    pub fn full_scale(mut self) -> Self {
        match self.experiment {
            ExperimentKind::ConstantSteps => self.replicates = 2000,
            ExperimentKind::StabilityGrid => self.replicates = 1200,
            ExperimentKind::Rosenbrock => self.replicates = 5000,
            ExperimentKind::SingleRun => {}
        }
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::Usage(m.to_string()));
        if self.replicates < 1 {
            return fail("replicates must be at least 1");
        }
        if self.iters < 1 {
            return fail("iters must be at least 1");
        }
        if self.optimizers.is_empty() {
            return fail("no optimizer selected");
        }
        if self.taus.is_empty() || self.tau0_grid.is_empty() || self.d_grid.is_empty() {
            return fail("step grids must be nonempty");
        }
        if self.taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return fail("constant steps must be finite and >= 0");
        }
        if self.tau0_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return fail("tau0 grid values must be positive");
        }
        if self.d_grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return fail("d grid values must lie in [0, 1]");
        }
        self.line_search
            .validate()
            .map_err(|e| BenchError::Usage(e.to_string()))?;
        if !(self.bcsg_eta > 0.0 && self.adagrad_tau0 > 0.0 && (0.0..=1.0).contains(&self.adagrad_d)) {
            return fail("bcsg_eta and adagrad_tau0 must be positive, adagrad_d in [0, 1]");
        }
        if !(self.adagrad_eps > 0.0) {
            return fail("adagrad_eps must be positive");
        }
        if !(self.c_min > 0.0 && self.c_min < self.c_max && self.c_max.is_finite()) {
            return fail("need 0 < c_min < c_max");
        }
        let allowed: &[OptimizerKind] = match self.experiment {
            ExperimentKind::ConstantSteps => &[OptimizerKind::Csg, OptimizerKind::Sg],
            ExperimentKind::StabilityGrid => &[OptimizerKind::Bcsg, OptimizerKind::Adagrad],
            ExperimentKind::Rosenbrock => &[OptimizerKind::Adagrad, OptimizerKind::Bcsg, OptimizerKind::Scibl],
            ExperimentKind::SingleRun => &[
                OptimizerKind::Csg,
                OptimizerKind::Bcsg,
                OptimizerKind::Scibl,
                OptimizerKind::Sg,
                OptimizerKind::Adagrad,
            ],
        };
        if let Some(o) = self.optimizers.iter().find(|o| !allowed.contains(o)) {
            return Err(BenchError::Usage(format!(
                "optimizer '{}' is not part of the {} experiment",
                o.as_str(),
                self.experiment.as_str()
            )));
        }
        Ok(())
    }
}

/// Partial spec: every field optional. Used for config files and CLI flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecOverrides {
    pub experiment: Option<ExperimentKind>,
    pub replicates: Option<usize>,
    pub iters: Option<usize>,
    pub base_seed: Option<u64>,
    pub taus: Option<Vec<f64>>,
    pub tau0_grid: Option<Vec<f64>>,
    pub d_grid: Option<Vec<f64>>,
    pub optimizers: Option<Vec<OptimizerKind>>,
    pub problem: Option<ProblemKind>,
    pub line_search: Option<LineSearchConfig>,
    pub bcsg_eta: Option<f64>,
    pub adagrad_tau0: Option<f64>,
    pub adagrad_d: Option<f64>,
    pub adagrad_eps: Option<f64>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub output_path: Option<PathBuf>,
    pub format: Option<Format>,
    pub full_scale: Option<bool>,
}

impl SpecOverrides {
    /// Fields set in `other` win.
    pub fn merged(self, other: SpecOverrides) -> SpecOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { SpecOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            experiment, replicates, iters, base_seed, taus, tau0_grid, d_grid, optimizers, problem,
            line_search, bcsg_eta, adagrad_tau0, adagrad_d, adagrad_eps, c_min, c_max, output_path,
            format, full_scale
        )
    }

    /// Resolves against the defaults of the chosen experiment. Replicate
    /// scaling from `full_scale` applies before an explicit replicate count.
    pub fn resolve(self) -> Result<ExperimentSpec, BenchError> {
        let kind = self
            .experiment
            .ok_or_else(|| BenchError::Usage("no experiment given".into()))?;
        let mut spec = ExperimentSpec::defaults(kind);
        if self.full_scale.unwrap_or(false) {
            spec = spec.full_scale();
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { spec.$f = v; } )* };
        }
        set!(
            replicates, iters, base_seed, taus, tau0_grid, d_grid, optimizers, problem, line_search,
            bcsg_eta, adagrad_tau0, adagrad_d, adagrad_eps, c_min, c_max, format
        );
        match self.output_path {
            Some(p) => spec.output_path = p,
            None if spec.format == Format::Json => {
                spec.output_path.set_extension("json");
            }
            None => {}
        }
        spec.validate()?;
        Ok(spec)
    }
}
