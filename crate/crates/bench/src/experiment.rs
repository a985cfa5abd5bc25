//! Replicate orchestration.
//!
//! Every (series, replicate) pair is an independent job. Replicate `r` draws its
//! start point from stream `r` of the base seed and its samples from the
//! matching optimizer stream, so all series see the same starts and sample
//! sequences. Jobs run on a rayon pool and are collected in job order, which
//! keeps the output independent of the thread count.

use std::fmt::Write as _;

use rayon::prelude::*;

use csgopt::linesearch::StepSchedule;
use csgopt::optimizers::{OptimizerSpec, RunConfig};
use csgopt::problem::StochasticProblem;
use csgopt::rng::{self, Purpose};
use csgopt::testbed::{BumpProblem5D, NoisyRosenbrock, QuadraticProblem1D};

use crate::output::{ExperimentReport, Series};
use crate::quantile::quantile_aggregate;
use crate::spec::{ExperimentKind, ExperimentSpec, OptimizerKind, ProblemKind};
use crate::BenchError;

pub const THREADS_ENV: &str = "CSGOPT_THREADS";

/// Worker count: `CSGOPT_THREADS` if set, else the available parallelism.
pub fn thread_count() -> Result<usize, BenchError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(BenchError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn build_problem(kind: ProblemKind) -> Box<dyn StochasticProblem> {
    match kind {
        ProblemKind::Quadratic => Box::new(QuadraticProblem1D::new()),
        ProblemKind::Bump => Box::new(BumpProblem5D::new()),
        ProblemKind::Rosenbrock => Box::new(NoisyRosenbrock::new()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub series: String,
    pub kind: OptimizerKind,
    pub optimizer: OptimizerSpec,
}

fn schedule(s: Result<StepSchedule, csgopt::CsgError>) -> Result<StepSchedule, BenchError> {
    s.map_err(|e| BenchError::Usage(e.to_string()))
}

/// The optimizer configurations (series) an experiment compares.
pub fn plan(spec: &ExperimentSpec) -> Result<Vec<Job>, BenchError> {
    let line = spec.line_search;
    let mut jobs = Vec::new();
    let mut push = |series: String, kind: OptimizerKind, optimizer: OptimizerSpec| {
        jobs.push(Job { series, kind, optimizer });
    };
    match spec.experiment {
        ExperimentKind::ConstantSteps => {
            for &opt in &spec.optimizers {
                for &tau in &spec.taus {
                    let o = match opt {
                        OptimizerKind::Csg => OptimizerSpec::CsgConstant { tau },
                        _ => OptimizerSpec::Sg {
                            schedule: schedule(StepSchedule::constant(tau))?,
                        },
                    };
                    push(format!("{} tau={tau}", opt.as_str()), opt, o);
                }
            }
        }
        ExperimentKind::StabilityGrid => {
            for &opt in &spec.optimizers {
                for &tau0 in &spec.tau0_grid {
                    for &d in &spec.d_grid {
                        let s = schedule(StepSchedule::power_decay(tau0, d))?;
                        let o = match opt {
                            OptimizerKind::Bcsg => OptimizerSpec::CsgBacktracking { schedule: s, line },
                            _ => OptimizerSpec::AdaGrad {
                                schedule: s,
                                eps: spec.adagrad_eps,
                            },
                        };
                        push(format!("{} tau0={tau0} d={d}", opt.as_str()), opt, o);
                    }
                }
            }
        }
        ExperimentKind::Rosenbrock | ExperimentKind::SingleRun => {
            let tau = spec.taus[0];
            for &opt in &spec.optimizers {
                let o = match opt {
                    OptimizerKind::Csg => OptimizerSpec::CsgConstant { tau },
                    OptimizerKind::Sg => OptimizerSpec::Sg {
                        schedule: schedule(StepSchedule::constant(tau))?,
                    },
                    OptimizerKind::Bcsg => OptimizerSpec::CsgBacktracking {
                        schedule: schedule(StepSchedule::constant(spec.bcsg_eta))?,
                        line,
                    },
                    OptimizerKind::Scibl => OptimizerSpec::Scibl {
                        c_min: spec.c_min,
                        c_max: spec.c_max,
                        line,
                    },
                    OptimizerKind::Adagrad => OptimizerSpec::AdaGrad {
                        schedule: schedule(StepSchedule::power_decay(spec.adagrad_tau0, spec.adagrad_d))?,
                        eps: spec.adagrad_eps,
                    },
                };
                push(opt.as_str().to_string(), opt, o);
            }
        }
    }
    for j in &jobs {
        j.optimizer
            .validate()
            .map_err(|e| BenchError::Usage(format!("{}: {e}", j.series)))?;
    }
    Ok(jobs)
}

struct ReplicateResult {
    metric: Vec<f64>,
    refinements: usize,
}

fn run_one(
    problem: &dyn StochasticProblem,
    job: &Job,
    spec: &ExperimentSpec,
    r: usize,
) -> Result<ReplicateResult, BenchError> {
    let u0 = problem
        .feasible_set()
        .sample_uniform(&mut rng::stream(spec.base_seed, r as u64, Purpose::StartPoint));
    let cfg = RunConfig::new(spec.iters)
        .with_seed(spec.base_seed)
        .with_stream(r as u64)
        .with_oracle_diagnostics(false);
    let trace = job.optimizer.run(problem, &cfg, &u0)?;
    // objective estimates stand in when the minimizer is unknown
    let metric = match trace.error_path() {
        Some(p) => p,
        None => trace.rows.iter().map(|row| row.j_hat).collect(),
    };
    Ok(ReplicateResult {
        metric,
        refinements: trace.total_refinements,
    })
}

/// Runs every series of `spec` on a pool of `threads` workers and summarizes.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentReport, BenchError> {
    spec.validate()?;
    let jobs = plan(spec)?;
    let problem = build_problem(spec.problem);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| BenchError::Invalid(format!("cannot start worker pool: {e}")))?;

    let reps = spec.replicates;
    let results: Vec<ReplicateResult> = pool.install(|| {
        (0..jobs.len() * reps)
            .into_par_iter()
            .map(|k| run_one(problem.as_ref(), &jobs[k / reps], spec, k % reps))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let metric_name = if problem.known_minimizer().is_some() {
        "error_to_minimizer"
    } else {
        "j_hat"
    };
    // the objective estimate has no value before the first step
    let first_iter = if metric_name == "j_hat" { 1 } else { 0 };

    let mut series = Vec::with_capacity(jobs.len());
    let mut stats = Vec::new();
    let mut refinements = Vec::with_capacity(jobs.len());
    for (job, chunk) in jobs.iter().zip(results.chunks(reps)) {
        let matrix: Vec<Vec<f64>> = chunk.iter().map(|r| r.metric.clone()).collect();
        let summary = quantile_aggregate(&matrix, first_iter)?;
        let total: usize = chunk.iter().map(|r| r.refinements).sum();
        refinements.push(total);
        if let Some(last) = summary.last() {
            stats.push((format!("final_median {}", job.series), last.median));
        }
        if job.optimizer.line_config().is_some() {
            stats.push((format!("refinements {}", job.series), total as f64));
        }
        series.push(Series {
            name: job.series.clone(),
            summary,
        });
    }

    let total_of = |kind: OptimizerKind| -> Option<usize> {
        let v: Vec<usize> = jobs
            .iter()
            .zip(&refinements)
            .filter(|(j, _)| j.kind == kind)
            .map(|(_, &t)| t)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum())
    };
    if let (Some(b), Some(s)) = (total_of(OptimizerKind::Bcsg), total_of(OptimizerKind::Scibl)) {
        stats.push(("refinement_ratio bcsg/scibl".into(), b as f64 / s as f64));
    }
    if spec.experiment == ExperimentKind::StabilityGrid {
        for &opt in &spec.optimizers {
            let finals: Vec<f64> = jobs
                .iter()
                .zip(&series)
                .filter(|(j, _)| j.kind == opt)
                .filter_map(|(_, s)| s.summary.last().map(|r| r.median))
                .collect();
            stats.push((format!("spread {}", opt.as_str()), grid_spread(&finals)));
        }
    }

    Ok(ExperimentReport {
        experiment: spec.experiment.as_str().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: spec.base_seed,
        spec: spec.clone(),
        metric: metric_name.to_string(),
        series,
        stats,
    })
}

/// Ratio of the largest to the smallest cell value; infinite when the
/// smallest is zero.
pub fn grid_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Human-readable digest printed after a run.
pub fn summary_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} series, {} replicates x {} iterations, seed {} (metric: {})",
        report.experiment,
        report.series.len(),
        report.spec.replicates,
        report.spec.iters,
        report.seed,
        report.metric
    );
    for s in &report.series {
        if let Some(r) = s.summary.last() {
            let _ = writeln!(
                out,
                "  {:<40} iter {:>6}  median {:.4e}  [p10 {:.4e}, p90 {:.4e}]",
                s.name, r.iter, r.median, r.p10, r.p90
            );
        }
    }
    for (k, v) in report.stats.iter().filter(|(k, _)| !k.starts_with("final_median")) {
        let _ = writeln!(out, "  {k} = {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind) -> ExperimentSpec {
        let mut s = ExperimentSpec::defaults(kind);
        s.replicates = 3;
        s.iters = 5;
        s.tau0_grid = vec![0.1, 1.0];
        s.d_grid = vec![0.0, 0.5];
        s
    }

    #[test]
    fn plan_sizes() {
        assert_eq!(plan(&tiny(ExperimentKind::ConstantSteps)).unwrap().len(), 10);
        assert_eq!(plan(&tiny(ExperimentKind::StabilityGrid)).unwrap().len(), 8);
        let r = plan(&tiny(ExperimentKind::Rosenbrock)).unwrap();
        let names: Vec<&str> = r.iter().map(|j| j.series.as_str()).collect();
        assert_eq!(names, ["adagrad", "bcsg", "scibl"]);
    }

    #[test]
    fn series_names_carry_parameters() {
        let p = plan(&tiny(ExperimentKind::ConstantSteps)).unwrap();
        assert_eq!(p[0].series, "csg tau=0.01");
        assert_eq!(p[9].series, "sg tau=1.99");
        let g = plan(&tiny(ExperimentKind::StabilityGrid)).unwrap();
        assert_eq!(g[1].series, "bcsg tau0=0.1 d=0.5");
    }

    #[test]
    fn rows_cover_start_and_every_iteration() {
        let rep = run_experiment(&tiny(ExperimentKind::ConstantSteps), 1).unwrap();
        assert_eq!(rep.metric, "error_to_minimizer");
        for s in &rep.series {
            assert_eq!(s.summary.rows.len(), 6);
            assert_eq!(s.summary.rows[0].iter, 0);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = tiny(ExperimentKind::Rosenbrock);
        assert_eq!(run_experiment(&s, 1).unwrap(), run_experiment(&s, 3).unwrap());
    }

    #[test]
    fn spread_of_grid() {
        assert_eq!(grid_spread(&[2.0, 1.0, 4.0]), 4.0);
        assert_eq!(grid_spread(&[0.0, 1.0]), f64::INFINITY);
    }
}
