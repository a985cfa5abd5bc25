use csgopt::linesearch::{LineSearchConfig, StepSchedule};
use csgopt::optimizers::{
    run_adagrad, run_bcsg, run_csg_constant, run_scibl, run_sg, OptimizerSpec, RunConfig,
};
use csgopt::problem::{DesignPoint, FeasibleSet, ParameterSample, StochasticProblem};
use csgopt::testbed::{BumpProblem5D, NoisyRosenbrock, QuadraticProblem1D};
use rand::{Rng, RngCore};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `j(u, x) = u + x` on `[0, 1]`: the gradient pushes every step onto the
/// lower bound, where the iterate already sits.
struct Pinned {
    set: FeasibleSet,
}

impl StochasticProblem for Pinned {
    fn dim_design(&self) -> usize {
        1
    }
    fn dim_param(&self) -> usize {
        1
    }
    fn sample_param(&self, rng: &mut dyn RngCore) -> ParameterSample {
        ParameterSample::new(vec![rng.random::<f64>()])
    }
    fn integrand(&self, u: &[f64], x: &[f64]) -> f64 {
        u[0] + x[0]
    }
    fn integrand_grad(&self, _u: &[f64], _x: &[f64]) -> Vec<f64> {
        vec![1.0]
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
}

fn all_specs() -> Vec<OptimizerSpec> {
    let line = LineSearchConfig::default();
    vec![
        OptimizerSpec::CsgConstant { tau: 1.0 },
        OptimizerSpec::CsgBacktracking {
            schedule: StepSchedule::constant(1.0).unwrap(),
            line,
        },
        OptimizerSpec::Scibl {
            c_min: 1e-8,
            c_max: 1e8,
            line,
        },
        OptimizerSpec::Sg {
            schedule: StepSchedule::power_decay(1.0, 0.5).unwrap(),
        },
        OptimizerSpec::AdaGrad {
            schedule: StepSchedule::constant(0.1).unwrap(),
            eps: 1e-8,
        },
    ]
}

#[test]
fn backtracking_with_immediate_acceptance_is_constant_stepping() {
    let problem = Pinned {
        set: FeasibleSet::cube(0.0, 1.0, 1).unwrap(),
    };
    let cfg = RunConfig::new(50).with_seed(4);
    let u0 = DesignPoint::new(vec![0.0]);
    let eta = 0.3;
    let constant = run_csg_constant(&problem, eta, &cfg, &u0).unwrap();
    let schedule = StepSchedule::constant(eta).unwrap();
    let bt = run_bcsg(&problem, schedule, LineSearchConfig::default(), &cfg, &u0).unwrap();
    assert!(bt.rows.iter().all(|r| r.refinements == 1 && r.tau == eta));
    for (a, b) in constant.rows.iter().zip(&bt.rows) {
        assert_eq!(a.u, b.u);
        assert_eq!(a.j_hat, b.j_hat);
    }
    assert_eq!(constant.final_point, bt.final_point);
}

#[test]
fn scibl_starts_at_the_inverse_upper_bound() {
    let problem = QuadraticProblem1D::new();
    let cfg = RunConfig::new(5).with_seed(1);
    let t = run_scibl(&problem, 1e-8, 1e8, LineSearchConfig::default(), &cfg, &DesignPoint::new(vec![0.3]))
        .unwrap();
    assert_eq!(t.rows[0].eta0, Some(1e-8));
    assert!(t.rows.iter().all(|r| {
        let e = r.eta0.unwrap();
        (1e-8..=1e8).contains(&e)
    }));
}

#[test]
fn iterates_stay_feasible_and_runs_are_deterministic() {
    let problems: Vec<(Box<dyn StochasticProblem>, DesignPoint)> = vec![
        (Box::new(QuadraticProblem1D::new()), DesignPoint::new(vec![0.5])),
        (Box::new(NoisyRosenbrock::new()), DesignPoint::new(vec![-3.0, 3.0])),
        (Box::new(BumpProblem5D::new()), DesignPoint::new(vec![9.0, -9.0, 5.0, 0.0, 10.0])),
    ];
    for (problem, u0) in &problems {
        for spec in all_specs() {
            let cfg = RunConfig::new(60).with_seed(17).with_stream(2).with_oracle_diagnostics(false);
            let a = spec.run(problem.as_ref(), &cfg, u0).unwrap();
            let b = spec.run(problem.as_ref(), &cfg, u0).unwrap();
            assert_eq!(a, b, "{} on {}", spec.name(), problem.name());
            let set = problem.feasible_set();
            assert!(a.rows.iter().all(|r| set.contains(&r.u, 1e-12)));
            assert!(set.contains(a.final_point.coords(), 1e-12));
            let expected = if matches!(spec, OptimizerSpec::Sg { .. } | OptimizerSpec::AdaGrad { .. }) {
                0
            } else {
                60
            };
            assert_eq!(a.history_len, expected, "{}", spec.name());
            let other = spec
                .run(problem.as_ref(), &cfg.clone().with_stream(3), u0)
                .unwrap();
            assert_ne!(a.final_point, other.final_point, "streams must differ");
        }
    }
}

#[test]
fn refinements_never_exceed_the_trial_cap() {
    let problem = NoisyRosenbrock::new();
    let line = LineSearchConfig::new(6, 1e-4, 0.9, 3).unwrap();
    let cfg = RunConfig::new(150).with_seed(8).with_line_search_audit(true);
    let u0 = DesignPoint::new(vec![-1.0, 2.0]);
    let t = run_bcsg(&problem, StepSchedule::constant(1.0 / 40.0).unwrap(), line, &cfg, &u0).unwrap();
    let s = run_scibl(&problem, 1e-8, 1e8, line, &cfg, &u0).unwrap();
    for tr in [&t, &s] {
        assert!(tr.rows.iter().all(|r| r.refinements >= 1 && r.refinements <= 6));
        assert_eq!(tr.total_refinements, tr.rows.iter().map(|r| r.refinements).sum::<usize>());
        for r in &tr.rows {
            let fallback = line.fallback_step(r.eta0.unwrap());
            assert!(r.sw1_recheck == Some(true) || r.tau == fallback, "{r:?}");
        }
    }
}

#[test]
fn constant_steps_contract_to_the_minimizer() {
    let problem = QuadraticProblem1D::new();
    let u0 = DesignPoint::new(vec![0.4]);
    for tau in [0.1, 1.0, 1.9] {
        let finals: Vec<f64> = (0..30)
            .map(|seed| {
                let cfg = RunConfig::new(500).with_seed(seed).with_oracle_diagnostics(false);
                run_csg_constant(&problem, tau, &cfg, &u0).unwrap().final_point.coords()[0].abs()
            })
            .collect();
        assert!(median(finals) < 0.4 / 4.0, "tau {tau}");
    }
}

#[test]
fn history_beats_single_samples_at_small_steps() {
    let problem = QuadraticProblem1D::new();
    let u0 = DesignPoint::new(vec![0.4]);
    let schedule = StepSchedule::constant(0.01).unwrap();
    let (mut csg, mut sg) = (vec![], vec![]);
    for seed in 0..30 {
        let cfg = RunConfig::new(500).with_seed(seed).with_oracle_diagnostics(false);
        csg.push(run_csg_constant(&problem, 0.01, &cfg, &u0).unwrap().final_point.coords()[0].abs());
        sg.push(run_sg(&problem, schedule, &cfg, &u0).unwrap().final_point.coords()[0].abs());
    }
    assert!(median(sg) > median(csg));
}

#[test]
fn adagrad_without_gradient_signal_stays_put() {
    struct Flat(FeasibleSet);
    impl StochasticProblem for Flat {
        fn dim_design(&self) -> usize {
            2
        }
        fn dim_param(&self) -> usize {
            1
        }
        fn sample_param(&self, rng: &mut dyn RngCore) -> ParameterSample {
            ParameterSample::new(vec![rng.random::<f64>()])
        }
        fn integrand(&self, _u: &[f64], x: &[f64]) -> f64 {
            x[0]
        }
        fn integrand_grad(&self, _u: &[f64], _x: &[f64]) -> Vec<f64> {
            vec![0.0, 0.0]
        }
        fn feasible_set(&self) -> &FeasibleSet {
            &self.0
        }
    }
    let p = Flat(FeasibleSet::cube(-1.0, 1.0, 2).unwrap());
    let u0 = DesignPoint::new(vec![0.25, -0.5]);
    let cfg = RunConfig::new(40);
    let t = run_adagrad(&p, StepSchedule::constant(1.0).unwrap(), 1e-8, &cfg, &u0).unwrap();
    assert_eq!(t.final_point, u0);
}

#[test]
fn bad_inputs_are_rejected() {
    let problem = QuadraticProblem1D::new();
    let cfg = RunConfig::new(10);
    assert!(run_csg_constant(&problem, 1.0, &cfg, &DesignPoint::new(vec![0.6])).is_err());
    assert!(run_csg_constant(&problem, 1.0, &cfg, &DesignPoint::new(vec![0.0, 0.0])).is_err());
    assert!(run_scibl(&problem, 2.0, 1.0, LineSearchConfig::default(), &cfg, &DesignPoint::new(vec![0.0])).is_err());
    assert!(run_csg_constant(&problem, 1.0, &RunConfig::new(0), &DesignPoint::new(vec![0.0])).is_err());
}
