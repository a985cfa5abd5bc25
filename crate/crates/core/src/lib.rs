//! Continuous stochastic gradient (CSG) optimization.
//!
//! CSG solves problems of the form `min_{u in U} E_x[j(u, x)]` by reusing every
//! gradient and objective sample drawn so far. At each iterate the stored samples
//! are recombined with nearest-neighbour ("empirical") integration weights, giving
//! estimates of the full objective and gradient whose error vanishes as the run
//! proceeds. On top of that estimate this crate provides three step-size rules:
//!
//! - constant steps ([`optimizers::run_csg_constant`]),
//! - a bisection Armijo/Wolfe line search on the estimates ([`optimizers::run_bcsg`]),
//! - the same line search started at an inverse Lipschitz estimate, which needs no
//!   step-size input at all ([`optimizers::run_scibl`]).
//!
//! Plain projected SG and AdaGrad are included as baselines, and [`testbed`] holds
//! the benchmark problems together with quadrature and finite-difference oracles.
//!
//! ```
//! use csgopt::optimizers::{run_csg_constant, RunConfig};
//! use csgopt::problem::DesignPoint;
//! use csgopt::testbed::QuadraticProblem1D;
//!
//! let problem = QuadraticProblem1D::new();
//! let cfg = RunConfig::new(200).with_seed(7);
//! let trace = run_csg_constant(&problem, 1.0, &cfg, &DesignPoint::new(vec![0.4])).unwrap();
//! assert!(trace.final_point.coords()[0].abs() < 0.1);
//! ```

pub mod error;
pub mod history;
mod kdtree;
pub mod linalg;
pub mod linesearch;
pub mod optimizers;
pub mod problem;
pub mod rng;
pub mod testbed;

pub use error::{CsgError, Result};
