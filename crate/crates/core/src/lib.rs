//! Unconstrained minimization on the Rosenbrock family.
//!
//! * [`objective`]: the differentiable-objective trait, Rosenbrock and convex
//!   quadratic objectives, finite-difference oracles.
//! * [`linesearch`]: fixed, variable-candidate, quadratic-fit, golden-section
//!   and exact-quadratic step rules.
//! * [`optimize`]: steepest descent, Newton-Raphson and Fletcher-Reeves
//!   conjugate gradient drivers.
//! * [`experiment`]: the benchmark matrix, result tables, contour grids and
//!   CSV output.
//!
//! ```
//! use rosenbench_core::{steepest_descent, RealVector, Rosenbrock, StepRule, TerminationPolicy};
//!
//! let f = Rosenbrock::new(1.0).unwrap();
//! let x0 = RealVector::try_from([2.0, 2.0]).unwrap();
//! let rule = StepRule::fixed(0.124).unwrap();
//! let run = steepest_descent(&f, &x0, &rule, &TerminationPolicy::default()).unwrap();
//! assert!(run.status.is_converged());
//! ```

pub mod error;
pub mod experiment;
pub mod linesearch;
pub mod objective;
pub mod optimize;
pub mod vector;

pub use error::{Error, Result};
pub use experiment::{
    compare_sd_variants, contour_grid, emit_grid_csv, emit_results_csv, emit_trajectory_csv,
    run_cell, run_matrix, ContourGrid, ExperimentMatrix, Method, MethodFamily, ResultRow,
    SdVariant,
};
pub use linesearch::{restrict, LineRestriction, StepRule, StepSelector};
pub use objective::{
    check_derivatives, finite_diff_gradient, finite_diff_hessian, probe_grid, rosenbrock_gradient,
    rosenbrock_hessian, rosenbrock_value, Objective, QuadraticObjective, Rosenbrock,
};
pub use optimize::{
    check_convergence, detect_divergence, fletcher_reeves_cg, newton_raphson, steepest_descent,
    CgState, DivergenceReason, IterateRecord, RunResult, RunStatus, TerminationPolicy,
};
pub use vector::{Matrix, RealVector};
