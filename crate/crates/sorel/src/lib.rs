//! Spectral risk minimization toolkit.
//!
//! A spectral risk weights the sorted per-sample losses by a nondecreasing
//! unit-sum vector, interpolating between the average and the worst case.
//! This crate provides:
//!
//! - [`spectra`]: weight generators for the CVaR, ESRM, and extremile
//!   families plus spectral risk evaluation;
//! - [`permutahedron`]: linear maximization, membership testing, and
//!   Euclidean projection (isotonic-regression based) over the convex hull
//!   of all permutations of the weight vector — the dual feasible set of the
//!   minimax formulation;
//! - [`objective`]: datasets, least-squares and logistic per-sample losses,
//!   the ridge regularizer, and the anchored proximal step;
//! - [`solver`]: the stabilized primal-dual optimizer with dual momentum,
//!   damped dual ascent, and a variance-reduced inner loop, under either the
//!   guarantee-carrying [`schedule::TheoreticalSchedule`] or the tuned
//!   [`schedule::PracticalSchedule`];
//! - [`baselines`]: SGD / LSVRG / Prospect comparison optimizers, a
//!   certified high-accuracy reference solver, and the oscillation
//!   demonstration that motivates the dual damping;
//! - [`harness`]: CSV/synthetic datasets, experiment configs, trace files,
//!   and SVG training-curve charts.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod objective;
pub mod permutahedron;
pub mod schedule;
pub mod solver;
pub mod spectra;
pub mod trace;

pub use error::{Error, Result};
pub use objective::{Dataset, LossKind, ObjectiveModel};
pub use permutahedron::{contains, isotonic_regression, lmo, project, Direction, DualPoint};
pub use schedule::{validate_coupling_conditions, PracticalSchedule, ScheduleParams, TheoreticalSchedule};
pub use solver::{run_sorel, InnerStrategy, SorelOptions, SorelSolver};
pub use spectra::{sort_permutation, spectral_risk, LossVector, SpectralWeights, SpectrumFamily};
pub use trace::{RunResult, TrainingTrace};
