//! Experiment harness: dataset ingestion and standardization, experiment
//! configuration and execution, trace persistence, and chart emission.

pub mod data;
pub mod experiment;
pub mod plot;

pub use data::{generate_synthetic, load_csv, standardize, StandardizeParams, SyntheticSpec};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary};
pub use plot::{emit_plots, PlotOptions, XAxis};

use crate::error::{Error, Result};

/// The normalized objective gap
/// `(value - at_ref) / (at_w0 - at_ref)`; negative values mean the iterate
/// beat the reference.
pub fn suboptimality(value: f64, objective_at_w0: f64, objective_at_ref: f64) -> Result<f64> {
    let denominator = objective_at_w0 - objective_at_ref;
    if denominator.abs() < 1e-15 {
        return Err(Error::DegenerateDenominator { denominator });
    }
    if denominator < 0.0 {
        return Err(Error::invalid(
            "objective_at_w0",
            "the starting objective must exceed the reference objective",
        ));
    }
    Ok((value - objective_at_ref) / denominator)
}
