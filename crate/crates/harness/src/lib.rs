//! Experiment harness for `dpcollab-core`: configuration, run pipeline,
//! CSV outputs and reports behind the `dpcollab` CLI.
// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pipeline;
pub mod report;

use dpcollab_core::Error as CoreError;

/// Invalid configuration or arguments, or an IO failure.
pub const EXIT_CONFIG: u8 = 1;
/// Sampler or numerical failure.
pub const EXIT_NUMERICAL: u8 = 2;
/// No τ attains a reward target.
pub const EXIT_NO_ROOT: u8 = 3;

/// Process exit code for an error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<CoreError>())
        .map_or(EXIT_CONFIG, core_exit_code)
}

fn core_exit_code(err: &CoreError) -> u8 {
    match err {
        CoreError::Config(_) | CoreError::Argument(_) => EXIT_CONFIG,
        CoreError::Coalition { source, .. } => core_exit_code(source),
        CoreError::NoRoot { .. } => EXIT_NO_ROOT,
        CoreError::Sampler { .. }
        | CoreError::DegeneratePosterior(_)
        | CoreError::Numerical(_)
        | CoreError::InsufficientSamples { .. } => EXIT_NUMERICAL,
    }
}
