//! Library side of the `smrd` command-line tool.

pub mod commands;
pub mod config;

pub use commands::{
    build_prior, cmd_compare, cmd_recon, cmd_simulate, cmd_sweep_lambda, cmd_trace, layered_config, reconstruct,
    sweep_lambda, CompareRow, CompareSummaryRow, Problem, SimulateSummary, SweepBest, SweepRow, TraceSummary,
};
pub use config::{ExperimentConfig, MaskKind, MaskSpec, PriorChoice, PriorSpec, ScheduleSpec};

use crate::error::SmrdError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Process exit code for an error: config problems, unreadable or malformed files, numerical failures.
pub fn exit_code(err: &SmrdError) -> i32 {
    match err {
        SmrdError::Numerical(_) => EXIT_NUMERICAL,
        SmrdError::Io(_)
        | SmrdError::BadMagic
        | SmrdError::UnsupportedVersion(_)
        | SmrdError::UnknownDtype(_)
        | SmrdError::TruncatedPayload { .. }
        | SmrdError::TrailingBytes(_)
        | SmrdError::TruncatedHeader
        | SmrdError::TensorKind(_)
        | SmrdError::ShapeMismatch { .. }
        | SmrdError::CoilMismatch { .. }
        | SmrdError::DataLength { .. } => EXIT_IO,
        SmrdError::Config(_)
        | SmrdError::InvalidParameter(_)
        | SmrdError::Mask(_)
        | SmrdError::EmptyShape { .. }
        | SmrdError::StepOutOfRange { .. } => EXIT_CONFIG,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        assert_eq!(exit_code(&SmrdError::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&SmrdError::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&SmrdError::BadMagic), EXIT_IO);
        assert_eq!(exit_code(&SmrdError::Numerical("x".into())), EXIT_NUMERICAL);
        let codes = [EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL];
        assert!(codes.iter().enumerate().all(|(i, a)| codes[i + 1..].iter().all(|b| a != b)));
    }
}
