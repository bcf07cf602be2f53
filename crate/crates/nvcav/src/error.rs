use nvcav_core::Error;

/// CLI failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 = configuration, 3 = numerical failure, 4 = infeasible request
    /// or measurement, 1 = output i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::InvalidGeometry(_)
                | Error::ResolutionTooCoarse { .. }
                | Error::InvalidInput(_)
                | Error::OffsetOutsideDomain(_)
                | Error::InsufficientSpan { .. } => 2,
                Error::InconsistentMeasurement(_) | Error::TargetOutOfRange { .. } => 4,
                Error::SolverNoConvergence { .. }
                | Error::ClassificationAmbiguous { .. }
                | Error::ModeTrackingLost { .. }
                | Error::ModeNotFound { .. }
                | Error::CalibrationNoConvergence { .. }
                | Error::DegenerateRatio { .. }
                | Error::FitNoConvergence(_) => 3,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(Error::InconsistentMeasurement("x".into())).exit_code(), 4);
        let oor = Error::TargetOutOfRange {
            target: 1.0,
            low: 2.0,
            high: 3.0,
        };
        assert_eq!(CliError::from(oor).exit_code(), 4);
        assert_eq!(CliError::from(Error::FitNoConvergence("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(Error::InvalidGeometry("x".into())).exit_code(), 2);
    }
}
