use std::fmt;

use svs_core::f0lab::F0Error;
use svs_core::nnet::TrainError;
use svs_core::pipeline::PipelineError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_NUMERIC,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        Self {
            code: self.code,
            error: self.error.context(what.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Train(TrainError::Config(_)) => EXIT_CONFIG,
            PipelineError::Train(_)
            | PipelineError::Network(_)
            | PipelineError::Mlpg(_)
            | PipelineError::Timing(_)
            | PipelineError::F0(F0Error::NonFinite(_)) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_errors_map_to_documented_codes() {
        let e: CliError = PipelineError::Data("x".into()).into();
        assert_eq!(e.code, EXIT_DATA);
        let e: CliError = PipelineError::Train(TrainError::NonFinite { step: 3, value: f64::NAN }).into();
        assert_eq!(e.code, EXIT_NUMERIC);
        let e: CliError = PipelineError::Train(TrainError::Config("bad".into())).into();
        assert_eq!(e.code, EXIT_CONFIG);
        let e = CliError::data("missing").context("song a");
        assert_eq!(e.to_string(), "song a: missing");
    }
}
