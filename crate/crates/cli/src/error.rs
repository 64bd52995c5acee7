//! Error-to-exit-code mapping.

use std::fmt;
use uskeyframe::classifier::ClassifierError;
use uskeyframe::dataset::DatasetError;
use uskeyframe::gru::GruError;
use uskeyframe::pipeline::PipelineError;
use uskeyframe::transforms::TransformError;

/// CLI failure classes. Usage errors exit 1, data errors 2, model errors 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Model(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Model(m) => write!(f, "{m}"),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> CliError {
        CliError::Model(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<GruError> for CliError {
    fn from(e: GruError) -> CliError {
        match e {
            GruError::Io(_) | GruError::FormatVersionMismatch(_) | GruError::ShapeMismatch(_) => {
                CliError::Model(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        match e {
            PipelineError::Classifier(c) => c.into(),
            PipelineError::Gru(g) => g.into(),
            PipelineError::MissingModel => CliError::Usage(e.to_string()),
            PipelineError::MissingGruWeights => CliError::Model(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Data(e.to_string())
    }
}
