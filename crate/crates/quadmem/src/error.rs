use std::path::PathBuf;

use serde::Serialize;

use quadmem_core::Error as CoreError;

/// Process exit status for usage and configuration problems.
pub const EXIT_USAGE: i32 = 2;
/// Process exit status for runtime and numeric failures.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config file {path} not found")]
    ConfigNotFound { path: PathBuf },
    #[error("config {pointer}: {message}")]
    ConfigSchema { pointer: String, message: String },
    #[error("invalid value for `{name}`: {reason}")]
    ConfigInvalid { name: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn format(context: impl Into<String>, message: impl ToString) -> Self {
        CliError::Format {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::ConfigInvalid {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::ConfigNotFound { .. } => "CONFIG_NOT_FOUND",
            CliError::ConfigSchema { .. } => "CONFIG_SCHEMA",
            CliError::ConfigInvalid { .. } => "CONFIG_INVALID",
            CliError::UnknownPreset(_) => "UNKNOWN_PRESET",
            CliError::Io { .. } => "IO_ERROR",
            CliError::Format { .. } => "BAD_INPUT_FILE",
            CliError::Core { source, .. } => core_code(source),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_RUNTIME,
            CliError::Core { source, .. } if is_runtime(source) => EXIT_RUNTIME,
            _ => EXIT_USAGE,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let pointer = match self {
            CliError::ConfigSchema { pointer, .. } => Some(pointer.clone()),
            CliError::ConfigInvalid { name, .. } => Some(format!("/{}", name.replace('.', "/"))),
            _ => None,
        };
        ErrorReport {
            error: ErrorBody {
                code: self.code(),
                message: self.to_string(),
                exit_code: self.exit_code(),
                pointer,
            },
        }
    }
}

/// Numeric failures as opposed to bad requests.
fn is_runtime(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NotPositiveDefinite { .. }
            | CoreError::ResidualTooLarge { .. }
            | CoreError::FloatingIsland { .. }
            | CoreError::NoReferencePotential
            | CoreError::UnknownNode { .. }
            | CoreError::InvalidConductance { .. }
    )
}

fn core_code(e: &CoreError) -> &'static str {
    match e {
        CoreError::PolicyTopologyMismatch { .. } => "POLICY_TOPOLOGY_MISMATCH",
        CoreError::InvalidParameter { .. } | CoreError::NonPositiveStep { .. } => "INVALID_PARAMETER",
        CoreError::UnreachableTarget { .. } | CoreError::TargetOutOfRange { .. } => "UNREACHABLE_TARGET",
        CoreError::SizeOutOfRange { .. } => "SIZE_OUT_OF_RANGE",
        CoreError::EmptySweep => "EMPTY_SWEEP",
        CoreError::EmptyArray { .. } => "EMPTY_ARRAY",
        CoreError::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
        CoreError::MissingColumn(_) => "MISSING_COLUMN",
        CoreError::DimensionMismatch { .. } | CoreError::ShapeMismatch | CoreError::PlanMismatch(_) => {
            "DIMENSION_MISMATCH"
        }
        CoreError::PulseBelowThreshold { .. } => "PULSE_BELOW_THRESHOLD",
        CoreError::FloatingIsland { .. } => "FLOATING_ISLAND",
        CoreError::NotPositiveDefinite { .. } => "SINGULAR_SYSTEM",
        CoreError::ResidualTooLarge { .. } => "RESIDUAL_TOO_LARGE",
        _ => "SIMULATION_ERROR",
    }
}

pub trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
}
