use std::fmt;

use stepseq::Error;

/// Exit codes.
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_ALIGNMENT: i32 = 2;
pub const EXIT_FEASIBILITY: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or missing inputs.
    Config(String),
    Core {
        context: String,
        source: Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>, source: Error) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// Adapter for `map_err`.
    pub fn ctx(context: impl Into<String>) -> impl FnOnce(Error) -> Self {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_PARSE,
            CliError::Core { source, .. } => match source {
                Error::Alignment { .. } => EXIT_ALIGNMENT,
                Error::SizeLimit { .. }
                | Error::InfeasiblePlan(_)
                | Error::ResampleFailure { .. }
                | Error::InvalidSize(_) => EXIT_FEASIBILITY,
                _ => EXIT_PARSE,
            },
        }
    }

    /// Extra lines worth printing after the message, e.g. unmatched ids.
    pub fn details(&self) -> Vec<String> {
        match self {
            CliError::Core {
                source:
                    Error::Alignment {
                        unmatched_predictions,
                        unmatched_references,
                    },
                ..
            } => unmatched_predictions
                .iter()
                .map(|id| format!("no reference for prediction `{id}`"))
                .chain(
                    unmatched_references
                        .iter()
                        .map(|id| format!("no prediction for reference `{id}`")),
                )
                .collect(),
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => f.write_str(msg),
            CliError::Core { context, source } if context.is_empty() => write!(f, "{source}"),
            CliError::Core { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Config(_) => None,
            CliError::Core { source, .. } => Some(source),
        }
    }
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        CliError::core("", source)
    }
}
