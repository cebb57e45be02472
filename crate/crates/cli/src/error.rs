use serde::Serialize;

use crate::config::Origin;

/// A failed numerical contract, serialized into the violation record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: String,
    pub context: String,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{origin}: field `{field}`: {reason}")]
    Field {
        origin: Origin,
        field: String,
        reason: String,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerical(#[from] berezin_core::Error),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use berezin_core::Error as E;
        match self {
            CliError::Validation(_) | CliError::Field { .. } | CliError::Output { .. } => 2,
            CliError::Numerical(e) => match root(e) {
                E::Index { .. } | E::UnsupportedOrder(_) | E::UnsupportedClass(_) | E::NoFourierTransform | E::Grid(_) => 2,
                _ => 3,
            },
        }
    }
}

fn root(e: &berezin_core::Error) -> &berezin_core::Error {
    match e {
        berezin_core::Error::AtLevel { source, .. } => root(source),
        other => other,
    }
}
