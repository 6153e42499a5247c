//! Command failures and their exit statuses.

use rategraph_core::ctmc::CtmcError;
use rategraph_core::greg::GregError;
use rategraph_core::odeint::OdeError;

use crate::dsl::DslError;
use crate::system::SystemError;

/// Exit statuses. Usage errors (2) are reported by the argument parser.
pub mod exit {
    pub const OTHER: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const LIMIT: u8 = 4;
    pub const INTERNAL: u8 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{source}")]
    Model { path: String, source: DslError },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Limit(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } => exit::OTHER,
            CliError::Model { .. } | CliError::Invalid(_) => exit::VALIDATION,
            CliError::Limit(_) => exit::LIMIT,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }
}

impl From<GregError> for CliError {
    fn from(e: GregError) -> Self {
        match e {
            GregError::CapExceeded { .. } => CliError::Limit(e.to_string()),
            GregError::Rewrite(_) => CliError::Internal(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::NoConvergence { .. } | OdeError::NonFinite(_) => CliError::Limit(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<CtmcError> for CliError {
    fn from(e: CtmcError) -> Self {
        match e {
            CtmcError::CapExceeded { .. } => CliError::Limit(e.to_string()),
            CtmcError::Rewrite(_) => CliError::Internal(e.to_string()),
            CtmcError::Ode(o) => o.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Greg(g) => g.into(),
            SystemError::Ode(o) => o.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}
