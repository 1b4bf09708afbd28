//! Error types shared across the simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single field-level problem found while validating a scenario config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIssue {
    /// Dotted path of the offending field, e.g. `channel.loss_db`.
    pub field: String,
    pub message: String,
}

impl FieldIssue {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", issues_line(.0))]
    Config(Vec<FieldIssue>),

    #[error("attack `{attack}` is not applicable to protocol `{protocol}` (pass --force to run anyway)")]
    NotApplicable { protocol: String, attack: String },

    #[error("protocol aborted: {0}")]
    Abort(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0}")]
    Runtime(String),
}

impl SimError {
    pub fn config_field(field: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config(vec![FieldIssue::new(field, message)])
    }
}

fn issues_line(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
