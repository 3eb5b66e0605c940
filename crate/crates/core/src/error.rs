use thiserror::Error;

/// An input outside the domain of a model formula.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in {what}: {detail}")]
pub struct DomainError {
    pub what: &'static str,
    pub detail: String,
}

impl DomainError {
    pub(crate) fn new(what: &'static str, detail: impl Into<String>) -> Self {
        Self { what, detail: detail.into() }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Validation { field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GspError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("price adjustment rate undefined: quality score at rank {rank} is zero")]
    DivisionByZero { rank: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("no served slots")]
    NoAllocations,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("slot {slot}, app {app}: {source}")]
    Round {
        slot: usize,
        app: usize,
        #[source]
        source: GspError,
    },
    #[error("slot {slot}: {source}")]
    Model {
        slot: usize,
        #[source]
        source: DomainError,
    },
}
