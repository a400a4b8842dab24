use thiserror::Error;

use crate::walk::Vertex;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OqrwError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid walk definition: {0}")]
    Definition(String),

    #[error("lattice window overflow: support would span {needed} sites, cap is {cap}")]
    WindowOverflow { needed: usize, cap: usize },

    #[error("corrupted state: {0}")]
    CorruptedState(String),

    #[error("dead end at vertex {vertex}: every branch probability is below the cutoff")]
    DeadEnd { vertex: Vertex },

    #[error("cannot dilate source {source_vertex}: normalization deviation {deviation:e}")]
    CannotDilate { source_vertex: Vertex, deviation: f64 },

    #[error("state is not in canonical realization form: {0}")]
    NotCanonical(String),

    #[error("unitary walk condition violated: max deviation {deviation:e}")]
    UnitaryConditionViolated { deviation: f64 },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("outside support: {0}")]
    OutsideSupport(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),
}

pub type Result<T, E = OqrwError> = std::result::Result<T, E>;
