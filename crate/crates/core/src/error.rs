use thiserror::Error;

use crate::lattice::SiteRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("{what} dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { what: &'static str, dim: usize, cap: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("iterative eigensolver did not converge (max residual {max_residual:.3e} > {tol:.3e})")]
    NonConvergence { max_residual: f64, tol: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("site {site} out of range (lattice has {count} quantum sites)")]
    SiteOutOfRange { site: usize, count: usize },

    #[error("degenerate triangle ({i}, {j}, {k}): solid angle undefined")]
    DegenerateTriangle { i: usize, j: usize, k: usize },

    #[error("vanishing moment at site {site:?} (|<S>| = {norm:.3e} below floor {floor:.1e})")]
    VanishingMoment { site: SiteRef, norm: f64, floor: f64 },

    #[error("field normalization mismatch: {0}")]
    FieldMode(&'static str),

    #[error("time {t} outside the protocol window [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("propagation did not converge after {halvings} halvings (last change {change:.3e} > {tol:.3e})")]
    PropagationNonConvergence { halvings: usize, change: f64, tol: f64 },

    #[error("level {level} gap collapsed to {gap:.3e} at t = {t} (floor {floor:.1e})")]
    GapCollapse { level: usize, t: f64, gap: f64, floor: f64 },

    #[error("level tracking lost level {level} at t = {t} (best overlap with index {found})")]
    LevelCrossing { level: usize, t: f64, found: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("truncated spectrum retains Boltzmann weight fraction {retained:.6} < {required}")]
    Truncation { retained: f64, required: f64 },

    #[error("heat input is zero: no cycle")]
    NoCycle,
}

pub type Result<T> = std::result::Result<T, Error>;
