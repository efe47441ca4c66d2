use thiserror::Error;

/// Equality λ_{α0} = λ_{α1} hit by the induction; (alpha, beta, 1) is a connexion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnexionHalt {
    pub step: usize,
    pub alpha: String,
    pub beta: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("combinatorial data is not admissible")]
    NotAdmissible,
    #[error("point {0} outside the domain")]
    Domain(String),
    #[error("connexion at step {}: ({}, {}, 1)", .0.step, .0.alpha, .0.beta)]
    Connexion(ConnexionHalt),
    #[error("name {name} not available at vertex {vertex}")]
    NameNotAvailable { vertex: usize, name: String },
    #[error("orbit too short for a complete acceleration block")]
    InsufficientOrbit,
    #[error("level range {0}..{1} out of bounds")]
    Range(usize, usize),
    #[error("invalid suspension: {0}")]
    InvalidSuspension(String),
    #[error("no singular value below the stable cut")]
    EmptyStable,
    #[error("correction series fails the Cauchy test (last term {0:e})")]
    SeriesDiverging(f64),
    #[error("ill-conditioned quotient solve (residual {0:e})")]
    IllConditioned(f64),
    #[error("decomposition count {count} at level {level} exceeds bound {bound}")]
    DecompositionBound { level: usize, count: u64, bound: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
