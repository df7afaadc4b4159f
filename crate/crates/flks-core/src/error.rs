use thiserror::Error;

/// Errors produced by mesh construction, solvers and post-processing.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// J is not a multiple of I, so the diagonal y = vG misses the lattice.
    #[error("mesh misalignment: J = {j} is not a multiple of I = {i}")]
    MisalignedMesh { i: usize, j: usize },

    /// A field has zero or negative total mass where a positive one is required.
    #[error("non-positive total mass {mass:.3e}: divergence or bad initialization")]
    NonPositiveMass { mass: f64 },

    /// The iteration produced NaN/Inf or the convergence metric blew up.
    #[error("numeric failure during {context}: {reason}")]
    NumericFailure {
        context: &'static str,
        reason: String,
    },

    /// Not enough usable samples for a least-squares fit.
    #[error("exponent fit needs at least {needed} points in the window, found {found}")]
    InsufficientFitPoints { needed: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
