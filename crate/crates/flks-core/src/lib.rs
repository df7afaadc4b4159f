//! Equilibrium distributions of a run-and-tumble kinetic model with an
//! internal adaptation state, and the drift/diffusion coefficients of its
//! macroscopic limits.
//!
//! The central object is the stationary distribution Q_0(y, v) on
//! [-G, G] x [-1, 1] solving d/dy((vG - y) Q_0) = Lambda_0(y)(<Q_0> - Q_0)
//! with unit mass. It lives on a diagonal-aligned lattice ([`mesh`]), is
//! computed by semi-implicit upwind relaxation ([`equilibrium`]), feeds
//! corrector problems T_0 h = R_1 ([`corrector`]) whose moments give the
//! macroscopic coefficients ([`coefficients`]), and is checked against its
//! proven qualitative properties ([`analysis`]).

pub mod analysis;
pub mod coefficients;
pub mod corrector;
pub mod equilibrium;
pub mod error;
pub mod mesh;
pub mod tumbling;

pub use analysis::{
    bump_init, check_flux_identity, check_symmetry, convergence_study, fit_blowup_exponent,
    fit_decay_exponent, uniqueness_check, ConvergenceRow, ExponentFit, FitWindow,
};
pub use coefficients::{
    coeffs_case2, coeffs_case3, compute_report, diffusion_d02, drift_c02_corrector,
    drift_c02_direct, drift_sweep, mean_velocity, report_from_q0, CoefficientReport, SweepRow,
};
pub use corrector::{solve_corrector, source_diffusion, source_drift, CorrectorSource, SourceKind};
pub use equilibrium::{
    convergence_metric, evolve_step, normalize, solve_equilibrium, upwind_weight, InitPolicy,
    SolveReport, SolverConfig,
};
pub use error::{Error, Result};
pub use mesh::{total_mass, velocity_average, velocity_moment, y_integral, GridField, Mesh};
pub use tumbling::{Lambda1, TumblingModel};
