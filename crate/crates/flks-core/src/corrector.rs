//! Corrector solves: T_0 h = R_1 with zero total mass.
//!
//! The same semi-implicit time evolution as the equilibrium solve is used
//! with the source added explicitly; instead of renormalizing, each step
//! projects back onto the mean-zero constraint by subtracting r * Q_0 with
//! r = M[h], the kernel direction of T_0.

use crate::equilibrium::{
    mass_deviation, metric_scaled, row_averages, Operator, SolveReport, SolverConfig,
};
use crate::error::{Error, Result};
use crate::mesh::{simpson_sum, total_mass, velocity_moment, GridField, Mesh};
use crate::tumbling::TumblingModel;

/// Tag for the standard corrector right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Lambda_1(y) (<Q_0> - Q_0): drives the drift coefficient c_{0,2}.
    Drift,
    /// (v - v_0) Q_0: drives the diffusion coefficient D_{0,2}.
    Diffusion,
    Custom,
}

/// Mean-zero source field for the corrector equation.
#[derive(Debug, Clone)]
pub struct CorrectorSource {
    pub kind: SourceKind,
    field: GridField,
    /// Mass of the raw source before any enforcement.
    raw_mass: f64,
    /// True if the mean-zero projection had to be applied.
    projected: bool,
}

impl CorrectorSource {
    /// Wrap a custom source, projecting out any residual mass along Q_0.
    ///
    /// Zero total mass is the solvability condition; a violation beyond
    /// 1e-10 indicates a malformed source and is repaired with a warning
    /// on stderr. Tiny violations (> 1e-12) are repaired silently so the
    /// stored source always satisfies |M[R_1]| <= 1e-12.
    pub fn custom(mesh: &Mesh, q0: &GridField, field: GridField) -> Self {
        Self::with_kind(mesh, q0, field, SourceKind::Custom)
    }

    fn with_kind(mesh: &Mesh, q0: &GridField, mut field: GridField, kind: SourceKind) -> Self {
        let raw_mass = total_mass(mesh, &field);
        let mut projected = false;
        if raw_mass.abs() > 1e-12 {
            if raw_mass.abs() > 1e-10 {
                eprintln!(
                    "warning: corrector source has mass {raw_mass:.3e}; projecting onto the mean-zero constraint"
                );
            }
            field.axpy_in_place(-raw_mass, q0);
            projected = true;
        }
        Self {
            kind,
            field,
            raw_mass,
            projected,
        }
    }

    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn was_projected(&self) -> bool {
        self.projected
    }
}

/// Drift source R_1 = Lambda_1(y_i)(<Q_0>_i - Q_0), branch pair included.
pub fn source_drift(mesh: &Mesh, model: &TumblingModel, q0: &GridField) -> CorrectorSource {
    let avgs = row_averages(mesh, q0);
    let mut field = GridField::zeros(mesh);
    for j in 0..mesh.n_cols() {
        for i in 0..mesh.n_rows() {
            field.set(i, j, model.lambda1(mesh.y(i)) * (avgs[i] - q0.get(i, j)));
        }
    }
    for i in 0..mesh.n_rows() {
        let l1 = model.lambda1(mesh.y(i));
        field.set_diag(
            i,
            l1 * (avgs[i] - q0.diag_left(i)),
            l1 * (avgs[i] - q0.diag_right(i)),
        );
    }
    CorrectorSource::with_kind(mesh, q0, field, SourceKind::Drift)
}

/// Diffusion source R_1 = (v_j - v_0) Q_0.
pub fn source_diffusion(mesh: &Mesh, q0: &GridField, v0: f64) -> CorrectorSource {
    let mut field = GridField::zeros(mesh);
    for j in 0..mesh.n_cols() {
        let w = mesh.v(j) - v0;
        for i in 0..mesh.n_rows() {
            field.set(i, j, w * q0.get(i, j));
        }
    }
    for i in 0..mesh.n_rows() {
        let w = mesh.v(mesh.diag_col(i)) - v0;
        field.set_diag(i, w * q0.diag_left(i), w * q0.diag_right(i));
    }
    CorrectorSource::with_kind(mesh, q0, field, SourceKind::Diffusion)
}

/// Solve T_0 h = R_1 subject to M[h] = 0 by pseudo-time relaxation.
///
/// Starts from h = 0 (inside the constraint manifold), adds the source
/// explicitly each step, and after every step subtracts r * Q_0 where
/// r = M[h] so the iterate stays mean-zero. Convergence uses the same
/// displacement metric and divergence guards as the equilibrium solve;
/// `cfg.init` is ignored.
pub fn solve_corrector(
    mesh: &Mesh,
    model: &TumblingModel,
    q0: &GridField,
    src: &CorrectorSource,
    cfg: &SolverConfig,
) -> Result<(GridField, SolveReport)> {
    cfg.validate(mesh)?;
    let dt = cfg.dt_for(mesh);
    let op = Operator::new(mesh, model, dt);
    let q0_avgs = row_averages(mesh, q0);

    let mut cur = GridField::zeros(mesh);
    let mut avgs = vec![0.0; mesh.n_rows()];
    let mut next = GridField::zeros(mesh);
    let mut snapshot = cur.clone();
    let mut gain = vec![0.0; mesh.n_rows()];
    let mut mean_dev: f64 = 0.0;
    let mut prev_metric: Option<f64> = None;
    let mut final_residual = f64::INFINITY;
    let mut converged = false;
    let mut steps = 0u64;

    while steps < cfg.max_steps {
        steps += 1;
        for ((g, a), l) in gain.iter_mut().zip(&avgs).zip(&op.lam0) {
            *g = l * a;
        }
        let rowsum = op.sweep(mesh, &cur, 1.0, &gain, Some(src.field()), &mut next);
        let quarter_dv = 0.25 * mesh.dv();
        let tilde_avgs: Vec<f64> = rowsum.iter().map(|s| s * quarter_dv).collect();
        let r = simpson_sum(&tilde_avgs, mesh.dy());
        if !r.is_finite() {
            return Err(Error::NumericFailure {
                context: "corrector solve",
                reason: format!("total mass became {r} at step {steps}"),
            });
        }
        next.axpy_in_place(-r, q0);
        std::mem::swap(&mut cur, &mut next);
        avgs = tilde_avgs
            .iter()
            .zip(&q0_avgs)
            .map(|(t, q)| t - r * q)
            .collect();

        if steps % cfg.cadence as u64 == 0 {
            let metric = metric_scaled(mesh, &cur, 1.0, &snapshot, 1.0);
            if !metric.is_finite() {
                return Err(Error::NumericFailure {
                    context: "corrector solve",
                    reason: format!("non-finite convergence metric at step {steps}"),
                });
            }
            mean_dev = mean_dev.max(mass_deviation(mesh, &avgs, 1.0, 0.0));
            final_residual = metric;
            if metric < cfg.tol {
                converged = true;
                break;
            }
            if let Some(prev) = prev_metric {
                if metric > 10.0 * prev {
                    return Err(Error::NumericFailure {
                        context: "corrector solve",
                        reason: format!("metric grew from {prev:.3e} to {metric:.3e}; divergence"),
                    });
                }
            }
            prev_metric = Some(metric);
            snapshot.clone_from(&cur);
        }
    }
    if !converged && final_residual.is_infinite() {
        final_residual = metric_scaled(mesh, &cur, 1.0, &snapshot, 1.0);
    }

    Ok((
        cur,
        SolveReport {
            steps_taken: steps,
            final_residual,
            converged,
            mass_history_max_deviation: mean_dev,
        },
    ))
}

/// Helper around the entropy consequence: the (v - v_0)-moment of a field.
pub(crate) fn v_shift_moment(mesh: &Mesh, field: &GridField, v0: f64) -> f64 {
    let profile: Vec<f64> = (0..mesh.n_rows())
        .map(|i| velocity_moment(mesh, field, i, |v| v - v0))
        .collect();
    simpson_sum(&profile, mesh.dy())
}
