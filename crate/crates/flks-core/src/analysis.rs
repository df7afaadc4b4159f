//! Quantitative verification of the equilibrium's analytic properties:
//! blow-up/decay exponents, origin symmetry, the flux identity, mesh
//! convergence studies, and a uniqueness probe.

use crate::coefficients::drift_c02_direct;
use crate::equilibrium::{
    convergence_metric, solve_equilibrium, InitPolicy, SolverConfig,
};
use crate::error::{Error, Result};
use crate::mesh::{velocity_average, velocity_moment, GridField, Mesh};
use crate::tumbling::TumblingModel;

/// Least-squares power-law fit in log-log coordinates.
#[derive(Debug, Clone)]
pub struct ExponentFit {
    pub exponent: f64,
    pub r_squared: f64,
    /// (distance_min, distance_max) actually requested.
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Distance window for the exponent fits, measured from the singular point.
///
/// The default spans [3 dy, G/4]: the nearest nodes are polluted by the
/// one-sided stencil, the far field by the global shape.
#[derive(Debug, Clone, Copy)]
pub struct FitWindow {
    pub min_distance: f64,
    pub max_distance: f64,
}

impl FitWindow {
    pub fn default_for(mesh: &Mesh) -> Self {
        Self {
            min_distance: 3.0 * mesh.dy(),
            max_distance: mesh.g() / 4.0,
        }
    }
}

const MIN_FIT_POINTS: usize = 5;

fn power_fit(points: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientFitPoints {
            needed: MIN_FIT_POINTS,
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(d, q)| (d.ln(), q.ln()))
        .collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &logs {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    let exponent = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ExponentFit {
        exponent,
        r_squared,
        window,
        n_points: points.len(),
    })
}

/// Fit Q(y, v_fixed) ~ (v_fixed G - y)^p on the side v G - y > 0.
///
/// `v_fixed` must be a velocity node; rows whose distance to the diagonal
/// falls inside the window contribute, positive values only (the blow-up
/// side is strictly positive for a converged equilibrium).
pub fn fit_blowup_exponent(
    mesh: &Mesh,
    q0: &GridField,
    v_fixed: f64,
    window: FitWindow,
) -> Result<ExponentFit> {
    let j = mesh.column_of(v_fixed)?;
    let vg = mesh.v(j) * mesh.g();
    let mut points = Vec::new();
    for i in 1..mesh.n_rows() - 1 {
        if mesh.diag_col(i) == j {
            continue;
        }
        let d = vg - mesh.y(i);
        if d >= window.min_distance && d <= window.max_distance {
            let q = q0.get(i, j);
            if q > 0.0 {
                points.push((d, q));
            }
        }
    }
    power_fit(&points, (window.min_distance, window.max_distance))
}

/// Fit Q(y, v_fixed) ~ (G - |y|)^alpha near the support edge y = -G.
pub fn fit_decay_exponent(
    mesh: &Mesh,
    q0: &GridField,
    v_fixed: f64,
    window: FitWindow,
) -> Result<ExponentFit> {
    let j = mesh.column_of(v_fixed)?;
    let g = mesh.g();
    let mut points = Vec::new();
    for i in 1..mesh.n_rows() - 1 {
        if mesh.diag_col(i) == j {
            continue;
        }
        let d = g - mesh.y(i).abs();
        if mesh.y(i) < 0.0 && d >= window.min_distance && d <= window.max_distance {
            let q = q0.get(i, j);
            if q > 0.0 {
                points.push((d, q));
            }
        }
    }
    power_fit(&points, (window.min_distance, window.max_distance))
}

/// Max |Q(y, v) - Q(-y, -v)| over the lattice; branch pairs swap sides.
///
/// Zero (to stopping error) for even Lambda_0, materially nonzero once
/// chi != 0.
pub fn check_symmetry(mesh: &Mesh, q0: &GridField) -> f64 {
    let nr = mesh.n_rows();
    let nc = mesh.n_cols();
    let ratio = mesh.ratio();
    let mut max = 0.0f64;
    for j in 0..nc {
        let diag_i = if j % ratio == 0 { j / ratio } else { usize::MAX };
        for i in 0..nr {
            if i == diag_i {
                continue;
            }
            let d = (q0.get(i, j) - q0.get(nr - 1 - i, nc - 1 - j)).abs();
            max = max.max(d);
        }
    }
    for i in 0..nr {
        let mirror = nr - 1 - i;
        max = max.max((q0.diag_left(i) - q0.diag_right(mirror)).abs());
        max = max.max((q0.diag_right(i) - q0.diag_left(mirror)).abs());
    }
    max
}

/// Max over interior rows of |G <v Q>_i - y_i <Q>_i|.
///
/// The converged equilibrium satisfies G <v Q> = y <Q> row-wise in the
/// continuum; the discrete residual shrinks under refinement.
pub fn check_flux_identity(mesh: &Mesh, q0: &GridField) -> f64 {
    let mut max = 0.0f64;
    for i in 1..mesh.n_rows() - 1 {
        let avg = velocity_average(mesh, q0, i);
        let vavg = velocity_moment(mesh, q0, i, |v| v);
        max = max.max((mesh.g() * vavg - mesh.y(i) * avg).abs());
    }
    max
}

/// One row of a mesh-refinement study against a fine reference.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub i_half: usize,
    /// |c02(I) - c02(ref)| / |c02(ref)|, direct route.
    pub c02_rel_err: Option<f64>,
    /// max_i |<Q>_i(I) - <Q>_i(ref)| over coincident rows.
    pub q_max_err: Option<f64>,
    pub error: Option<String>,
}

/// Refinement study: solve at each I (J = I) and at `i_ref`, and compare
/// the direct drift and the row averages against the reference.
///
/// Every I must divide `i_ref` so coarse rows coincide with reference rows
/// and no interpolation error enters. Per-row failures are recorded and
/// the study continues. Constant Lambda_0 only (the direct drift route).
pub fn convergence_study(
    model: &TumblingModel,
    g: f64,
    i_list: &[usize],
    i_ref: usize,
    cfg: &SolverConfig,
) -> Result<Vec<ConvergenceRow>> {
    for &i in i_list {
        if i == 0 || i_ref % i != 0 {
            return Err(Error::InvalidParameter {
                name: "i_list",
                reason: format!("every I must divide the reference {i_ref}; offender: {i}"),
            });
        }
    }
    let (ref_c02, ref_avgs) = study_point(model, g, i_ref, cfg)?;
    let rows = i_list
        .iter()
        .map(|&i| match study_point(model, g, i, cfg) {
            Ok((c02, avgs)) => {
                let stride = i_ref / i;
                let q_max_err = avgs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (a - ref_avgs[k * stride]).abs())
                    .fold(0.0f64, f64::max);
                ConvergenceRow {
                    i_half: i,
                    c02_rel_err: Some((c02 - ref_c02).abs() / ref_c02.abs()),
                    q_max_err: Some(q_max_err),
                    error: None,
                }
            }
            Err(e) => ConvergenceRow {
                i_half: i,
                c02_rel_err: None,
                q_max_err: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(rows)
}

fn study_point(
    model: &TumblingModel,
    g: f64,
    i_half: usize,
    cfg: &SolverConfig,
) -> Result<(f64, Vec<f64>)> {
    let mesh = Mesh::build(g, i_half, i_half)?;
    let (q0, report) = solve_equilibrium(&mesh, model, cfg)?;
    if !report.converged {
        return Err(Error::NumericFailure {
            context: "convergence study",
            reason: format!("I = {i_half} did not converge"),
        });
    }
    let c02 = drift_c02_direct(&mesh, model, &q0)?;
    let avgs: Vec<f64> = (0..mesh.n_rows())
        .map(|i| velocity_average(&mesh, &q0, i))
        .collect();
    Ok((c02, avgs))
}

/// Distance (in the displacement metric) between the equilibria reached
/// from two initializations; near zero by uniqueness.
pub fn uniqueness_check(
    mesh: &Mesh,
    model: &TumblingModel,
    cfg: &SolverConfig,
    init_a: GridField,
    init_b: GridField,
) -> Result<f64> {
    let cfg_a = SolverConfig {
        init: InitPolicy::Custom(init_a),
        ..cfg.clone()
    };
    let cfg_b = SolverConfig {
        init: InitPolicy::Custom(init_b),
        ..cfg.clone()
    };
    let (qa, ra) = solve_equilibrium(mesh, model, &cfg_a)?;
    let (qb, rb) = solve_equilibrium(mesh, model, &cfg_b)?;
    if !ra.converged || !rb.converged {
        return Err(Error::NumericFailure {
            context: "uniqueness check",
            reason: "one of the two solves did not converge".into(),
        });
    }
    Ok(convergence_metric(mesh, &qa, &qb))
}

/// Off-center positive bump over a uniform background, for init studies.
pub fn bump_init(mesh: &Mesh) -> GridField {
    GridField::from_fn(mesh, |y, v| {
        let dy = y / mesh.g() - 0.35;
        let dv = v + 0.25;
        1.0 / (2.0 * mesh.g()) * (1.0 + 3.0 * (-12.0 * (dy * dy + dv * dv)).exp())
    })
}
