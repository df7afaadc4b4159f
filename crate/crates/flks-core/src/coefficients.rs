//! Macroscopic drift and diffusion coefficients of the three scaling
//! regimes, all in d = 1 where the diffusion tensors reduce to scalars.
//!
//! Moments of Q_0 and of correctors use the mesh quadrature (trapezoid in
//! v, Simpson in y) so table values are reproducible method-for-method.
//! The regime-II velocity integral involves no mesh field and uses an
//! independent adaptive quadrature instead.
//!
//! All mesh-based formulas follow the normalization M[Q] = int <Q> dy = 1,
//! which differs from int int Q dv dy = 1 by the factor |V| = 2; the
//! prefactors below absorb it so the numbers match the analytic regime
//! definitions.

use crate::corrector::{self, source_diffusion, source_drift};
use crate::equilibrium::{solve_equilibrium, SolverConfig};
use crate::error::{Error, Result};
use crate::mesh::{simpson_sum, velocity_moment, GridField, Mesh};
use crate::tumbling::TumblingModel;

/// Leading-order average velocity v_0 = int <v Q_0> dy.
pub fn mean_velocity(mesh: &Mesh, q0: &GridField) -> f64 {
    let profile: Vec<f64> = (0..mesh.n_rows())
        .map(|i| velocity_moment(mesh, q0, i, |v| v))
        .collect();
    simpson_sum(&profile, mesh.dy())
}

/// Drift c_{0,2} computed directly from Q_0; valid only for constant
/// Lambda_0 (chi = 0), where (T_0^-1)* v = v / lambda0_bar:
/// c_{0,2} = -(1/lambda0_bar) int <v Lambda_1(y) Q_0> dy.
pub fn drift_c02_direct(mesh: &Mesh, model: &TumblingModel, q0: &GridField) -> Result<f64> {
    if model.chi() != 0.0 {
        return Err(Error::InvalidParameter {
            name: "chi",
            reason: format!(
                "the direct drift formula requires constant Lambda_0 (chi = 0), got chi = {}",
                model.chi()
            ),
        });
    }
    let profile: Vec<f64> = (0..mesh.n_rows())
        .map(|i| model.lambda1(mesh.y(i)) * velocity_moment(mesh, q0, i, |v| v))
        .collect();
    Ok(-simpson_sum(&profile, mesh.dy()) / model.lambda0_bar())
}

/// Drift c_{0,2} as the (v - v_0)-moment of the drift corrector h.
///
/// Since M[h] = 0 this equals int <v h> dy; the shifted form is kept so
/// the diffusion and drift moments share one definition.
pub fn drift_c02_corrector(mesh: &Mesh, h: &GridField, v0: f64) -> f64 {
    corrector::v_shift_moment(mesh, h, v0)
}

/// Diffusion D_{0,2} = int <(v - v_0) h_diff> dy, h_diff the corrector of
/// the diffusion source (v - v_0) Q_0.
pub fn diffusion_d02(mesh: &Mesh, h_diff: &GridField, v0: f64) -> f64 {
    corrector::v_shift_moment(mesh, h_diff, v0)
}

/// Regime II (very fast adaptation, very stiff response):
/// D_{0,3} = (1/lambda0_bar) int v^2 dv = 2/(3 lambda0_bar),
/// c_{0,3} = (1/lambda0_bar) int v Lambda_1(v G) dv.
pub fn coeffs_case2(model: &TumblingModel, g: f64) -> (f64, f64) {
    let d03 = 2.0 / (3.0 * model.lambda0_bar());
    let c03 =
        adaptive_simpson(&|v| v * model.lambda1(v * g), -1.0, 1.0, 1e-13) / model.lambda0_bar();
    (d03, c03)
}

/// Regime III (moderate adaptation and response):
/// D_{0,4} = (1/Lambda(0)) int v^2 dv, c_{0,4} = -G Lambda'(0)/Lambda(0)^2.
///
/// For the tanh family Lambda(0) = lambda0_bar and Lambda'(0) =
/// -lambda0_bar chi, so c_{0,4} = G chi / lambda0_bar, exactly linear in G.
pub fn coeffs_case3(model: &TumblingModel, g: f64) -> (f64, f64) {
    let lam_at_zero = model.lambda0(0.0);
    let d04 = 2.0 / (3.0 * lam_at_zero);
    let c04 = -g * model.lambda0_prime_at_zero() / (lam_at_zero * lam_at_zero);
    (d04, c04)
}

/// Adaptive Simpson quadrature with interval-halving error control.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// All coefficients of one configuration plus the mesh parameters, ready
/// for a CSV row.
#[derive(Debug, Clone)]
pub struct CoefficientReport {
    pub g: f64,
    pub lambda0_bar: f64,
    pub chi: f64,
    pub i_half: usize,
    pub j_half: usize,
    pub v0: f64,
    /// Direct route, defined only for chi = 0.
    pub c02_direct: Option<f64>,
    pub c02_corrector: f64,
    /// |direct - corrector| / |corrector| where both routes exist.
    pub c02_rel_diff: Option<f64>,
    pub d02: f64,
    pub d03: f64,
    pub c03: f64,
    pub d04: f64,
    pub c04: f64,
}

/// Full pipeline: equilibrium, both correctors, and the closed forms.
pub fn compute_report(
    mesh: &Mesh,
    model: &TumblingModel,
    cfg: &SolverConfig,
) -> Result<CoefficientReport> {
    let (q0, report) = solve_equilibrium(mesh, model, cfg)?;
    if !report.converged {
        return Err(Error::NumericFailure {
            context: "coefficient pipeline",
            reason: format!(
                "equilibrium did not converge in {} steps (residual {:.3e})",
                report.steps_taken, report.final_residual
            ),
        });
    }
    report_from_q0(mesh, model, cfg, &q0)
}

/// Coefficients from an already-converged equilibrium.
pub fn report_from_q0(
    mesh: &Mesh,
    model: &TumblingModel,
    cfg: &SolverConfig,
    q0: &GridField,
) -> Result<CoefficientReport> {
    let v0 = mean_velocity(mesh, q0);

    let drift_src = source_drift(mesh, model, q0);
    let (h_drift, rep_drift) = corrector::solve_corrector(mesh, model, q0, &drift_src, cfg)?;
    let diff_src = source_diffusion(mesh, q0, v0);
    let (h_diff, rep_diff) = corrector::solve_corrector(mesh, model, q0, &diff_src, cfg)?;
    if !rep_drift.converged || !rep_diff.converged {
        return Err(Error::NumericFailure {
            context: "coefficient pipeline",
            reason: "a corrector solve did not converge".into(),
        });
    }

    let c02_corrector = drift_c02_corrector(mesh, &h_drift, v0);
    let c02_direct = if model.chi() == 0.0 {
        Some(drift_c02_direct(mesh, model, q0)?)
    } else {
        None
    };
    let c02_rel_diff = c02_direct.map(|d| (d - c02_corrector).abs() / c02_corrector.abs());
    let d02 = diffusion_d02(mesh, &h_diff, v0);
    let (d03, c03) = coeffs_case2(model, mesh.g());
    let (d04, c04) = coeffs_case3(model, mesh.g());

    Ok(CoefficientReport {
        g: mesh.g(),
        lambda0_bar: model.lambda0_bar(),
        chi: model.chi(),
        i_half: mesh.i_half(),
        j_half: mesh.j_half(),
        v0,
        c02_direct,
        c02_corrector,
        c02_rel_diff,
        d02,
        d03,
        c03,
        d04,
        c04,
    })
}

/// One row of a drift sweep over chemical gradients.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub g: f64,
    pub v0: Option<f64>,
    pub c02_direct: Option<f64>,
    pub c02_corrector: Option<f64>,
    pub d02: Option<f64>,
    /// None on success, otherwise the failure description.
    pub error: Option<String>,
}

/// Run the full equilibrium + corrector pipeline for each gradient.
///
/// Rows are emitted in input order; failures are recorded in the row and
/// the sweep continues.
pub fn drift_sweep(
    g_list: &[f64],
    model: &TumblingModel,
    i_half: usize,
    j_half: usize,
    cfg: &SolverConfig,
) -> Vec<SweepRow> {
    g_list
        .iter()
        .map(|&g| match sweep_one(g, model, i_half, j_half, cfg) {
            Ok(row) => row,
            Err(e) => SweepRow {
                g,
                v0: None,
                c02_direct: None,
                c02_corrector: None,
                d02: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn sweep_one(
    g: f64,
    model: &TumblingModel,
    i_half: usize,
    j_half: usize,
    cfg: &SolverConfig,
) -> Result<SweepRow> {
    let mesh = Mesh::build(g, i_half, j_half)?;
    let report = compute_report(&mesh, model, cfg)?;
    Ok(SweepRow {
        g,
        v0: Some(report.v0),
        c02_direct: report.c02_direct,
        c02_corrector: Some(report.c02_corrector),
        d02: Some(report.d02),
        error: None,
    })
}
