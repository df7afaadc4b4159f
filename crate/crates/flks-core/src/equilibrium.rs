//! Steady-state solver for the kinetic equilibrium Q_0.
//!
//! The stationary equation  d/dy((vG - y) Q) = Lambda_0(y)(<Q> - Q)  is
//! relaxed in pseudo-time with a semi-implicit scheme: the one-sided
//! transport differences and the collision loss Lambda_0 Q are implicit,
//! the gain Lambda_0 <Q> is explicit. For each velocity column the region
//! y <= vG is swept upward with backward differences (first order at i = 1,
//! second order above) and the region y >= vG downward with the mirrored
//! forward differences, so every column reduces to a forward or backward
//! substitution. Diagonal nodes are solved once per side with W Q pinned
//! to zero, producing the left/right branch pair.
//!
//! After every step the field is renormalized to unit mass; the iteration
//! stops when the discrete L1 distance between states `cadence` steps
//! apart falls below the tolerance.
//!
//! Internally the renormalization is carried as a scalar multiplier that
//! is folded into the next step's right-hand side instead of rescaling
//! the whole array; the returned field is materialized with the factor
//! applied. Columns are swept in fixed-size chunks and chunk partial sums
//! are reduced in chunk order, so results do not depend on the number of
//! worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{simpson_sum, total_mass, velocity_average, GridField, Mesh};
use crate::tumbling::TumblingModel;

/// Transport weight W_{i,j} = v_j G - y_i; exactly zero on the diagonal.
pub fn upwind_weight(mesh: &Mesh, i: usize, j: usize) -> f64 {
    if mesh.diag_col(i) == j {
        0.0
    } else {
        mesh.v(j) * mesh.g() - mesh.y(i)
    }
}

/// Initial state for the pseudo-time iteration.
#[derive(Debug, Clone)]
pub enum InitPolicy {
    /// Constant field 1/(2G), the scheme's default.
    Uniform,
    /// Caller-supplied positive field; normalized before the first step.
    Custom(GridField),
}

/// Pseudo-time iteration parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Time step; `None` selects the reference choice dy/(2G).
    pub dt: Option<f64>,
    /// Convergence tolerance for the L1 displacement metric.
    pub tol: f64,
    /// Steps between convergence checks (the metric compares states this
    /// many steps apart).
    pub cadence: usize,
    /// Iteration cap; exceeding it reports `converged = false`.
    pub max_steps: u64,
    pub init: InitPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: None,
            tol: 1e-10,
            cadence: 100,
            max_steps: 10_000_000,
            init: InitPolicy::Uniform,
        }
    }
}

impl SolverConfig {
    pub fn dt_for(&self, mesh: &Mesh) -> f64 {
        self.dt.unwrap_or(mesh.dy() / (2.0 * mesh.g()))
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let dt = self.dt_for(mesh);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive and finite, got {dt}"),
            });
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive and finite, got {}", self.tol),
            });
        }
        if self.cadence == 0 {
            return Err(Error::InvalidParameter {
                name: "cadence",
                reason: "must be at least 1".into(),
            });
        }
        if self.max_steps < self.cadence as u64 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                reason: format!(
                    "must be at least the cadence ({}), got {}",
                    self.cadence, self.max_steps
                ),
            });
        }
        Ok(())
    }
}

/// Outcome bookkeeping for one pseudo-time solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub steps_taken: u64,
    /// Last value of the displacement metric.
    pub final_residual: f64,
    pub converged: bool,
    /// Equilibrium: max |M[Q] - 1| seen after normalization.
    /// Corrector: max |M[h]| seen after the mean-zero correction.
    pub mass_history_max_deviation: f64,
}

/// Precomputed implicit operator for one (mesh, model, dt) triple.
///
/// Stores Lambda_0 per row and the reciprocal of every node's implicit
/// denominator so the sweeps run without divisions.
pub(crate) struct Operator {
    pub(crate) dt: f64,
    pub(crate) lam0: Vec<f64>,
    inv_den: Vec<f64>,
    inv_2dy: f64,
    /// Stand-in source row when no source field is given; keeps the
    /// inner loops branch-free.
    zero_row: Vec<f64>,
    /// Trapezoid column weights (1 at v = -1 and 1, 2 inside), before dv/4.
    wcol: Vec<f64>,
    /// Fixed column-chunk boundaries for the parallel sweeps. Partial
    /// results are reduced in chunk order, so results are independent of
    /// the number of worker threads.
    chunks: Vec<(usize, usize)>,
}

/// Per-chunk sweep output.
struct ChunkResult {
    rowsum: Vec<f64>,
    diags: Vec<(usize, f64, f64)>,
}

/// Raw view of the output buffer shared across workers. Each chunk only
/// writes its own column range of every row, so writes never overlap.
struct SharedOut {
    ptr: *mut f64,
    len: usize,
}
unsafe impl Send for SharedOut {}
unsafe impl Sync for SharedOut {}

impl SharedOut {
    /// Callers must stay inside their chunk's disjoint index set.
    #[inline(always)]
    unsafe fn write(&self, idx: usize, v: f64) {
        debug_assert!(idx < self.len);
        unsafe { *self.ptr.add(idx) = v }
    }
}

impl Operator {
    pub(crate) fn new(mesh: &Mesh, model: &TumblingModel, dt: f64) -> Self {
        let nr = mesh.n_rows();
        let nc = mesh.n_cols();
        let last = nr - 1;
        let ratio = mesh.ratio();
        let lam0: Vec<f64> = (0..nr).map(|i| model.lambda0(mesh.y(i))).collect();
        let base: Vec<f64> = lam0.iter().map(|l| 1.0 / dt + l).collect();
        let inv_dy = 1.0 / mesh.dy();
        let mut inv_den = vec![0.0; nr * nc];
        for i in 1..last {
            let yi = mesh.y(i);
            let row = &mut inv_den[i * nc..(i + 1) * nc];
            for (j, slot) in row.iter_mut().enumerate() {
                let w = mesh.v(j) * mesh.g() - yi;
                let den = if i * ratio <= j {
                    // Backward region (w >= 0, zero exactly on the diagonal).
                    if i == 1 {
                        base[i] + w * inv_dy
                    } else {
                        base[i] + 1.5 * w * inv_dy
                    }
                } else if i == last - 1 {
                    // Forward region (w < 0).
                    base[i] - w * inv_dy
                } else {
                    base[i] - 1.5 * w * inv_dy
                };
                *slot = 1.0 / den;
            }
        }
        let wcol = (0..nc)
            .map(|j| if j == 0 || j == nc - 1 { 1.0 } else { 2.0 })
            .collect();
        let n_chunks = (nc / 128).clamp(1, 32);
        let chunk_w = nc / n_chunks;
        let rem = nc % n_chunks;
        let mut chunks = Vec::with_capacity(n_chunks);
        let mut start = 0;
        for c in 0..n_chunks {
            let w = chunk_w + usize::from(c < rem);
            chunks.push((start, start + w));
            start += w;
        }
        Self {
            dt,
            lam0,
            inv_den,
            inv_2dy: 0.5 * inv_dy,
            zero_row: vec![0.0; nc],
            wcol,
            chunks,
        }
    }

    /// One semi-implicit step: solve the per-column triangular systems.
    ///
    /// `prev` is read as `prev_scale * prev`; `gain` must hold
    /// Lambda_0(y_i) * <Q_scaled>_i per row. Writes the new (unscaled)
    /// state into `next` (branches and diagonal slots included) and
    /// returns the trapezoid row sums of the new state, with the branch
    /// pair already substituted for the diagonal weight; multiplying by
    /// dv/4 yields the new row averages.
    pub(crate) fn sweep(
        &self,
        mesh: &Mesh,
        prev: &GridField,
        prev_scale: f64,
        gain: &[f64],
        src: Option<&GridField>,
        next: &mut GridField,
    ) -> Vec<f64> {
        let nr = mesh.n_rows();
        let nc = mesh.n_cols();
        let out = SharedOut {
            ptr: next.values.as_mut_ptr(),
            len: next.values.len(),
        };
        let results: Vec<ChunkResult> = self
            .chunks
            .par_iter()
            .map(|&(j0, j1)| self.sweep_chunk(mesh, prev, prev_scale, gain, src, j0, j1, &out))
            .collect();

        let mut rowsum = vec![0.0; nr];
        for res in &results {
            for (acc, p) in rowsum.iter_mut().zip(&res.rowsum) {
                *acc += p;
            }
            for &(i, l, r) in &res.diags {
                next.diag_left[i] = l;
                next.diag_right[i] = r;
                next.values[i * nc + mesh.diag_col(i)] = 0.5 * (l + r);
            }
        }
        rowsum
    }

    /// Both one-sided substitutions restricted to columns [j0, j1).
    ///
    /// The recurrences run along y within each column, so the passes walk
    /// rows (ascending for the backward region y <= vG, descending for the
    /// forward region) while the inner loops run over the chunk's columns
    /// and vectorize. The W*Q products of the two preceding rows live in a
    /// pair of per-column buffers that swap roles between rows. Diagonal
    /// columns are peeled off: the branch pair are independent unknowns
    /// whose previous value and source come from the branch arrays.
    #[allow(clippy::too_many_arguments)]
    fn sweep_chunk(
        &self,
        mesh: &Mesh,
        prev: &GridField,
        prev_scale: f64,
        gain: &[f64],
        src: Option<&GridField>,
        j0: usize,
        j1: usize,
        out: &SharedOut,
    ) -> ChunkResult {
        let nr = mesh.n_rows();
        let nc = mesh.n_cols();
        let last = nr - 1;
        let ratio = mesh.ratio();
        let coef = prev_scale / self.dt;
        let inv_2dy = self.inv_2dy;
        let width = j1 - j0;
        let vg: Vec<f64> = (j0..j1).map(|j| mesh.v(j) * mesh.g()).collect();
        let mut rowsum = vec![0.0; nr];
        let mut qrow = vec![0.0; width];
        // W*Q of the previous row (a) and the row before it (b).
        let mut wq_a = vec![0.0; width];
        let mut wq_b = vec![0.0; width];

        // Rows whose diagonal column falls inside this chunk.
        let d_lo = ((j0 + ratio - 1) / ratio).max(1);
        let d_hi = ((j1 - 1) / ratio).min(last - 1);
        let n_diag = (d_hi + 1).saturating_sub(d_lo);
        let mut diag_l = vec![0.0; n_diag];
        let mut diag_r = vec![0.0; n_diag];

        // Backward pass over y_i <= v_j G (column suffix j >= ratio * i).
        for i in 1..last {
            let jd = i * ratio;
            if jd >= j1 {
                break;
            }
            let yi = mesh.y_nodes()[i];
            let gi = gain[i];
            let base = i * nc;
            let prev_row = prev.row(i);
            let inv_row = &self.inv_den[base..base + nc];
            let src_row: &[f64] = src.map_or(&self.zero_row, |s| s.row(i));
            if jd >= j0 {
                let k = jd - j0;
                let pv = prev.diag_left[i];
                let sv = src.map_or(0.0, |sf| sf.diag_left[i]);
                let num = if i == 1 {
                    coef * pv + gi + sv
                } else {
                    coef * pv + (4.0 * wq_a[k] - wq_b[k]) * inv_2dy + gi + sv
                };
                let ql = num * inv_row[jd];
                rowsum[i] += ql;
                diag_l[i - d_lo] = ql;
            }
            let lo = (jd + 1).max(j0);
            if lo < j1 {
                let off = lo - j0;
                let len = j1 - lo;
                let pr = &prev_row[lo..j1];
                let ir = &inv_row[lo..j1];
                let sr = &src_row[lo..j1];
                let vgs = &vg[off..];
                let qs = &mut qrow[off..off + len];
                let a = &mut wq_a[off..off + len];
                let b = &mut wq_b[off..off + len];
                if i == 1 {
                    for k in 0..len {
                        let q = (coef * pr[k] + gi + sr[k]) * ir[k];
                        b[k] = (vgs[k] - yi) * q;
                        qs[k] = q;
                    }
                } else {
                    for k in 0..len {
                        let num =
                            coef * pr[k] + (4.0 * a[k] - b[k]) * inv_2dy + gi + sr[k];
                        let q = num * ir[k];
                        b[k] = (vgs[k] - yi) * q;
                        qs[k] = q;
                    }
                }
                for (k, &q) in qs.iter().enumerate() {
                    unsafe { out.write(base + lo + k, q) };
                }
                rowsum[i] += weighted_sum(&self.wcol[lo..j1], qs);
            }
            std::mem::swap(&mut wq_a, &mut wq_b);
        }

        // Forward pass over y_i >= v_j G (column prefix j <= ratio * i).
        wq_a.fill(0.0);
        wq_b.fill(0.0);
        for i in (1..last).rev() {
            let jd = i * ratio;
            if jd < j0 {
                break;
            }
            let yi = mesh.y_nodes()[i];
            let gi = gain[i];
            let base = i * nc;
            let prev_row = prev.row(i);
            let inv_row = &self.inv_den[base..base + nc];
            let src_row: &[f64] = src.map_or(&self.zero_row, |s| s.row(i));
            if jd < j1 {
                let k = jd - j0;
                let pv = prev.diag_right[i];
                let sv = src.map_or(0.0, |sf| sf.diag_right[i]);
                let num = if i == last - 1 {
                    coef * pv + gi + sv
                } else {
                    coef * pv - (4.0 * wq_a[k] - wq_b[k]) * inv_2dy + gi + sv
                };
                let qr = num * inv_row[jd];
                rowsum[i] += qr;
                diag_r[i - d_lo] = qr;
            }
            let hi = jd.min(j1);
            if j0 < hi {
                let len = hi - j0;
                let pr = &prev_row[j0..hi];
                let ir = &inv_row[j0..hi];
                let sr = &src_row[j0..hi];
                let vgs = &vg[..len];
                let qs = &mut qrow[..len];
                let a = &mut wq_a[..len];
                let b = &mut wq_b[..len];
                if i == last - 1 {
                    for k in 0..len {
                        let q = (coef * pr[k] + gi + sr[k]) * ir[k];
                        b[k] = (vgs[k] - yi) * q;
                        qs[k] = q;
                    }
                } else {
                    for k in 0..len {
                        let num =
                            coef * pr[k] - (4.0 * a[k] - b[k]) * inv_2dy + gi + sr[k];
                        let q = num * ir[k];
                        b[k] = (vgs[k] - yi) * q;
                        qs[k] = q;
                    }
                }
                for (k, &q) in qs.iter().enumerate() {
                    unsafe { out.write(base + j0 + k, q) };
                }
                rowsum[i] += weighted_sum(&self.wcol[j0..hi], qs);
            }
            std::mem::swap(&mut wq_a, &mut wq_b);
        }

        let diags = (d_lo..=d_hi.min(last - 1))
            .filter(|_| n_diag > 0)
            .map(|i| (i, diag_l[i - d_lo], diag_r[i - d_lo]))
            .collect();
        ChunkResult { rowsum, diags }
    }
}

/// Fixed-structure weighted sum: four independent partial sums plus a
/// tail, reduced pairwise. The grouping never depends on thread count.
fn weighted_sum(w: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), q.len());
    let mut acc = [0.0f64; 4];
    let chunks = q.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += w[k] * q[k];
        acc[1] += w[k + 1] * q[k + 1];
        acc[2] += w[k + 2] * q[k + 2];
        acc[3] += w[k + 3] * q[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..q.len() {
        tail += w[k] * q[k];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Row averages by the same trapezoid the solver uses, one per row.
pub(crate) fn row_averages(mesh: &Mesh, field: &GridField) -> Vec<f64> {
    (0..mesh.n_rows())
        .map(|i| velocity_average(mesh, field, i))
        .collect()
}

/// One semi-implicit step of the time-evolution scheme.
///
/// The gain term uses the row averages of `q`; an optional source field is
/// added explicitly to the right-hand side (corrector mode). Boundary rows
/// of the result are zero and the diagonal branch pair is recorded.
pub fn evolve_step(
    mesh: &Mesh,
    model: &TumblingModel,
    q: &GridField,
    cfg: &SolverConfig,
    src: Option<&GridField>,
) -> Result<GridField> {
    cfg.validate(mesh)?;
    let op = Operator::new(mesh, model, cfg.dt_for(mesh));
    let avgs = row_averages(mesh, field_check(q)?);
    let gain: Vec<f64> = avgs
        .iter()
        .zip(&op.lam0)
        .map(|(a, l)| a * l)
        .collect();
    let mut next = GridField::zeros(mesh);
    op.sweep(mesh, q, 1.0, &gain, src, &mut next);
    if !next.is_finite() {
        return Err(Error::NumericFailure {
            context: "evolve_step",
            reason: "non-finite values produced; dt too large or model out of bounds".into(),
        });
    }
    Ok(next)
}

fn field_check(q: &GridField) -> Result<&GridField> {
    if q.is_finite() {
        Ok(q)
    } else {
        Err(Error::NumericFailure {
            context: "evolve_step",
            reason: "input field contains non-finite values".into(),
        })
    }
}

/// Divide a field by its total mass M[Q]; returns the mass.
pub fn normalize(mesh: &Mesh, field: &mut GridField) -> Result<f64> {
    let mass = total_mass(mesh, field);
    if !mass.is_finite() || mass <= 0.0 {
        return Err(Error::NonPositiveMass { mass });
    }
    field.scale_in_place(1.0 / mass);
    Ok(mass)
}

/// Discrete L1 distance sum |a - b| dv dy over interior unknowns.
///
/// Interior rows contribute every off-diagonal node once and the diagonal
/// contributes both branch differences; boundary rows are excluded (they
/// are pinned to zero by the scheme). The number of compared values is
/// (2I-1) * (2J+2).
pub fn convergence_metric(mesh: &Mesh, a: &GridField, b: &GridField) -> f64 {
    metric_scaled(mesh, a, 1.0, b, 1.0)
}

pub(crate) fn metric_scaled(
    mesh: &Mesh,
    a: &GridField,
    sa: f64,
    b: &GridField,
    sb: f64,
) -> f64 {
    let nc = mesh.n_cols();
    let last = mesh.n_rows() - 1;
    let ratio = mesh.ratio();
    let mut sum = 0.0;
    for i in 1..last {
        let jd = ratio * i;
        let ra = a.row(i);
        let rb = b.row(i);
        for j in 0..nc {
            if j != jd {
                sum += (sa * ra[j] - sb * rb[j]).abs();
            }
        }
        sum += (sa * a.diag_left[i] - sb * b.diag_left[i]).abs();
        sum += (sa * a.diag_right[i] - sb * b.diag_right[i]).abs();
    }
    sum * mesh.dv() * mesh.dy()
}

/// Relax to the equilibrium distribution: step, renormalize, and stop when
/// the displacement metric over `cadence` steps drops below `tol`.
///
/// Exceeding `max_steps` is reported through `converged = false` rather
/// than an error; non-finite values or a metric growing tenfold between
/// checks abort with a numeric-failure error.
pub fn solve_equilibrium(
    mesh: &Mesh,
    model: &TumblingModel,
    cfg: &SolverConfig,
) -> Result<(GridField, SolveReport)> {
    cfg.validate(mesh)?;
    let dt = cfg.dt_for(mesh);
    let op = Operator::new(mesh, model, dt);

    let mut cur = match &cfg.init {
        InitPolicy::Uniform => GridField::constant(mesh, 1.0 / (2.0 * mesh.g())),
        InitPolicy::Custom(f) => {
            if !f.is_finite() {
                return Err(Error::NumericFailure {
                    context: "equilibrium init",
                    reason: "custom initialization contains non-finite values".into(),
                });
            }
            f.clone()
        }
    };
    // The sweeps only ever write interior rows, so the two ping-pong
    // buffers must start with the boundary condition already in place.
    cur.zero_boundary_rows();
    let m0 = total_mass(mesh, &cur);
    if !m0.is_finite() || m0 <= 0.0 {
        return Err(Error::NonPositiveMass { mass: m0 });
    }
    let mut cur_scale = 1.0 / m0;
    let mut avgs = row_averages(mesh, &cur);

    let mut next = GridField::zeros(mesh);
    let mut snapshot = cur.clone();
    let mut snap_scale = cur_scale;
    let mut gain = vec![0.0; mesh.n_rows()];
    let mut mass_dev = mass_deviation(mesh, &avgs, cur_scale, 1.0);
    let mut prev_metric: Option<f64> = None;
    let mut final_residual = f64::INFINITY;
    let mut converged = false;
    let mut steps = 0u64;

    while steps < cfg.max_steps {
        steps += 1;
        for ((g, a), l) in gain.iter_mut().zip(&avgs).zip(&op.lam0) {
            *g = l * a * cur_scale;
        }
        let rowsum = op.sweep(mesh, &cur, cur_scale, &gain, None, &mut next);
        let quarter_dv = 0.25 * mesh.dv();
        let next_avgs: Vec<f64> = rowsum.iter().map(|s| s * quarter_dv).collect();
        let mass = simpson_sum(&next_avgs, mesh.dy());
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::NumericFailure {
                context: "equilibrium solve",
                reason: format!("total mass became {mass} at step {steps}"),
            });
        }
        std::mem::swap(&mut cur, &mut next);
        cur_scale = 1.0 / mass;
        avgs = next_avgs;

        if steps % cfg.cadence as u64 == 0 {
            let metric = metric_scaled(mesh, &cur, cur_scale, &snapshot, snap_scale);
            if !metric.is_finite() {
                return Err(Error::NumericFailure {
                    context: "equilibrium solve",
                    reason: format!("non-finite convergence metric at step {steps}"),
                });
            }
            mass_dev = mass_dev.max(mass_deviation(mesh, &avgs, cur_scale, 1.0));
            final_residual = metric;
            if metric < cfg.tol {
                converged = true;
                break;
            }
            if let Some(prev) = prev_metric {
                if metric > 10.0 * prev {
                    return Err(Error::NumericFailure {
                        context: "equilibrium solve",
                        reason: format!(
                            "metric grew from {prev:.3e} to {metric:.3e}; divergence"
                        ),
                    });
                }
            }
            prev_metric = Some(metric);
            snapshot.clone_from(&cur);
            snap_scale = cur_scale;
        }
    }
    if !converged && final_residual.is_infinite() {
        final_residual = metric_scaled(mesh, &cur, cur_scale, &snapshot, snap_scale);
    }

    cur.scale_in_place(cur_scale);
    Ok((
        cur,
        SolveReport {
            steps_taken: steps,
            final_residual,
            converged,
            mass_history_max_deviation: mass_dev,
        },
    ))
}

/// |Simpson of scaled averages - target|: the recomputed-mass deviation.
pub(crate) fn mass_deviation(mesh: &Mesh, avgs: &[f64], scale: f64, target: f64) -> f64 {
    let scaled: Vec<f64> = avgs.iter().map(|a| a * scale).collect();
    (simpson_sum(&scaled, mesh.dy()) - target).abs()
}
