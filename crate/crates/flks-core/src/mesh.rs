//! Diagonal-aligned lattice on [-G, G] x [-1, 1] and its quadrature rules.
//!
//! The mesh is chosen so that every internal-state node y_i has a velocity
//! node exactly on the diagonal y = v*G, which requires J to be a multiple
//! of I. Node coordinates are computed as y_i = G*((i - I)/I) and
//! v_j = (j - J)/J. Both divisions round the same real number, so
//! v_{diag(i)}*G - y_i is exactly zero in double precision, the endpoints
//! are exact, and no accumulation error enters.
//!
//! Velocity integrals use the trapezoidal rule normalized by |V| = 2;
//! integrals in y use composite Simpson. Fields carry two values on the
//! diagonal (a left/backward and a right/forward branch) and the trapezoid
//! consumes both in place of the doubled interior weight.

use crate::error::{Error, Result};

/// Lattice over [-G, G] x [-1, 1] with 2I intervals in y and 2J in v.
#[derive(Debug, Clone)]
pub struct Mesh {
    g: f64,
    i_half: usize,
    j_half: usize,
    dy: f64,
    dv: f64,
    ratio: usize,
    y: Vec<f64>,
    v: Vec<f64>,
}

impl Mesh {
    /// Build a mesh; rejects G <= 0 and J not divisible by I.
    pub fn build(g: f64, i_half: usize, j_half: usize) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "G",
                reason: format!("must be positive and finite, got {g}"),
            });
        }
        if i_half == 0 || j_half == 0 {
            return Err(Error::InvalidParameter {
                name: "I/J",
                reason: "interval half-counts must be positive".into(),
            });
        }
        if j_half % i_half != 0 {
            return Err(Error::MisalignedMesh {
                i: i_half,
                j: j_half,
            });
        }
        let dy = g / i_half as f64;
        let dv = 1.0 / j_half as f64;
        let y = (0..=2 * i_half)
            .map(|i| g * ((i as f64 - i_half as f64) / i_half as f64))
            .collect();
        let v = (0..=2 * j_half)
            .map(|j| (j as f64 - j_half as f64) / j_half as f64)
            .collect();
        Ok(Self {
            g,
            i_half,
            j_half,
            dy,
            dv,
            ratio: j_half / i_half,
            y,
            v,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// Half-count I of y intervals; rows are indexed 0..=2I.
    pub fn i_half(&self) -> usize {
        self.i_half
    }

    /// Half-count J of v intervals; columns are indexed 0..=2J.
    pub fn j_half(&self) -> usize {
        self.j_half
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    pub fn n_rows(&self) -> usize {
        2 * self.i_half + 1
    }

    pub fn n_cols(&self) -> usize {
        2 * self.j_half + 1
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v[j]
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn v_nodes(&self) -> &[f64] {
        &self.v
    }

    /// J/I; column diag_col(i) = ratio * i sits exactly on y = vG.
    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// Column index of the diagonal node in row i.
    pub fn diag_col(&self, i: usize) -> usize {
        self.ratio * i
    }

    /// Row index of the diagonal node in column j, if the column has one.
    pub fn diag_row(&self, j: usize) -> Option<usize> {
        (j % self.ratio == 0).then(|| j / self.ratio)
    }

    /// Locate the column holding velocity `v_fixed`; it must be a node.
    pub fn column_of(&self, v_fixed: f64) -> Result<usize> {
        let jf = (v_fixed + 1.0) * self.j_half as f64;
        let j = jf.round() as isize;
        if j < 0 || j as usize >= self.n_cols() || (self.v[j as usize] - v_fixed).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "v_fixed",
                reason: format!("{v_fixed} is not a velocity node of this mesh"),
            });
        }
        Ok(j as usize)
    }
}

/// Distribution on the mesh with double-valued diagonal storage.
///
/// `values` holds one entry per lattice node in row-major order
/// (index i * n_cols + j). At the diagonal node of row i the slot keeps
/// the average of the two branch values; the branches themselves live in
/// `diag_left` (backward/left limit, used for the v-integral above the
/// diagonal) and `diag_right` (forward/right limit, used below).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n_rows: usize,
    n_cols: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) diag_left: Vec<f64>,
    pub(crate) diag_right: Vec<f64>,
}

impl GridField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            n_rows: mesh.n_rows(),
            n_cols: mesh.n_cols(),
            values: vec![0.0; mesh.n_rows() * mesh.n_cols()],
            diag_left: vec![0.0; mesh.n_rows()],
            diag_right: vec![0.0; mesh.n_rows()],
        }
    }

    /// Constant field; both diagonal branches carry the same constant.
    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            n_rows: mesh.n_rows(),
            n_cols: mesh.n_cols(),
            values: vec![c; mesh.n_rows() * mesh.n_cols()],
            diag_left: vec![c; mesh.n_rows()],
            diag_right: vec![c; mesh.n_rows()],
        }
    }

    /// Sample a function of (y, v); diagonal branches both get f(y_i, v_diag).
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(mesh);
        for i in 0..mesh.n_rows() {
            for j in 0..mesh.n_cols() {
                field.values[i * field.n_cols + j] = f(mesh.y(i), mesh.v(j));
            }
        }
        for i in 0..mesh.n_rows() {
            let vd = mesh.v(mesh.diag_col(i));
            field.diag_left[i] = f(mesh.y(i), vd);
            field.diag_right[i] = f(mesh.y(i), vd);
        }
        field
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.n_cols + j] = value;
    }

    /// Backward-branch value on the diagonal of row i.
    pub fn diag_left(&self, i: usize) -> f64 {
        self.diag_left[i]
    }

    /// Forward-branch value on the diagonal of row i.
    pub fn diag_right(&self, i: usize) -> f64 {
        self.diag_right[i]
    }

    pub fn set_diag(&mut self, i: usize, left: f64, right: f64) {
        self.diag_left[i] = left;
        self.diag_right[i] = right;
    }

    /// Contiguous row slice (all columns of row i).
    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
        for v in &mut self.diag_left {
            *v *= factor;
        }
        for v in &mut self.diag_right {
            *v *= factor;
        }
    }

    /// self += factor * other, over all stored values including branches.
    pub fn axpy_in_place(&mut self, factor: f64, other: &GridField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        for (a, b) in self.diag_left.iter_mut().zip(&other.diag_left) {
            *a += factor * b;
        }
        for (a, b) in self.diag_right.iter_mut().zip(&other.diag_right) {
            *a += factor * b;
        }
    }

    /// Pin the rows y = -G and y = G (values and branch pairs) to zero.
    pub(crate) fn zero_boundary_rows(&mut self) {
        let last = self.n_rows - 1;
        self.values[..self.n_cols].fill(0.0);
        self.values[last * self.n_cols..].fill(0.0);
        self.diag_left[0] = 0.0;
        self.diag_right[0] = 0.0;
        self.diag_left[last] = 0.0;
        self.diag_right[last] = 0.0;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.diag_left.iter().all(|v| v.is_finite())
            && self.diag_right.iter().all(|v| v.is_finite())
    }

    /// Minimum over interior rows, diagonal branches included.
    pub fn min_interior(&self) -> f64 {
        let mut min = f64::INFINITY;
        for &v in &self.values[self.n_cols..(self.n_rows - 1) * self.n_cols] {
            min = min.min(v);
        }
        for i in 1..self.n_rows - 1 {
            min = min.min(self.diag_left[i]).min(self.diag_right[i]);
        }
        min
    }
}

/// Trapezoidal velocity average <Q>_i = (1/2) int Q(y_i, v) dv.
///
/// Interior rows substitute the two diagonal branch values for the doubled
/// interior weight, following the split of the v-integral at the diagonal.
/// Boundary rows (i = 0, 2I) fall back to the plain trapezoid over stored
/// values; after any solve those rows are identically zero.
pub fn velocity_average(mesh: &Mesh, field: &GridField, i: usize) -> f64 {
    velocity_moment(mesh, field, i, |_| 1.0)
}

/// Trapezoidal moment <w(v) Q>_i with the same diagonal-branch handling.
pub fn velocity_moment(mesh: &Mesh, field: &GridField, i: usize, w: impl Fn(f64) -> f64) -> f64 {
    let n_cols = mesh.n_cols();
    let jd = mesh.diag_col(i);
    let col = |j: usize| field.get(i, j) * w(mesh.v(j));
    let mut sum = 0.0;
    if jd == 0 || jd == n_cols - 1 {
        sum += col(0);
        for j in 1..n_cols - 1 {
            sum += 2.0 * col(j);
        }
        sum += col(n_cols - 1);
    } else {
        sum += col(0);
        for j in 1..jd {
            sum += 2.0 * col(j);
        }
        let wd = w(mesh.v(jd));
        sum += field.diag_right[i] * wd + field.diag_left[i] * wd;
        for j in jd + 1..n_cols - 1 {
            sum += 2.0 * col(j);
        }
        sum += col(n_cols - 1);
    }
    0.25 * mesh.dv() * sum
}

/// Composite Simpson integral of a per-row profile over [-G, G].
///
/// The profile must cover all 2I+1 rows (an even number of intervals).
pub fn y_integral(mesh: &Mesh, profile: &[f64]) -> f64 {
    assert_eq!(
        profile.len(),
        mesh.n_rows(),
        "profile must have one entry per y node"
    );
    simpson_sum(profile, mesh.dy())
}

pub(crate) fn simpson_sum(profile: &[f64], dy: f64) -> f64 {
    let n = profile.len();
    let mut sum = profile[0] + profile[n - 1];
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, &p) in profile.iter().enumerate().take(n - 1).skip(1) {
        if k % 2 == 1 {
            odd += p;
        } else {
            even += p;
        }
    }
    sum += 4.0 * odd + 2.0 * even;
    dy / 3.0 * sum
}

/// Normalization functional M[Q] = int <Q> dy (Simpson over trapezoids).
pub fn total_mass(mesh: &Mesh, field: &GridField) -> f64 {
    let profile: Vec<f64> = (0..mesh.n_rows())
        .map(|i| velocity_average(mesh, field, i))
        .collect();
    y_integral(mesh, &profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn build_small_meshes() {
        let m = Mesh::build(1.0, 2, 2).unwrap();
        assert_eq!(m.y_nodes(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(m.v_nodes(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        for i in 0..=4 {
            assert_eq!(m.diag_col(i), i);
        }

        let m = Mesh::build(1.0, 2, 4).unwrap();
        for i in 0..=4 {
            assert_eq!(m.diag_col(i), 2 * i);
        }
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(matches!(
            Mesh::build(1.0, 3, 4),
            Err(Error::MisalignedMesh { .. })
        ));
        assert!(matches!(
            Mesh::build(0.0, 2, 2),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            Mesh::build(-1.0, 2, 2),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn endpoints_exact_and_diagonal_aligned() {
        for &(g, i, j) in &[(1.0, 7, 21), (2.5, 13, 13), (0.3, 5, 20), (100.0, 11, 33)] {
            let m = Mesh::build(g, i, j).unwrap();
            assert_eq!(m.y(0), -g);
            assert_eq!(m.y(2 * i), g);
            assert_eq!(m.v(0), -1.0);
            assert_eq!(m.v(2 * j), 1.0);
            for r in 0..m.n_rows() {
                let jd = m.diag_col(r);
                assert_eq!(
                    m.v(jd) * g - m.y(r),
                    0.0,
                    "diagonal misaligned at row {r} for G={g}, I={i}, J={j}"
                );
            }
        }
    }

    #[test]
    fn velocity_average_constant_is_identity() {
        let m = Mesh::build(1.0, 4, 8).unwrap();
        let f = GridField::constant(&m, 3.25);
        for i in 1..m.n_rows() - 1 {
            assert_relative_eq!(velocity_average(&m, &f, i), 3.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn velocity_average_odd_field_vanishes() {
        let m = Mesh::build(1.0, 4, 4).unwrap();
        let f = GridField::from_fn(&m, |_, v| v);
        // Row through y = 0: the diagonal sits at v = 0 so both branches are 0.
        let i = m.i_half();
        assert!(velocity_average(&m, &f, i).abs() <= 1e-15);
    }

    #[test]
    fn velocity_average_vsquared_matches_direct_sum() {
        // 5-point trapezoid of v^2 on I=J=2, hand-evaluated:
        // (dv/4) * (1 + 2*sum_{j<j*} + R + L + 2*sum_{j>j*} + 1) at row 1
        // where v = {-1,-.5,0,.5,1}, j* = 1, L = R = 0.25:
        // (0.125) * (1 + 0.25 + 0.25 + 2*(0 + 0.25) + 1) = 0.375
        let m = Mesh::build(1.0, 2, 2).unwrap();
        let f = GridField::from_fn(&m, |_, v| v * v);
        let got = velocity_average(&m, &f, 1);
        assert_relative_eq!(got, 0.375, epsilon = 1e-15);
        // Trapezoid error against the exact (1/2) int v^2 dv = 1/3 is <= 1/24.
        assert!((got - 1.0 / 3.0).abs() <= 1.0 / 24.0 + 1e-15);
    }

    #[test]
    fn y_integral_examples() {
        // Constant integrand over [-G, G].
        let m = Mesh::build(2.0, 5, 5).unwrap();
        let ones = vec![1.0; m.n_rows()];
        assert_relative_eq!(y_integral(&m, &ones), 4.0, max_relative = 1e-15);

        // Simpson is exact on quadratics: int_{-1}^{1} y^2 dy = 2/3 at I = 1.
        let m = Mesh::build(1.0, 1, 1).unwrap();
        let p: Vec<f64> = m.y_nodes().iter().map(|y| y * y).collect();
        assert_relative_eq!(y_integral(&m, &p), 2.0 / 3.0, epsilon = 1e-15);

        // Odd profile on symmetric nodes cancels.
        let m = Mesh::build(1.0, 6, 6).unwrap();
        let p: Vec<f64> = m.y_nodes().to_vec();
        assert!(y_integral(&m, &p).abs() <= 1e-15);
    }

    #[test]
    fn y_integral_exact_on_cubics() {
        let m = Mesh::build(1.5, 8, 8).unwrap();
        let p: Vec<f64> = m
            .y_nodes()
            .iter()
            .map(|y| 2.0 * y * y * y - y * y + 3.0 * y - 5.0)
            .collect();
        // int_{-1.5}^{1.5} (2y^3 - y^2 + 3y - 5) dy = -2.25 - 15 = -17.25
        assert_relative_eq!(y_integral(&m, &p), -17.25, max_relative = 1e-14);
    }

    #[test]
    fn total_mass_of_uniform_field() {
        let m = Mesh::build(3.0, 4, 8).unwrap();
        let f = GridField::constant(&m, 1.0 / 6.0);
        assert_relative_eq!(total_mass(&m, &f), 1.0, max_relative = 1e-14);
        let z = GridField::zeros(&m);
        assert_eq!(total_mass(&m, &z), 0.0);
    }

    #[test]
    fn total_mass_is_linear() {
        let m = Mesh::build(1.0, 3, 6).unwrap();
        let f = GridField::from_fn(&m, |y, v| (y + 1.2) * (v - 0.3));
        let g = GridField::from_fn(&m, |y, v| y * y + 0.5 * v);
        let mut combo = f.clone();
        combo.scale_in_place(2.0);
        combo.axpy_in_place(-0.75, &g);
        let expected = 2.0 * total_mass(&m, &f) - 0.75 * total_mass(&m, &g);
        assert_relative_eq!(total_mass(&m, &combo), expected, epsilon = 1e-13);
    }

    #[test]
    fn column_lookup() {
        let m = Mesh::build(1.0, 4, 8).unwrap();
        assert_eq!(m.column_of(0.5).unwrap(), 12);
        assert_eq!(m.column_of(-1.0).unwrap(), 0);
        assert!(m.column_of(0.3).is_err());
    }
}
