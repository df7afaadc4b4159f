//! Dense linear-algebra oracle for the semi-implicit scheme.
//!
//! Assembles the full implicit matrix (and the stationary corrector
//! system with its mean-zero constraint) over the unknown vector
//! [interior off-diagonal nodes, diagonal branch pairs] and solves it
//! with a dense LU, independently of the sweep implementation.

use flks_core::{GridField, Mesh, TumblingModel};
use nalgebra::{DMatrix, DVector};

/// One unknown of the discrete system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Node { i: usize, j: usize },
    DiagLeft { i: usize },
    DiagRight { i: usize },
}

pub struct Layout {
    pub unknowns: Vec<Unknown>,
    n_rows: usize,
    ratio: usize,
    /// node_index[(i, j)] for off-diagonal interior nodes.
    node_index: Vec<Vec<Option<usize>>>,
    diag_left_index: Vec<Option<usize>>,
    diag_right_index: Vec<Option<usize>>,
}

impl Layout {
    pub fn new(mesh: &Mesh) -> Self {
        let nr = mesh.n_rows();
        let nc = mesh.n_cols();
        let mut unknowns = Vec::new();
        let mut node_index = vec![vec![None; nc]; nr];
        let mut diag_left_index = vec![None; nr];
        let mut diag_right_index = vec![None; nr];
        for i in 1..nr - 1 {
            for j in 0..nc {
                if mesh.diag_col(i) == j {
                    diag_left_index[i] = Some(unknowns.len());
                    unknowns.push(Unknown::DiagLeft { i });
                    diag_right_index[i] = Some(unknowns.len());
                    unknowns.push(Unknown::DiagRight { i });
                } else {
                    node_index[i][j] = Some(unknowns.len());
                    unknowns.push(Unknown::Node { i, j });
                }
            }
        }
        Self {
            unknowns,
            n_rows: nr,
            ratio: mesh.ratio(),
            node_index,
            diag_left_index,
            diag_right_index,
        }
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    /// Index of the single unknown at an off-diagonal interior node.
    fn node(&self, i: usize, j: usize) -> usize {
        self.node_index[i][j].expect("not an off-diagonal interior node")
    }

    pub fn to_vector(&self, field: &GridField) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.unknowns.iter().map(|u| match *u {
                Unknown::Node { i, j } => field.get(i, j),
                Unknown::DiagLeft { i } => field.diag_left(i),
                Unknown::DiagRight { i } => field.diag_right(i),
            }),
        )
    }

    pub fn to_field(&self, mesh: &Mesh, x: &DVector<f64>) -> GridField {
        let mut field = GridField::zeros(mesh);
        for (k, u) in self.unknowns.iter().enumerate() {
            match *u {
                Unknown::Node { i, j } => field.set(i, j, x[k]),
                Unknown::DiagLeft { i } => {
                    field.set_diag(i, x[k], field.diag_right(i));
                }
                Unknown::DiagRight { i } => {
                    field.set_diag(i, field.diag_left(i), x[k]);
                }
            }
        }
        for i in 1..mesh.n_rows() - 1 {
            let avg = 0.5 * (field.diag_left(i) + field.diag_right(i));
            field.set(i, mesh.diag_col(i), avg);
        }
        field
    }

    /// Row-average weights: row i of the matrix <.>_i over the unknowns.
    pub fn average_weights(&self, mesh: &Mesh, i: usize) -> Vec<(usize, f64)> {
        let nc = 2 * mesh.j_half() + 1;
        let quarter_dv = 0.25 * mesh.dv();
        let mut weights = Vec::new();
        for j in 0..nc {
            let w = if j == 0 || j == nc - 1 { 1.0 } else { 2.0 };
            if mesh.diag_col(i) == j {
                weights.push((self.diag_left_index[i].unwrap(), quarter_dv));
                weights.push((self.diag_right_index[i].unwrap(), quarter_dv));
            } else {
                weights.push((self.node(i, j), w * quarter_dv));
            }
        }
        weights
    }

    /// Mass-functional weights: M[.] as a row vector over the unknowns.
    pub fn mass_weights(&self, mesh: &Mesh) -> DVector<f64> {
        let mut m = DVector::zeros(self.len());
        let third_dy = mesh.dy() / 3.0;
        for i in 1..self.n_rows - 1 {
            let simpson = if i % 2 == 1 { 4.0 } else { 2.0 };
            for (k, w) in self.average_weights(mesh, i) {
                m[k] += simpson * third_dy * w;
            }
        }
        m
    }

    fn region_is_backward(&self, i: usize, j: usize, u: &Unknown) -> bool {
        match u {
            Unknown::DiagLeft { .. } => true,
            Unknown::DiagRight { .. } => false,
            Unknown::Node { .. } => i * self.ratio <= j,
        }
    }
}

fn weight(mesh: &Mesh, i: usize, j: usize) -> f64 {
    flks_core::upwind_weight(mesh, i, j)
}

/// Implicit one-step matrix A = I/dt + transport + Lambda_0 I.
pub fn step_matrix(mesh: &Mesh, model: &TumblingModel, layout: &Layout, dt: f64) -> DMatrix<f64> {
    let n = layout.len();
    let mut a = DMatrix::zeros(n, n);
    for (row, u) in layout.unknowns.iter().enumerate() {
        let (i, j) = match *u {
            Unknown::Node { i, j } => (i, j),
            Unknown::DiagLeft { i } | Unknown::DiagRight { i } => (i, mesh.diag_col(i)),
        };
        a[(row, row)] += 1.0 / dt + model.lambda0(mesh.y(i));
        add_transport(mesh, layout, &mut a, row, i, j, u);
    }
    a
}

/// Stationary operator T = transport + Lambda_0 I - Lambda_0 <.>.
pub fn stationary_matrix(mesh: &Mesh, model: &TumblingModel, layout: &Layout) -> DMatrix<f64> {
    let n = layout.len();
    let mut t = DMatrix::zeros(n, n);
    for (row, u) in layout.unknowns.iter().enumerate() {
        let (i, j) = match *u {
            Unknown::Node { i, j } => (i, j),
            Unknown::DiagLeft { i } | Unknown::DiagRight { i } => (i, mesh.diag_col(i)),
        };
        let lam = model.lambda0(mesh.y(i));
        t[(row, row)] += lam;
        for (col, w) in layout.average_weights(mesh, i) {
            t[(row, col)] -= lam * w;
        }
        add_transport(mesh, layout, &mut t, row, i, j, u);
    }
    t
}

fn add_transport(
    mesh: &Mesh,
    layout: &Layout,
    a: &mut DMatrix<f64>,
    row: usize,
    i: usize,
    j: usize,
    u: &Unknown,
) {
    let last = mesh.n_rows() - 1;
    let dy = mesh.dy();
    if layout.region_is_backward(i, j, u) {
        if i == 1 {
            // First-order backward; the i-1 = 0 neighbor is the zero boundary.
            a[(row, row)] += weight(mesh, 1, j) / dy;
        } else {
            a[(row, row)] += 1.5 * weight(mesh, i, j) / dy;
            a[(row, layout.node(i - 1, j))] -= 2.0 * weight(mesh, i - 1, j) / dy;
            if i - 2 >= 1 {
                a[(row, layout.node(i - 2, j))] += 0.5 * weight(mesh, i - 2, j) / dy;
            }
        }
    } else if i == last - 1 {
        // First-order forward; the i+1 = 2I neighbor is the zero boundary.
        a[(row, row)] -= weight(mesh, i, j) / dy;
    } else {
        a[(row, row)] -= 1.5 * weight(mesh, i, j) / dy;
        a[(row, layout.node(i + 1, j))] += 2.0 * weight(mesh, i + 1, j) / dy;
        if i + 2 <= last - 1 {
            a[(row, layout.node(i + 2, j))] -= 0.5 * weight(mesh, i + 2, j) / dy;
        }
    }
}

/// One dense semi-implicit step: x1 = A^-1 (x0/dt + gain(x0) + src).
pub fn dense_one_step(
    mesh: &Mesh,
    model: &TumblingModel,
    layout: &Layout,
    q: &GridField,
    dt: f64,
    src: Option<&GridField>,
) -> GridField {
    let a = step_matrix(mesh, model, layout, dt);
    let x0 = layout.to_vector(q);
    let mut rhs = &x0 / dt;
    for i in 1..mesh.n_rows() - 1 {
        let avg: f64 = layout
            .average_weights(mesh, i)
            .iter()
            .map(|&(k, w)| w * x0[k])
            .sum();
        let gain = model.lambda0(mesh.y(i)) * avg;
        for (row, u) in layout.unknowns.iter().enumerate() {
            let ui = match *u {
                Unknown::Node { i, .. } | Unknown::DiagLeft { i } | Unknown::DiagRight { i } => i,
            };
            if ui == i {
                rhs[row] += gain;
            }
        }
    }
    if let Some(s) = src {
        rhs += layout.to_vector(s);
    }
    let x1 = a.lu().solve(&rhs).expect("dense step solve failed");
    layout.to_field(mesh, &x1)
}

/// Dense solve of the stationary corrector system with the mean-zero
/// constraint: [[T, A q0], [M, 0]] [h; r] = [R1; 0].
pub fn dense_corrector(
    mesh: &Mesh,
    model: &TumblingModel,
    layout: &Layout,
    q0: &GridField,
    src: &GridField,
    dt: f64,
) -> GridField {
    let n = layout.len();
    let t = stationary_matrix(mesh, model, layout);
    let a_step = step_matrix(mesh, model, layout, dt);
    let kernel_dir = a_step * layout.to_vector(q0);
    let mass = layout.mass_weights(mesh);
    let mut bordered = DMatrix::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(&t);
    for k in 0..n {
        bordered[(k, n)] = kernel_dir[k];
        bordered[(n, k)] = mass[k];
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&layout.to_vector(src));
    let sol = bordered.lu().solve(&rhs).expect("bordered solve failed");
    layout.to_field(mesh, &DVector::from(sol.rows(0, n).clone_owned()))
}

/// Max absolute difference over all unknowns of two fields.
pub fn max_unknown_diff(layout: &Layout, a: &GridField, b: &GridField) -> f64 {
    let va = layout.to_vector(a);
    let vb = layout.to_vector(b);
    (va - vb).abs().max()
}
