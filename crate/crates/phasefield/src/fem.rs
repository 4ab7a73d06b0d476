//! Finite element machinery: shape functions, quadrature, B-matrices, and
//! global assembly of the coupled displacement / phase-field system.
//!
//! Elements are bilinear quads (Q4, plane strain) and trilinear hexahedra
//! (HEX8), both integrated with a 2-point Gauss rule per axis. Element
//! matrices can be computed in parallel; scatter into the global sparse
//! matrix always happens in element order so assembly is bitwise
//! deterministic regardless of thread count.

use rayon::prelude::*;

use crate::constitutive::{
    self, ElasticConstants, FractureParams, SymmetricTensor,
};
use crate::error::{Error, Result};
use crate::linsolve::SparseSymmetricMatrix;
use crate::mesh::Mesh;

/// Gauss points per axis used for all volume integrals.
pub const DEFAULT_QUADRATURE_ORDER: usize = 2;

/// 1D Gauss-Legendre abscissae and weights on [-1, 1].
pub fn gauss_1d(order: usize) -> Result<Vec<(f64, f64)>> {
    let sqrt3_inv = 1.0 / 3.0f64.sqrt();
    let rule = match order {
        1 => vec![(0.0, 2.0)],
        2 => vec![(-sqrt3_inv, 1.0), (sqrt3_inv, 1.0)],
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => {
            return Err(Error::invalid_argument(format!(
                "unsupported quadrature order {order}"
            )))
        }
    };
    Ok(rule)
}

/// Tensor-product Gauss points for the reference square or cube.
/// Returns `(xi, weight)` pairs with the first axis varying fastest.
pub fn gauss_points(dim: usize, order: usize) -> Result<Vec<([f64; 3], f64)>> {
    let g = gauss_1d(order)?;
    let mut points = Vec::new();
    match dim {
        2 => {
            for &(eta, we) in &g {
                for &(xi, wx) in &g {
                    points.push(([xi, eta, 0.0], wx * we));
                }
            }
        }
        3 => {
            for &(zeta, wz) in &g {
                for &(eta, we) in &g {
                    for &(xi, wx) in &g {
                        points.push(([xi, eta, zeta], wx * we * wz));
                    }
                }
            }
        }
        _ => return Err(Error::invalid_argument(format!("unsupported dimension {dim}"))),
    }
    Ok(points)
}

/// Shape values and reference-coordinate gradients at one point, written
/// into fixed-size buffers. Returns the node count.
fn shape_reference_into(
    dim: usize,
    xi: &[f64; 3],
    n: &mut [f64; 8],
    dn: &mut [[f64; 3]; 8],
) -> usize {
    match dim {
        2 => {
            let signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
            for (a, &(sx, sy)) in signs.iter().enumerate() {
                n[a] = 0.25 * (1.0 + sx * xi[0]) * (1.0 + sy * xi[1]);
                dn[a] = [
                    0.25 * sx * (1.0 + sy * xi[1]),
                    0.25 * sy * (1.0 + sx * xi[0]),
                    0.0,
                ];
            }
            4
        }
        3 => {
            let signs = [
                (-1.0, -1.0, -1.0),
                (1.0, -1.0, -1.0),
                (1.0, 1.0, -1.0),
                (-1.0, 1.0, -1.0),
                (-1.0, -1.0, 1.0),
                (1.0, -1.0, 1.0),
                (1.0, 1.0, 1.0),
                (-1.0, 1.0, 1.0),
            ];
            for (a, &(sx, sy, sz)) in signs.iter().enumerate() {
                let fx = 1.0 + sx * xi[0];
                let fy = 1.0 + sy * xi[1];
                let fz = 1.0 + sz * xi[2];
                n[a] = 0.125 * fx * fy * fz;
                dn[a] = [
                    0.125 * sx * fy * fz,
                    0.125 * sy * fx * fz,
                    0.125 * sz * fx * fy,
                ];
            }
            8
        }
        _ => unreachable!("dimension validated upstream"),
    }
}

/// Shape data at one quadrature point of one element, mapped to physical
/// coordinates.
#[derive(Debug, Clone)]
pub struct ShapeEval {
    /// Shape function values per element node.
    pub shape: Vec<f64>,
    /// Physical-coordinate gradients per element node.
    pub grad: Vec<[f64; 3]>,
    /// Gauss weight times the Jacobian determinant.
    pub weight_det: f64,
}

/// Evaluate shape data at every quadrature point of element `e`.
pub fn element_evals(mesh: &Mesh, e: usize, order: usize) -> Result<Vec<ShapeEval>> {
    let points = gauss_points(mesh.dim(), order)?;
    let mut out = Vec::with_capacity(points.len());
    element_evals_into(mesh, e, &points, &mut out)?;
    Ok(out)
}

/// Like [`element_evals`] but reusing the buffers of `out`; after the
/// first call on a buffer no further allocation happens.
fn element_evals_into(
    mesh: &Mesh,
    e: usize,
    points: &[([f64; 3], f64)],
    out: &mut Vec<ShapeEval>,
) -> Result<()> {
    let dim = mesh.dim();
    let nodes = mesh.element(e);
    out.truncate(points.len());
    while out.len() < points.len() {
        out.push(ShapeEval {
            shape: Vec::new(),
            grad: Vec::new(),
            weight_det: 0.0,
        });
    }
    let mut shape = [0.0f64; 8];
    let mut dn = [[0.0f64; 3]; 8];
    for ((xi, w), ev) in points.iter().zip(out.iter_mut()) {
        let nn = shape_reference_into(dim, xi, &mut shape, &mut dn);
        // Jacobian J_ab = d x_a / d xi_b.
        let mut jac = [[0.0f64; 3]; 3];
        for (node_idx, &node) in nodes.iter().enumerate() {
            let x = mesh.coord(node);
            for a in 0..dim {
                for b in 0..dim {
                    jac[a][b] += x[a] * dn[node_idx][b];
                }
            }
        }
        let (det, inv) = invert_jacobian(dim, &jac);
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::Assembly(format!(
                "element {e} has non-positive Jacobian determinant {det:.3e}"
            )));
        }
        ev.shape.clear();
        ev.shape.extend_from_slice(&shape[..nn]);
        ev.grad.clear();
        for d in &dn[..nn] {
            let mut g = [0.0f64; 3];
            for a in 0..dim {
                for b in 0..dim {
                    g[a] += inv[b][a] * d[b];
                }
            }
            ev.grad.push(g);
        }
        ev.weight_det = w * det;
    }
    Ok(())
}

fn invert_jacobian(dim: usize, j: &[[f64; 3]; 3]) -> (f64, [[f64; 3]; 3]) {
    let mut inv = [[0.0f64; 3]; 3];
    if dim == 2 {
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det != 0.0 {
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
        }
        (det, inv)
    } else {
        let c00 = j[1][1] * j[2][2] - j[1][2] * j[2][1];
        let c01 = j[1][2] * j[2][0] - j[1][0] * j[2][2];
        let c02 = j[1][0] * j[2][1] - j[1][1] * j[2][0];
        let det = j[0][0] * c00 + j[0][1] * c01 + j[0][2] * c02;
        if det != 0.0 {
            inv[0][0] = c00 / det;
            inv[1][0] = c01 / det;
            inv[2][0] = c02 / det;
            inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
            inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
            inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
            inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
            inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
            inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
        }
        (det, inv)
    }
}

pub fn voigt_len(dim: usize) -> usize {
    if dim == 2 {
        3
    } else {
        6
    }
}

/// Strain-displacement matrix with engineering shear, row-major,
/// `voigt_len(dim)` rows by `n_nodes * dim` columns.
pub fn b_matrix_u(eval: &ShapeEval, dim: usize) -> Vec<f64> {
    let mut b = Vec::new();
    b_matrix_u_into(eval, dim, &mut b);
    b
}

/// [`b_matrix_u`] writing into a reusable buffer.
fn b_matrix_u_into(eval: &ShapeEval, dim: usize, b: &mut Vec<f64>) {
    let nn = eval.shape.len();
    let rows = voigt_len(dim);
    let cols = nn * dim;
    b.clear();
    b.resize(rows * cols, 0.0);
    for (a, g) in eval.grad.iter().enumerate() {
        let cx = a * dim;
        if dim == 2 {
            b[cx] = g[0]; // row 0: eps_xx
            b[cols + cx + 1] = g[1]; // row 1: eps_yy
            b[2 * cols + cx] = g[1]; // row 2: gamma_xy
            b[2 * cols + cx + 1] = g[0];
        } else {
            b[cx] = g[0];
            b[cols + cx + 1] = g[1];
            b[2 * cols + cx + 2] = g[2];
            b[3 * cols + cx] = g[1]; // gamma_xy
            b[3 * cols + cx + 1] = g[0];
            b[4 * cols + cx + 1] = g[2]; // gamma_yz
            b[4 * cols + cx + 2] = g[1];
            b[5 * cols + cx] = g[2]; // gamma_xz
            b[5 * cols + cx + 2] = g[0];
        }
    }
}

/// Interpolate a nodal scalar at a quadrature point.
pub fn interpolate_scalar(eval: &ShapeEval, nodal: &[f64]) -> f64 {
    eval.shape.iter().zip(nodal).map(|(n, v)| n * v).sum()
}

/// Gradient of a nodal scalar at a quadrature point.
pub fn scalar_gradient(eval: &ShapeEval, nodal: &[f64]) -> [f64; 3] {
    let mut g = [0.0f64; 3];
    for (ga, v) in eval.grad.iter().zip(nodal) {
        for a in 0..3 {
            g[a] += ga[a] * v;
        }
    }
    g
}

/// Small strain at a quadrature point from element displacements
/// (`u_elem` packs `[u0x, u0y, (u0z), u1x, ...]`).
pub fn strain_at(eval: &ShapeEval, dim: usize, u_elem: &[f64]) -> Result<SymmetricTensor> {
    let mut grad_u = [[0.0f64; 3]; 3];
    for (a, g) in eval.grad.iter().enumerate() {
        for i in 0..dim {
            let ui = u_elem[a * dim + i];
            for j in 0..dim {
                grad_u[i][j] += ui * g[j];
            }
        }
    }
    let mut t = SymmetricTensor::zero(dim);
    for i in 0..dim {
        for j in i..dim {
            t.set(i, j, 0.5 * (grad_u[i][j] + grad_u[j][i]));
        }
    }
    Ok(t)
}

/// Displacement degrees of freedom are interleaved: node `n`, component `c`
/// maps to global dof `n * dim + c`. Scalar fields use the node index.
pub fn u_dof(node: usize, component: usize, dim: usize) -> usize {
    node * dim + component
}

fn node_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        for &a in nodes {
            for &b in nodes {
                adj[a].push(b);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Sparsity pattern for the interleaved displacement system.
pub fn displacement_pattern(mesh: &Mesh) -> Vec<Vec<usize>> {
    let dim = mesh.dim();
    let adj = node_adjacency(mesh);
    let mut rows = Vec::with_capacity(mesh.n_nodes() * dim);
    for neighbors in &adj {
        for _ in 0..dim {
            let mut cols = Vec::with_capacity(neighbors.len() * dim);
            for &n in neighbors {
                for c in 0..dim {
                    cols.push(n * dim + c);
                }
            }
            rows.push(cols);
        }
    }
    rows
}

/// Sparsity pattern for the nodal scalar (phase field) system.
pub fn scalar_pattern(mesh: &Mesh) -> Vec<Vec<usize>> {
    node_adjacency(mesh)
}

/// One scalar value per quadrature point, stored element-major.
#[derive(Debug, Clone)]
pub struct QpScalarField {
    pub n_qp: usize,
    pub values: Vec<f64>,
}

impl QpScalarField {
    pub fn zeros(mesh: &Mesh, order: usize) -> Result<Self> {
        let n_qp = gauss_points(mesh.dim(), order)?.len();
        Ok(Self {
            n_qp,
            values: vec![0.0; n_qp * mesh.n_elements()],
        })
    }

    pub fn get(&self, element: usize, qp: usize) -> f64 {
        self.values[element * self.n_qp + qp]
    }

    pub fn set(&mut self, element: usize, qp: usize, value: f64) {
        self.values[element * self.n_qp + qp] = value;
    }
}

struct ElementContribution {
    nodes: [usize; 8],
    nn: usize,
    matrix: Vec<f64>,
    force: Option<Vec<f64>>,
}

fn pack_nodes(nodes: &[usize]) -> [usize; 8] {
    let mut packed = [0usize; 8];
    packed[..nodes.len()].copy_from_slice(nodes);
    packed
}

/// Reusable per-thread buffers for element loops.
struct ElementScratch {
    points: Vec<([f64; 3], f64)>,
    evals: Vec<ShapeEval>,
    u_elem: Vec<f64>,
    phi_elem: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
}

impl ElementScratch {
    fn new(points: Vec<([f64; 3], f64)>) -> Self {
        Self {
            points,
            evals: Vec::new(),
            u_elem: Vec::new(),
            phi_elem: Vec::new(),
            b: Vec::new(),
            db: Vec::new(),
        }
    }
}

/// Run `compute` over all elements (in parallel when rayon has threads) and
/// scatter the results in element order.
fn assemble_elements<F>(
    mesh: &Mesh,
    dofs_per_node: usize,
    order: usize,
    matrix: &mut SparseSymmetricMatrix,
    force: Option<&mut Vec<f64>>,
    compute: F,
) -> Result<()>
where
    F: Fn(&mut ElementScratch, usize) -> Result<ElementContribution> + Sync,
{
    let points = gauss_points(mesh.dim(), order)?;
    let contributions: Vec<ElementContribution> = (0..mesh.n_elements())
        .into_par_iter()
        .map_init(|| ElementScratch::new(points.clone()), |s, e| compute(s, e))
        .collect::<Result<Vec<_>>>()?;
    let slots: &[u32] = if dofs_per_node == 1 {
        mesh.scalar_scatter()
    } else {
        mesh.displacement_scatter()
    };
    let values = matrix.values_mut();
    let mut force = force;
    for (e, contrib) in contributions.iter().enumerate() {
        let n = contrib.nn * dofs_per_node;
        debug_assert_eq!(contrib.matrix.len(), n * n);
        let base = e * n * n;
        for (idx, &v) in contrib.matrix.iter().enumerate() {
            values[slots[base + idx] as usize] += v;
        }
        if let (Some(f), Some(fe)) = (force.as_deref_mut(), contrib.force.as_ref()) {
            for i in 0..n {
                let gi =
                    contrib.nodes[i / dofs_per_node] * dofs_per_node + i % dofs_per_node;
                f[gi] += fe[i];
            }
        }
    }
    Ok(())
}

/// Assembled tangent stiffness and internal force for the displacement
/// field at the current state `(u, phi)`.
pub fn assemble_displacement(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    consts: &ElasticConstants,
    params: &FractureParams,
    perturbation: f64,
) -> Result<(SparseSymmetricMatrix, Vec<f64>)> {
    let dim = mesh.dim();
    let n_dof = mesh.n_nodes() * dim;
    if u.len() != n_dof {
        return Err(Error::invalid_argument(format!(
            "displacement vector has length {}, expected {n_dof}",
            u.len()
        )));
    }
    if phi.len() != mesh.n_nodes() {
        return Err(Error::invalid_argument(format!(
            "phase vector has length {}, expected {}",
            phi.len(),
            mesh.n_nodes()
        )));
    }
    let mut k = mesh.displacement_matrix();
    let mut f_int = vec![0.0; n_dof];
    let rows = voigt_len(dim);
    assemble_elements(mesh, dim, DEFAULT_QUADRATURE_ORDER, &mut k, Some(&mut f_int), |s, e| {
        let nodes = mesh.element(e);
        let nn = nodes.len();
        let cols = nn * dim;
        element_evals_into(mesh, e, &s.points, &mut s.evals)?;
        s.u_elem.clear();
        s.phi_elem.clear();
        for &node in nodes {
            for c in 0..dim {
                s.u_elem.push(u[node * dim + c]);
            }
            s.phi_elem.push(phi[node]);
        }
        let mut ke = vec![0.0; cols * cols];
        let mut fe = vec![0.0; cols];
        for eval in &s.evals {
            let strain = strain_at(eval, dim, &s.u_elem)?;
            let phi_qp = interpolate_scalar(eval, &s.phi_elem);
            let split = constitutive::spectral_split(&strain, perturbation)?;
            let sigma = constitutive::stress(&split, phi_qp, consts, params);
            let d = constitutive::tangent(&split, phi_qp, consts, params)?;
            let b = &mut s.b;
            b_matrix_u_into(eval, dim, b);
            let w = eval.weight_det;
            // db = D * B, voigt rows by element columns.
            s.db.clear();
            s.db.resize(rows * cols, 0.0);
            let db = &mut s.db;
            for r in 0..rows {
                for c in 0..cols {
                    let mut acc = 0.0;
                    for m in 0..rows {
                        acc += d.get(r, m) * b[m * cols + c];
                    }
                    db[r * cols + c] = acc;
                }
            }
            let sig = sigma.stress_voigt();
            for i in 0..cols {
                for j in 0..cols {
                    let mut acc = 0.0;
                    for r in 0..rows {
                        acc += b[r * cols + i] * db[r * cols + j];
                    }
                    ke[i * cols + j] += w * acc;
                }
                let mut acc = 0.0;
                for r in 0..rows {
                    acc += b[r * cols + i] * sig[r];
                }
                fe[i] += w * acc;
            }
        }
        if !ke.iter().all(|v| v.is_finite()) || !fe.iter().all(|v| v.is_finite()) {
            return Err(Error::Assembly(format!(
                "non-finite displacement contribution in element {e}"
            )));
        }
        Ok(ElementContribution {
            nodes: pack_nodes(nodes),
            nn,
            matrix: ke,
            force: Some(fe),
        })
    })?;
    Ok((k, f_int))
}

/// Consistent mass matrix for the displacement field.
pub fn assemble_mass(mesh: &Mesh, density: f64) -> Result<SparseSymmetricMatrix> {
    let dim = mesh.dim();
    let mut m = mesh.displacement_matrix();
    assemble_elements(mesh, dim, DEFAULT_QUADRATURE_ORDER, &mut m, None, |s, e| {
        let nodes = mesh.element(e);
        let nn = nodes.len();
        let cols = nn * dim;
        element_evals_into(mesh, e, &s.points, &mut s.evals)?;
        let mut me = vec![0.0; cols * cols];
        for eval in &s.evals {
            let w = eval.weight_det * density;
            for a in 0..nn {
                for b in 0..nn {
                    let v = w * eval.shape[a] * eval.shape[b];
                    for c in 0..dim {
                        me[(a * dim + c) * cols + (b * dim + c)] += v;
                    }
                }
            }
        }
        Ok(ElementContribution {
            nodes: pack_nodes(nodes),
            nn,
            matrix: me,
            force: None,
        })
    })?;
    Ok(m)
}

/// Stiffness and load vector of the phase-field subproblem driven by the
/// quadrature-point history field.
pub fn assemble_phase(
    mesh: &Mesh,
    history: &QpScalarField,
    params: &FractureParams,
) -> Result<(SparseSymmetricMatrix, Vec<f64>)> {
    let n = mesh.n_nodes();
    let gc = params.energy_release_rate;
    let l0 = params.length_scale;
    let k_res = params.residual_stiffness;
    let mut k = mesh.scalar_matrix();
    let mut f = vec![0.0; n];
    assemble_elements(mesh, 1, DEFAULT_QUADRATURE_ORDER, &mut k, Some(&mut f), |s, e| {
        let nodes = mesh.element(e);
        let nn = nodes.len();
        element_evals_into(mesh, e, &s.points, &mut s.evals)?;
        if s.evals.len() != history.n_qp {
            return Err(Error::invalid_argument(format!(
                "history field carries {} points per element, assembly uses {}",
                history.n_qp,
                s.evals.len()
            )));
        }
        let mut ke = vec![0.0; nn * nn];
        let mut fe = vec![0.0; nn];
        for (q, eval) in s.evals.iter().enumerate() {
            let h = history.get(e, q);
            let w = eval.weight_det;
            let reaction = gc / l0 + 2.0 * (1.0 - k_res) * h;
            let source = 2.0 * (1.0 - k_res) * h;
            let dim = mesh.dim();
            for a in 0..nn {
                for b in 0..nn {
                    let mut diff = 0.0;
                    for c in 0..dim {
                        diff += eval.grad[a][c] * eval.grad[b][c];
                    }
                    ke[a * nn + b] +=
                        w * (gc * l0 * diff + reaction * eval.shape[a] * eval.shape[b]);
                }
                fe[a] += w * source * eval.shape[a];
            }
        }
        Ok(ElementContribution {
            nodes: pack_nodes(nodes),
            nn,
            matrix: ke,
            force: Some(fe),
        })
    })?;
    Ok((k, f))
}

/// Add the equivalent nodal forces of a constant surface traction applied
/// over the named boundary set.
pub fn assemble_traction(
    mesh: &Mesh,
    set: &str,
    traction: &[f64],
    force: &mut [f64],
) -> Result<()> {
    let dim = mesh.dim();
    if traction.len() != dim {
        return Err(Error::invalid_argument(format!(
            "traction has {} components, expected {dim}",
            traction.len()
        )));
    }
    if force.len() != mesh.n_nodes() * dim {
        return Err(Error::invalid_argument(
            "force vector length does not match the displacement system",
        ));
    }
    let faces = mesh.boundary_faces(set)?;
    let g = gauss_1d(DEFAULT_QUADRATURE_ORDER)?;
    for face in faces {
        let nodes = mesh.face_nodes(face);
        if dim == 2 {
            let x0 = mesh.coord(nodes[0]);
            let x1 = mesh.coord(nodes[1]);
            let len = ((x1[0] - x0[0]).powi(2) + (x1[1] - x0[1]).powi(2)).sqrt();
            // Linear shapes integrate to len / 2 per node.
            for &node in &nodes {
                for c in 0..dim {
                    force[node * dim + c] += 0.5 * len * traction[c];
                }
            }
        } else {
            // Bilinear quad patch; nodes are ordered around the face loop.
            let coords: Vec<&[f64; 3]> = nodes.iter().map(|&n| mesh.coord(n)).collect();
            for &(eta, we) in &g {
                for &(xi, wx) in &g {
                    let n = [
                        0.25 * (1.0 - xi) * (1.0 - eta),
                        0.25 * (1.0 + xi) * (1.0 - eta),
                        0.25 * (1.0 + xi) * (1.0 + eta),
                        0.25 * (1.0 - xi) * (1.0 + eta),
                    ];
                    let dxi = [
                        -0.25 * (1.0 - eta),
                        0.25 * (1.0 - eta),
                        0.25 * (1.0 + eta),
                        -0.25 * (1.0 + eta),
                    ];
                    let deta = [
                        -0.25 * (1.0 - xi),
                        -0.25 * (1.0 + xi),
                        0.25 * (1.0 + xi),
                        0.25 * (1.0 - xi),
                    ];
                    let mut t1 = [0.0f64; 3];
                    let mut t2 = [0.0f64; 3];
                    for a in 0..4 {
                        for c in 0..3 {
                            t1[c] += dxi[a] * coords[a][c];
                            t2[c] += deta[a] * coords[a][c];
                        }
                    }
                    let cross = [
                        t1[1] * t2[2] - t1[2] * t2[1],
                        t1[2] * t2[0] - t1[0] * t2[2],
                        t1[0] * t2[1] - t1[1] * t2[0],
                    ];
                    let area = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2])
                        .sqrt();
                    let w = wx * we * area;
                    for (a, &node) in nodes.iter().enumerate() {
                        for c in 0..dim {
                            force[node * dim + c] += w * n[a] * traction[c];
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// A prescribed value on one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletBc {
    pub dof: usize,
    pub value: f64,
}

/// Impose Dirichlet constraints by symmetric elimination: the constrained
/// row and column are zeroed, the diagonal is set to the row's original
/// diagonal scale, and the right-hand side absorbs the column terms. The
/// matrix stays symmetric positive definite.
pub fn apply_dirichlet(
    matrix: &mut SparseSymmetricMatrix,
    rhs: &mut [f64],
    constraints: &[DirichletBc],
) -> Result<()> {
    let n = matrix.n();
    let mut constrained = vec![false; n];
    let mut values = vec![0.0; n];
    for bc in constraints {
        if bc.dof >= n {
            return Err(Error::Configuration(format!(
                "constraint on dof {} outside system of size {n}",
                bc.dof
            )));
        }
        if constrained[bc.dof] && values[bc.dof] != bc.value {
            return Err(Error::Configuration(format!(
                "conflicting constraints on dof {}: {} vs {}",
                bc.dof, values[bc.dof], bc.value
            )));
        }
        constrained[bc.dof] = true;
        values[bc.dof] = bc.value;
    }
    // Scale the pinned diagonal to the matrix magnitude so conditioning
    // does not degrade.
    let mut diag_scale = 0.0f64;
    for i in 0..n {
        diag_scale = diag_scale.max(matrix.get(i, i).abs());
    }
    if diag_scale == 0.0 {
        diag_scale = 1.0;
    }
    for i in 0..n {
        if constrained[i] {
            continue;
        }
        let (cols, vals) = matrix.row(i);
        let mut shift = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if constrained[j] {
                shift += v * values[j];
            }
        }
        rhs[i] -= shift;
    }
    for i in 0..n {
        if !constrained[i] {
            continue;
        }
        let row_cols: Vec<usize> = matrix.row(i).0.to_vec();
        for j in row_cols {
            matrix.set(i, j, 0.0);
            matrix.set(j, i, 0.0);
        }
        matrix.set(i, i, diag_scale);
        rhs[i] = diag_scale * values[i];
    }
    Ok(())
}

/// Total measure (area or volume) of the mesh by quadrature; used as a
/// sanity probe in tests and diagnostics.
pub fn integrated_measure(mesh: &Mesh) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        for eval in element_evals(mesh, e, DEFAULT_QUADRATURE_ORDER)? {
            total += eval.weight_det;
        }
    }
    Ok(total)
}
