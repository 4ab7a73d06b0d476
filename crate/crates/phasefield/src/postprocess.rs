//! Derived quantities: reactions, energy bookkeeping, iso-contour crack
//! tracking, and wave speed references.

use crate::constitutive::{self, ElasticConstants, FractureParams, DEFAULT_PERTURBATION};
use crate::error::{Error, Result};
use crate::fem::{self, DEFAULT_QUADRATURE_ORDER};
use crate::mesh::Mesh;

/// Iso-level used to locate crack fronts in the phase field.
pub const CRACK_ISO_LEVEL: f64 = 0.75;

/// Internal force vector at the given state, without forming a stiffness
/// matrix.
pub fn internal_force(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    consts: &ElasticConstants,
    params: &FractureParams,
) -> Result<Vec<f64>> {
    let dim = mesh.dim();
    let mut f = vec![0.0; mesh.n_nodes() * dim];
    let rows = fem::voigt_len(dim);
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        let cols = nodes.len() * dim;
        let mut u_elem = Vec::with_capacity(cols);
        let mut phi_elem = Vec::with_capacity(nodes.len());
        for &node in nodes {
            for c in 0..dim {
                u_elem.push(u[node * dim + c]);
            }
            phi_elem.push(phi[node]);
        }
        for eval in fem::element_evals(mesh, e, DEFAULT_QUADRATURE_ORDER)? {
            let strain = fem::strain_at(&eval, dim, &u_elem)?;
            let phi_qp = fem::interpolate_scalar(&eval, &phi_elem);
            let split = constitutive::spectral_split(&strain, DEFAULT_PERTURBATION)?;
            let sigma = constitutive::stress(&split, phi_qp, consts, params);
            let sig = sigma.stress_voigt();
            let b = fem::b_matrix_u(&eval, dim);
            for i in 0..cols {
                let mut s = 0.0;
                for r in 0..rows {
                    s += b[r * cols + i] * sig[r];
                }
                f[nodes[i / dim] * dim + i % dim] += eval.weight_det * s;
            }
        }
    }
    Ok(f)
}

/// Sum of the internal forces over the constrained degrees of freedom;
/// this is the force the drivers must supply.
pub fn reaction_force(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    consts: &ElasticConstants,
    params: &FractureParams,
    dofs: &[usize],
) -> Result<f64> {
    let f = internal_force(mesh, u, phi, consts, params)?;
    Ok(dofs.iter().map(|&d| f[d]).sum())
}

/// Stored elastic energy with the tensile part degraded.
pub fn elastic_energy(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    consts: &ElasticConstants,
    params: &FractureParams,
) -> Result<f64> {
    let dim = mesh.dim();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        let mut u_elem = Vec::with_capacity(nodes.len() * dim);
        let mut phi_elem = Vec::with_capacity(nodes.len());
        for &node in nodes {
            for c in 0..dim {
                u_elem.push(u[node * dim + c]);
            }
            phi_elem.push(phi[node]);
        }
        for eval in fem::element_evals(mesh, e, DEFAULT_QUADRATURE_ORDER)? {
            let strain = fem::strain_at(&eval, dim, &u_elem)?;
            let phi_qp = fem::interpolate_scalar(&eval, &phi_elem);
            let split = constitutive::spectral_split(&strain, DEFAULT_PERTURBATION)?;
            let en = constitutive::split_energies(&split, consts.lame_lambda, consts.lame_mu);
            let g = constitutive::degradation(phi_qp, params.residual_stiffness);
            total += eval.weight_det * (g * en.psi_plus + en.psi_minus);
        }
    }
    Ok(total)
}

/// Energy dissipated by the diffuse crack, `Gc` times the integrated
/// crack surface density.
pub fn dissipated_energy(mesh: &Mesh, phi: &[f64], params: &FractureParams) -> Result<f64> {
    let dim = mesh.dim();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        let phi_elem: Vec<f64> = nodes.iter().map(|&n| phi[n]).collect();
        for eval in fem::element_evals(mesh, e, DEFAULT_QUADRATURE_ORDER)? {
            let phi_qp = fem::interpolate_scalar(&eval, &phi_elem);
            let grad = fem::scalar_gradient(&eval, &phi_elem);
            total += eval.weight_det
                * params.energy_release_rate
                * constitutive::crack_density(phi_qp, &grad[..dim], params.length_scale);
        }
    }
    Ok(total)
}

/// Kinetic energy `v^T M v / 2` given a consistent mass matrix.
pub fn kinetic_energy(mass: &crate::linsolve::SparseSymmetricMatrix, v: &[f64]) -> f64 {
    let mut mv = vec![0.0; v.len()];
    mass.mul_vec(v, &mut mv);
    0.5 * v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>()
}

/// Largest principal Cauchy stress per element, averaged over the
/// quadrature points; written to snapshots as a cell field.
pub fn element_max_principal_stress(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    consts: &ElasticConstants,
    params: &FractureParams,
) -> Result<Vec<f64>> {
    let dim = mesh.dim();
    let mut out = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        let mut u_elem = Vec::with_capacity(nodes.len() * dim);
        let mut phi_elem = Vec::with_capacity(nodes.len());
        for &node in nodes {
            for c in 0..dim {
                u_elem.push(u[node * dim + c]);
            }
            phi_elem.push(phi[node]);
        }
        let evals = fem::element_evals(mesh, e, DEFAULT_QUADRATURE_ORDER)?;
        let mut acc = 0.0;
        for eval in &evals {
            let strain = fem::strain_at(eval, dim, &u_elem)?;
            let phi_qp = fem::interpolate_scalar(eval, &phi_elem);
            let split = constitutive::spectral_split(&strain, DEFAULT_PERTURBATION)?;
            let sigma = constitutive::stress(&split, phi_qp, consts, params);
            let s_split = constitutive::spectral_split(&sigma, DEFAULT_PERTURBATION)?;
            acc += s_split.principal[0];
        }
        out.push(acc / evals.len() as f64);
    }
    Ok(out)
}

/// Points where the nodal phase field crosses `level` along element edges
/// (marching squares on quad meshes; 2D only).
pub fn iso_contour_points(mesh: &Mesh, phi: &[f64], level: f64) -> Result<Vec<[f64; 2]>> {
    if mesh.dim() != 2 {
        return Err(Error::UnsupportedGeometry(
            "iso-contour crack tracking is implemented for 2D meshes".into(),
        ));
    }
    if phi.len() != mesh.n_nodes() {
        return Err(Error::invalid_argument(
            "phase vector length does not match the mesh",
        ));
    }
    let edges = [(0usize, 1usize), (1, 2), (2, 3), (3, 0)];
    let mut points = Vec::new();
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        for &(a, b) in &edges {
            let (na, nb) = (nodes[a], nodes[b]);
            let (fa, fb) = (phi[na] - level, phi[nb] - level);
            if fa == 0.0 {
                let c = mesh.coord(na);
                points.push([c[0], c[1]]);
            }
            if fa * fb < 0.0 {
                let t = fa / (fa - fb);
                let ca = mesh.coord(na);
                let cb = mesh.coord(nb);
                points.push([ca[0] + t * (cb[0] - ca[0]), ca[1] + t * (cb[1] - ca[1])]);
            }
        }
    }
    // Interior edges are visited from both adjacent elements; collapse
    // duplicates so downstream clustering sees each crossing once.
    points.sort_by(|p, q| {
        p[0].partial_cmp(&q[0])
            .unwrap()
            .then(p[1].partial_cmp(&q[1]).unwrap())
    });
    points.dedup_by(|p, q| (p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
    Ok(points)
}

/// Crack front positions: the farthest contour point from `origin` within
/// each branch, where branches are separated by at least `cluster_radius`.
/// Points are returned in decreasing distance from the origin.
pub fn crack_tips(
    mesh: &Mesh,
    phi: &[f64],
    level: f64,
    origin: [f64; 2],
    cluster_radius: f64,
) -> Result<Vec<[f64; 2]>> {
    let points = iso_contour_points(mesh, phi, level)?;
    let mut indexed: Vec<(f64, [f64; 2])> = points
        .into_iter()
        .map(|p| {
            let d = ((p[0] - origin[0]).powi(2) + (p[1] - origin[1]).powi(2)).sqrt();
            (d, p)
        })
        .collect();
    indexed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    // A tip is a local maximum of the origin distance: no contour point
    // within the cluster radius lies farther out. Flank points are always
    // dominated by a point farther along their own branch.
    let mut tips: Vec<[f64; 2]> = Vec::new();
    for (i, (_, p)) in indexed.iter().enumerate() {
        let dominated = indexed[..i].iter().any(|(_, q)| {
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() < cluster_radius
        });
        if !dominated {
            tips.push(*p);
        }
    }
    Ok(tips)
}

/// Crack propagation speed from two successive tip positions.
pub fn tip_speed(previous: [f64; 2], current: [f64; 2], dt: f64) -> f64 {
    ((current[0] - previous[0]).powi(2) + (current[1] - previous[1]).powi(2)).sqrt() / dt
}

/// Orientation of the crack near `tip` in degrees within `[0, 180)`,
/// from a principal-direction fit of the contour points inside `radius`.
pub fn crack_angle(points: &[[f64; 2]], tip: [f64; 2], radius: f64) -> Option<f64> {
    let local: Vec<&[f64; 2]> = points
        .iter()
        .filter(|p| ((p[0] - tip[0]).powi(2) + (p[1] - tip[1]).powi(2)).sqrt() <= radius)
        .collect();
    if local.len() < 2 {
        return None;
    }
    let n = local.len() as f64;
    let cx = local.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = local.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &local {
        let dx = p[0] - cx;
        let dy = p[1] - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Principal eigenvector of the 2x2 scatter matrix.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut deg = theta.to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    Some(deg)
}

/// Rayleigh surface wave speed from the Poisson-ratio approximation
/// `v_R = c_s (0.862 + 1.14 nu) / (1 + nu)` with `c_s = sqrt(mu / rho)`.
pub fn rayleigh_speed(consts: &ElasticConstants) -> Result<f64> {
    if !(consts.density > 0.0) {
        return Err(Error::domain("rayleigh speed needs a positive density"));
    }
    let cs = (consts.lame_mu / consts.density).sqrt();
    let nu = consts.poisson_ratio;
    Ok(cs * (0.862 + 1.14 * nu) / (1.0 + nu))
}

/// Shear wave speed `sqrt(mu / rho)`.
pub fn shear_wave_speed(consts: &ElasticConstants) -> Result<f64> {
    if !(consts.density > 0.0) {
        return Err(Error::domain("shear wave speed needs a positive density"));
    }
    Ok((consts.lame_mu / consts.density).sqrt())
}
