//! Pointwise material law for the phase-field fracture model.
//!
//! Everything in here is a pure function of its inputs: the spectral
//! tensile/compressive strain split, the degraded Cauchy stress, the
//! consistent Voigt tangent, and the 1D calibration formulas relating
//! the regularization length to an effective tensile strength.

use crate::error::{Error, Result};

/// Tolerance deciding when two principal strains count as coincident.
const EIGEN_COINCIDENCE_RTOL: f64 = 1e-12;

/// Default principal-strain perturbation applied at eigenvalue coincidence.
pub const DEFAULT_PERTURBATION: f64 = 1e-9;

/// Isotropic elastic constants plus mass density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    /// Young's modulus E (Pa).
    pub youngs_modulus: f64,
    /// Poisson ratio (dimensionless).
    pub poisson_ratio: f64,
    /// First Lame constant (Pa).
    pub lame_lambda: f64,
    /// Shear modulus (Pa).
    pub lame_mu: f64,
    /// Mass density (kg/m^3). Zero is allowed for quasi-static use.
    pub density: f64,
}

impl ElasticConstants {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self> {
        let (lame_lambda, lame_mu) = derive_lame(youngs_modulus, poisson_ratio)?;
        if !(density >= 0.0) {
            return Err(Error::domain(format!("density must be >= 0, got {density}")));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            lame_lambda,
            lame_mu,
            density,
        })
    }
}

/// Fracture regularization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureParams {
    /// Critical energy release rate G_c (J/m^2).
    pub energy_release_rate: f64,
    /// Length scale l0 (m) controlling the diffuse crack width.
    pub length_scale: f64,
    /// Residual stiffness k keeping the fully cracked state non-singular.
    pub residual_stiffness: f64,
}

/// Default residual stiffness.
pub const DEFAULT_RESIDUAL_STIFFNESS: f64 = 1e-9;

impl FractureParams {
    pub fn new(energy_release_rate: f64, length_scale: f64, residual_stiffness: f64) -> Result<Self> {
        if !(energy_release_rate > 0.0) {
            return Err(Error::domain(format!(
                "energy_release_rate must be > 0, got {energy_release_rate}"
            )));
        }
        if !(length_scale > 0.0) {
            return Err(Error::domain(format!("length_scale must be > 0, got {length_scale}")));
        }
        if !(residual_stiffness > 0.0 && residual_stiffness < 1.0) {
            return Err(Error::domain(format!(
                "residual_stiffness must lie in (0, 1), got {residual_stiffness}"
            )));
        }
        Ok(Self {
            energy_release_rate,
            length_scale,
            residual_stiffness,
        })
    }
}

/// Symmetric second-order tensor in 2D (plane strain) or 3D.
///
/// Components are stored in raw tensor form `[xx, yy, xy]` /
/// `[xx, yy, zz, xy, yz, xz]`. Strain Voigt vectors carry engineering
/// shear (`gamma_xy = 2 eps_xy`); stress Voigt vectors carry raw
/// components. 2D tensors are interpreted under plane strain with
/// `eps_zz = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricTensor {
    dim: usize,
    comps: [f64; 6],
}

impl SymmetricTensor {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        Self { dim, comps: [0.0; 6] }
    }

    /// Build from raw tensor components ordered `[xx, yy, xy]` or
    /// `[xx, yy, zz, xy, yz, xz]`.
    pub fn from_components(dim: usize, comps: &[f64]) -> Result<Self> {
        let n = voigt_len(dim);
        if comps.len() != n {
            return Err(Error::invalid_argument(format!(
                "expected {n} components for dim {dim}, got {}",
                comps.len()
            )));
        }
        if comps.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid_argument("non-finite tensor component"));
        }
        let mut t = Self::zero(dim);
        t.comps[..n].copy_from_slice(comps);
        Ok(t)
    }

    /// Build a strain tensor from a Voigt vector with engineering shear.
    pub fn from_strain_voigt(dim: usize, voigt: &[f64]) -> Result<Self> {
        let mut t = Self::from_components(dim, voigt)?;
        for v in t.comps[dim..voigt_len(dim)].iter_mut() {
            *v *= 0.5;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw tensor components (shear entries are the tensor values, not doubled).
    pub fn components(&self) -> &[f64] {
        &self.comps[..voigt_len(self.dim)]
    }

    /// Voigt vector with engineering shear, as consumed by `B_u` kinematics.
    pub fn strain_voigt(&self) -> Vec<f64> {
        let n = voigt_len(self.dim);
        let mut v = self.comps[..n].to_vec();
        for x in v[self.dim..].iter_mut() {
            *x *= 2.0;
        }
        v
    }

    /// Voigt vector with raw components, the stress convention.
    pub fn stress_voigt(&self) -> Vec<f64> {
        self.comps[..voigt_len(self.dim)].to_vec()
    }

    /// Full tensor entry by index pair.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (p, _) = tensor_index(self.dim, i, j);
        self.comps[p]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (p, _) = tensor_index(self.dim, i, j);
        self.comps[p] = value;
    }

    /// Trace over the full 3D tensor; in 2D `eps_zz = 0` contributes nothing.
    pub fn trace(&self) -> f64 {
        match self.dim {
            2 => self.comps[0] + self.comps[1],
            _ => self.comps[0] + self.comps[1] + self.comps[2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    /// Frobenius norm of the tensor form.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    /// Dense tensor form, zero-padded to 3x3 in 2D.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[i][j] = self.get(i, j);
            }
        }
        m
    }
}

pub(crate) fn voigt_len(dim: usize) -> usize {
    match dim {
        2 => 3,
        3 => 6,
        _ => panic!("dimension must be 2 or 3"),
    }
}

/// Map a tensor index pair to the storage slot; second value is true for shear.
fn tensor_index(dim: usize, i: usize, j: usize) -> (usize, bool) {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (dim, a, b) {
        (2, 0, 0) => (0, false),
        (2, 1, 1) => (1, false),
        (2, 0, 1) => (2, true),
        (3, 0, 0) => (0, false),
        (3, 1, 1) => (1, false),
        (3, 2, 2) => (2, false),
        (3, 0, 1) => (3, true),
        (3, 1, 2) => (4, true),
        (3, 0, 2) => (5, true),
        _ => panic!("bad tensor index ({i},{j}) for dim {dim}"),
    }
}

/// Spectral decomposition of a strain tensor into tensile and compressive parts.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    dim: usize,
    /// Principal strains sorted descending (after any perturbation).
    pub principal: [f64; 3],
    /// Unit principal directions, rows matching `principal`; 2D directions
    /// live in the x-y plane with a zero z component.
    pub directions: [[f64; 3]; 3],
    pub tensile: SymmetricTensor,
    pub compressive: SymmetricTensor,
    pub perturbation_applied: bool,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of in-plane principal values (2 in 2D, 3 in 3D).
    pub fn n_principal(&self) -> usize {
        self.dim
    }

    /// Trace of the decomposed strain (sum of principal values; the 2D
    /// out-of-plane principal strain is identically zero).
    pub fn trace(&self) -> f64 {
        self.principal[..self.dim].iter().sum()
    }
}

pub fn positive_part(x: f64) -> f64 {
    0.5 * (x + x.abs())
}

pub fn negative_part(x: f64) -> f64 {
    0.5 * (x - x.abs())
}

/// Lame constants from Young's modulus and Poisson ratio.
pub fn derive_lame(youngs_modulus: f64, poisson_ratio: f64) -> Result<(f64, f64)> {
    if !(youngs_modulus > 0.0) {
        return Err(Error::domain(format!(
            "youngs_modulus must be > 0, got {youngs_modulus}"
        )));
    }
    if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
        return Err(Error::domain(format!(
            "poisson_ratio must lie in (-1, 0.5), got {poisson_ratio}"
        )));
    }
    let lambda = youngs_modulus * poisson_ratio
        / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    let mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
    Ok((lambda, mu))
}

/// Closed-form eigendecomposition of a symmetric 2x2 matrix.
/// Returns (eigenvalues descending, unit eigenvectors as rows).
fn eigen_2x2(exx: f64, eyy: f64, exy: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mean = 0.5 * (exx + eyy);
    let diff = 0.5 * (exx - eyy);
    let r = (diff * diff + exy * exy).sqrt();
    let e1 = mean + r;
    let e2 = mean - r;
    if r == 0.0 {
        return ([e1, e2], [[1.0, 0.0], [0.0, 1.0]]);
    }
    // Eigenvector for e1: pick the better-conditioned of the two rows.
    let (mut vx, mut vy) = if diff >= 0.0 {
        (diff + r, exy)
    } else {
        (exy, r - diff)
    };
    let n = (vx * vx + vy * vy).sqrt();
    if n == 0.0 {
        (vx, vy) = (1.0, 0.0);
    } else {
        vx /= n;
        vy /= n;
    }
    ([e1, e2], [[vx, vy], [-vy, vx]])
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix.
/// Deterministic sweep order; iterates until the off-diagonal norm drops
/// below 1e-14 of the matrix scale. Returns eigenvalues descending with
/// matching unit eigenvectors as rows.
fn eigen_3x3(m: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = *m;
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1e-300);
    let tol = 1e-14 * scale;
    for _sweep in 0..64 {
        let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
        if off <= tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq.abs() <= 1e-300 * scale {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta >= 0.0 {
                1.0 / (theta + (1.0 + theta * theta).sqrt())
            } else {
                -1.0 / (-theta + (1.0 + theta * theta).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // Apply the rotation to A on both sides and accumulate into V.
            let app = a[p][p];
            let aqq = a[q][q];
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for r in 0..3 {
                if r != p && r != q {
                    let arp = a[r][p];
                    let arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[p][r] = a[r][p];
                    a[r][q] = c * arq + s * arp;
                    a[q][r] = a[r][q];
                }
                let vrp = v[r][p];
                let vrq = v[r][q];
                v[r][p] = c * vrp - s * vrq;
                v[r][q] = c * vrq + s * vrp;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let mut evals = [0.0; 3];
    let mut evecs = [[0.0; 3]; 3];
    for (k, &i) in order.iter().enumerate() {
        evals[k] = a[i][i];
        for r in 0..3 {
            evecs[k][r] = v[r][i];
        }
    }
    (evals, evecs)
}

fn eigen_coincident(a: f64, b: f64) -> bool {
    (a - b).abs() <= EIGEN_COINCIDENCE_RTOL * 1.0f64.max(a.abs()).max(b.abs())
}

/// Perturb a principal strain away from a coincident neighbour. The rule is
/// multiplicative; an exactly zero eigenvalue gets an absolute shift scaled
/// by the strain magnitude instead, since multiplying zero changes nothing.
fn perturb(value: f64, delta: f64, sign: f64, strain_scale: f64) -> f64 {
    if value == 0.0 {
        sign * delta * 1.0f64.max(strain_scale)
    } else {
        value * (1.0 + sign * delta)
    }
}

/// Spectral split of a strain tensor into tensile and compressive parts.
///
/// Coincident principal strains are separated with a small perturbation so
/// the consistent tangent stays evaluable: the largest eigenvalue moves up
/// when it ties the middle one, the smallest moves down when it ties the
/// middle one (2D perturbs only the larger).
pub fn spectral_split(strain: &SymmetricTensor, delta: f64) -> Result<SpectralSplit> {
    if !strain.is_finite() {
        return Err(Error::invalid_argument("non-finite strain tensor"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid_argument(format!("perturbation must be > 0, got {delta}")));
    }
    let dim = strain.dim();
    let scale = strain.norm();
    let mut principal = [0.0; 3];
    let mut directions = [[0.0; 3]; 3];
    let mut perturbation_applied = false;

    if dim == 2 {
        let ([e1, e2], vecs) = eigen_2x2(strain.get(0, 0), strain.get(1, 1), strain.get(0, 1));
        principal[0] = e1;
        principal[1] = e2;
        if eigen_coincident(e1, e2) {
            principal[0] = perturb(e1, delta, 1.0, scale);
            perturbation_applied = true;
        }
        for a in 0..2 {
            directions[a][0] = vecs[a][0];
            directions[a][1] = vecs[a][1];
        }
        directions[2][2] = 1.0;
    } else {
        let (evals, evecs) = eigen_3x3(&strain.to_matrix());
        principal = evals;
        directions = evecs;
        if eigen_coincident(principal[0], principal[1]) {
            principal[0] = perturb(principal[0], delta, 1.0, scale);
            perturbation_applied = true;
        }
        if eigen_coincident(principal[1], principal[2]) {
            principal[2] = perturb(principal[2], delta, -1.0, scale);
            perturbation_applied = true;
        }
    }

    let mut tensile = SymmetricTensor::zero(dim);
    let mut compressive = SymmetricTensor::zero(dim);
    for a in 0..dim {
        let ep = positive_part(principal[a]);
        let em = negative_part(principal[a]);
        for i in 0..dim {
            for j in i..dim {
                let nn = directions[a][i] * directions[a][j];
                tensile.set(i, j, tensile.get(i, j) + ep * nn);
                compressive.set(i, j, compressive.get(i, j) + em * nn);
            }
        }
    }

    Ok(SpectralSplit {
        dim,
        principal,
        directions,
        tensile,
        compressive,
        perturbation_applied,
    })
}

/// Tensile/compressive elastic energy densities (J/m^3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPair {
    pub psi_plus: f64,
    pub psi_minus: f64,
}

/// Energy densities of the split: psi± = lambda/2 <tr eps>±^2 + mu tr(eps±^2).
pub fn split_energies(split: &SpectralSplit, lambda: f64, mu: f64) -> EnergyPair {
    let tr = split.trace();
    let mut sq_plus = 0.0;
    let mut sq_minus = 0.0;
    for a in 0..split.n_principal() {
        let p = positive_part(split.principal[a]);
        let m = negative_part(split.principal[a]);
        sq_plus += p * p;
        sq_minus += m * m;
    }
    EnergyPair {
        psi_plus: 0.5 * lambda * positive_part(tr).powi(2) + mu * sq_plus,
        psi_minus: 0.5 * lambda * negative_part(tr).powi(2) + mu * sq_minus,
    }
}

/// Stiffness degradation g = (1-k)(1-phi)^2 + k.
pub fn degradation(phi: f64, residual_stiffness: f64) -> f64 {
    (1.0 - residual_stiffness) * (1.0 - phi) * (1.0 - phi) + residual_stiffness
}

/// Degraded Cauchy stress. In 2D only the in-plane Voigt components are
/// carried; the plane-strain sigma_zz does not enter the element residual.
pub fn stress(
    split: &SpectralSplit,
    phi: f64,
    consts: &ElasticConstants,
    params: &FractureParams,
) -> SymmetricTensor {
    let g = degradation(phi, params.residual_stiffness);
    let lambda = consts.lame_lambda;
    let mu = consts.lame_mu;
    let tr = split.trace();
    let tp = positive_part(tr);
    let tm = negative_part(tr);
    let dim = split.dim();
    let mut sigma = SymmetricTensor::zero(dim);
    for i in 0..dim {
        for j in i..dim {
            let identity = if i == j { 1.0 } else { 0.0 };
            let v = g * (lambda * tp * identity + 2.0 * mu * split.tensile.get(i, j))
                + lambda * tm * identity
                + 2.0 * mu * split.compressive.get(i, j);
            sigma.set(i, j, v);
        }
    }
    sigma
}

/// Consistent tangent in Voigt form, 3x3 (2D plane strain) or 6x6.
#[derive(Debug, Clone)]
pub struct TangentStiffness {
    dim: usize,
    /// Row-major Voigt matrix; entry (I, J) equals the tensor component
    /// D_ijkl so that `D * strain_voigt = stress_voigt` with engineering
    /// shear in the strain vector.
    pub matrix: Vec<f64>,
}

impl TangentStiffness {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        voigt_len(self.dim)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j]
    }

    /// Apply to an engineering-shear strain Voigt vector.
    pub fn mul_strain_voigt(&self, strain: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.matrix[i * n + j] * strain[j];
            }
            out[i] = s;
        }
        out
    }
}

/// Heaviside used by the tangent. The tensile branch includes zero so the
/// undamaged tangent at zero strain reduces to isotropic elasticity; the
/// stress itself is unaffected since <0>± = 0.
fn heaviside_pair(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

/// Consistent tangent of the degraded stress with respect to strain.
///
/// Requires distinct principal strains; `spectral_split` guarantees that
/// via its perturbation rule.
pub fn tangent(
    split: &SpectralSplit,
    phi: f64,
    consts: &ElasticConstants,
    params: &FractureParams,
) -> Result<TangentStiffness> {
    let dim = split.dim();
    let np = split.n_principal();
    for a in 0..np {
        for b in (a + 1)..np {
            if split.principal[a] == split.principal[b] {
                return Err(Error::internal(
                    "degenerate principal strains reached the tangent without perturbation",
                ));
            }
        }
    }
    let g = degradation(phi, params.residual_stiffness);
    let lambda = consts.lame_lambda;
    let mu = consts.lame_mu;
    let n = voigt_len(dim);
    let mut d = vec![0.0; n * n];

    // Volumetric term: lambda {g H(tr) + H(-tr)} delta_ij delta_kl.
    let tr = split.trace();
    let (hp, hm) = heaviside_pair(tr);
    let vol = lambda * (g * hp + hm);
    for i in 0..dim {
        for j in 0..dim {
            d[i * n + j] += vol;
        }
    }

    // Voigt index of tensor pair (i, j).
    let vidx = |i: usize, j: usize| -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        match (dim, a, b) {
            (2, 0, 0) => 0,
            (2, 1, 1) => 1,
            (2, 0, 1) => 2,
            (3, 0, 0) => 0,
            (3, 1, 1) => 1,
            (3, 2, 2) => 2,
            (3, 0, 1) => 3,
            (3, 1, 2) => 4,
            (3, 0, 2) => 5,
            _ => unreachable!(),
        }
    };

    // Rank-one accumulation of coeff * (v v^T) with v a stress-like Voigt
    // vector of a symmetric dyad.
    let add_rank_one = |d: &mut [f64], coeff: f64, dyad: &[f64]| {
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] += coeff * dyad[i] * dyad[j];
            }
        }
    };

    // Diagonal spectral projectors: 2 mu {g H(eps_a) + H(-eps_a)} Ma (x) Ma.
    for a in 0..np {
        let (hp, hm) = heaviside_pair(split.principal[a]);
        let coeff = 2.0 * mu * (g * hp + hm);
        let mut dyad = vec![0.0; n];
        for i in 0..dim {
            for j in i..dim {
                dyad[vidx(i, j)] = split.directions[a][i] * split.directions[a][j];
            }
        }
        add_rank_one(&mut d, coeff, &dyad);
    }

    // Off-diagonal coupling between principal pairs.
    for a in 0..np {
        for b in (a + 1)..np {
            let ea = split.principal[a];
            let eb = split.principal[b];
            let fp = (positive_part(ea) - positive_part(eb)) / (ea - eb);
            let fm = (negative_part(ea) - negative_part(eb)) / (ea - eb);
            let coeff = 4.0 * mu * (g * fp + fm);
            let mut dyad = vec![0.0; n];
            for i in 0..dim {
                for j in i..dim {
                    dyad[vidx(i, j)] = 0.5
                        * (split.directions[a][i] * split.directions[b][j]
                            + split.directions[b][i] * split.directions[a][j]);
                }
            }
            add_rank_one(&mut d, coeff, &dyad);
        }
    }

    Ok(TangentStiffness { dim, matrix: d })
}

/// Critical 1D tensile stress sustained by the homogeneous phase-field bar.
pub fn critical_stress_1d(youngs_modulus: f64, energy_release_rate: f64, length_scale: f64) -> Result<f64> {
    for (name, v) in [
        ("youngs_modulus", youngs_modulus),
        ("energy_release_rate", energy_release_rate),
        ("length_scale", length_scale),
    ] {
        if !(v > 0.0) {
            return Err(Error::domain(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok(9.0 / 16.0 * (youngs_modulus * energy_release_rate / (3.0 * length_scale)).sqrt())
}

/// Length scale matching a target tensile strength; exact inverse of
/// [`critical_stress_1d`].
pub fn length_scale_from_strength(
    youngs_modulus: f64,
    energy_release_rate: f64,
    critical_stress: f64,
) -> Result<f64> {
    for (name, v) in [
        ("youngs_modulus", youngs_modulus),
        ("energy_release_rate", energy_release_rate),
        ("critical_stress", critical_stress),
    ] {
        if !(v > 0.0) {
            return Err(Error::domain(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok(27.0 * youngs_modulus * energy_release_rate / (256.0 * critical_stress * critical_stress))
}

/// Crack surface density per unit volume: phi^2/(2 l0) + (l0/2)|grad phi|^2.
pub fn crack_density(phi: f64, grad_phi: &[f64], length_scale: f64) -> f64 {
    let g2: f64 = grad_phi.iter().map(|g| g * g).sum();
    phi * phi / (2.0 * length_scale) + 0.5 * length_scale * g2
}
