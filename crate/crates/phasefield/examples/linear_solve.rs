//! The sparse SPD solver layer: assemble a stiffness matrix, pin it with
//! boundary conditions, and solve the same system with the iterative
//! conjugate-gradient path and the dense Cholesky fallback.
//!
//! Run with `cargo run --example linear_solve`.

use phasefield::constitutive::{ElasticConstants, FractureParams, DEFAULT_PERTURBATION};
use phasefield::fem::{apply_dirichlet, assemble_displacement, DirichletBc};
use phasefield::linsolve::{solve_spd, SolveMethod, SolveOptions};
use phasefield::mesh::generate_structured;
use phasefield::Result;

fn main() -> Result<()> {
    let mesh = generate_structured(2, &[1.0, 1.0], &[16, 16])?;
    let consts = ElasticConstants::new(1.0e9, 0.25, 0.0)?;
    let params = FractureParams::new(100.0, 0.05, 1e-9)?;
    let dim = mesh.dim();
    let n_dofs = mesh.n_nodes() * dim;

    // Undamaged stiffness at zero displacement.
    let u0 = vec![0.0; n_dofs];
    let phi = vec![0.0; mesh.n_nodes()];
    let (mut k, mut rhs) =
        assemble_displacement(&mesh, &u0, &phi, &consts, &params, DEFAULT_PERTURBATION)?;
    for v in rhs.iter_mut() {
        *v = -*v;
    }

    // Clamp the bottom edge, stretch the top edge upward by 1e-3.
    let mut bcs = Vec::new();
    for &node in mesh.named_set("bottom")? {
        bcs.push(DirichletBc { dof: node * dim, value: 0.0 });
        bcs.push(DirichletBc { dof: node * dim + 1, value: 0.0 });
    }
    for &node in mesh.named_set("top")? {
        bcs.push(DirichletBc { dof: node * dim + 1, value: 1.0e-3 });
    }
    apply_dirichlet(&mut k, &mut rhs, &bcs)?;

    println!("system: {n_dofs} unknowns, symmetric positive definite after elimination");

    let mut solutions = Vec::new();
    for method in [SolveMethod::ConjugateGradient, SolveMethod::DenseCholesky] {
        let options = SolveOptions { method, ..SolveOptions::default() };
        let (x, report) = solve_spd(&k, &rhs, &options)?;
        println!(
            "  {:16} iterations = {:4}  relative residual = {:.3e}",
            report.method, report.iterations, report.relative_residual
        );
        solutions.push(x);
    }

    let diff = solutions[0]
        .iter()
        .zip(&solutions[1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / 1.0e-3;
    println!("\nmax relative disagreement between the two methods: {diff:.3e}");
    Ok(())
}
