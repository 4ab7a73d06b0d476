//! Material-point behavior: the tension-compression split of the strain
//! energy, stress degradation with growing damage, and the 1D strength
//! calibration linking the length scale to a critical stress.
//!
//! Run with `cargo run --example constitutive_response`.

use phasefield::constitutive::{
    self, ElasticConstants, FractureParams, SymmetricTensor, DEFAULT_PERTURBATION,
    DEFAULT_RESIDUAL_STIFFNESS,
};
use phasefield::Result;

fn main() -> Result<()> {
    let consts = ElasticConstants::new(210e9, 0.3, 0.0)?;
    let params = FractureParams::new(2700.0, 1.5e-5, DEFAULT_RESIDUAL_STIFFNESS)?;

    println!("steel-like material: E = {:.3e} Pa, nu = {}", consts.youngs_modulus, consts.poisson_ratio);
    println!("lambda = {:.6e} Pa, mu = {:.6e} Pa\n", consts.lame_lambda, consts.lame_mu);

    // Uniaxial stretch and the same strain reversed. Only the tensile
    // branch of the energy drives the crack, so the split energies swap.
    for sign in [1.0f64, -1.0] {
        let eps = 1.0e-3 * sign;
        let strain = SymmetricTensor::from_components(2, &[eps, 0.0, 0.0])?;
        let split = constitutive::spectral_split(&strain, DEFAULT_PERTURBATION)?;
        let energies = constitutive::split_energies(&split, consts.lame_lambda, consts.lame_mu);
        println!(
            "eps_xx = {eps:+.1e}: psi+ = {:.4e} J/m^3, psi- = {:.4e} J/m^3",
            energies.psi_plus, energies.psi_minus
        );
    }

    // Stress degradation under fixed tensile strain as phi grows. The
    // residual stiffness keeps a small floor at phi = 1.
    println!("\nsigma_xx under eps_xx = 1e-3 as the phase field grows:");
    let strain = SymmetricTensor::from_components(2, &[1.0e-3, 0.0, 0.0])?;
    let split = constitutive::spectral_split(&strain, DEFAULT_PERTURBATION)?;
    for phi in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let sigma = constitutive::stress(&split, phi, &consts, &params);
        println!(
            "  phi = {phi:.2}  g(phi) = {:.3e}  sigma_xx = {:.6e} Pa",
            constitutive::degradation(phi, params.residual_stiffness),
            sigma.get(0, 0)
        );
    }

    // 1D homogeneous solution: the peak stress a bar can carry before
    // softening, and the inverse map from a measured strength back to l0.
    let sigma_c = constitutive::critical_stress_1d(
        consts.youngs_modulus,
        params.energy_release_rate,
        params.length_scale,
    )?;
    let l0_back = constitutive::length_scale_from_strength(
        consts.youngs_modulus,
        params.energy_release_rate,
        sigma_c,
    )?;
    println!("\ncritical 1D stress for l0 = {:.2e} m: {:.6e} Pa", params.length_scale, sigma_c);
    println!("length scale recovered from that strength: {:.6e} m", l0_back);

    Ok(())
}
