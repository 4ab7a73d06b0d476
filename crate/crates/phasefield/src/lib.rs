//! Phase-field modelling of quasi-static and dynamic brittle fracture.
//!
//! The library couples a small-strain elastic solid with a scalar damage-like
//! phase field `phi` (0 intact, 1 fully cracked) regularized over a length
//! `l0`. Only the tensile part of the strain energy drives the crack, via a
//! spectral split of the strain tensor, and irreversibility is enforced by a
//! pointwise history field holding the running maximum of the tensile energy
//! density. The coupled system is advanced with a staggered implicit scheme;
//! dynamic runs use the generalized-alpha integrator.
//!
//! Modules:
//! - [`constitutive`] — strain split, degraded stress, consistent tangent,
//!   1D strength calibration.
//! - [`mesh`] — structured Q4/HEX8 grids, boundary sets, geometric slits.
//! - [`fem`] — shape functions, quadrature, B-matrices, global assembly.
//! - [`linsolve`] — sparse SPD solves (Jacobi-preconditioned CG).
//! - [`stepper`] — staggered solution loop, history update, time integration.
//! - [`scenario`] — declarative scenario configs and the built-in benchmarks.
//! - [`output`] — VTK snapshots, CSV series, run manifest.
//! - [`postprocess`] — reactions, energies, iso-contour crack-tip tracking.
//!
//! See the crate `examples/` directory for one runnable example per major
//! capability, and the `phasefield` binary for the scenario-driven CLI.

pub mod cli;
pub mod constitutive;
pub mod error;
pub mod fem;
pub mod linsolve;
pub mod mesh;
pub mod output;
pub mod postprocess;
pub mod scenario;
pub mod stepper;

pub use error::{Error, Result};
