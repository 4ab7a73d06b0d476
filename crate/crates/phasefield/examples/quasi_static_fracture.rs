//! A small quasi-static fracture run driven through the library API:
//! a notched plate is stretched step by step, the staggered solver
//! advances the displacement and phase fields, and the load-displacement
//! response shows the peak and the softening branch.
//!
//! Run with `cargo run --release --example quasi_static_fracture`.

use phasefield::constitutive::{ElasticConstants, FractureParams};
use phasefield::mesh::{generate_structured, insert_slit, Segment};
use phasefield::postprocess;
use phasefield::stepper::{
    Analysis, Load, LoadSchedule, Phase, Simulation, StaggeredControls,
};
use phasefield::Result;

fn main() -> Result<()> {
    // A 1 mm plate with a slit over the left half at mid height,
    // deliberately coarse so the example finishes in seconds.
    let mesh = {
        let grid = generate_structured(2, &[1.0e-3, 1.0e-3], &[30, 30])?;
        let slit = Segment::new([0.0, 0.5e-3, 0.0], [0.5e-3, 0.5e-3, 0.0])?;
        insert_slit(&grid, &slit)?
    };
    let consts = ElasticConstants::new(210e9, 0.3, 0.0)?;
    let params = FractureParams::new(2700.0, 7.0e-5, 1e-9)?;

    let stretch = |increment: f64, steps: usize| Phase {
        steps,
        dt: 1.0,
        loads: vec![
            Load::Fix { set: "bottom".into(), components: vec![0, 1] },
            Load::Fix { set: "top".into(), components: vec![0] },
            Load::Displacement { set: "top".into(), component: 1, increment },
        ],
    };
    let schedule = LoadSchedule {
        phases: vec![stretch(2.0e-7, 25), stretch(2.0e-8, 150)],
    };

    // The unstable crack jump needs several hundred staggered sweeps,
    // so the default iteration cap is raised for this coarse setup.
    let controls = StaggeredControls {
        max_iterations: 2000,
        ..StaggeredControls::default()
    };
    let mut sim = Simulation::new(
        mesh,
        consts,
        params,
        Analysis::QuasiStatic,
        controls,
        schedule,
    )?;

    println!("step  displacement [m]  reaction [N/m]  max phi");
    let mut peak: f64 = 0.0;
    sim.run(|sim, report| {
        let mesh = sim.mesh();
        let state = sim.state();
        let dim = mesh.dim();
        let dofs: Vec<usize> = mesh
            .named_set("top")?
            .iter()
            .map(|&n| n * dim + 1)
            .collect();
        let reaction = postprocess::reaction_force(
            mesh,
            &state.u,
            &state.phi,
            sim.elastic_constants(),
            sim.fracture_params(),
            &dofs,
        )?;
        peak = peak.max(reaction);
        if (report.step + 1) % 25 == 0 {
            let phi_max = state.phi.iter().fold(0.0f64, |m, v| m.max(*v));
            println!(
                "{:4}  {:16.6e}  {:14.6e}  {:7.4}",
                report.step + 1,
                sim.prescribed_displacement("top", 1),
                reaction,
                phi_max
            );
        }
        Ok(())
    })?;
    println!("\npeak reaction: {peak:.6e} N/m (plane model, per unit thickness)");
    Ok(())
}
