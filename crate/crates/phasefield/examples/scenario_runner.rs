//! The scenario layer end to end: load a JSON config, apply overrides,
//! hash it, execute the run into an output directory, and read the
//! results back through the postprocessing summary. This is the same
//! path the `phasefield` binary takes.
//!
//! Run with `cargo run --release --example scenario_runner`.

use phasefield::cli::{execute_run, summarize_run};
use phasefield::scenario::{self, builtin_scenario, Profile};
use phasefield::Result;

fn main() -> Result<()> {
    // Built-in scenarios come in two resolution profiles.
    for name in scenario::BUILTIN_NAMES {
        println!("{name:22} {}", scenario::builtin_description(name));
    }

    // Start from the tension benchmark and shrink it so the example
    // completes quickly, the same thing the CLI does with --set flags.
    let base = builtin_scenario("sen-tension", Profile::Desk)?;
    let overrides = [
        ("geometry.divisions".to_string(), "[24, 24]".to_string()),
        ("fracture.l0".to_string(), "8e-5".to_string()),
        ("schedule.phases".to_string(),
         r#"[{"steps": 12, "dt": 1.0, "loads": [
              {"type": "fix", "set": "bottom", "components": [0, 1]},
              {"type": "fix", "set": "top", "components": [0]},
              {"type": "displacement", "set": "top", "component": 1, "increment": 4e-7}
            ]}]"#.to_string()),
        ("outputs.snapshot_every".to_string(), "6".to_string()),
    ];
    let text = scenario::serialize_config(&base);
    let config = scenario::parse_config_with_overrides(&text, &overrides)?;

    println!("\nconfig hash: {}", scenario::config_hash(&config));

    let dir = std::env::temp_dir().join(format!("phasefield-example-{}", std::process::id()));
    let manifest = execute_run(&config, &dir, &[], "desk", true)?;
    println!(
        "ran {} steps in {:.2} s, {} files written to {}",
        manifest.steps_completed,
        manifest.wall_seconds,
        manifest.files.len(),
        dir.display()
    );

    let summary = summarize_run(&dir)?;
    if let (Some(reaction), Some(displacement)) =
        (summary.peak_reaction, summary.displacement_at_peak)
    {
        println!("peak reaction {reaction:.4e} N at displacement {displacement:.4e} m");
    }
    if let (Some(elastic), Some(dissipated)) =
        (summary.final_elastic_energy, summary.final_dissipated_energy)
    {
        println!("final energies: elastic {elastic:.4e} J, dissipated {dissipated:.4e} J");
    }

    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
