//! Command-line front end.
//!
//! Subcommands: `run` executes a scenario and writes snapshots, series
//! files, and a manifest into an output directory; `validate` checks a
//! config without running it; `list` enumerates the built-in benchmarks;
//! `postprocess` summarizes an existing output directory.
//!
//! Exit codes: 0 on success, 2 for configuration and validation
//! problems, 3 for solver failures at run time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::output::{
    snapshot_file_name, write_vtk, ManifestEntry, OutputManifest, SeriesKind, SeriesWriter,
};
use crate::postprocess;
use crate::scenario::{
    self, builtin_description, builtin_scenario, Profile, ScenarioConfig, BUILTIN_NAMES,
};
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "phasefield",
    version,
    about = "Finite-element phase-field brittle fracture solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Scenario selection shared by `run` and `validate`.
#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Built-in scenario name (see `list`).
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,

    /// Path to a JSON scenario document.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Resolution profile for built-in scenarios: desk or paper.
    #[arg(long, default_value = "desk")]
    pub profile: String,

    /// Override a config field by dotted path, e.g. fracture.G_c=1e4.
    /// Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a scenario and write results to an output directory.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,

        /// Output directory, created if missing.
        #[arg(short, long)]
        output: PathBuf,

        /// Worker threads for assembly; defaults to machine parallelism.
        #[arg(long)]
        threads: Option<usize>,

        /// Suppress per-step progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,

        /// Emit the resolved config as JSON instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// List the built-in scenarios.
    List {
        /// Emit machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Summarize an existing output directory from its manifest.
    Postprocess {
        /// Output directory of a previous run.
        output: PathBuf,

        /// Emit machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
}

/// Entry point for the binary. Parses `std::env::args` and returns the
/// process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and exit 0.
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_VALIDATION };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Domain(_)
        | Error::InvalidArgument(_)
        | Error::UnsupportedGeometry(_)
        | Error::Resource(_)
        | Error::Configuration(_)
        | Error::Validation { .. } => EXIT_VALIDATION,
        Error::Assembly(_)
        | Error::Solver { .. }
        | Error::StepFailure { .. }
        | Error::Io { .. }
        | Error::Internal(_) => EXIT_SOLVER,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            scenario,
            output,
            threads,
            quiet,
        } => cmd_run(&scenario, &output, threads, quiet),
        Command::Validate { scenario, json } => cmd_validate(&scenario, json),
        Command::List { json } => cmd_list(json),
        Command::Postprocess { output, json } => cmd_postprocess(&output, json),
    }
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                .ok_or_else(|| {
                    Error::invalid_argument(format!("--set expects PATH=VALUE, got '{item}'"))
                })
        })
        .collect()
}

/// Resolve a config from either a built-in name or a JSON file, with
/// overrides applied before validation.
pub fn resolve_config(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let overrides = parse_overrides(&args.overrides)?;
    let profile: Profile = args.profile.parse()?;
    match (&args.scenario, &args.config) {
        (Some(name), None) => {
            let base = builtin_scenario(name, profile)?;
            if overrides.is_empty() {
                return Ok(base);
            }
            let text = scenario::serialize_config(&base);
            scenario::parse_config_with_overrides(&text, &overrides)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            scenario::parse_config_with_overrides(&text, &overrides)
        }
        (Some(_), Some(_)) => Err(Error::invalid_argument(
            "--scenario and --config are mutually exclusive",
        )),
        (None, None) => Err(Error::invalid_argument(
            "one of --scenario or --config is required",
        )),
    }
}

fn cmd_validate(args: &ScenarioArgs, json: bool) -> Result<()> {
    let config = resolve_config(args)?;
    if json {
        println!("{}", scenario::serialize_config(&config));
        return Ok(());
    }
    let hash = scenario::config_hash(&config);
    let dim = config.geometry.extents.len();
    let nodes: usize = config.geometry.divisions.iter().map(|d| d + 1).product();
    let steps: usize = config.schedule.phases.iter().map(|p| p.steps).sum();
    println!("ok: {}", if config.name.is_empty() { "<unnamed>" } else { &config.name });
    println!("  hash: {hash}");
    println!("  dimension: {dim}");
    println!("  grid nodes (before slits): {nodes}");
    println!("  phases: {}  total steps: {steps}", config.schedule.phases.len());
    Ok(())
}

fn cmd_list(json: bool) -> Result<()> {
    if json {
        let entries: Vec<serde_json::Value> = BUILTIN_NAMES
            .iter()
            .map(|name| {
                serde_json::json!({
                    "name": name,
                    "description": builtin_description(name),
                    "profiles": ["desk", "paper"],
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::Value::Array(entries))
                .expect("listing serialization cannot fail")
        );
    } else {
        for name in BUILTIN_NAMES {
            println!("{name:22} {}", builtin_description(name));
        }
    }
    Ok(())
}

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Fails if a global pool already exists, for example when two
        // runs share a process in tests; the results do not depend on
        // the thread count, so this is not an error.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn cmd_run(args: &ScenarioArgs, output: &Path, threads: Option<usize>, quiet: bool) -> Result<()> {
    let config = resolve_config(args)?;
    configure_threads(threads);
    let report = execute_run(&config, output, &args.overrides, args.profile.as_str(), quiet)?;
    println!(
        "done: {} steps, final time {:.6e} s, wall {:.1} s, outputs in {}",
        report.steps_completed,
        report.final_time,
        report.wall_seconds,
        output.display()
    );
    Ok(())
}

/// Execute a validated config and populate `output`. Exposed so that
/// tests and examples can drive full runs without spawning a process.
pub fn execute_run(
    config: &ScenarioConfig,
    output: &Path,
    overrides: &[String],
    profile: &str,
    quiet: bool,
) -> Result<OutputManifest> {
    let start = Instant::now();
    fs::create_dir_all(output).map_err(|e| Error::io(output.display().to_string(), e))?;
    let mut sim = scenario::build_simulation(config)?;
    let total_steps = sim.schedule().total_steps();
    let mut files: Vec<ManifestEntry> = Vec::new();

    let config_path = output.join("scenario.json");
    fs::write(&config_path, scenario::serialize_config(config) + "\n")
        .map_err(|e| Error::io(config_path.display().to_string(), e))?;
    files.push(ManifestEntry {
        path: "scenario.json".into(),
        kind: "config".into(),
        step: None,
    });

    let outputs = &config.outputs;
    let mut series_ld = if outputs.load_displacement && outputs.reaction_set.is_some() {
        Some(SeriesWriter::create(output, SeriesKind::LoadDisplacement)?)
    } else {
        None
    };
    let mut series_energy = if outputs.energies {
        Some(SeriesWriter::create(output, SeriesKind::Energies)?)
    } else {
        None
    };
    let mut series_tip = if outputs.crack_tip {
        Some(SeriesWriter::create(output, SeriesKind::CrackTip)?)
    } else {
        None
    };

    let tip_origin = outputs
        .tip_origin
        .as_ref()
        .map(|o| [o[0], o[1]])
        .unwrap_or([0.0, 0.0]);
    let cluster_radius = outputs
        .cluster_radius
        .unwrap_or(3.0 * config.fracture.l0);
    let reaction = outputs
        .reaction_set
        .as_ref()
        .map(|set| (set.clone(), outputs.reaction_component));

    let mut prev_tip: Option<([f64; 2], f64)> = None;
    let mut snapshots: Vec<(String, usize)> = Vec::new();

    let run_result = sim.run(|sim, report| {
        if !quiet {
            println!(
                "step {}/{} t={:.6e} stagger={} incr={:.3e}",
                report.step,
                total_steps,
                report.time,
                report.stagger_iterations,
                report.final_increment
            );
        }
        let state = sim.state();
        let mesh = sim.mesh();
        let consts = sim.elastic_constants();
        let params = sim.fracture_params();

        if let (Some(writer), Some((set, component))) = (series_ld.as_mut(), reaction.as_ref()) {
            let nodes = mesh.named_set(set)?;
            let dim = mesh.dim();
            let dofs: Vec<usize> = nodes.iter().map(|&n| n * dim + component).collect();
            let reaction_sum =
                postprocess::reaction_force(mesh, &state.u, &state.phi, consts, params, &dofs)?;
            let displacement = sim.prescribed_displacement(set, *component);
            writer.write_row(report.step, report.time, &[displacement, reaction_sum])?;
        }
        if let Some(writer) = series_energy.as_mut() {
            let elastic = postprocess::elastic_energy(mesh, &state.u, &state.phi, consts, params)?;
            let dissipated = postprocess::dissipated_energy(mesh, &state.phi, params)?;
            writer.write_row(report.step, report.time, &[elastic, dissipated])?;
        }
        if let Some(writer) = series_tip.as_mut() {
            let tips = postprocess::crack_tips(
                mesh,
                &state.phi,
                postprocess::CRACK_ISO_LEVEL,
                tip_origin,
                cluster_radius,
            )?;
            if let Some(tip) = tips.first().copied() {
                let speed = match prev_tip {
                    Some((prev, prev_time)) if report.time > prev_time => {
                        postprocess::tip_speed(prev, tip, report.time - prev_time)
                    }
                    _ => 0.0,
                };
                writer.write_row(report.step, report.time, &[tip[0], tip[1], speed])?;
                prev_tip = Some((tip, report.time));
            }
        }
        let due = outputs.snapshot_every > 0
            && (report.step % outputs.snapshot_every == 0 || report.step == total_steps);
        if due {
            let name = snapshot_file_name(report.step);
            let history_max = element_history_max(&state.history, mesh.n_elements());
            let stress = postprocess::element_max_principal_stress(
                mesh, &state.u, &state.phi, consts, params,
            )?;
            write_vtk(
                &output.join(&name),
                mesh,
                &state.u,
                &state.phi,
                &history_max,
                &stress,
            )?;
            snapshots.push((name, report.step + 1));
        }
        Ok(())
    });

    if let Some(writer) = series_ld.take() {
        files.push(series_entry(writer.finish()?));
    }
    if let Some(writer) = series_energy.take() {
        files.push(series_entry(writer.finish()?));
    }
    if let Some(writer) = series_tip.take() {
        files.push(series_entry(writer.finish()?));
    }
    for (name, step) in snapshots {
        files.push(ManifestEntry {
            path: name,
            kind: "snapshot".into(),
            step: Some(step),
        });
    }

    let manifest = OutputManifest {
        run_id: make_run_id(&config.name),
        scenario: config.name.clone(),
        profile: profile.to_string(),
        config_hash: scenario::config_hash(config),
        overrides: overrides.to_vec(),
        steps_completed: sim.state().step,
        final_time: sim.state().time,
        wall_seconds: start.elapsed().as_secs_f64(),
        files,
    };
    manifest.write(output)?;
    run_result?;
    Ok(manifest)
}

fn series_entry(path: PathBuf) -> ManifestEntry {
    ManifestEntry {
        path: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        kind: "series".into(),
        step: None,
    }
}

fn element_history_max(history: &crate::fem::QpScalarField, n_elements: usize) -> Vec<f64> {
    (0..n_elements)
        .map(|e| {
            (0..history.n_qp)
                .map(|q| history.get(e, q))
                .fold(0.0f64, f64::max)
        })
        .collect()
}

fn make_run_id(name: &str) -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let tag = if name.is_empty() { "run" } else { name };
    format!("{tag}-{secs}-{}", std::process::id())
}

/// Aggregate picture of a finished run, built from its manifest and
/// series files.
#[derive(Debug, serde::Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub scenario: String,
    pub profile: String,
    pub config_hash: String,
    pub steps_completed: usize,
    pub final_time: f64,
    pub wall_seconds: f64,
    pub snapshots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_reaction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displacement_at_peak: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_elastic_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dissipated_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_tip: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tip_speed: Option<f64>,
}

/// Read back a series file written by this crate. Returns rows of
/// parsed values without the step and time columns, plus the times.
pub fn read_series(path: &Path, kind: SeriesKind) -> Result<Vec<(usize, f64, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != kind.header() {
        return Err(Error::validation(
            path.display().to_string(),
            format!("unexpected header '{header}'"),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != kind.columns() + 2 {
            return Err(Error::validation(
                path.display().to_string(),
                format!("row {} has {} fields", i + 2, fields.len()),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| {
                Error::validation(path.display().to_string(), format!("bad number '{s}': {e}"))
            })
        };
        let step = fields[0].parse::<usize>().map_err(|e| {
            Error::validation(path.display().to_string(), format!("bad step: {e}"))
        })?;
        let time = parse(fields[1])?;
        let values = fields[2..].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        rows.push((step, time, values));
    }
    Ok(rows)
}

/// Build a [`RunSummary`] from an output directory.
pub fn summarize_run(dir: &Path) -> Result<RunSummary> {
    let manifest = OutputManifest::read(&dir.join("manifest.json"))?;
    let mut summary = RunSummary {
        run_id: manifest.run_id.clone(),
        scenario: manifest.scenario.clone(),
        profile: manifest.profile.clone(),
        config_hash: manifest.config_hash.clone(),
        steps_completed: manifest.steps_completed,
        final_time: manifest.final_time,
        wall_seconds: manifest.wall_seconds,
        snapshots: manifest.files.iter().filter(|f| f.kind == "snapshot").count(),
        peak_reaction: None,
        displacement_at_peak: None,
        final_elastic_energy: None,
        final_dissipated_energy: None,
        final_tip: None,
        max_tip_speed: None,
    };
    for entry in manifest.files.iter().filter(|f| f.kind == "series") {
        let path = dir.join(&entry.path);
        match entry.path.as_str() {
            "load_displacement.csv" => {
                let rows = read_series(&path, SeriesKind::LoadDisplacement)?;
                if let Some(peak) = rows
                    .iter()
                    .max_by(|a, b| a.2[1].abs().total_cmp(&b.2[1].abs()))
                {
                    summary.peak_reaction = Some(peak.2[1]);
                    summary.displacement_at_peak = Some(peak.2[0]);
                }
            }
            "energies.csv" => {
                let rows = read_series(&path, SeriesKind::Energies)?;
                if let Some(last) = rows.last() {
                    summary.final_elastic_energy = Some(last.2[0]);
                    summary.final_dissipated_energy = Some(last.2[1]);
                }
            }
            "crack_tip.csv" => {
                let rows = read_series(&path, SeriesKind::CrackTip)?;
                if let Some(last) = rows.last() {
                    summary.final_tip = Some([last.2[0], last.2[1]]);
                }
                summary.max_tip_speed = rows
                    .iter()
                    .map(|r| r.2[2])
                    .max_by(f64::total_cmp);
            }
            _ => {}
        }
    }
    Ok(summary)
}

fn cmd_postprocess(dir: &Path, json: bool) -> Result<()> {
    let summary = summarize_run(dir)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary)
                .expect("summary serialization cannot fail")
        );
        return Ok(());
    }
    println!("run {} ({}, profile {})", summary.run_id, summary.scenario, summary.profile);
    println!("  config hash: {}", summary.config_hash);
    println!(
        "  steps: {}  final time: {:.6e} s  wall: {:.1} s  snapshots: {}",
        summary.steps_completed, summary.final_time, summary.wall_seconds, summary.snapshots
    );
    if let (Some(r), Some(d)) = (summary.peak_reaction, summary.displacement_at_peak) {
        println!("  peak reaction: {r:.6e} N at displacement {d:.6e} m");
    }
    if let (Some(e), Some(w)) = (summary.final_elastic_energy, summary.final_dissipated_energy) {
        println!("  final energies: elastic {e:.6e} J, dissipated {w:.6e} J");
    }
    if let Some(tip) = summary.final_tip {
        println!("  final crack tip: ({:.6e}, {:.6e}) m", tip[0], tip[1]);
    }
    if let Some(speed) = summary.max_tip_speed {
        println!("  max tip speed: {speed:.6e} m/s");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(scenario: Option<&str>, overrides: &[&str]) -> ScenarioArgs {
        ScenarioArgs {
            scenario: scenario.map(String::from),
            config: None,
            profile: "desk".into(),
            overrides: overrides.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn resolve_requires_exactly_one_source() {
        assert!(matches!(
            resolve_config(&args(None, &[])),
            Err(Error::InvalidArgument(_))
        ));
        let mut both = args(Some("sen-tension"), &[]);
        both.config = Some(PathBuf::from("/nonexistent.json"));
        assert!(resolve_config(&both).is_err());
    }

    #[test]
    fn overrides_change_the_builtin_and_the_hash() {
        let base = resolve_config(&args(Some("sen-tension"), &[])).unwrap();
        let tweaked =
            resolve_config(&args(Some("sen-tension"), &["fracture.G_c=1000"])).unwrap();
        assert_eq!(tweaked.fracture.energy_release_rate, 1000.0);
        assert_ne!(
            scenario::config_hash(&base),
            scenario::config_hash(&tweaked)
        );
    }

    #[test]
    fn bad_override_syntax_is_invalid_argument() {
        match resolve_config(&args(Some("sen-tension"), &["no-equals-sign"])) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("no-equals-sign")),
            other => panic!("expected invalid argument, got {other:?}"),
        }
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(exit_code_for(&Error::validation("x", "bad")), EXIT_VALIDATION);
        assert_eq!(exit_code_for(&Error::invalid_argument("bad")), EXIT_VALIDATION);
        assert_eq!(
            exit_code_for(&Error::StepFailure {
                step: 3,
                time: 1.0,
                message: "stagnated".into()
            }),
            EXIT_SOLVER
        );
        assert_eq!(
            exit_code_for(&Error::Solver {
                iterations: 10,
                residual: 1.0,
                method: "pcg-jacobi"
            }),
            EXIT_SOLVER
        );
    }

    #[test]
    fn tiny_run_produces_outputs_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = builtin_scenario("sen-tension", Profile::Desk).unwrap();
        // Shrink to a few steps on a coarse grid so the test stays fast.
        config.geometry.divisions = vec![12, 12];
        config.fracture.l0 = 1.5e-4;
        config.schedule.phases.truncate(1);
        config.schedule.phases[0].steps = 3;
        config.outputs.snapshot_every = 2;
        scenario::validate(&config).unwrap();

        let manifest = execute_run(&config, dir.path(), &[], "desk", true).unwrap();
        assert_eq!(manifest.steps_completed, 3);
        assert!(dir.path().join("manifest.json").is_file());
        assert!(dir.path().join("scenario.json").is_file());
        assert!(dir.path().join("load_displacement.csv").is_file());
        assert!(dir.path().join("energies.csv").is_file());
        assert!(dir.path().join(snapshot_file_name(2)).is_file());
        assert!(dir.path().join(snapshot_file_name(3)).is_file());

        let summary = summarize_run(dir.path()).unwrap();
        assert_eq!(summary.steps_completed, 3);
        assert_eq!(summary.scenario, "sen-tension");
        assert!(summary.peak_reaction.is_some());
        assert!(summary.final_elastic_energy.is_some());
    }

    #[test]
    fn cli_parses_run_invocation() {
        let cli = Cli::try_parse_from([
            "phasefield",
            "run",
            "--scenario",
            "kalthoff",
            "--profile",
            "desk",
            "-o",
            "/tmp/out",
            "--threads",
            "1",
            "--set",
            "fracture.G_c=1e4",
        ])
        .unwrap();
        match cli.command {
            Command::Run {
                scenario,
                output,
                threads,
                quiet,
            } => {
                assert_eq!(scenario.scenario.as_deref(), Some("kalthoff"));
                assert_eq!(output, PathBuf::from("/tmp/out"));
                assert_eq!(threads, Some(1));
                assert_eq!(scenario.overrides, vec!["fracture.G_c=1e4".to_string()]);
                assert!(!quiet);
            }
            other => panic!("unexpected command {other:?}"),
        }
    }
}
