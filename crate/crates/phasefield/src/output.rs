//! Run artifacts: legacy VTK snapshots, CSV time series, and the run
//! manifest.
//!
//! Numbers are printed with 17 significant digits so every f64 survives a
//! text round trip bit for bit; rerunning an identical configuration
//! therefore produces byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Write one legacy ASCII VTK snapshot of the solution state.
/// `history_max` and `max_principal_stress` are per-element cell fields;
/// `u` and `phi` are nodal.
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    history_max: &[f64],
    max_principal_stress: &[f64],
) -> Result<()> {
    let dim = mesh.dim();
    let n = mesh.n_nodes();
    let ne = mesh.n_elements();
    if u.len() != n * dim || phi.len() != n || history_max.len() != ne
        || max_principal_stress.len() != ne
    {
        return Err(Error::invalid_argument(
            "snapshot field lengths do not match the mesh",
        ));
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("phasefield snapshot\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} double");
    for node in 0..n {
        let c = mesh.coord(node);
        let _ = writeln!(out, "{} {} {}", fmt_f64(c[0]), fmt_f64(c[1]), fmt_f64(c[2]));
    }
    let npe = mesh.nodes_per_element();
    let _ = writeln!(out, "CELLS {ne} {}", ne * (npe + 1));
    for e in 0..ne {
        let _ = write!(out, "{npe}");
        for &node in mesh.element(e) {
            let _ = write!(out, " {node}");
        }
        out.push('\n');
    }
    let cell_type = if dim == 2 { 9 } else { 12 };
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(out, "{cell_type}");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    out.push_str("VECTORS u double\n");
    for node in 0..n {
        let ux = u[node * dim];
        let uy = u[node * dim + 1];
        let uz = if dim == 3 { u[node * dim + 2] } else { 0.0 };
        let _ = writeln!(out, "{} {} {}", fmt_f64(ux), fmt_f64(uy), fmt_f64(uz));
    }
    out.push_str("SCALARS phi double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for v in phi {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    let _ = writeln!(out, "CELL_DATA {ne}");
    out.push_str("SCALARS H_max double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for v in history_max {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    out.push_str("SCALARS max_principal_stress double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for v in max_principal_stress {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Snapshot file name for a step, zero padded for stable sorting.
pub fn snapshot_file_name(step: usize) -> String {
    format!("snap_{step:06}.vtk")
}

/// The three CSV series kinds and their fixed headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    LoadDisplacement,
    Energies,
    CrackTip,
}

impl SeriesKind {
    pub fn header(self) -> &'static str {
        match self {
            SeriesKind::LoadDisplacement => "step,time,displacement,reaction",
            SeriesKind::Energies => "step,time,elastic_energy,dissipated_energy",
            SeriesKind::CrackTip => "step,time,tip_x,tip_y,tip_speed",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            SeriesKind::LoadDisplacement => "load_displacement.csv",
            SeriesKind::Energies => "energies.csv",
            SeriesKind::CrackTip => "crack_tip.csv",
        }
    }

    pub fn columns(self) -> usize {
        match self {
            SeriesKind::LoadDisplacement | SeriesKind::Energies => 2,
            SeriesKind::CrackTip => 3,
        }
    }
}

/// Incremental CSV writer for one series.
pub struct SeriesWriter {
    kind: SeriesKind,
    path: PathBuf,
    file: std::io::BufWriter<fs::File>,
}

impl SeriesWriter {
    pub fn create(dir: &Path, kind: SeriesKind) -> Result<Self> {
        let path = dir.join(kind.file_name());
        let file = fs::File::create(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut writer = Self {
            kind,
            path,
            file: std::io::BufWriter::new(file),
        };
        writer.raw_line(kind.header())?;
        Ok(writer)
    }

    fn raw_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.file, "{line}").map_err(|e| Error::io(self.path.display().to_string(), e))
    }

    /// Append one data row. `values` excludes the leading step and time.
    pub fn write_row(&mut self, step: usize, time: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.kind.columns() {
            return Err(Error::invalid_argument(format!(
                "series {:?} expects {} value columns, got {}",
                self.kind,
                self.kind.columns(),
                values.len()
            )));
        }
        let mut line = format!("{step},{}", fmt_f64(time));
        for v in values {
            let _ = write!(line, ",{}", fmt_f64(*v));
        }
        self.raw_line(&line)
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.file
            .flush()
            .map_err(|e| Error::io(self.path.display().to_string(), e))?;
        Ok(self.path)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// One artifact listed in the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

/// Summary of a completed run, written next to the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputManifest {
    pub run_id: String,
    pub scenario: String,
    pub profile: String,
    pub config_hash: String,
    /// Command-line overrides applied to the scenario, as `path=value`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<String>,
    pub steps_completed: usize,
    pub final_time: f64,
    pub wall_seconds: f64,
    pub files: Vec<ManifestEntry>,
}

impl OutputManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::internal(format!("manifest serialization failed: {e}")))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::validation(path.display().to_string(), format!("bad manifest: {e}"))
        })
    }
}
