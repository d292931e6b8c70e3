//! CSV time series and JSON run summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use polykin::closure::MacroMoments;
use serde::Serialize;

pub const CSV_SCHEMA: &str = "# polykin-moments v1";

/// Per-species columns of one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesRow {
    pub n: f64,
    pub u: Vec<f64>,
    pub t_tr: f64,
    pub t_rot: f64,
    pub lambda: f64,
    pub theta: f64,
    /// Frobenius norm of the off-diagonal part of `P`.
    pub p_offdiag: f64,
}

impl SpeciesRow {
    pub fn new(m: &MacroMoments, lambda: f64, theta: f64) -> Self {
        let d = m.dim();
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off += m.p[(i, j)] * m.p[(i, j)];
                }
            }
        }
        Self {
            n: m.n,
            u: m.u.clone(),
            t_tr: m.t_tr,
            t_rot: m.t_rot,
            lambda,
            theta,
            p_offdiag: off.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub species: [SpeciesRow; 2],
    pub h: f64,
    pub dh: f64,
    pub mass_residual: [f64; 2],
    pub momentum_residual: f64,
    pub energy_residual: f64,
    pub clipped_mass: [f64; 2],
}

pub fn csv_header(d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for k in 1..=2 {
        h.push(format!("n{k}"));
        for a in 1..=d {
            h.push(format!("u{k}_{a}"));
        }
        for c in ["Tt", "Tr", "Lambda", "Theta", "Poff"] {
            h.push(format!("{c}{k}"));
        }
    }
    h.extend(
        ["H", "dH", "mass_res1", "mass_res2", "momentum_res", "energy_res", "clipped1", "clipped2"]
            .map(String::from),
    );
    h
}

impl CsvRow {
    fn record(&self) -> Vec<String> {
        let mut r = vec![self.t.to_string()];
        for s in &self.species {
            r.push(s.n.to_string());
            r.extend(s.u.iter().map(|x| x.to_string()));
            for x in [s.t_tr, s.t_rot, s.lambda, s.theta, s.p_offdiag] {
                r.push(x.to_string());
            }
        }
        for x in [
            self.h,
            self.dh,
            self.mass_residual[0],
            self.mass_residual[1],
            self.momentum_residual,
            self.energy_residual,
            self.clipped_mass[0],
            self.clipped_mass[1],
        ] {
            r.push(x.to_string());
        }
        r
    }
}

/// Append-only CSV writer, flushed after every row so a killed run leaves a
/// readable prefix.
pub struct MomentsWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl MomentsWriter {
    pub fn create(path: &Path, d: usize) -> anyhow::Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{CSV_SCHEMA}")?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(csv_header(d))?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &CsvRow) -> anyhow::Result<()> {
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads a CSV written by [`MomentsWriter`] into its header and numeric rows.
pub fn read_moments(path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|x| x.parse::<f64>()).collect::<Result<Vec<_>, _>>()?);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PreconditionFlag {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl From<&polykin::dynamics::Precondition> for PreconditionFlag {
    fn from(p: &polykin::dynamics::Precondition) -> Self {
        Self {
            name: p.name.to_string(),
            passed: p.passed,
            detail: p.detail.clone(),
        }
    }
}

/// Machine-readable outcome of a command, written to `summary.json`.
#[derive(Debug, Clone, Serialize, Default, PartialEq)]
pub struct Summary {
    pub command: String,
    pub scenario: String,
    pub ok: bool,
    /// Invariants that tripped, or the integration error.
    pub tripped: Vec<String>,
    pub steps: usize,
    pub t_final: f64,
    pub wall_time_s: f64,
    pub gamma: f64,
    pub gamma_bound: f64,
    /// The positivity bound was derived for three velocity dimensions only.
    pub gamma_bound_d3_only: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_residual: Option<f64>,
    /// Largest `ΔH / |H|` over all steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_delta_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_delta_h_above_tol: Option<usize>,
    pub preconditions: Vec<PreconditionFlag>,
    pub max_mass_drift: [f64; 2],
    pub max_momentum_drift: f64,
    pub max_energy_drift: f64,
    pub clipped_mass: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta21_mismatches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chu_discrepancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_interval: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_energy_constraint_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_exchange_residual: Option<f64>,
    pub violations: Vec<String>,
}

pub fn write_summary(path: &Path, s: &Summary) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, s)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_match_header_width() {
        let m = MacroMoments::isotropic(1.0, vec![0.1, 0.2], 1.0, 1.0, 2);
        let s = SpeciesRow::new(&m, 1.0, 1.0);
        let row = CsvRow {
            t: 0.0,
            species: [s.clone(), s],
            h: -1.0,
            dh: 0.0,
            mass_residual: [0.0; 2],
            momentum_residual: 0.0,
            energy_residual: 0.0,
            clipped_mass: [0.0; 2],
        };
        assert_eq!(row.record().len(), csv_header(2).len());
    }

    #[test]
    fn written_file_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = MacroMoments::isotropic(1.0, vec![0.5], 2.0, 1.0, 2);
        let s = SpeciesRow::new(&m, 1.5, 0.75);
        let row = CsvRow {
            t: 0.25,
            species: [s.clone(), s],
            h: -1.0,
            dh: -1e-3,
            mass_residual: [0.0; 2],
            momentum_residual: 1e-16,
            energy_residual: 2e-16,
            clipped_mass: [0.0; 2],
        };
        let mut w = MomentsWriter::create(&p, 1).unwrap();
        w.write(&row).unwrap();
        drop(w);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(CSV_SCHEMA));
        let (h, rows) = read_moments(&p).unwrap();
        assert_eq!(h, csv_header(1));
        assert_eq!(rows[0][0], 0.25);
        assert_eq!(rows[0][2], 0.5);
    }
}
