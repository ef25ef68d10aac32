//! Result files: CSV tables and JSON summaries.
//!
//! Every writer here is deterministic: fixed column order, fixed float
//! formatting (17 significant digits, so values round-trip through text),
//! and no timestamps. Rerunning an experiment with the same config must
//! produce byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::expansion::ExpansionStudy;
use crate::pohozaev::PohozaevReport;
use crate::solve::{SolveReport, SweepPoint, UniquenessProbe};

/// `{:.16e}` carries 17 significant digits, enough to reproduce any f64.
pub fn float_cell(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Serialize any report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Summary CSV of a continuation sweep, one row per eps.
///
/// Columns: `eps, total_energy, phi_norm, peak_offset_i` (one per well),
/// `residual_norm, iterations`.
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let wells = points.first().map_or(0, |pt| pt.offsets.len());
    let mut header = vec!["eps".to_string(), "total_energy".into(), "phi_norm".into()];
    header.extend((0..wells).map(|i| format!("peak_offset_{i}")));
    header.push("residual_norm".into());
    header.push("iterations".into());
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![
                float_cell(pt.rung.eps),
                float_cell(pt.energy.total),
                float_cell(pt.phi_norm),
            ];
            row.extend(pt.offsets.iter().copied().map(float_cell));
            row.push(float_cell(pt.report.residual_norm));
            row.push(pt.report.iterations.to_string());
            row
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// One Pohozaev check in a sweep: which solve, which peak's ball, which
/// coordinate.
#[derive(Clone, Debug, Serialize)]
pub struct PohozaevRow {
    pub eps: f64,
    pub peak_index: usize,
    pub report: PohozaevReport,
}

/// Columns: `eps, peak_index, k, lhs, rhs, rel_residual`.
pub fn write_pohozaev_csv(path: &Path, rows: &[PohozaevRow]) -> Result<()> {
    let header: Vec<String> = ["eps", "peak_index", "k", "lhs", "rhs", "rel_residual"]
        .map(String::from)
        .to_vec();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                float_cell(r.eps),
                r.peak_index.to_string(),
                r.report.k.to_string(),
                float_cell(r.report.lhs),
                float_cell(r.report.rhs),
                float_cell(r.report.rel_residual),
            ]
        })
        .collect();
    write_rows(path, &header, &table)
}

/// Columns: `eps, n, L, total, scaled, remainder, gauge`.
pub fn write_expansion_csv(path: &Path, study: &ExpansionStudy) -> Result<()> {
    let header: Vec<String> = ["eps", "n", "L", "total", "scaled", "remainder", "gauge"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                float_cell(r.eps),
                r.n.to_string(),
                float_cell(r.l),
                float_cell(r.total),
                float_cell(r.scaled),
                float_cell(r.remainder),
                float_cell(r.gauge),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// The scalar content of a [`SolveReport`], fit for JSON.
///
/// The field itself goes to a binary snapshot next to the summary; peak
/// fits are flattened to plain coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub eps: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub p: f64,
    pub converged: bool,
    pub iterations: usize,
    pub minres_iterations: usize,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    pub peaks: Vec<[f64; 2]>,
    pub low_confidence_peaks: Vec<usize>,
    pub peak_offsets: Option<Vec<f64>>,
    pub remainder_norm: Option<f64>,
    pub total_energy: Option<f64>,
}

impl SolveSummary {
    pub fn new(report: &SolveReport, eps: f64, p: f64, total_energy: Option<f64>) -> Self {
        let grid = report.u.grid();
        SolveSummary {
            eps,
            n: grid.n(),
            l: grid.half_extent(),
            p,
            converged: report.converged,
            iterations: report.iterations,
            minres_iterations: report.minres_iterations,
            residual_norm: report.residual_norm,
            residual_history: report.history.clone(),
            peaks: report.peaks.iter().map(|pk| pk.point).collect(),
            low_confidence_peaks: report
                .peaks
                .iter()
                .enumerate()
                .filter(|(_, pk)| pk.low_confidence)
                .map(|(i, _)| i)
                .collect(),
            peak_offsets: report.peak_offsets.clone(),
            remainder_norm: report.remainder_norm,
            total_energy,
        }
    }
}

/// The scalar content of a [`UniquenessProbe`], fit for JSON.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeSummary {
    pub eps: f64,
    pub seed: u64,
    pub tol: f64,
    pub starts: usize,
    pub excluded: Vec<usize>,
    pub perturbations: Vec<Vec<[f64; 2]>>,
    pub max_pairwise_sup: Option<f64>,
    pub iterations: Vec<usize>,
}

impl ProbeSummary {
    pub fn new(probe: &UniquenessProbe, eps: f64) -> Self {
        ProbeSummary {
            eps,
            seed: probe.seed,
            tol: probe.tol,
            starts: probe.reports.len(),
            excluded: probe.excluded.clone(),
            perturbations: probe.perturbations.clone(),
            max_pairwise_sup: probe.max_pairwise_sup,
            iterations: probe.reports.iter().map(|r| r.iterations).collect(),
        }
    }
}
