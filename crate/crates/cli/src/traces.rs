//! CSV/JSONL trace writers and readers.
//!
//! Floats in CSV files are written as `{:.14e}` (15 significant digits) so
//! reruns compare byte for byte.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dqtopo_core::admm::Backend;
use dqtopo_core::closed_loop::{AdmmTraceRow, ClosedLoopTrace, TerminationReason, TopologyEvent};
use dqtopo_core::qite::EnergyTracePoint;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TOPOLOGIES_JSONL: &str = "topologies.jsonl";
pub const ADMM_TRACE_CSV: &str = "admm_trace.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const ENERGY_TRACE_CSV: &str = "energy_trace.csv";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.14e}")
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn write_rows<I>(path: &Path, header: Vec<String>, rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(|e| CliError::csv(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Header `t,x1..xn[,v1..vn]`.
pub fn write_trajectory(path: &Path, trace: &ClosedLoopTrace) -> CliResult<()> {
    let second = trace.order == 2;
    let mut header = vec!["t".to_string()];
    header.extend((1..=trace.n).map(|i| format!("x{i}")));
    if second {
        header.extend((1..=trace.n).map(|i| format!("v{i}")));
    }
    let rows = trace.trajectory.iter().map(|r| {
        let mut row = vec![fmt_f64(r.t)];
        row.extend(r.x.iter().map(|&x| fmt_f64(x)));
        if second {
            row.extend(r.v.iter().flatten().map(|&v| fmt_f64(v)));
        }
        row
    });
    write_rows(path, header, rows)
}

/// One line of `topologies.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyLine {
    pub t: f64,
    pub bits: String,
    pub objective: f64,
    pub lambda2: f64,
    pub degrees: Vec<usize>,
    pub admm_iters: usize,
    pub backend: Backend,
    pub repaired: bool,
}

impl From<&TopologyEvent> for TopologyLine {
    fn from(e: &TopologyEvent) -> Self {
        Self {
            t: e.t,
            bits: e.bits.clone(),
            objective: e.objective,
            lambda2: e.lambda2,
            degrees: e.degrees.clone(),
            admm_iters: e.admm_iters,
            backend: e.backend,
            repaired: e.repaired,
        }
    }
}

pub fn write_topologies(path: &Path, events: &[TopologyEvent]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut w, &TopologyLine::from(e))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_topologies(path: &Path) -> CliResult<Vec<TopologyLine>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| CliError::config(path, e))?);
        }
    }
    Ok(out)
}

/// Columns `update,t,k,residual_inf,aug_lagrangian,lyapunov_v,block2_phi,repaired`.
pub fn write_admm_trace(path: &Path, rows: &[AdmmTraceRow]) -> CliResult<()> {
    let header = ["update", "t", "k", "residual_inf", "aug_lagrangian", "lyapunov_v", "block2_phi", "repaired"]
        .map(String::from)
        .to_vec();
    let body = rows.iter().map(|r| {
        vec![
            r.update.to_string(),
            fmt_f64(r.t),
            r.record.k.to_string(),
            fmt_f64(r.record.residual_inf),
            fmt_f64(r.record.aug_lagrangian),
            fmt_f64(r.record.lyapunov_v),
            fmt_f64(r.record.block2_phi),
            r.repaired.to_string(),
        ]
    });
    write_rows(path, header, body)
}

pub fn write_energy_trace(path: &Path, trace: &[EnergyTracePoint]) -> CliResult<()> {
    let header = ["step", "tau", "energy", "grad_norm"].map(String::from).to_vec();
    let body = trace
        .iter()
        .map(|p| vec![p.step.to_string(), fmt_f64(p.tau), fmt_f64(p.energy), fmt_f64(p.grad_norm)]);
    write_rows(path, header, body)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub terminated_by: TerminationReason,
    pub t_end: f64,
    pub final_ex: f64,
    pub final_ev: Option<f64>,
    pub total_cost: f64,
}

impl From<&ClosedLoopTrace> for Summary {
    fn from(t: &ClosedLoopTrace) -> Self {
        Self {
            terminated_by: t.termination.reason,
            t_end: t.termination.t_end,
            final_ex: t.termination.final_ex,
            final_ev: t.termination.final_ev,
            total_cost: t.total_cost(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes the four run outputs into `dir`, creating it if needed.
pub fn write_run(dir: &Path, trace: &ClosedLoopTrace) -> CliResult<Summary> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_trajectory(&dir.join(TRAJECTORY_CSV), trace)?;
    write_topologies(&dir.join(TOPOLOGIES_JSONL), &trace.events)?;
    write_admm_trace(&dir.join(ADMM_TRACE_CSV), &trace.admm_trace)?;
    let summary = Summary::from(trace);
    write_json(&dir.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}

/// Header and numeric rows of a trajectory file.
pub struct TrajectoryTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn agents(&self) -> usize {
        self.header.iter().filter(|h| h.starts_with('x')).count()
    }

    pub fn has_velocity(&self) -> bool {
        self.header.iter().any(|h| h.starts_with('v'))
    }
}

pub fn read_trajectory(path: &Path) -> CliResult<TrajectoryTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header = r
        .headers()
        .map_err(|e| CliError::csv(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| CliError::config(path, format!("bad number `{s}`: {e}"))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TrajectoryTable { header, rows })
}
