//! Subcommand implementations. Each returns a serialisable report that the
//! binary prints as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use dqtopo_core::admm::{make_solver, run_admm, AdmmParams, Backend, BinarySolver, ExactQite, RepairAction, VarQite};
use dqtopo_core::closed_loop::{run_closed_loop_partial, AdmmTraceRow, ClosedLoopConfig};
use dqtopo_core::dynamics::{consensus_error, AgentState};
use dqtopo_core::graph::{algebraic_connectivity, build_laplacian, degrees, TopologyVector};
use dqtopo_core::miqp::{
    enumerate_range, flows_from_spanning_tree, merge_best, miqp_objective, MiqpInstance, MiqpSolution, ENUMERATION_MAX_EDGES,
};
use dqtopo_core::qite::QiteSchedule;
use dqtopo_core::qubo::{brute_force_min_mask, mask_to_bits};
use dqtopo_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formats::{load_config, load_instance, load_qubo};
use crate::traces::{self, fmt_f64, Summary};
use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub varqite_max_qubits: Option<usize>,
    pub out_dir: PathBuf,
}

/// Closed-loop run. The trace gathered so far is written even when a
/// sub-module fails; the failure is then returned.
pub fn run(opts: &RunOptions) -> CliResult<Summary> {
    let mut cfg = load_config(&opts.config)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(b) = opts.backend {
        cfg.binary_backend = b;
    }
    if let Some(q) = opts.varqite_max_qubits {
        cfg.varqite_max_qubits = q;
    }
    let (trace, err) = run_closed_loop_partial(&cfg);
    let summary = traces::write_run(&opts.out_dir, &trace)?;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(summary),
    }
}

/// Where Block-2 settings come from for single-snapshot commands.
#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    /// Closed-loop config whose ADMM/QITE settings are reused.
    pub config: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub seed: Option<u64>,
    pub varqite_max_qubits: Option<usize>,
}

struct SolverSetup {
    params: AdmmParams,
    backend: Backend,
    solver: Box<dyn BinarySolver>,
}

fn solver_setup(n: usize, opts: &SolverOptions) -> CliResult<SolverSetup> {
    let cfg = match &opts.config {
        Some(path) => {
            let cfg = load_config(path)?;
            if cfg.n != n {
                return Err(CliError::config(path, format!("config is for n = {}, instance has n = {n}", cfg.n)));
            }
            cfg
        }
        None => ClosedLoopConfig::standard(n.max(2), 1, Backend::Brute, 0),
    };
    let backend = opts.backend.unwrap_or(cfg.binary_backend);
    let seed = opts.seed.unwrap_or(cfg.seed);
    let max_qubits = opts.varqite_max_qubits.unwrap_or(cfg.varqite_max_qubits);
    Ok(SolverSetup {
        params: cfg.admm_params(),
        backend,
        solver: make_solver(backend, cfg.qite, cfg.qite.tau_total, cfg.ansatz_reps, max_qubits, seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n: usize,
    pub m: usize,
    pub backend: Backend,
    pub bits: String,
    pub objective: f64,
    pub converged: bool,
    pub admm_iters: usize,
    pub repaired: bool,
    pub repairs: Vec<RepairAction>,
    pub lambda2: f64,
    pub degrees: Vec<usize>,
}

fn solve_snapshot(inst: &MiqpInstance, opts: &SolverOptions) -> CliResult<(SolveReport, Vec<AdmmTraceRow>)> {
    let mut setup = solver_setup(inst.n(), opts)?;
    let out = run_admm(inst, &setup.params, setup.solver.as_mut(), None)?;
    let lap = build_laplacian(&out.topology, &inst.space)?;
    let last = out.state.history.len();
    let rows = out
        .state
        .history
        .iter()
        .enumerate()
        .map(|(i, &record)| AdmmTraceRow {
            update: 0,
            t: 0.0,
            record,
            repaired: i + 1 == last && out.repaired(),
        })
        .collect();
    let report = SolveReport {
        n: inst.n(),
        m: inst.m(),
        backend: setup.backend,
        bits: out.topology.to_bitstring(),
        objective: out.objective,
        converged: out.converged,
        admm_iters: out.state.k,
        repaired: out.repaired(),
        repairs: out.repairs.clone(),
        lambda2: algebraic_connectivity(&lap)?,
        degrees: degrees(&out.topology, &inst.space)?,
    };
    Ok((report, rows))
}

/// One MIQP snapshot through ADMM; writes `admm_trace.csv` and
/// `solve.json` when an output directory is given.
pub fn solve_topology(instance: &Path, opts: &SolverOptions, out_dir: Option<&Path>) -> CliResult<SolveReport> {
    let (_, inst) = load_instance(instance)?;
    let (report, rows) = solve_snapshot(&inst, opts)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        traces::write_admm_trace(&dir.join(traces::ADMM_TRACE_CSV), &rows)?;
        traces::write_json(&dir.join("solve.json"), &report)?;
    }
    Ok(report)
}

/// Exhaustive optimum, with the topology range split across threads.
pub fn enumerate_parallel(inst: &MiqpInstance) -> Result<MiqpSolution, CoreError> {
    let m = inst.m();
    if m > ENUMERATION_MAX_EDGES {
        return Err(CoreError::Capacity {
            what: "edge count",
            size: m,
            limit: ENUMERATION_MAX_EDGES,
        });
    }
    let total = 1u64 << m;
    let chunks = 256u64.min(total);
    let step = total.div_ceil(chunks);
    let parts: Vec<_> = (0..chunks)
        .into_par_iter()
        .map(|c| enumerate_range(inst, c * step, ((c + 1) * step).min(total)))
        .collect();
    let best = merge_best(parts, m)
        .ok_or_else(|| CoreError::Infeasible("no connected topology respects the degree bound".into()))?;
    let t = TopologyVector::from_mask(best.mask, m);
    let f = flows_from_spanning_tree(&t, inst)?;
    let z = t.as_f64();
    let objective = miqp_objective(&z, inst);
    Ok(MiqpSolution { z, f, objective })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub n: usize,
    pub m: usize,
    pub optimum: f64,
    pub bits: String,
    pub admm: Option<SolveReport>,
    /// ADMM objective divided by the optimum.
    pub gap: Option<f64>,
}

pub fn enumerate_baseline(instance: &Path, with_admm: bool, opts: &SolverOptions) -> CliResult<BaselineReport> {
    let (_, inst) = load_instance(instance)?;
    let best = enumerate_parallel(&inst)?;
    let bits: Vec<u8> = best.z.iter().map(|&z| u8::from(z > 0.5)).collect();
    let mut report = BaselineReport {
        n: inst.n(),
        m: inst.m(),
        optimum: best.objective,
        bits: TopologyVector::from_bits(bits)?.to_bitstring(),
        admm: None,
        gap: None,
    };
    if with_admm {
        let (admm, _) = solve_snapshot(&inst, opts)?;
        report.gap = Some(admm.objective / best.objective);
        report.admm = Some(admm);
    }
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct QuboOptions {
    pub backend: Option<Backend>,
    /// Imaginary-time horizon; defaults to the schedule's `tau_total`.
    pub tau: Option<f64>,
    pub steps: Option<usize>,
    pub shots: Option<usize>,
    pub top_k: Option<usize>,
    pub reps: Option<usize>,
    pub varqite_max_qubits: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboReport {
    pub backend: Backend,
    pub m: usize,
    /// Variable 0 first.
    pub bits: String,
    pub cost: f64,
}

fn bit_string(mask: u64, m: usize) -> String {
    mask_to_bits(mask, m).iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// Standalone QUBO minimisation through any backend. The varqite backend
/// writes its energy trace to `energy_trace.csv` when an output directory
/// is given.
pub fn qubo_solve(path: &Path, opts: &QuboOptions) -> CliResult<QuboReport> {
    let (_, p) = load_qubo(path)?;
    let backend = opts.backend.unwrap_or(Backend::Brute);
    let defaults = QiteSchedule::default();
    let schedule = QiteSchedule {
        tau_total: opts.tau.unwrap_or(defaults.tau_total),
        steps: opts.steps.unwrap_or(defaults.steps),
        shots: opts.shots.unwrap_or(defaults.shots),
        top_k: opts.top_k.unwrap_or(defaults.top_k),
        ..defaults
    };
    schedule.validate().map_err(|e| CliError::config(path, e))?;
    let (mask, cost) = match backend {
        Backend::Brute => brute_force_min_mask(&p)?,
        Backend::ExactQite => ExactQite {
            tau: schedule.tau_total,
            top_k: schedule.top_k,
        }
        .best(&p)?,
        Backend::Varqite => {
            let mut v = VarQite::new(schedule, opts.reps.unwrap_or(1), opts.varqite_max_qubits.unwrap_or(15), opts.seed.unwrap_or(0));
            let best = v.best(&p)?;
            if let Some(dir) = &opts.out_dir {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                traces::write_energy_trace(&dir.join(traces::ENERGY_TRACE_CSV), v.last_trace())?;
            }
            best
        }
    };
    Ok(QuboReport {
        backend,
        m: p.m(),
        bits: bit_string(mask, p.m()),
        cost,
    })
}

pub const CONSENSUS_ERROR_CSV: &str = "consensus_error.csv";
pub const TOPOLOGY_EVENTS_CSV: &str = "topology_events.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub rows: usize,
    pub events: usize,
    pub repaired_events: usize,
    pub min_lambda2: Option<f64>,
    pub max_degree: Option<usize>,
    pub files: Vec<PathBuf>,
}

/// Reduces a run directory to `consensus_error.csv` (t, e_x[, e_v]) and
/// `topology_events.csv` (one row per update) for plotting.
pub fn report(trace_dir: &Path, out_dir: Option<&Path>) -> CliResult<TraceReport> {
    let out_dir = out_dir.unwrap_or(trace_dir);
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let table = traces::read_trajectory(&trace_dir.join(traces::TRAJECTORY_CSV))?;
    let events = traces::read_topologies(&trace_dir.join(traces::TOPOLOGIES_JSONL))?;
    let n = table.agents();
    let second = table.has_velocity();

    let err_path = out_dir.join(CONSENSUS_ERROR_CSV);
    let mut w = csv::Writer::from_path(&err_path).map_err(|e| CliError::csv(&err_path, e))?;
    let mut header = vec!["t", "e_x"];
    if second {
        header.push("e_v");
    }
    w.write_record(&header).map_err(|e| CliError::csv(&err_path, e))?;
    for row in &table.rows {
        let x = row[1..=n].to_vec();
        let state = if second {
            AgentState::second_order(x, row[n + 1..=2 * n].to_vec())
        } else {
            AgentState::first_order(x)
        };
        let (ex, ev) = consensus_error(&state);
        let mut rec = vec![fmt_f64(row[0]), fmt_f64(ex)];
        rec.extend(ev.map(fmt_f64));
        w.write_record(&rec).map_err(|e| CliError::csv(&err_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&err_path, e))?;

    let ev_path = out_dir.join(TOPOLOGY_EVENTS_CSV);
    let mut w = csv::Writer::from_path(&ev_path).map_err(|e| CliError::csv(&ev_path, e))?;
    w.write_record(["t", "bits", "edges", "objective", "lambda2", "max_degree", "admm_iters", "repaired"])
        .map_err(|e| CliError::csv(&ev_path, e))?;
    for e in &events {
        let edges = e.bits.chars().filter(|&c| c == '1').count();
        let max_deg = e.degrees.iter().copied().max().unwrap_or(0);
        w.write_record([
            fmt_f64(e.t),
            e.bits.clone(),
            edges.to_string(),
            fmt_f64(e.objective),
            fmt_f64(e.lambda2),
            max_deg.to_string(),
            e.admm_iters.to_string(),
            e.repaired.to_string(),
        ])
        .map_err(|e| CliError::csv(&ev_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&ev_path, e))?;

    Ok(TraceReport {
        rows: table.rows.len(),
        events: events.len(),
        repaired_events: events.iter().filter(|e| e.repaired).count(),
        min_lambda2: events.iter().map(|e| e.lambda2).min_by(f64::total_cmp),
        max_degree: events.iter().flat_map(|e| e.degrees.iter().copied()).max(),
        files: vec![err_path, ev_path],
    })
}
