//! Consensus evolution interleaved with periodic topology re-optimisation.
//!
//! Time advances on an integer step grid (`t = i·dt`); topology updates fall
//! on grid points `t_first_update + j·update_period`, so each deployed graph is
//! held for exactly one period.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{make_solver, run_admm, AdmmParams, AdmmState, Backend, InitialPoint, IterationRecord, RepairAction};
use crate::dynamics::{consensus_error, AgentState, DynamicsConfig, DEFAULT_DT};
use crate::graph::{algebraic_connectivity, build_laplacian, degrees, path_topology, EdgeSpace, LaplacianMatrix, TopologyVector};
use crate::miqp::{edge_weights, greedy_path, miqp_objective, MiqpInstance};
use crate::qite::QiteSchedule;
use crate::{Error, Result};

const STREAM_INIT: u64 = 0;
const STREAM_PERTURB: u64 = 1;
const STREAM_SOLVER: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub enabled: bool,
    /// Seconds the position error must stay above tolerance before a kick.
    pub window: f64,
    /// Half-width of the uniform kick added to each position.
    pub magnitude: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            window: 4.0,
            magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopConfig {
    pub n: usize,
    pub order: u8,
    #[serde(default = "default_gain")]
    pub alpha: f64,
    #[serde(default = "default_gain")]
    pub beta_gain: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_first_update")]
    pub t_first_update: f64,
    #[serde(default = "default_update_period")]
    pub update_period: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_cons_tol")]
    pub cons_tol: f64,
    #[serde(default = "default_init_range")]
    pub init_range: f64,
    /// Defaults to the per-size schedule of [`AdmmParams::for_agents`].
    #[serde(default)]
    pub admm: Option<AdmmParams>,
    #[serde(default)]
    pub qite: QiteSchedule,
    #[serde(default = "default_reps")]
    pub ansatz_reps: usize,
    #[serde(default = "default_varqite_max_qubits")]
    pub varqite_max_qubits: usize,
    #[serde(default = "default_gamma")]
    pub gamma: usize,
    /// Degree penalties; `None` means 0.1 on every node.
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    /// Per-edge communication costs; `None` means zero.
    #[serde(default)]
    pub c_comm: Option<Vec<f64>>,
    pub binary_backend: Backend,
    #[serde(default)]
    pub seed: u64,
    /// Trajectory rows are kept every this many integration steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

fn default_gain() -> f64 {
    3.0
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_t_first_update() -> f64 {
    5.0
}
fn default_update_period() -> f64 {
    0.5
}
fn default_t_max() -> f64 {
    10.0
}
fn default_cons_tol() -> f64 {
    1e-3
}
fn default_init_range() -> f64 {
    5.0
}
fn default_reps() -> usize {
    1
}
fn default_varqite_max_qubits() -> usize {
    15
}
fn default_gamma() -> usize {
    2
}
fn default_record_every() -> usize {
    10
}

impl ClosedLoopConfig {
    /// Default experiment settings for `n` agents of the given order.
    pub fn standard(n: usize, order: u8, backend: Backend, seed: u64) -> Self {
        Self {
            n,
            order,
            alpha: default_gain(),
            beta_gain: default_gain(),
            dt: default_dt(),
            t_first_update: default_t_first_update(),
            update_period: default_update_period(),
            t_max: default_t_max(),
            cons_tol: default_cons_tol(),
            init_range: default_init_range(),
            admm: Some(AdmmParams::for_agents(n)),
            qite: QiteSchedule::default(),
            ansatz_reps: default_reps(),
            varqite_max_qubits: default_varqite_max_qubits(),
            gamma: default_gamma().min(n.saturating_sub(1)),
            kappa: Some(vec![0.1; n]),
            c_comm: None,
            binary_backend: backend,
            seed,
            record_every: default_record_every(),
            perturbation: PerturbationConfig::default(),
        }
    }

    pub fn admm_params(&self) -> AdmmParams {
        self.admm.unwrap_or_else(|| AdmmParams::for_agents(self.n))
    }

    pub fn dynamics(&self) -> DynamicsConfig {
        DynamicsConfig {
            order: self.order,
            alpha: self.alpha,
            beta_gain: self.beta_gain,
            dt: self.dt,
        }
    }

    pub fn kappa_vec(&self) -> Vec<f64> {
        self.kappa.clone().unwrap_or_else(|| vec![0.1; self.n])
    }

    pub fn c_comm_vec(&self) -> Vec<f64> {
        self.c_comm.clone().unwrap_or_else(|| vec![0.0; self.n * self.n.saturating_sub(1) / 2])
    }

    /// Steps per interval as integers: (first update, period, horizon).
    pub fn grid(&self) -> Result<(u64, u64, u64)> {
        let to_steps = |what: &str, secs: f64| -> Result<u64> {
            let k = secs / self.dt;
            let r = round_f64(k);
            if !(k >= 0.0) || (k - r).abs() > 1e-6 * r.max(1.0) {
                return Err(Error::Parameter(alloc::format!(
                    "{what} = {secs} is not a whole number of dt = {} steps",
                    self.dt
                )));
            }
            Ok(r as u64)
        };
        Ok((
            to_steps("t_first_update", self.t_first_update)?,
            to_steps("update_period", self.update_period)?,
            to_steps("t_max", self.t_max)?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        EdgeSpace::new(self.n)?;
        self.dynamics().validate()?;
        self.admm_params().validate()?;
        self.qite.validate()?;
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.update_period > 0.0) {
            return bad(alloc::format!("update_period must be positive, got {}", self.update_period));
        }
        if !(self.t_first_update < self.t_max) {
            return bad(alloc::format!(
                "t_first_update ({}) must be below t_max ({})",
                self.t_first_update,
                self.t_max
            ));
        }
        if !(self.cons_tol > 0.0) || !(self.init_range >= 0.0) {
            return bad("cons_tol must be positive and init_range nonnegative".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.perturbation.window > 0.0) || !(self.perturbation.magnitude >= 0.0) {
            return bad("perturbation window must be positive and magnitude nonnegative".into());
        }
        let m = self.n * (self.n - 1) / 2;
        if self.kappa.as_ref().is_some_and(|k| k.len() != self.n) {
            return Err(Error::Dimension {
                what: "kappa",
                expected: self.n,
                got: self.kappa.as_ref().map_or(0, Vec::len),
            });
        }
        if let Some(c) = &self.c_comm {
            if c.len() != m {
                return Err(Error::Dimension {
                    what: "c_comm",
                    expected: m,
                    got: c.len(),
                });
            }
        }
        // instance-level checks (γ range, signs) without positions
        MiqpInstance::new(EdgeSpace::new(self.n)?, vec![0.0; m], self.kappa_vec(), self.gamma)?;
        if self.c_comm_vec().iter().any(|c| !(*c >= 0.0)) {
            return bad("c_comm must be nonnegative".into());
        }
        self.grid()?;
        Ok(())
    }
}

fn round_f64(x: f64) -> f64 {
    num_traits::Float::round(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyEvent {
    pub t: f64,
    pub bits: String,
    pub objective: f64,
    pub lambda2: f64,
    pub degrees: Vec<usize>,
    pub admm_iters: usize,
    pub admm_converged: bool,
    pub backend: Backend,
    pub repaired: bool,
    pub repairs: Vec<RepairAction>,
}

/// One ADMM sweep record tagged with the update it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmTraceRow {
    pub update: usize,
    pub t: f64,
    pub record: IterationRecord,
    /// Set on the last sweep of an update whose topology needed repair.
    pub repaired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Tolerance,
    TMax,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub reason: TerminationReason,
    pub t_end: f64,
    pub final_ex: f64,
    pub final_ev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopTrace {
    pub n: usize,
    pub order: u8,
    pub initial_topology: String,
    pub trajectory: Vec<TrajectoryRow>,
    pub events: Vec<TopologyEvent>,
    pub admm_trace: Vec<AdmmTraceRow>,
    /// Times at which positions were perturbed.
    pub perturbations: Vec<f64>,
    pub termination: Termination,
}

impl ClosedLoopTrace {
    /// Sum of the objectives of every optimised topology.
    pub fn total_cost(&self) -> f64 {
        self.events.iter().map(|e| e.objective).sum()
    }
}

/// Adds `U(−magnitude, magnitude)` to every position when enabled.
pub fn apply_perturbation<R: Rng + ?Sized>(state: &AgentState, cfg: &PerturbationConfig, rng: &mut R) -> AgentState {
    if !cfg.enabled || cfg.magnitude == 0.0 {
        return state.clone();
    }
    let mut out = state.clone();
    for x in &mut out.x {
        *x += rng.gen_range(-cfg.magnitude..=cfg.magnitude);
    }
    out
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `x_i(0) ~ U(−init_range, init_range)`, `v(0) = 0`.
pub fn initial_state(cfg: &ClosedLoopConfig) -> AgentState {
    let mut rng = rng_stream(cfg.seed, STREAM_INIT);
    let x: Vec<f64> = (0..cfg.n)
        .map(|_| {
            if cfg.init_range == 0.0 {
                0.0
            } else {
                rng.gen_range(-cfg.init_range..=cfg.init_range)
            }
        })
        .collect();
    match cfg.order {
        2 => AgentState::second_order(x, vec![0.0; cfg.n]),
        _ => AgentState::first_order(x),
    }
}

fn converged(state: &AgentState, tol: f64) -> bool {
    let (ex, ev) = consensus_error(state);
    ex <= tol && ev.is_none_or(|v| v <= tol)
}

fn row(state: &AgentState) -> TrajectoryRow {
    TrajectoryRow {
        t: state.t,
        x: state.x.clone(),
        v: state.v.clone(),
    }
}

/// Runs the loop; a failing sub-module aborts it with the error.
pub fn run_closed_loop(cfg: &ClosedLoopConfig) -> Result<ClosedLoopTrace> {
    match run_closed_loop_partial(cfg) {
        (trace, None) => Ok(trace),
        (_, Some(e)) => Err(e),
    }
}

/// Runs the loop and always returns the trace gathered so far, together
/// with the error that stopped it, if any.
pub fn run_closed_loop_partial(cfg: &ClosedLoopConfig) -> (ClosedLoopTrace, Option<Error>) {
    let mut trace = ClosedLoopTrace {
        n: cfg.n,
        order: cfg.order,
        initial_topology: String::new(),
        trajectory: Vec::new(),
        events: Vec::new(),
        admm_trace: Vec::new(),
        perturbations: Vec::new(),
        termination: Termination {
            reason: TerminationReason::Error,
            t_end: 0.0,
            final_ex: f64::NAN,
            final_ev: None,
        },
    };
    let err = drive(cfg, &mut trace).err();
    (trace, err)
}

struct Deployed {
    topology: TopologyVector,
    laplacian: LaplacianMatrix,
}

fn deploy(t: TopologyVector, space: &EdgeSpace, gamma: usize) -> Result<(Deployed, f64, Vec<usize>)> {
    let laplacian = build_laplacian(&t, space)?;
    let lambda2 = algebraic_connectivity(&laplacian)?;
    let deg = degrees(&t, space)?;
    if !(lambda2 > 1e-9) {
        return Err(Error::Disconnected);
    }
    if let Some(&d) = deg.iter().find(|&&d| d > gamma) {
        return Err(Error::Infeasible(alloc::format!("deployed degree {d} exceeds gamma = {gamma}")));
    }
    Ok((Deployed { topology: t, laplacian }, lambda2, deg))
}

fn drive(cfg: &ClosedLoopConfig, trace: &mut ClosedLoopTrace) -> Result<()> {
    cfg.validate()?;
    let space = EdgeSpace::new(cfg.n)?;
    let dyn_cfg = cfg.dynamics();
    let params = cfg.admm_params();
    let kappa = cfg.kappa_vec();
    let c_comm = cfg.c_comm_vec();
    let (first, period, horizon) = cfg.grid()?;
    let window = round_f64(cfg.perturbation.window / cfg.dt) as u64;

    let mut perturb_rng = rng_stream(cfg.seed, STREAM_PERTURB);
    let solver_seed = rng_stream(cfg.seed, STREAM_SOLVER).gen::<u64>();
    let mut solver = make_solver(
        cfg.binary_backend,
        cfg.qite,
        cfg.qite.tau_total,
        cfg.ansatz_reps,
        cfg.varqite_max_qubits,
        solver_seed,
    );

    let initial = path_topology(cfg.n)?;
    trace.initial_topology = initial.to_bitstring();
    let (mut current, _, _) = deploy(initial, &space, cfg.gamma)?;
    let mut state = initial_state(cfg);
    let mut above_since: u64 = 0;
    let mut step: u64 = 0;

    let finish = |trace: &mut ClosedLoopTrace, state: &AgentState, reason| {
        if trace.trajectory.last().is_none_or(|r| r.t != state.t) {
            trace.trajectory.push(row(state));
        }
        let (ex, ev) = consensus_error(state);
        trace.termination = Termination {
            reason,
            t_end: state.t,
            final_ex: ex,
            final_ev: ev,
        };
    };

    loop {
        if step.is_multiple_of(cfg.record_every as u64) {
            trace.trajectory.push(row(&state));
        }
        if converged(&state, cfg.cons_tol) {
            finish(trace, &state, TerminationReason::Tolerance);
            return Ok(());
        }
        if step >= horizon {
            finish(trace, &state, TerminationReason::TMax);
            return Ok(());
        }

        if cfg.perturbation.enabled {
            if consensus_error(&state).0 <= cfg.cons_tol {
                above_since = step;
            } else if step - above_since >= window {
                state = apply_perturbation(&state, &cfg.perturbation, &mut perturb_rng);
                trace.perturbations.push(state.t);
                above_since = step;
            }
        }

        if step >= first && (step - first).is_multiple_of(period) {
            let update = trace.events.len();
            let w = edge_weights(&state.x, &c_comm, &space)?;
            let inst = MiqpInstance::new(space.clone(), w, kappa.clone(), cfg.gamma)?;
            let mut start = current.topology.clone();
            if params.init == InitialPoint::GreedyPath {
                let greedy = greedy_path(&inst);
                if miqp_objective(&greedy.as_f64(), &inst) < miqp_objective(&start.as_f64(), &inst) {
                    start = greedy;
                }
            }
            let init = AdmmState::from_topology(&inst, &start)?;
            let out = run_admm(&inst, &params, solver.as_mut(), Some(init))?;
            let last = out.state.history.len();
            trace
                .admm_trace
                .extend(out.state.history.iter().enumerate().map(|(i, rec)| AdmmTraceRow {
                    update,
                    t: state.t,
                    record: *rec,
                    repaired: out.repaired() && i + 1 == last,
                }));
            let (deployed, lambda2, deg) = deploy(out.topology.clone(), &space, cfg.gamma)?;
            trace.events.push(TopologyEvent {
                t: state.t,
                bits: out.topology.to_bitstring(),
                objective: out.objective,
                lambda2,
                degrees: deg,
                admm_iters: out.state.k,
                admm_converged: out.converged,
                backend: solver.backend(),
                repaired: out.repaired(),
                repairs: out.repairs.clone(),
            });
            current = deployed;
        }

        let mut next = dyn_cfg.step(&state, &current.laplacian)?;
        step += 1;
        next.t = step as f64 * cfg.dt;
        state = next;
    }
}
