//! Three-block ADMM for the topology MIQP.
//!
//! The relaxed edge vector `z` (with flows `f`), the binary copy `r` and an
//! auxiliary slack `s` are coupled through `z − r + s = 0`. Each sweep solves
//! the convex block, the binary block through a pluggable [`BinarySolver`],
//! the closed-form slack block, then moves the multipliers.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{components, degrees, lexicographic_key, path_flows, path_topology, TopologyVector};
use crate::linalg::{dot, norm_inf};
use crate::miqp::{check_relaxed, flows_from_spanning_tree, greedy_path, miqp_objective, MiqpInstance};
use crate::qite::sampling::{sample_with, top_outcomes};
use crate::qite::{apply_ansatz, exact_qite, run_varqite, AnsatzCircuit, EnergyTracePoint, QiteSchedule, Statevector};
use crate::qp::{solve_block1_warm, Block1Problem, WarmStart, DEFAULT_EPS_F, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::qubo::{assemble_block2_qubo, best_of, bits_to_mask, brute_force_min, mask_to_bits, qubo_to_ising, tie_eps, QuboProblem};
use crate::{Error, Result};

/// Edges with `z_e` at or above this level are switched on.
pub const THRESHOLD_LEVEL: f64 = 0.5;

/// Constraint slack tolerated by [`augmented_lagrangian`] before it reports
/// the indicator as `+∞`.
pub const INDICATOR_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmParams {
    pub rho: f64,
    pub beta_aux: f64,
    pub mu_card: f64,
    pub kappa_lyap: f64,
    pub tol: f64,
    pub k_max: usize,
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
    #[serde(default = "default_qp_max_iter")]
    pub qp_max_iter: usize,
    #[serde(default = "default_eps_f")]
    pub eps_f: f64,
    #[serde(default)]
    pub init: InitialPoint,
}

/// Starting topology for `z⁰ = r⁰` when no warm start is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPoint {
    /// The path `1 – 2 – … – n`.
    IndexPath,
    /// The cheapest nearest-neighbour path under the current weights.
    #[default]
    GreedyPath,
}

fn default_qp_tol() -> f64 {
    DEFAULT_TOL
}

fn default_qp_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_eps_f() -> f64 {
    DEFAULT_EPS_F
}

/// Auxiliary penalty used for `n` agents: 200 up to five agents, then 400,
/// 600, and 200 more per extra agent.
pub fn beta_for(n: usize) -> f64 {
    200.0 * n.saturating_sub(4).max(1) as f64
}

impl AdmmParams {
    pub fn for_agents(n: usize) -> Self {
        let rho = 20.0;
        Self {
            rho,
            beta_aux: beta_for(n),
            mu_card: 0.1,
            kappa_lyap: rho,
            tol: 1e-3,
            k_max: 500,
            qp_tol: DEFAULT_TOL,
            qp_max_iter: DEFAULT_MAX_ITER,
            eps_f: DEFAULT_EPS_F,
            init: InitialPoint::GreedyPath,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.beta_aux >= 0.0
            && self.mu_card >= 0.0
            && self.kappa_lyap >= 0.0
            && self.tol > 0.0
            && self.k_max >= 1
            && self.qp_tol > 0.0
            && self.qp_max_iter >= 1
            && self.eps_f >= 0.0;
        if !ok {
            return Err(Error::Parameter(
                "admm needs rho > 0, beta_aux ≥ 0, mu_card ≥ 0, kappa_lyap ≥ 0, tol > 0, k_max ≥ 1, qp_tol > 0, eps_f ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self::for_agents(5)
    }
}

/// Per-sweep monitor values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub residual_inf: f64,
    /// Augmented Lagrangian after the dual update.
    pub aug_lagrangian: f64,
    pub lyapunov_v: f64,
    /// Binary-block cost of the accepted `r`.
    pub block2_phi: f64,
    /// `ℒ + μ(Σr)² + (ε/2)‖f‖²` at the start of the sweep and after each of
    /// the three primal blocks; every block minimises exactly this quantity.
    pub merit: [f64; 4],
    /// `ℒ` after the dual update minus `ℒ` before it.
    pub dual_change: f64,
    /// `ρ‖d‖²`, which `dual_change` equals in exact arithmetic.
    pub rho_d_sq: f64,
    /// `‖Δz‖² + ‖Δf‖² + ‖Δs‖²` over the sweep.
    pub step_sq: f64,
    pub qp_iterations: usize,
    pub qp_converged: bool,
    pub r_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub r: Vec<u8>,
    pub s: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k: usize,
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    qp_dual: Vec<f64>,
}

impl AdmmState {
    /// `z⁰ = r⁰` on a Hamiltonian path with unit flows routed over it,
    /// `s⁰ = λ⁰ = 0`.
    pub fn initial(inst: &MiqpInstance, init: InitialPoint) -> Result<Self> {
        let path = match init {
            InitialPoint::IndexPath => path_topology(inst.n())?,
            InitialPoint::GreedyPath => greedy_path(inst),
        };
        Self::from_topology(inst, &path)
    }

    /// `z⁰ = r⁰ = t`, flows over a BFS tree of `t`, `s⁰ = λ⁰ = 0`.
    pub fn from_topology(inst: &MiqpInstance, t: &TopologyVector) -> Result<Self> {
        let f = if *t == path_topology(inst.n())? {
            path_flows(inst.n(), &inst.space)?
        } else {
            flows_from_spanning_tree(t, inst)?
        };
        Ok(Self::new(t.as_f64(), f, t.bits().to_vec(), vec![0.0; inst.m()], vec![0.0; inst.m()]))
    }

    pub fn new(z: Vec<f64>, f: Vec<f64>, r: Vec<u8>, s: Vec<f64>, lambda: Vec<f64>) -> Self {
        Self {
            z,
            f,
            r,
            s,
            lambda,
            k: 0,
            history: Vec::new(),
            qp_dual: Vec::new(),
        }
    }

    /// Same iterates with the counter and history cleared, for warm starts.
    pub fn restarted(&self) -> Self {
        Self {
            k: 0,
            history: Vec::new(),
            ..self.clone()
        }
    }

    /// `d = z − r + s`.
    pub fn residual(&self) -> Vec<f64> {
        (0..self.z.len())
            .map(|e| self.z[e] - self.r[e] as f64 + self.s[e])
            .collect()
    }

    fn check(&self, inst: &MiqpInstance) -> Result<()> {
        let m = inst.m();
        for (what, len, expected) in [
            ("z", self.z.len(), m),
            ("f", self.f.len(), 2 * m),
            ("r", self.r.len(), m),
            ("s", self.s.len(), m),
            ("lambda", self.lambda.len(), m),
        ] {
            if len != expected {
                return Err(Error::Dimension { what, expected, got: len });
            }
        }
        Ok(())
    }
}

pub fn block3_update(z: &[f64], r: &[u8], lambda: &[f64], params: &AdmmParams) -> Result<Vec<f64>> {
    let m = z.len();
    for (what, len) in [("r", r.len()), ("lambda", lambda.len())] {
        if len != m {
            return Err(Error::Dimension { what, expected: m, got: len });
        }
    }
    let denom = params.rho + params.beta_aux;
    if denom == 0.0 {
        return Err(Error::Parameter("rho + beta_aux must be nonzero".into()));
    }
    Ok((0..m)
        .map(|e| -(lambda[e] + params.rho * (z[e] - r[e] as f64)) / denom)
        .collect())
}

pub fn dual_update(lambda: &[f64], d: &[f64], rho: f64) -> Vec<f64> {
    lambda.iter().zip(d).map(|(l, d)| l + rho * d).collect()
}

/// `J(z) + λᵀd + (ρ/2)‖d‖² + (β/2)‖s‖²`, or `+∞` when `(z, f)` leaves the
/// relaxed constraint set.
pub fn augmented_lagrangian(state: &AdmmState, inst: &MiqpInstance, params: &AdmmParams) -> f64 {
    if state.check(inst).is_err() {
        return f64::INFINITY;
    }
    match check_relaxed(&state.z, &state.f, inst, INDICATOR_TOL) {
        Ok(v) if v.is_empty() => {}
        _ => return f64::INFINITY,
    }
    let d = state.residual();
    miqp_objective(&state.z, inst)
        + dot(&state.lambda, &d)
        + 0.5 * params.rho * dot(&d, &d)
        + 0.5 * params.beta_aux * dot(&state.s, &state.s)
}

/// `ℒ + (κ_lyap/2)‖d‖²`.
pub fn lyapunov_value(state: &AdmmState, inst: &MiqpInstance, params: &AdmmParams) -> f64 {
    let d = state.residual();
    augmented_lagrangian(state, inst, params) + 0.5 * params.kappa_lyap * dot(&d, &d)
}

fn merit(state: &AdmmState, inst: &MiqpInstance, params: &AdmmParams) -> f64 {
    let card = state.r.iter().map(|&b| b as f64).sum::<f64>();
    augmented_lagrangian(state, inst, params) + params.mu_card * card * card + 0.5 * params.eps_f * dot(&state.f, &state.f)
}

/// `bit_e = 1` iff `z_e ≥ level`.
pub fn threshold(z: &[f64], level: f64) -> TopologyVector {
    TopologyVector::from_bits(z.iter().map(|&v| u8::from(v >= level)).collect()).expect("bits are 0/1")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "edge", rename_all = "snake_case")]
pub enum RepairAction {
    /// Edge (0-based index) switched on to join two components.
    Added(usize),
    /// Edge switched off to relieve a degree violation.
    Removed(usize),
    /// Greedy repair got stuck; the path graph was deployed instead.
    PathFallback,
}

/// Makes a thresholded topology connected and degree-feasible.
///
/// Over-degree nodes lose their costliest incident edge whose removal does
/// not split a component; then the cheapest edge joining two components with
/// spare degree on both ends is added. If neither move is available the path
/// graph is used.
pub fn repair(t: &TopologyVector, inst: &MiqpInstance) -> Result<(TopologyVector, Vec<RepairAction>)> {
    let space = &inst.space;
    let gamma = inst.gamma;
    let mut t = t.clone();
    let mut log = Vec::new();
    let cap = 4 * inst.m() + 4;
    for _ in 0..cap {
        let deg = degrees(&t, space)?;
        let comp = components(&t, space)?;
        let n_comp = comp.iter().max().map_or(0, |c| c + 1);
        if deg.iter().any(|&d| d > gamma) {
            let mut best: Option<usize> = None;
            for (e, i, j) in space.edges() {
                if !t.is_active(e) || (deg[i] <= gamma && deg[j] <= gamma) {
                    continue;
                }
                let mut trial = t.clone();
                trial.set(e, false);
                let split = components(&trial, space)?.iter().max().map_or(0, |c| c + 1) > n_comp;
                if !split && best.is_none_or(|b| inst.w[e] >= inst.w[b]) {
                    best = Some(e);
                }
            }
            match best {
                Some(e) => {
                    t.set(e, false);
                    log.push(RepairAction::Removed(e));
                    continue;
                }
                None => break,
            }
        }
        if n_comp > 1 {
            let mut best: Option<usize> = None;
            for (e, i, j) in space.edges() {
                if t.is_active(e) || comp[i] == comp[j] || deg[i] >= gamma || deg[j] >= gamma {
                    continue;
                }
                if best.is_none_or(|b| inst.w[e] < inst.w[b]) {
                    best = Some(e);
                }
            }
            match best {
                Some(e) => {
                    t.set(e, true);
                    log.push(RepairAction::Added(e));
                    continue;
                }
                None => break,
            }
        }
        return Ok((t, log));
    }
    log.push(RepairAction::PathFallback);
    Ok((path_topology(inst.n())?, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Brute,
    ExactQite,
    Varqite,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Brute => "brute",
            Backend::ExactQite => "exact-qite",
            Backend::Varqite => "varqite",
        }
    }
}

impl core::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Backend::Brute),
            "exact-qite" => Ok(Backend::ExactQite),
            "varqite" => Ok(Backend::Varqite),
            _ => Err(Error::Parameter(alloc::format!(
                "unknown backend `{s}`, expected one of brute, exact-qite, varqite"
            ))),
        }
    }
}

impl core::fmt::Display for Backend {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary-block solver. The orchestrator keeps its incumbent unless the
/// proposal strictly lowers the block cost.
pub trait BinarySolver {
    fn backend(&self) -> Backend;
    fn propose(&mut self, p: &QuboProblem, incumbent: &[u8]) -> Result<Vec<u8>>;
}

/// Exhaustive search.
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForce;

impl BinarySolver for BruteForce {
    fn backend(&self) -> Backend {
        Backend::Brute
    }

    fn propose(&mut self, p: &QuboProblem, _incumbent: &[u8]) -> Result<Vec<u8>> {
        Ok(brute_force_min(p)?.0)
    }
}

/// Exact imaginary-time evolution from the uniform superposition; the
/// `top_k` most probable outcomes are scored classically.
#[derive(Debug, Clone, Copy)]
pub struct ExactQite {
    pub tau: f64,
    pub top_k: usize,
}

impl ExactQite {
    pub fn evolve(&self, p: &QuboProblem) -> Result<Statevector> {
        let h = qubo_to_ising(p);
        exact_qite(&h, self.tau, &Statevector::uniform(p.m())?)
    }
}

impl ExactQite {
    /// Cheapest of the `top_k` most probable outcomes (ties by bitstring).
    pub fn best(&self, p: &QuboProblem) -> Result<(u64, f64)> {
        let psi = self.evolve(p)?;
        let m = p.m();
        let mut ranked: Vec<(f64, u64)> = psi
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(b, a)| (a.norm_sqr(), b as u64))
            .collect();
        let k = self.top_k.clamp(1, ranked.len());
        let order = |a: &(f64, u64), b: &(f64, u64)| {
            b.0.total_cmp(&a.0)
                .then(lexicographic_key(a.1, m).cmp(&lexicographic_key(b.1, m)))
        };
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, order);
            ranked.truncate(k);
        }
        best_of(p, ranked.iter().map(|x| x.1)).ok_or_else(|| Error::Numerical("no candidate survived".into()))
    }
}

fn keep_if_better(p: &QuboProblem, candidate: (u64, f64), incumbent: &[u8]) -> Vec<u8> {
    let inc = p.eval_mask(bits_to_mask(incumbent));
    if candidate.1 < inc - tie_eps(inc) {
        mask_to_bits(candidate.0, p.m())
    } else {
        incumbent.to_vec()
    }
}

impl BinarySolver for ExactQite {
    fn backend(&self) -> Backend {
        Backend::ExactQite
    }

    fn propose(&mut self, p: &QuboProblem, incumbent: &[u8]) -> Result<Vec<u8>> {
        Ok(keep_if_better(p, self.best(p)?, incumbent))
    }
}

/// Variational McLachlan evolution of a one-repetition rotation/CX ansatz,
/// followed by sampling and classical scoring.
#[derive(Debug, Clone)]
pub struct VarQite {
    pub schedule: QiteSchedule,
    pub reps: usize,
    pub max_qubits: usize,
    rng: ChaCha8Rng,
    last_trace: Vec<EnergyTracePoint>,
}

impl VarQite {
    pub fn new(schedule: QiteSchedule, reps: usize, max_qubits: usize, seed: u64) -> Self {
        Self {
            schedule,
            reps,
            max_qubits,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_trace: Vec::new(),
        }
    }

    /// Energy trace of the most recent evolution.
    pub fn last_trace(&self) -> &[EnergyTracePoint] {
        &self.last_trace
    }
}

impl VarQite {
    /// Evolves a fresh ansatz (angles drawn from `U(−0.1, 0.1)`), samples it
    /// and returns the cheapest of the `top_k` most frequent outcomes.
    pub fn best(&mut self, p: &QuboProblem) -> Result<(u64, f64)> {
        let m = p.m();
        if m > self.max_qubits {
            return Err(Error::Capacity {
                what: "varqite qubits",
                size: m,
                limit: self.max_qubits,
            });
        }
        let h = qubo_to_ising(p);
        let np = AnsatzCircuit::su2_param_count(m, self.reps);
        let theta = (0..np).map(|_| self.rng.gen_range(-0.1..=0.1)).collect();
        let a0 = AnsatzCircuit::efficient_su2(m, self.reps, theta)?;
        let run = run_varqite(&h, &a0, &self.schedule)?;
        let psi = apply_ansatz(&run.circuit)?;
        self.last_trace = run.trace;
        let counts = sample_with(&psi, self.schedule.shots, &mut self.rng);
        best_of(p, top_outcomes(&counts, self.schedule.top_k, m)).ok_or_else(|| Error::Numerical("no samples drawn".into()))
    }
}

impl BinarySolver for VarQite {
    fn backend(&self) -> Backend {
        Backend::Varqite
    }

    fn propose(&mut self, p: &QuboProblem, incumbent: &[u8]) -> Result<Vec<u8>> {
        Ok(keep_if_better(p, self.best(p)?, incumbent))
    }
}

/// Boxed solver for a backend name.
pub fn make_solver(
    backend: Backend,
    schedule: QiteSchedule,
    exact_tau: f64,
    reps: usize,
    varqite_max_qubits: usize,
    seed: u64,
) -> Box<dyn BinarySolver> {
    match backend {
        Backend::Brute => Box::new(BruteForce),
        Backend::ExactQite => Box::new(ExactQite {
            tau: exact_tau,
            top_k: schedule.top_k,
        }),
        Backend::Varqite => Box::new(VarQite::new(schedule, reps, varqite_max_qubits, seed)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmOutcome {
    pub state: AdmmState,
    /// Deployed topology (after any repair).
    pub topology: TopologyVector,
    pub flows: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub repairs: Vec<RepairAction>,
}

impl AdmmOutcome {
    pub fn repaired(&self) -> bool {
        !self.repairs.is_empty()
    }
}

/// Runs sweeps until `‖d‖∞ ≤ tol` or `k_max`, thresholds `z`, repairs the
/// result if needed and routes unit flows over it.
pub fn run_admm(inst: &MiqpInstance, params: &AdmmParams, solver: &mut dyn BinarySolver, init: Option<AdmmState>) -> Result<AdmmOutcome> {
    params.validate()?;
    let mut st = match init {
        Some(s) => s.restarted(),
        None => AdmmState::initial(inst, params.init)?,
    };
    st.check(inst)?;
    let mut converged = false;
    while st.k < params.k_max {
        let m0 = merit(&st, inst, params);
        let (z_prev, f_prev, s_prev) = (st.z.clone(), st.f.clone(), st.s.clone());

        let qp = Block1Problem {
            inst,
            r_fixed: st.r.iter().map(|&b| b as f64).collect(),
            s_fixed: st.s.clone(),
            lambda_fixed: st.lambda.clone(),
            rho: params.rho,
            eps_f: params.eps_f,
        };
        let warm = WarmStart {
            z: st.z.clone(),
            f: st.f.clone(),
            dual: core::mem::take(&mut st.qp_dual),
        };
        let sol = solve_block1_warm(&qp, params.qp_tol, params.qp_max_iter, Some(&warm))?;
        st.z = sol.z;
        st.f = sol.f;
        st.qp_dual = sol.dual;
        let m1 = merit(&st, inst, params);

        let p = assemble_block2_qubo(&st.z, &st.s, &st.lambda, params.rho, params.mu_card)?;
        let proposal = solver.propose(&p, &st.r)?;
        if proposal.len() != st.r.len() {
            return Err(Error::Dimension {
                what: "binary proposal",
                expected: st.r.len(),
                got: proposal.len(),
            });
        }
        let phi_inc = p.eval_mask(bits_to_mask(&st.r));
        let phi_new = p.eval_mask(bits_to_mask(&proposal));
        let r_changed = phi_new < phi_inc - tie_eps(phi_inc);
        if r_changed {
            st.r = proposal;
        }
        let block2_phi = phi_new.min(phi_inc);
        let m2 = merit(&st, inst, params);

        st.s = block3_update(&st.z, &st.r, &st.lambda, params)?;
        let m3 = merit(&st, inst, params);

        let d = st.residual();
        let before = augmented_lagrangian(&st, inst, params);
        st.lambda = dual_update(&st.lambda, &d, params.rho);
        let after = augmented_lagrangian(&st, inst, params);
        st.k += 1;

        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let residual_inf = norm_inf(&d);
        st.history.push(IterationRecord {
            k: st.k,
            residual_inf,
            aug_lagrangian: after,
            lyapunov_v: after + 0.5 * params.kappa_lyap * dot(&d, &d),
            block2_phi,
            merit: [m0, m1, m2, m3],
            dual_change: after - before,
            rho_d_sq: params.rho * dot(&d, &d),
            step_sq: sq(&st.z, &z_prev) + sq(&st.f, &f_prev) + sq(&st.s, &s_prev),
            qp_iterations: sol.iterations,
            qp_converged: sol.converged,
            r_changed,
        });
        if residual_inf <= params.tol {
            converged = true;
            break;
        }
    }

    let (topology, repairs) = repair(&threshold(&st.z, THRESHOLD_LEVEL), inst)?;
    let flows = flows_from_spanning_tree(&topology, inst)?;
    let objective = miqp_objective(&topology.as_f64(), inst);
    Ok(AdmmOutcome {
        state: st,
        topology,
        flows,
        objective,
        converged,
        repairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{is_connected, EdgeSpace};
    use crate::miqp::{check_feasible, edge_weights, enumerate_optimum};

    fn instance(n: usize, w: Vec<f64>, kappa: f64, gamma: usize) -> MiqpInstance {
        MiqpInstance::new(EdgeSpace::new(n).unwrap(), w, vec![kappa; n], gamma).unwrap()
    }

    fn params(rho: f64, beta: f64) -> AdmmParams {
        AdmmParams {
            rho,
            beta_aux: beta,
            ..AdmmParams::default()
        }
    }

    /// Golden-section minimiser of a unimodal scalar function.
    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        while b - a > 1e-12 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn slack_block_examples() {
        assert_eq!(block3_update(&[0.3, 1.0], &[0, 1], &[0.0; 2], &params(20.0, 200.0)).unwrap()[1], 0.0);
        for (lambda, z, r, rho, beta) in [(0.0, 1.0, 0u8, 20.0, 200.0), (11.0, 0.0, 0, 20.0, 2.0)] {
            let s = block3_update(&[z], &[r], &[lambda], &params(rho, beta)).unwrap()[0];
            let obj = |s: f64| lambda * s + 0.5 * rho * (z - r as f64 + s).powi(2) + 0.5 * beta * s * s;
            let oracle = golden_min(obj, -10.0, 10.0);
            assert!((s - oracle).abs() < 1e-8, "{s} vs {oracle}");
        }
        let s = block3_update(&[1.0], &[0], &[0.0], &params(20.0, 200.0)).unwrap()[0];
        assert!((s + 20.0 / 220.0).abs() < 1e-15);
        assert!(block3_update(&[1.0], &[0], &[0.0], &AdmmParams { rho: 1.0, beta_aux: -1.0, ..params(1.0, 0.0) }).is_err());
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual_update(&[1.5], &[0.0], 20.0), vec![1.5]);
        assert_eq!(dual_update(&[0.0], &[0.1], 20.0), vec![2.0]);
        let twice = dual_update(&dual_update(&[1.0], &[0.25], 4.0), &[0.5], 4.0);
        assert_eq!(twice, vec![1.0 + 4.0 * 0.75]);
    }

    #[test]
    fn lagrangian_examples() {
        let inst = instance(2, vec![0.0], 0.0, 1);
        let st = AdmmState::new(vec![1.0], vec![1.0, 0.0], vec![0], vec![0.0], vec![0.0]);
        let p = AdmmParams {
            kappa_lyap: 2.0,
            ..params(2.0, 0.0)
        };
        // J = 0, d = 1: 0 + 0 + (2/2)·1 + 0
        assert_eq!(augmented_lagrangian(&st, &inst, &p), 1.0);
        assert_eq!(lyapunov_value(&st, &inst, &p), 2.0);
        assert_eq!(lyapunov_value(&st, &inst, &AdmmParams { kappa_lyap: 0.0, ..p }), 1.0);

        // z = r and s = 0 leave J alone
        let inst3 = instance(3, vec![1.0, 2.0, 3.0], 0.1, 2);
        let st3 = AdmmState::initial(&inst3, InitialPoint::IndexPath).unwrap();
        let st3 = AdmmState {
            lambda: vec![5.0, -3.0, 7.0],
            ..st3
        };
        let j = miqp_objective(&st3.z, &inst3);
        assert!((augmented_lagrangian(&st3, &inst3, &p) - j).abs() < 1e-12);
        assert!((lyapunov_value(&st3, &inst3, &p) - j).abs() < 1e-12);

        // dual shift moves ℒ by (Δλ)ᵀd
        let a = AdmmState::new(vec![1.0, 0.6, 0.5], st3.f.clone(), vec![1, 0, 1], vec![0.05, -0.1, 0.0], vec![0.3, 0.1, -0.2]);
        let l0 = augmented_lagrangian(&a, &inst3, &p);
        assert!(l0.is_finite());
        let shift = [0.4, -1.0, 2.5];
        let b = AdmmState {
            lambda: a.lambda.iter().zip(shift).map(|(l, s)| l + s).collect(),
            ..a.clone()
        };
        let expect = dot(&shift, &a.residual());
        assert!((augmented_lagrangian(&b, &inst3, &p) - l0 - expect).abs() < 1e-12);

        // leaving the constraint set hits the indicator
        let bad = AdmmState {
            f: vec![0.0; 6],
            ..a
        };
        assert_eq!(augmented_lagrangian(&bad, &inst3, &p), f64::INFINITY);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(&[0.9, 0.1], 0.5).bits(), &[1, 0]);
        assert_eq!(threshold(&[0.5], 0.5).bits(), &[1]);
        assert_eq!(threshold(&[1.0, 0.0, 1.0], 0.5).bits(), &[1, 0, 1]);
    }

    #[test]
    fn repair_joins_and_trims() {
        let inst = instance(4, vec![1.0, 5.0, 2.0, 3.0, 9.0, 4.0], 0.0, 2);
        // edges: (1,2) (1,3) (1,4) (2,3) (2,4) (3,4)
        let (t, log) = repair(&TopologyVector::from_bits(vec![1, 0, 0, 0, 0, 0]).unwrap(), &inst).unwrap();
        assert!(is_connected(&t, &inst.space).unwrap());
        assert!(degrees(&t, &inst.space).unwrap().iter().all(|&d| d <= 2));
        assert!(log.iter().all(|a| matches!(a, RepairAction::Added(_))));
        // star at node 1 has degree 3 > γ
        let (t, log) = repair(&TopologyVector::from_bits(vec![1, 1, 1, 0, 0, 1]).unwrap(), &inst).unwrap();
        assert_eq!(log[0], RepairAction::Removed(1));
        assert!(is_connected(&t, &inst.space).unwrap());
        assert!(degrees(&t, &inst.space).unwrap().iter().all(|&d| d <= 2));
        // already feasible: untouched
        let path = path_topology(4).unwrap();
        assert_eq!(repair(&path, &inst).unwrap(), (path, vec![]));
    }

    #[test]
    fn two_agents_take_the_single_edge() {
        let inst = instance(2, vec![3.0], 0.1, 1);
        let out = run_admm(&inst, &AdmmParams::for_agents(2), &mut BruteForce, None).unwrap();
        assert!(out.converged);
        assert!(out.state.k <= 3);
        assert_eq!(out.topology.bits(), &[1]);
        assert!(check_feasible(&out.topology, &out.flows, &inst).unwrap().is_empty());
    }

    #[test]
    fn three_agents_reach_the_enumerated_optimum() {
        let inst = instance(3, vec![1.0; 3], 0.1, 2);
        let out = run_admm(&inst, &AdmmParams::for_agents(3), &mut BruteForce, None).unwrap();
        let best = enumerate_optimum(&inst).unwrap();
        assert!((out.objective - 2.6).abs() < 1e-12);
        assert!((best.objective - out.objective).abs() < 1e-12);
        assert_eq!(out.topology.active_count(), 2);
    }

    #[test]
    fn monitors_hold_on_random_snapshots() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 5;
        let space = EdgeSpace::new(n).unwrap();
        let params = AdmmParams::for_agents(n);
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let w = edge_weights(&x, &vec![0.0; space.m()], &space).unwrap();
            let inst = MiqpInstance::new(space.clone(), w, vec![0.1; n], 2).unwrap();
            let out = run_admm(&inst, &params, &mut BruteForce, None).unwrap();
            assert!(out.converged);
            assert_eq!(out.state.history.len(), out.state.k);
            for rec in &out.state.history {
                for b in 0..3 {
                    assert!(rec.merit[b + 1] <= rec.merit[b] + 2.0 * params.qp_tol, "{rec:?}");
                }
                assert!((rec.dual_change - rec.rho_d_sq).abs() <= 1e-9);
            }
            let again = run_admm(&inst, &params, &mut BruteForce, None).unwrap();
            assert_eq!(again, out);
        }
    }

    #[test]
    fn qite_backends_agree_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 5;
        let space = EdgeSpace::new(n).unwrap();
        let params = AdmmParams::for_agents(n);
        for _ in 0..3 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let w = edge_weights(&x, &vec![0.0; space.m()], &space).unwrap();
            let inst = MiqpInstance::new(space.clone(), w, vec![0.1; n], 2).unwrap();
            let brute = run_admm(&inst, &params, &mut BruteForce, None).unwrap();
            let exact = run_admm(&inst, &params, &mut ExactQite { tau: 1.5, top_k: 8 }, None).unwrap();
            assert_eq!(brute.state.history, exact.state.history);
            assert_eq!(brute.topology, exact.topology);
        }
    }

    #[test]
    fn beta_schedule() {
        assert_eq!(beta_for(2), 200.0);
        assert_eq!(beta_for(5), 200.0);
        assert_eq!(beta_for(6), 400.0);
        assert_eq!(beta_for(7), 600.0);
    }
}
