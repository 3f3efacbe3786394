use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ansatz::{apply_ansatz, state_derivatives, AnsatzCircuit};
use super::pauli;
use super::statevector::diagonal_energies;
use crate::linalg::norm2;
use crate::qubo::IsingHamiltonian;
use crate::{Error, Result};

/// Energy slack tolerated before a step is split in two.
const MONOTONE_SLACK: f64 = 1e-12;
const MAX_SPLIT_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QiteSchedule {
    pub tau_total: f64,
    pub steps: usize,
    pub regularization: f64,
    pub shots: usize,
    pub top_k: usize,
}

impl Default for QiteSchedule {
    fn default() -> Self {
        Self {
            tau_total: 1.5,
            steps: 30,
            regularization: 1e-4,
            shots: 4096,
            top_k: 8,
        }
    }
}

impl QiteSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_total > 0.0) || self.steps == 0 || !(self.regularization > 0.0) || self.shots == 0 || self.top_k == 0 {
            return Err(Error::Parameter(
                "qite schedule needs tau_total > 0, steps ≥ 1, regularization > 0, shots ≥ 1, top_k ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// `A θ̇ = −C` data at the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct McLachlanSystem {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub energy: f64,
}

/// Builds the system from explicit statevector derivatives.
pub fn system_statevector(a: &AnsatzCircuit, energies: &[f64]) -> Result<McLachlanSystem> {
    let (psi, d) = state_derivatives(a)?;
    if energies.len() != psi.amplitudes().len() {
        return Err(Error::Dimension {
            what: "energy vector",
            expected: psi.amplitudes().len(),
            got: energies.len(),
        });
    }
    let np = d.len();
    let energy = psi.expectation_diag(energies);
    let with_state: Vec<_> = d.iter().map(|dp| dp.inner(&psi)).collect();
    let mut amat = DMatrix::zeros(np, np);
    for p in 0..np {
        for q in p..np {
            let v = (d[p].inner(&d[q]) - with_state[p] * with_state[q].conj()).re;
            amat[(p, q)] = v;
            amat[(q, p)] = v;
        }
    }
    let c = DVector::from_iterator(
        np,
        d.iter().zip(&with_state).map(|(dp, ov)| {
            let dh: num_complex::Complex64 = dp
                .amplitudes()
                .iter()
                .zip(psi.amplitudes())
                .zip(energies)
                .map(|((x, y), e)| x.conj() * y * *e)
                .sum();
            (dh - ov * energy).re
        }),
    );
    Ok(McLachlanSystem { a: amat, c, energy })
}

/// Builds the system by the Pauli-string route (one-repetition ansatz only).
pub fn system_pauli(a: &AnsatzCircuit, h: &IsingHamiltonian) -> Result<McLachlanSystem> {
    let s = pauli::system(a, h)?;
    let np = s.with_state.len();
    let amat = DMatrix::from_fn(np, np, |p, q| (s.overlaps[p][q] - s.with_state[p] * s.with_state[q].conj()).re);
    let c = DVector::from_iterator(np, (0..np).map(|p| (s.with_h[p] - s.with_state[p] * s.energy).re));
    Ok(McLachlanSystem { a: amat, c, energy: s.energy })
}

pub fn system(a: &AnsatzCircuit, h: &IsingHamiltonian) -> Result<McLachlanSystem> {
    if a.m() != h.m() {
        return Err(Error::Dimension {
            what: "hamiltonian qubits",
            expected: a.m(),
            got: h.m(),
        });
    }
    if pauli::supports(a) {
        system_pauli(a, h)
    } else {
        system_statevector(a, &diagonal_energies(h)?)
    }
}

/// `⟨ψ(θ)|H|ψ(θ)⟩`.
pub fn energy(a: &AnsatzCircuit, h: &IsingHamiltonian) -> Result<f64> {
    if pauli::supports(a) {
        pauli::energy(a, h)
    } else {
        Ok(apply_ansatz(a)?.expectation_diag(&diagonal_energies(h)?))
    }
}

fn solve_rate(sys: &McLachlanSystem, reg: f64) -> Result<DVector<f64>> {
    let mut m = sys.a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += reg;
    }
    let rhs = -&sys.c;
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    m.lu()
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("McLachlan system is singular after regularisation".into()))
}

/// One explicit Euler step `θ ← θ + dτ·θ̇` with `(A + reg·I)θ̇ = −C`.
pub fn mclachlan_step(a: &AnsatzCircuit, h: &IsingHamiltonian, dtau: f64, reg: f64) -> Result<AnsatzCircuit> {
    if !(dtau > 0.0) || !(reg > 0.0) {
        return Err(Error::Parameter(alloc::format!("need dtau > 0 and reg > 0, got {dtau}, {reg}")));
    }
    let sys = system(a, h)?;
    step_with(a, &sys, dtau, reg)
}

fn step_with(a: &AnsatzCircuit, sys: &McLachlanSystem, dtau: f64, reg: f64) -> Result<AnsatzCircuit> {
    let rate = solve_rate(sys, reg)?;
    let theta = a.theta.iter().zip(rate.iter()).map(|(t, r)| t + dtau * r).collect();
    a.with_theta(theta)
}

/// Advances by `dtau`, halving the step while the energy would rise.
fn guarded_step(a: &AnsatzCircuit, h: &IsingHamiltonian, dtau: f64, reg: f64, depth: usize) -> Result<(AnsatzCircuit, f64)> {
    let sys = system(a, h)?;
    let next = step_with(a, &sys, dtau, reg)?;
    let e = energy(&next, h)?;
    if e <= sys.energy + MONOTONE_SLACK * sys.energy.abs().max(1.0) || depth >= MAX_SPLIT_DEPTH {
        return Ok((next, e));
    }
    let (half, _) = guarded_step(a, h, 0.5 * dtau, reg, depth + 1)?;
    guarded_step(&half, h, 0.5 * dtau, reg, depth + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTracePoint {
    pub step: usize,
    pub tau: f64,
    pub energy: f64,
    /// `‖∇_θ E‖₂ = 2‖C‖₂` at this point.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarQiteRun {
    pub circuit: AnsatzCircuit,
    pub trace: Vec<EnergyTracePoint>,
}

/// `steps` McLachlan steps of size `tau_total / steps`; a step that would
/// raise the energy is split into halves (recursively).
pub fn run_varqite(h: &IsingHamiltonian, a0: &AnsatzCircuit, sched: &QiteSchedule) -> Result<VarQiteRun> {
    sched.validate()?;
    let dtau = sched.tau_total / sched.steps as f64;
    let mut a = a0.clone();
    let mut trace = Vec::with_capacity(sched.steps + 1);
    for step in 0..=sched.steps {
        let sys = system(&a, h)?;
        trace.push(EnergyTracePoint {
            step,
            tau: dtau * step as f64,
            energy: sys.energy,
            grad_norm: 2.0 * norm2(sys.c.as_slice()),
        });
        if step == sched.steps {
            break;
        }
        if sys.c.iter().all(|&c| c == 0.0) {
            continue;
        }
        a = guarded_step(&a, h, dtau, sched.regularization, 0)?.0;
    }
    Ok(VarQiteRun { circuit: a, trace })
}
