//! Imaginary-time evolution of the diagonal Ising Hamiltonian.
//!
//! Two backends: exact evolution of the amplitude vector, and the variational
//! McLachlan flow over a rotation/CX-chain ansatz. Outcomes are then sampled
//! and the cheapest frequent bitstring is proposed to the caller.

pub mod ansatz;
pub mod mclachlan;
pub mod pauli;
pub mod sampling;
pub mod statevector;

pub use ansatz::{apply_ansatz, AnsatzCircuit, Gate, Layout};
pub use mclachlan::{mclachlan_step, run_varqite, EnergyTracePoint, McLachlanSystem, QiteSchedule, VarQiteRun};
pub use sampling::{sample_bitstrings, sample_with, select_candidate, top_outcomes, Counts};
pub use statevector::{diagonal_energies, exact_qite, Statevector, MAX_STATEVECTOR_QUBITS};
