use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::qubo::IsingHamiltonian;
use crate::{Error, Result};

/// Largest register simulated as a dense statevector.
pub const MAX_STATEVECTOR_QUBITS: usize = 22;

pub(crate) fn check_qubits(m: usize) -> Result<()> {
    if m > MAX_STATEVECTOR_QUBITS {
        return Err(Error::Capacity {
            what: "statevector qubits",
            size: m,
            limit: MAX_STATEVECTOR_QUBITS,
        });
    }
    Ok(())
}

/// Dense `2^m` amplitude vector; basis index bit `q` is qubit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    m: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn basis(m: usize, b: u64) -> Result<Self> {
        check_qubits(m)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << m];
        let idx = usize::try_from(b).ok().filter(|&i| i < amps.len()).ok_or(Error::Dimension {
            what: "basis index",
            expected: 1 << m,
            got: b as usize,
        })?;
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { m, amps })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        check_qubits(m)?;
        let a = 1.0 / num_traits::Float::sqrt((1u64 << m) as f64);
        Ok(Self {
            m,
            amps: vec![Complex64::new(a, 0.0); 1 << m],
        })
    }

    /// Wraps amplitudes after checking length and normalisation (1e-10).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::Dimension {
                what: "amplitude count",
                expected: len.next_power_of_two(),
                got: len,
            });
        }
        let sv = Self {
            m: len.trailing_zeros() as usize,
            amps,
        };
        if (sv.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical("statevector is not normalised".into()));
        }
        Ok(sv)
    }

    pub(crate) fn from_raw(m: usize, amps: Vec<Complex64>) -> Self {
        Self { m, amps }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨ψ|H|ψ⟩` for a diagonal `H` given by its energies.
    pub fn expectation_diag(&self, energies: &[f64]) -> f64 {
        self.amps.iter().zip(energies).map(|(a, e)| a.norm_sqr() * e).sum()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Most probable basis index (smallest index on exact ties).
    pub fn argmax_probability(&self) -> u64 {
        let mut best = 0;
        let mut pbest = -1.0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > pbest {
                pbest = p;
                best = i;
            }
        }
        best as u64
    }
}

/// Energies `E_b` of every basis state, in `O(2^m)`.
pub fn diagonal_energies(h: &IsingHamiltonian) -> Result<Vec<f64>> {
    let m = h.m();
    check_qubits(m)?;
    let mut e = vec![0.0; 1 << m];
    // all spins up
    let mut e0 = h.constant_shift() + h.h().iter().sum::<f64>();
    for i in 0..m {
        for j in i + 1..m {
            e0 += h.j(i, j);
        }
    }
    e[0] = e0;
    let mut lower = vec![0.0; 1 << m];
    for k in 0..m {
        let half = 1usize << k;
        // lower[b] = Σ_{j<k} J_jk z_j(b)
        lower[0] = (0..k).map(|j| h.j(j, k)).sum();
        for b in 1..half {
            let low = b.trailing_zeros() as usize;
            lower[b] = lower[b & (b - 1)] - 2.0 * h.j(low, k);
        }
        let upper: f64 = (k + 1..m).map(|j| h.j(k, j)).sum();
        let flip = -2.0 * h.h()[k] - 2.0 * upper;
        for b in 0..half {
            e[half | b] = e[b] + flip - 2.0 * lower[b];
        }
    }
    Ok(e)
}

/// `a_b ← a_b · e^{−τ(E_b − E_min)}`, renormalised.
pub fn exact_qite(h: &IsingHamiltonian, tau: f64, psi0: &Statevector) -> Result<Statevector> {
    let energies = diagonal_energies(h)?;
    exact_qite_with_energies(&energies, tau, psi0)
}

pub fn exact_qite_with_energies(energies: &[f64], tau: f64, psi0: &Statevector) -> Result<Statevector> {
    if energies.len() != psi0.amps.len() {
        return Err(Error::Dimension {
            what: "energy vector",
            expected: psi0.amps.len(),
            got: energies.len(),
        });
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Parameter(alloc::format!("imaginary time must be finite and >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(psi0.clone());
    }
    // shift by the lowest energy carrying weight so the dominant factor is 1
    let e_min = energies
        .iter()
        .zip(&psi0.amps)
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(e, _)| *e)
        .fold(f64::INFINITY, f64::min);
    let mut amps: Vec<Complex64> = psi0
        .amps
        .iter()
        .zip(energies)
        .map(|(a, e)| a * num_traits::Float::exp(-tau * (e - e_min)))
        .collect();
    let norm = num_traits::Float::sqrt(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numerical("imaginary-time evolution lost all weight".into()));
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(Statevector { m: psi0.m, amps })
}
