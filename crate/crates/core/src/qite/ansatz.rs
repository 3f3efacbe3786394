use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::statevector::{check_qubits, Statevector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    /// Y rotation of a qubit by parameter `param`.
    Ry { qubit: usize, param: usize },
    /// Z rotation of a qubit by parameter `param`.
    Rz { qubit: usize, param: usize },
    Cx { control: usize, target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Rotation layers (Ry then Rz on every qubit) separated by a linear CX
    /// chain `0→1, 1→2, …`.
    EfficientSu2 { reps: usize },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzCircuit {
    m: usize,
    layout: Layout,
    gates: Vec<Gate>,
    pub theta: Vec<f64>,
}

impl AnsatzCircuit {
    /// Parameter `layer·2m + q` is the Ry angle of qubit `q` in that layer,
    /// `layer·2m + m + q` its Rz angle.
    pub fn efficient_su2(m: usize, reps: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = Self::su2_param_count(m, reps);
        if theta.len() != expected {
            return Err(Error::Parameter(alloc::format!(
                "ansatz with m = {m}, reps = {reps} takes {expected} parameters, got {}",
                theta.len()
            )));
        }
        let mut gates = Vec::new();
        for layer in 0..=reps {
            let base = layer * 2 * m;
            gates.extend((0..m).map(|q| Gate::Ry { qubit: q, param: base + q }));
            gates.extend((0..m).map(|q| Gate::Rz { qubit: q, param: base + m + q }));
            if layer < reps {
                gates.extend((0..m.saturating_sub(1)).map(|q| Gate::Cx { control: q, target: q + 1 }));
            }
        }
        Ok(Self {
            m,
            layout: Layout::EfficientSu2 { reps },
            gates,
            theta,
        })
    }

    pub fn su2_param_count(m: usize, reps: usize) -> usize {
        2 * m * (reps + 1)
    }

    pub fn custom(m: usize, gates: Vec<Gate>, theta: Vec<f64>) -> Result<Self> {
        for g in &gates {
            let (qs, param) = match *g {
                Gate::Ry { qubit, param } | Gate::Rz { qubit, param } => ([qubit, qubit], Some(param)),
                Gate::Cx { control, target } => {
                    if control == target {
                        return Err(Error::Parameter("CX control equals target".into()));
                    }
                    ([control, target], None)
                }
            };
            if qs.iter().any(|&q| q >= m) {
                return Err(Error::Parameter(alloc::format!("gate {g:?} acts outside {m} qubits")));
            }
            if param.is_some_and(|p| p >= theta.len()) {
                return Err(Error::Parameter(alloc::format!("gate {g:?} has no parameter")));
            }
        }
        Ok(Self {
            m,
            layout: Layout::Custom,
            gates,
            theta,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return Err(Error::Parameter(alloc::format!(
                "expected {} parameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        Ok(Self {
            theta,
            ..self.clone()
        })
    }
}

pub(crate) fn apply_gate(amps: &mut [Complex64], gate: Gate, theta: &[f64]) {
    match gate {
        Gate::Ry { qubit, param } => {
            let (s, c) = Float::sin_cos(0.5 * theta[param]);
            let bit = 1usize << qubit;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    let (a0, a1) = (amps[i], amps[i | bit]);
                    amps[i] = a0 * c - a1 * s;
                    amps[i | bit] = a0 * s + a1 * c;
                }
            }
        }
        Gate::Rz { qubit, param } => {
            let (s, c) = Float::sin_cos(0.5 * theta[param]);
            let (p0, p1) = (Complex64::new(c, -s), Complex64::new(c, s));
            let bit = 1usize << qubit;
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= if i & bit == 0 { p0 } else { p1 };
            }
        }
        Gate::Cx { control, target } => {
            let (cb, tb) = (1usize << control, 1usize << target);
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    amps.swap(i, i | tb);
                }
            }
        }
    }
}

/// Multiplies by `−(i/2)·G` where `G` is the rotation generator (Y or Z).
pub(crate) fn apply_generator(amps: &mut [Complex64], gate: Gate) {
    let half_i = Complex64::new(0.0, -0.5);
    match gate {
        Gate::Ry { qubit, .. } => {
            let bit = 1usize << qubit;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    let (a0, a1) = (amps[i], amps[i | bit]);
                    // Y = [[0, −i], [i, 0]]
                    amps[i] = half_i * Complex64::new(0.0, -1.0) * a1;
                    amps[i | bit] = half_i * Complex64::new(0.0, 1.0) * a0;
                }
            }
        }
        Gate::Rz { qubit, .. } => {
            let bit = 1usize << qubit;
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= if i & bit == 0 { half_i } else { -half_i };
            }
        }
        Gate::Cx { .. } => unreachable!("entanglers carry no parameter"),
    }
}

/// `U(θ)|0…0⟩`.
pub fn apply_ansatz(a: &AnsatzCircuit) -> Result<Statevector> {
    check_qubits(a.m)?;
    let mut psi = Statevector::basis(a.m, 0)?;
    for &g in &a.gates {
        apply_gate(psi.amps_mut(), g, &a.theta);
    }
    Ok(psi)
}

/// The state and its derivative with respect to every parameter, by
/// inserting the generator after the differentiated gate.
pub fn state_derivatives(a: &AnsatzCircuit) -> Result<(Statevector, Vec<Statevector>)> {
    check_qubits(a.m)?;
    let psi = apply_ansatz(a)?;
    let mut derivs = Vec::with_capacity(a.num_params());
    for p in 0..a.num_params() {
        let mut d = Statevector::from_raw(a.m, alloc::vec![Complex64::new(0.0, 0.0); 1 << a.m]);
        for (gi, &g) in a.gates.iter().enumerate() {
            let param = match g {
                Gate::Ry { param, .. } | Gate::Rz { param, .. } => Some(param),
                Gate::Cx { .. } => None,
            };
            if param != Some(p) {
                continue;
            }
            // product rule over every gate that uses this parameter
            let mut term = Statevector::basis(a.m, 0)?;
            for &h in &a.gates[..=gi] {
                apply_gate(term.amps_mut(), h, &a.theta);
            }
            apply_generator(term.amps_mut(), g);
            for &h in &a.gates[gi + 1..] {
                apply_gate(term.amps_mut(), h, &a.theta);
            }
            for (x, y) in d.amps_mut().iter_mut().zip(term.amplitudes()) {
                *x += y;
            }
        }
        derivs.push(d);
    }
    Ok((psi, derivs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    #[test]
    fn zero_angles_give_ground_basis_state() {
        let a = AnsatzCircuit::efficient_su2(4, 1, alloc::vec![0.0; 16]).unwrap();
        let psi = apply_ansatz(&a).unwrap();
        assert_eq!(psi.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(psi.amplitudes()[1..].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn ry_pi_flips() {
        let mut theta = alloc::vec![0.0; 4];
        theta[0] = PI;
        let a = AnsatzCircuit::efficient_su2(1, 1, theta).unwrap();
        let psi = apply_ansatz(&a).unwrap();
        assert_relative_eq!(psi.amplitudes()[1].norm(), 1.0, epsilon = 1e-15);
        assert!(psi.amplitudes()[0].norm() < 1e-15);
    }

    #[test]
    fn parameter_count_is_checked() {
        assert!(AnsatzCircuit::efficient_su2(3, 1, alloc::vec![0.0; 11]).is_err());
        assert_eq!(AnsatzCircuit::su2_param_count(15, 1), 60);
    }

    #[test]
    fn cx_chain_entangles() {
        // Ry(π/2) on qubit 0 then CX(0,1): Bell-like state over |00⟩, |11⟩
        let mut theta = alloc::vec![0.0; 8];
        theta[0] = PI / 2.0;
        let a = AnsatzCircuit::efficient_su2(2, 1, theta).unwrap();
        let p = apply_ansatz(&a).unwrap().probabilities();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[3], 0.5, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn unitary(theta in proptest::collection::vec(-PI..PI, 24)) {
            let a = AnsatzCircuit::efficient_su2(4, 2, theta).unwrap();
            prop_assert!((apply_ansatz(&a).unwrap().norm_sqr() - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn derivatives_match_finite_differences(theta in proptest::collection::vec(-PI..PI, 12)) {
            let a = AnsatzCircuit::efficient_su2(3, 1, theta.clone()).unwrap();
            let (_, d) = state_derivatives(&a).unwrap();
            let h = 1e-6;
            for p in 0..theta.len() {
                let mut tp = theta.clone();
                tp[p] += h;
                let mut tm = theta.clone();
                tm[p] -= h;
                let up = apply_ansatz(&a.with_theta(tp).unwrap()).unwrap();
                let dn = apply_ansatz(&a.with_theta(tm).unwrap()).unwrap();
                for i in 0..8 {
                    let fd = (up.amplitudes()[i] - dn.amplitudes()[i]) / (2.0 * h);
                    prop_assert!((fd - d[p].amplitudes()[i]).norm() < 1e-8);
                }
            }
        }
    }
}
