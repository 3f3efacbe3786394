//! Pauli-string algebra for the McLachlan system of a one-repetition
//! rotation/CX-chain ansatz, without building any `2^m` vector.
//!
//! The state is `ψ = V·P·|w⟩`, where `|w⟩` is the product state after the
//! first rotation layer, `P` the CX chain and `V` the last rotation layer.
//! Every derivative can be written `∂_p ψ = V·P·S_p|w⟩`, so all the overlaps
//! reduce to product-state expectations of short Pauli sums, with the
//! Hamiltonian pulled back to `H̃ = P†V†HVP`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use super::ansatz::{AnsatzCircuit, Layout};
use crate::qubo::IsingHamiltonian;
use crate::{Error, Result};

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `coef · Π_q X_q^{x_q} Z_q^{z_q}` (X to the left of Z on each qubit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliString {
    pub coef: Complex64,
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub fn identity(coef: Complex64) -> Self {
        Self { coef, x: 0, z: 0 }
    }

    #[inline]
    pub fn product(self, o: Self) -> Self {
        let sign = if (self.z & o.x).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        Self {
            coef: self.coef * o.coef * sign,
            x: self.x ^ o.x,
            z: self.z ^ o.z,
        }
    }

    #[inline]
    pub fn adjoint(self) -> Self {
        let sign = if (self.x & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        Self {
            coef: self.coef.conj() * sign,
            ..self
        }
    }

    /// `CX · self · CX` for control `c`, target `t`.
    #[inline]
    pub fn conj_cx(self, c: usize, t: usize) -> Self {
        let xc = (self.x >> c) & 1;
        let zt = (self.z >> t) & 1;
        Self {
            coef: self.coef,
            x: self.x ^ (xc << t),
            z: self.z ^ (zt << c),
        }
    }
}

/// Writes a 2×2 operator on qubit `q` as `aI + bX + cZ + d·XZ`.
pub fn decompose(mat: &Mat2, q: usize) -> Vec<PauliString> {
    let a = (mat[0][0] + mat[1][1]) * 0.5;
    let c = (mat[0][0] - mat[1][1]) * 0.5;
    let b = (mat[0][1] + mat[1][0]) * 0.5;
    let d = (mat[1][0] - mat[0][1]) * 0.5;
    let bit = 1u64 << q;
    [(a, 0, 0), (b, bit, 0), (c, 0, bit), (d, bit, bit)]
        .into_iter()
        .filter(|(k, _, _)| k.norm() > 0.0)
        .map(|(coef, x, z)| PauliString { coef, x, z })
        .collect()
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut r = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

fn dagger(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn ry(t: f64) -> Mat2 {
    let (s, c) = Float::sin_cos(0.5 * t);
    [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
}

fn rz(t: f64) -> Mat2 {
    let (s, c) = Float::sin_cos(0.5 * t);
    [[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]]
}

/// `−(i/2)·Y` and `−(i/2)·Z`.
fn gen_y() -> Mat2 {
    [[ZERO, Complex64::new(-0.5, 0.0)], [Complex64::new(0.5, 0.0), ZERO]]
}

fn gen_z() -> Mat2 {
    [[Complex64::new(0.0, -0.5), ZERO], [ZERO, Complex64::new(0.0, 0.5)]]
}

fn pauli_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

/// Per-qubit expectations `[1, ⟨X⟩, ⟨Z⟩, ⟨XZ⟩]` of a product state.
struct ProductTable {
    table: Vec<[Complex64; 4]>,
}

impl ProductTable {
    fn new(states: &[[Complex64; 2]]) -> Self {
        let table = states
            .iter()
            .map(|w| {
                let (w0, w1) = (w[0], w[1]);
                let x = w0.conj() * w1 + w1.conj() * w0;
                let z = Complex64::new(w0.norm_sqr() - w1.norm_sqr(), 0.0);
                let xz = w1.conj() * w0 - w0.conj() * w1;
                [ONE, x, z, xz]
            })
            .collect();
        Self { table }
    }

    #[inline]
    fn expect(&self, s: &PauliString) -> Complex64 {
        let mut v = s.coef;
        let mut support = s.x | s.z;
        while support != 0 {
            let q = support.trailing_zeros() as usize;
            support &= support - 1;
            let idx = (((s.x >> q) & 1) | (((s.z >> q) & 1) << 1)) as usize;
            v *= self.table[q][idx];
            if v == ZERO {
                break;
            }
        }
        v
    }

    fn expect_sum(&self, terms: &[PauliString]) -> Complex64 {
        terms.iter().map(|t| self.expect(t)).sum()
    }

    /// `⟨w| A† B |w⟩` for Pauli sums `A`, `B`.
    fn overlap(&self, a: &[PauliString], b: &[PauliString]) -> Complex64 {
        let mut acc = ZERO;
        for ta in a {
            let ad = ta.adjoint();
            for tb in b {
                acc += self.expect(&ad.product(*tb));
            }
        }
        acc
    }
}

fn conj_chain(s: PauliString, m: usize) -> PauliString {
    (0..m.saturating_sub(1)).rev().fold(s, |acc, k| acc.conj_cx(k, k + 1))
}

fn merge(terms: impl IntoIterator<Item = PauliString>) -> Vec<PauliString> {
    let mut acc: BTreeMap<(u64, u64), Complex64> = BTreeMap::new();
    for t in terms {
        *acc.entry((t.x, t.z)).or_insert(ZERO) += t.coef;
    }
    acc.into_iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|((x, z), coef)| PauliString { coef, x, z })
        .collect()
}

/// Quantities of the McLachlan system for the fast path.
pub(crate) struct PauliSystem {
    pub overlaps: Vec<Vec<Complex64>>,
    pub with_state: Vec<Complex64>,
    pub with_h: Vec<Complex64>,
    pub energy: f64,
}

pub(crate) fn supports(a: &AnsatzCircuit) -> bool {
    matches!(a.layout(), Layout::EfficientSu2 { reps: 0 | 1 }) && a.m() <= 63
}

struct Prepared {
    table: ProductTable,
    h_tilde: Vec<PauliString>,
    derivs: Vec<Vec<PauliString>>,
}

fn prepare(a: &AnsatzCircuit, h: &IsingHamiltonian, with_derivs: bool) -> Result<Prepared> {
    if !supports(a) || h.m() != a.m() {
        return Err(Error::Parameter("fast McLachlan path needs a reps ≤ 1 rotation/CX ansatz".into()));
    }
    let m = a.m();
    let reps = match a.layout() {
        Layout::EfficientSu2 { reps } => reps,
        Layout::Custom => unreachable!(),
    };
    let th = &a.theta;
    let first: Vec<Mat2> = (0..m).map(|q| mat_mul(&rz(th[m + q]), &ry(th[q]))).collect();
    let states: Vec<[Complex64; 2]> = first.iter().map(|w| [w[0][0], w[1][0]]).collect();
    let table = ProductTable::new(&states);

    // pull the Hamiltonian back through the last layer and the chain
    let pull: Vec<Vec<PauliString>> = (0..m)
        .map(|q| {
            if reps == 1 {
                let v = mat_mul(&rz(th[3 * m + q]), &ry(th[2 * m + q]));
                decompose(&mat_mul(&dagger(&v), &mat_mul(&pauli_z(), &v)), q)
            } else {
                decompose(&pauli_z(), q)
            }
        })
        .collect();
    let mut terms = vec![PauliString::identity(Complex64::new(h.constant_shift(), 0.0))];
    for q in 0..m {
        let hq = Complex64::new(h.h()[q], 0.0);
        if hq != ZERO {
            terms.extend(pull[q].iter().map(|t| PauliString { coef: t.coef * hq, ..*t }));
        }
        for k in q + 1..m {
            let jqk = Complex64::new(h.j(q, k), 0.0);
            if jqk == ZERO {
                continue;
            }
            for tq in &pull[q] {
                for tk in &pull[k] {
                    let prod = tq.product(*tk);
                    terms.push(PauliString { coef: prod.coef * jqk, ..prod });
                }
            }
        }
    }
    let h_tilde = if reps == 1 {
        merge(terms.into_iter().map(|t| conj_chain(t, m)))
    } else {
        merge(terms)
    };

    let mut derivs = Vec::new();
    if with_derivs {
        for layer in 0..=reps {
            for kind in 0..2 {
                for q in 0..m {
                    let ops = if layer == 0 {
                        // ∂W_q · W_q†, acting on |w⟩
                        let d = if kind == 0 {
                            mat_mul(&rz(th[m + q]), &mat_mul(&gen_y(), &ry(th[q])))
                        } else {
                            mat_mul(&gen_z(), &first[q])
                        };
                        decompose(&mat_mul(&d, &dagger(&first[q])), q)
                    } else {
                        // V_q† ∂V_q, moved through the chain
                        let (ty, tz) = (th[2 * m + q], th[3 * m + q]);
                        let v = mat_mul(&rz(tz), &ry(ty));
                        let d = if kind == 0 {
                            mat_mul(&rz(tz), &mat_mul(&gen_y(), &ry(ty)))
                        } else {
                            mat_mul(&gen_z(), &v)
                        };
                        decompose(&mat_mul(&dagger(&v), &d), q)
                            .into_iter()
                            .map(|t| conj_chain(t, m))
                            .collect()
                    };
                    derivs.push(ops);
                }
            }
        }
    }
    Ok(Prepared { table, h_tilde, derivs })
}

/// `⟨ψ|H|ψ⟩` by the fast path.
pub(crate) fn energy(a: &AnsatzCircuit, h: &IsingHamiltonian) -> Result<f64> {
    let prep = prepare(a, h, false)?;
    Ok(prep.table.expect_sum(&prep.h_tilde).re)
}

pub(crate) fn system(a: &AnsatzCircuit, h: &IsingHamiltonian) -> Result<PauliSystem> {
    let Prepared { table, h_tilde, derivs } = prepare(a, h, true)?;
    let np = derivs.len();
    let energy = table.expect_sum(&h_tilde).re;
    let with_state = derivs.iter().map(|s| table.expect_sum(s).conj()).collect();
    let with_h = derivs.iter().map(|s| table.overlap(s, &h_tilde)).collect();
    let mut overlaps = vec![vec![ZERO; np]; np];
    for p in 0..np {
        for q in p..np {
            let v = table.overlap(&derivs[p], &derivs[q]);
            overlaps[p][q] = v;
            overlaps[q][p] = v.conj();
        }
    }
    Ok(PauliSystem {
        overlaps,
        with_state,
        with_h,
        energy,
    })
}
