//! Binary-block QUBO assembly, the spin mapping `r = (1 − Z)/2`, and an
//! exhaustive minimiser.
//!
//! A [`QuboProblem`] stores `Φ(r) = rᵀQr + qᵀr + offset` with `Q` symmetric
//! and zero on the diagonal (`r² = r` is folded into `q`).

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::graph::lexicographic_key;
use crate::{Error, Result};

/// Largest variable count accepted by [`brute_force_min`].
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboProblem {
    m: usize,
    q_matrix: Vec<f64>,
    q_linear: Vec<f64>,
    offset: f64,
}

impl QuboProblem {
    /// Builds from a dense `m × m` matrix (row-major); diagonal entries are
    /// moved into the linear term and the off-diagonal part is symmetrised.
    pub fn new(q_matrix: Vec<f64>, q_linear: Vec<f64>, offset: f64) -> Result<Self> {
        let m = q_linear.len();
        if q_matrix.len() != m * m {
            return Err(Error::Dimension {
                what: "qubo matrix",
                expected: m * m,
                got: q_matrix.len(),
            });
        }
        let mut p = Self::zero(m);
        p.q_linear = q_linear;
        p.offset = offset;
        for i in 0..m {
            p.q_linear[i] += q_matrix[i * m + i];
            for j in 0..i {
                let v = 0.5 * (q_matrix[i * m + j] + q_matrix[j * m + i]);
                p.q_matrix[i * m + j] = v;
                p.q_matrix[j * m + i] = v;
            }
        }
        if p.q_matrix.iter().chain(&p.q_linear).any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::Parameter("qubo coefficients must be finite".into()));
        }
        Ok(p)
    }

    /// Builds from sparse terms: each `(i, j, v)` adds `v·r_i·r_j` to Φ.
    pub fn from_terms(m: usize, linear: Vec<f64>, couplings: &[(usize, usize, f64)], offset: f64) -> Result<Self> {
        if linear.len() != m {
            return Err(Error::Dimension {
                what: "qubo linear term",
                expected: m,
                got: linear.len(),
            });
        }
        let mut q = vec![0.0; m * m];
        for &(i, j, v) in couplings {
            if i >= m || j >= m {
                return Err(Error::Parameter(alloc::format!("coupling ({i}, {j}) out of range for m = {m}")));
            }
            if i == j {
                q[i * m + i] += v;
            } else {
                q[i * m + j] += 0.5 * v;
                q[j * m + i] += 0.5 * v;
            }
        }
        Self::new(q, linear, offset)
    }

    pub fn zero(m: usize) -> Self {
        Self {
            m,
            q_matrix: vec![0.0; m * m],
            q_linear: vec![0.0; m],
            offset: 0.0,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q_matrix[i * self.m + j]
    }

    pub fn q_matrix(&self) -> &[f64] {
        &self.q_matrix
    }

    pub fn linear(&self) -> &[f64] {
        &self.q_linear
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    /// Cost of the assignment encoded in the low `m` bits of `mask`.
    pub fn eval_mask(&self, mask: u64) -> f64 {
        let m = self.m;
        let mut total = self.offset;
        for i in 0..m {
            if (mask >> i) & 1 == 0 {
                continue;
            }
            total += self.q_linear[i];
            for j in i + 1..m {
                if (mask >> j) & 1 == 1 {
                    total += 2.0 * self.q_matrix[i * m + j];
                }
            }
        }
        total
    }
}

/// Spin Hamiltonian `Σ h_i Z_i + Σ_{i<j} J_ij Z_i Z_j + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingHamiltonian {
    m: usize,
    h: Vec<f64>,
    j_couplings: Vec<f64>,
    constant: f64,
}

impl IsingHamiltonian {
    pub fn new(h: Vec<f64>, j_upper: Vec<f64>, constant: f64) -> Result<Self> {
        let m = h.len();
        if j_upper.len() != m * m {
            return Err(Error::Dimension {
                what: "ising couplings",
                expected: m * m,
                got: j_upper.len(),
            });
        }
        let mut j_couplings = vec![0.0; m * m];
        for i in 0..m {
            for k in i + 1..m {
                j_couplings[i * m + k] = j_upper[i * m + k];
            }
        }
        Ok(Self {
            m,
            h,
            j_couplings,
            constant,
        })
    }

    /// Constant Hamiltonian on `m` qubits.
    pub fn constant(m: usize, c: f64) -> Self {
        Self {
            m,
            h: vec![0.0; m],
            j_couplings: vec![0.0; m * m],
            constant: c,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `J_ij` for `i < j`.
    pub fn j(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.j_couplings[a * self.m + b]
    }

    pub fn constant_shift(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.h.iter().chain(&self.j_couplings).all(|&v| v == 0.0)
    }

    /// Energy of basis state `b` (bit `i` set ⇔ `Z_i = −1`).
    pub fn energy_mask(&self, b: u64) -> f64 {
        let m = self.m;
        let z = |i: usize| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let mut e = self.constant;
        for i in 0..m {
            e += self.h[i] * z(i);
            for k in i + 1..m {
                e += self.j_couplings[i * m + k] * z(i) * z(k);
            }
        }
        e
    }
}

/// `Φ(r) = λᵀ(z − r + s) + (ρ/2)‖z − r + s‖² + μ(Σr)²` evaluated directly.
pub fn block2_cost(r: &[u8], z: &[f64], s: &[f64], lambda: &[f64], rho: f64, mu: f64) -> f64 {
    let mut lin = 0.0;
    let mut sq = 0.0;
    for e in 0..r.len() {
        let d = z[e] - r[e] as f64 + s[e];
        lin += lambda[e] * d;
        sq += d * d;
    }
    let card: f64 = r.iter().map(|&b| b as f64).sum();
    lin + 0.5 * rho * sq + mu * card * card
}

pub fn assemble_block2_qubo(z: &[f64], s: &[f64], lambda: &[f64], rho: f64, mu: f64) -> Result<QuboProblem> {
    let m = z.len();
    for (what, len) in [("s", s.len()), ("lambda", lambda.len())] {
        if len != m {
            return Err(Error::Dimension {
                what,
                expected: m,
                got: len,
            });
        }
    }
    if !(rho > 0.0) || !(mu >= 0.0) {
        return Err(Error::Parameter(alloc::format!("need rho > 0 and mu >= 0, got {rho}, {mu}")));
    }
    let mut p = QuboProblem::zero(m);
    for e in 0..m {
        let c = z[e] + s[e];
        // λ(c − r) + ρ/2 (c − r)² with r² = r, plus the diagonal of μ(Σr)²
        p.q_linear[e] = -lambda[e] + 0.5 * rho - rho * c + mu;
        p.offset += lambda[e] * c + 0.5 * rho * c * c;
        for k in 0..m {
            if k != e {
                p.q_matrix[e * m + k] = mu;
            }
        }
    }
    Ok(p)
}

pub fn qubo_eval(p: &QuboProblem, r: &[u8]) -> Result<f64> {
    if r.len() != p.m {
        return Err(Error::Dimension {
            what: "qubo assignment",
            expected: p.m,
            got: r.len(),
        });
    }
    Ok(p.eval_mask(bits_to_mask(r)))
}

pub fn qubo_to_ising(p: &QuboProblem) -> IsingHamiltonian {
    let m = p.m;
    let mut h: Vec<f64> = p.q_linear.iter().map(|l| -0.5 * l).collect();
    let mut j = vec![0.0; m * m];
    let mut constant = p.offset + 0.5 * p.q_linear.iter().sum::<f64>();
    for a in 0..m {
        for b in a + 1..m {
            let q = p.q_matrix[a * m + b];
            // 2 Q_ab r_a r_b = Q_ab (1 − Z_a − Z_b + Z_a Z_b) / 2
            j[a * m + b] = 0.5 * q;
            h[a] -= 0.5 * q;
            h[b] -= 0.5 * q;
            constant += 0.5 * q;
        }
    }
    IsingHamiltonian {
        m,
        h,
        j_couplings: j,
        constant,
    }
}

pub fn bits_to_mask(r: &[u8]) -> u64 {
    r.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (((b & 1) as u64) << i))
}

pub fn mask_to_bits(mask: u64, m: usize) -> Vec<u8> {
    (0..m).map(|i| ((mask >> i) & 1) as u8).collect()
}

/// Φ for every mask, built in `O(2^m)` by adding one variable at a time.
pub fn qubo_values(p: &QuboProblem) -> Vec<f64> {
    let m = p.m;
    let mut values = vec![0.0; 1 << m];
    values[0] = p.offset;
    let mut partial = vec![0.0; 1 << m];
    for k in 0..m {
        let half = 1usize << k;
        // partial[b] = Σ_{j ∈ b} Q_jk for b < 2^k
        partial[0] = 0.0;
        for b in 1..half {
            let low = b.trailing_zeros() as usize;
            partial[b] = partial[b & (b - 1)] + p.q_matrix[low * m + k];
        }
        let lk = p.q_linear[k];
        for b in 0..half {
            values[half | b] = values[b] + lk + 2.0 * partial[b];
        }
    }
    values
}

/// Slack used to treat two costs as tied before the lexicographic rule.
pub fn tie_eps(reference: f64) -> f64 {
    1e-9 * reference.abs().max(1.0)
}

/// Picks the best of `masks` by exact re-evaluation, ties within
/// [`tie_eps`] going to the lexicographically smallest bitstring.
pub fn best_of(p: &QuboProblem, masks: impl IntoIterator<Item = u64>) -> Option<(u64, f64)> {
    let m = p.m;
    let scored: Vec<(u64, f64)> = masks.into_iter().map(|k| (k, p.eval_mask(k))).collect();
    let min = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    scored
        .into_iter()
        .filter(|s| s.1 <= min + tie_eps(min))
        .min_by_key(|s| lexicographic_key(s.0, m))
}

/// Global minimiser over `{0,1}^m`; ties go to the lexicographically smallest
/// bitstring (bit 0 first).
pub fn brute_force_min(p: &QuboProblem) -> Result<(Vec<u8>, f64)> {
    let (mask, phi) = brute_force_min_mask(p)?;
    Ok((mask_to_bits(mask, p.m), phi))
}

pub fn brute_force_min_mask(p: &QuboProblem) -> Result<(u64, f64)> {
    if p.m > BRUTE_FORCE_MAX_VARS {
        return Err(Error::Capacity {
            what: "qubo size",
            size: p.m,
            limit: BRUTE_FORCE_MAX_VARS,
        });
    }
    let values = qubo_values(p);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    // the table may carry rounding; re-score everything near the minimum
    let window = min + 4.0 * tie_eps(min);
    let near = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= window)
        .map(|(k, _)| k as u64);
    best_of(p, near).ok_or_else(|| Error::Numerical("no finite qubo value".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn example() -> QuboProblem {
        assemble_block2_qubo(&[1.0, 0.0], &[0.0; 2], &[0.0; 2], 2.0, 1.0).unwrap()
    }

    #[test]
    fn block2_table() {
        let p = example();
        let expect = [(0b00, 1.0), (0b01, 1.0), (0b10, 3.0), (0b11, 5.0)];
        for (mask, phi) in expect {
            let r = mask_to_bits(mask, 2);
            assert_relative_eq!(qubo_eval(&p, &r).unwrap(), phi, epsilon = 1e-12);
            assert_relative_eq!(block2_cost(&r, &[1.0, 0.0], &[0.0; 2], &[0.0; 2], 2.0, 1.0), phi, epsilon = 1e-12);
        }
        assert_eq!(p.q(0, 1), 1.0);
        assert_eq!(p.q(0, 0), 0.0);
        assert_eq!(qubo_eval(&p, &[0, 0]).unwrap(), p.offset());
    }

    #[test]
    fn separable_without_cardinality() {
        let p = assemble_block2_qubo(&[0.3, 0.9, 0.1], &[0.1, -0.2, 0.0], &[1.0, -2.0, 0.5], 4.0, 0.0).unwrap();
        assert!(p.q_matrix().iter().all(|&q| q == 0.0));
        let h = qubo_to_ising(&p);
        assert!((0..3).all(|i| (0..3).all(|j| h.j(i, j) == 0.0)));
        let (r, _) = brute_force_min(&p).unwrap();
        for e in 0..3 {
            assert_eq!(r[e] == 1, p.linear()[e] < 0.0);
        }
    }

    #[test]
    fn agreement_minimises_the_penalty() {
        let z = [1.0, 0.0, 1.0];
        let p = assemble_block2_qubo(&z, &[0.0; 3], &[0.0; 3], 3.0, 0.0).unwrap();
        for mask in 0..8 {
            let v = p.eval_mask(mask);
            if mask == 0b101 {
                assert_relative_eq!(v, 0.0, epsilon = 1e-15);
            } else {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn ising_examples() {
        let p = QuboProblem::new(vec![0.0], vec![2.0], 0.0).unwrap();
        let h = qubo_to_ising(&p);
        assert_eq!(h.h(), &[-1.0]);
        assert_eq!(h.constant_shift(), 1.0);
        assert_eq!(h.energy_mask(0), 0.0);
        assert_eq!(h.energy_mask(1), 2.0);

        let h2 = qubo_to_ising(&example());
        let e: Vec<f64> = (0..4).map(|b| h2.energy_mask(b)).collect();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-12);
        assert!(e[2] > 1.0 && e[3] > 1.0);

        let flat = qubo_to_ising(&QuboProblem::zero(3).with_offset(4.5));
        assert!(flat.is_constant());
        assert_eq!(flat.constant_shift(), 4.5);
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_min(&example()).unwrap(), (vec![0, 0], 1.0));
        let p = QuboProblem::new(vec![0.0], vec![2.0], 0.0).unwrap();
        assert_eq!(brute_force_min(&p).unwrap(), (vec![0], 0.0));
        let big = QuboProblem::zero(25);
        assert!(matches!(brute_force_min(&big), Err(Error::Capacity { .. })));
    }

    #[test]
    fn from_terms_folds_diagonal() {
        let p = QuboProblem::from_terms(2, vec![1.0, -1.0], &[(0, 1, 3.0), (1, 1, 2.0)], 0.5).unwrap();
        assert_eq!(p.linear(), &[1.0, 1.0]);
        assert_eq!(p.eval_mask(0b11), 0.5 + 1.0 + 1.0 + 3.0);
        assert!(QuboProblem::from_terms(2, vec![0.0; 2], &[(0, 2, 1.0)], 0.0).is_err());
    }

    fn block2_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> {
        (1usize..=12).prop_flat_map(|m| {
            (
                proptest::collection::vec(0.0f64..1.0, m),
                proptest::collection::vec(-0.5f64..0.5, m),
                proptest::collection::vec(-5.0f64..5.0, m),
                0.5f64..30.0,
                0.0f64..1.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn qubo_ising_and_raw_cost_agree((z, s, lam, rho, mu) in block2_inputs()) {
            let p = assemble_block2_qubo(&z, &s, &lam, rho, mu).unwrap();
            let h = qubo_to_ising(&p);
            let m = z.len();
            let table = qubo_values(&p);
            for mask in 0..(1u64 << m) {
                let r = mask_to_bits(mask, m);
                let raw = block2_cost(&r, &z, &s, &lam, rho, mu);
                let q = qubo_eval(&p, &r).unwrap();
                prop_assert!((q - raw).abs() <= 1e-12 * raw.abs().max(1.0));
                prop_assert!((h.energy_mask(mask) - q).abs() <= 1e-12 * q.abs().max(1.0));
                prop_assert!((table[mask as usize] - q).abs() <= 1e-12 * q.abs().max(1.0));
            }
            for i in 0..m {
                for j in 0..m {
                    prop_assert_eq!(p.q(i, j), if i == j { 0.0 } else { mu });
                }
            }
        }

        #[test]
        fn offset_shift_leaves_argmin((z, s, lam, rho, mu) in block2_inputs(), c in -50.0f64..50.0) {
            let p = assemble_block2_qubo(&z, &s, &lam, rho, mu).unwrap();
            let shifted = p.clone().with_offset(p.offset() + c);
            let (r1, v1) = brute_force_min(&p).unwrap();
            let (r2, v2) = brute_force_min(&shifted).unwrap();
            prop_assert_eq!(r1, r2);
            prop_assert!((v2 - v1 - c).abs() <= 1e-9 * v1.abs().max(1.0).max(c.abs()));
        }

        #[test]
        fn brute_force_matches_scan((z, s, lam, rho, mu) in block2_inputs()) {
            let p = assemble_block2_qubo(&z, &s, &lam, rho, mu).unwrap();
            let m = z.len();
            let (r, v) = brute_force_min(&p).unwrap();
            let best = (0..(1u64 << m)).map(|k| p.eval_mask(k)).fold(f64::INFINITY, f64::min);
            prop_assert!((v - best).abs() <= 1e-9 * best.abs().max(1.0));
            prop_assert_eq!(qubo_eval(&p, &r).unwrap(), v);
        }
    }
}
