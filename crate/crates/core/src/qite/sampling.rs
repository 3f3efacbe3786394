use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::statevector::Statevector;
use crate::graph::lexicographic_key;
use crate::qubo::{best_of, bits_to_mask, mask_to_bits, tie_eps, QuboProblem};
use crate::{Error, Result};

/// Outcome counts keyed by basis index (bit `q` = qubit `q`).
pub type Counts = BTreeMap<u64, u64>;

/// Multinomial sampling of `|a_b|²`, reproducible from `seed`.
pub fn sample_bitstrings(psi: &Statevector, shots: usize, seed: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(psi, shots, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(psi: &Statevector, shots: usize, rng: &mut R) -> Counts {
    let mut cdf = Vec::with_capacity(psi.amplitudes().len());
    let mut acc = 0.0;
    for a in psi.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let mut counts = Counts::new();
    for _ in 0..shots {
        let u = rng.gen::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(idx as u64).or_insert(0) += 1;
    }
    counts
}

/// The `top_k` most frequent outcomes (ties by lexicographic bitstring).
pub fn top_outcomes(counts: &Counts, top_k: usize, m: usize) -> Vec<u64> {
    let mut ranked: Vec<(u64, u64)> = counts.iter().map(|(&k, &c)| (k, c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(lexicographic_key(a.0, m).cmp(&lexicographic_key(b.0, m))));
    ranked.into_iter().take(top_k).map(|(k, _)| k).collect()
}

/// Cheapest of the `top_k` most frequent bitstrings, kept only if it beats
/// the incumbent's cost.
pub fn select_candidate(counts: &Counts, p: &QuboProblem, top_k: usize, incumbent: &[u8]) -> Result<Vec<u8>> {
    let m = p.m();
    if incumbent.len() != m {
        return Err(Error::Dimension {
            what: "incumbent",
            expected: m,
            got: incumbent.len(),
        });
    }
    let inc_cost = p.eval_mask(bits_to_mask(incumbent));
    match best_of(p, top_outcomes(counts, top_k, m)) {
        Some((mask, cost)) if cost < inc_cost - tie_eps(inc_cost) => Ok(mask_to_bits(mask, m)),
        _ => Ok(incumbent.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::assemble_block2_qubo;

    #[test]
    fn basis_state_takes_every_shot() {
        let psi = Statevector::basis(3, 5).unwrap();
        let c = sample_bitstrings(&psi, 100, 1);
        assert_eq!(c.len(), 1);
        assert_eq!(c[&5], 100);
    }

    #[test]
    fn uniform_qubit_is_balanced() {
        let psi = Statevector::uniform(1).unwrap();
        let c = sample_bitstrings(&psi, 100_000, 42);
        let sigma = (100_000.0f64 * 0.25).sqrt();
        for b in 0..2 {
            assert!((c[&b] as f64 - 50_000.0).abs() < 5.0 * sigma);
        }
        assert_eq!(c.values().sum::<u64>(), 100_000);
    }

    #[test]
    fn seeded_sampling_repeats() {
        let psi = Statevector::uniform(4).unwrap();
        assert_eq!(sample_bitstrings(&psi, 1000, 9), sample_bitstrings(&psi, 1000, 9));
    }

    #[test]
    fn selection_examples() {
        let p = assemble_block2_qubo(&[1.0, 0.0], &[0.0; 2], &[0.0; 2], 2.0, 1.0).unwrap();
        let all: Counts = [(0, 10), (1, 10), (2, 10), (3, 10)].into_iter().collect();
        assert_eq!(select_candidate(&all, &p, 8, &[1, 1]).unwrap(), alloc::vec![0, 0]);
        // everything sampled is worse than the incumbent
        let worse: Counts = [(2, 30), (3, 5)].into_iter().collect();
        assert_eq!(select_candidate(&worse, &p, 8, &[1, 0]).unwrap(), alloc::vec![1, 0]);
        // concentrated on the minimiser
        let conc: Counts = [(0, 100)].into_iter().collect();
        assert_eq!(select_candidate(&conc, &p, 1, &[1, 1]).unwrap(), alloc::vec![0, 0]);
        // top_k limits what is looked at
        let ranked: Counts = [(3, 50), (2, 40), (0, 1)].into_iter().collect();
        assert_eq!(select_candidate(&ranked, &p, 2, &[1, 1]).unwrap(), alloc::vec![0, 1]);
    }
}
