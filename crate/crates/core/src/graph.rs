//! Candidate edges, topologies and Laplacians.
//!
//! Nodes are 1-based at the public boundary ([`EdgeSpace::edge_index`],
//! [`EdgeSpace::edge_pair`]) and 0-based everywhere else. Candidate edges are
//! the pairs `i < j` in lexicographic order; edge `e = (i, j)` owns the two
//! directed arcs `2e = i → j` and `2e + 1 = j → i`.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::linalg::symmetric_eigenvalues;
use crate::{Error, Result};

/// Largest supported agent count.
pub const MAX_AGENTS: usize = 32;

/// Canonical indexing of the complete candidate edge set on `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSpace {
    n: usize,
    pairs: Vec<(usize, usize)>,
    lookup: Vec<usize>,
}

impl EdgeSpace {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=MAX_AGENTS).contains(&n) {
            return Err(Error::Parameter(alloc::format!(
                "agent count must be in 2..={MAX_AGENTS}, got {n}"
            )));
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        let mut lookup = vec![usize::MAX; n * n];
        for i in 0..n {
            for j in i + 1..n {
                lookup[i * n + j] = pairs.len();
                lookup[j * n + i] = pairs.len();
                pairs.push((i, j));
            }
        }
        Ok(Self { n, pairs, lookup })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of candidate edges, `n(n-1)/2`.
    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn arc_count(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Index of the 1-based pair `(i, j)`, `i < j`.
    pub fn edge_index(&self, i: usize, j: usize) -> Result<usize> {
        if i == 0 || j == 0 || i >= j || j > self.n {
            return Err(Error::InvalidNodePair { i, j, n: self.n });
        }
        Ok(self.lookup[(i - 1) * self.n + (j - 1)])
    }

    /// 1-based endpoints of edge `e`.
    pub fn edge_pair(&self, e: usize) -> Result<(usize, usize)> {
        self.pairs
            .get(e)
            .map(|&(i, j)| (i + 1, j + 1))
            .ok_or(Error::Dimension {
                what: "edge index",
                expected: self.m(),
                got: e,
            })
    }

    /// 0-based endpoints of edge `e` (`i < j`).
    #[inline]
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.pairs[e]
    }

    /// 0-based edge lookup for `i != j` in any order.
    #[inline]
    pub fn index0(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        self.lookup[i * self.n + j]
    }

    /// 0-based `(from, to)` of arc `a`.
    #[inline]
    pub fn arc(&self, a: usize) -> (usize, usize) {
        let (i, j) = self.pairs[a / 2];
        if a.is_multiple_of(2) {
            (i, j)
        } else {
            (j, i)
        }
    }

    #[inline]
    pub fn arc_edge(a: usize) -> usize {
        a / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.pairs.iter().enumerate().map(|(e, &(i, j))| (e, i, j))
    }
}

/// A 0/1 edge selection under a fixed [`EdgeSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TopologyVector {
    bits: Vec<u8>,
}

impl TopologyVector {
    pub fn empty(m: usize) -> Self {
        Self { bits: vec![0; m] }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parameter(alloc::format!("topology entry {b} is not binary")));
        }
        Ok(Self { bits })
    }

    /// Parses the canonical bitstring: character 0 is edge 0.
    pub fn from_bitstring(s: &str, space: &EdgeSpace) -> Result<Self> {
        if s.len() != space.m() {
            return Err(Error::Dimension {
                what: "topology bitstring",
                expected: space.m(),
                got: s.len(),
            });
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parameter(alloc::format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits })
    }

    /// Builds from the low `m` bits of a mask (bit `e` = edge `e`).
    pub fn from_mask(mask: u64, m: usize) -> Self {
        Self {
            bits: (0..m).map(|e| ((mask >> e) & 1) as u8).collect(),
        }
    }

    pub fn to_mask(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (e, &b)| acc | ((b as u64) << e))
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_active(&self, e: usize) -> bool {
        self.bits[e] == 1
    }

    pub fn set(&mut self, e: usize, active: bool) {
        self.bits[e] = active as u8;
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }

    fn check(&self, space: &EdgeSpace) -> Result<()> {
        if self.bits.len() != space.m() {
            return Err(Error::Dimension {
                what: "topology",
                expected: space.m(),
                got: self.bits.len(),
            });
        }
        Ok(())
    }
}

/// Graph Laplacian `L = D − A` of an unweighted undirected topology.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    n: usize,
    entries: Vec<i64>,
    neighbors: Vec<Vec<usize>>,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Integer entry `L[i][j]` (0-based).
    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entries[i * self.n + j] as f64)
    }

    /// Exact integer row sums (all zero for a valid Laplacian).
    pub fn row_sums(&self) -> Vec<i64> {
        (0..self.n)
            .map(|i| self.entries[i * self.n..(i + 1) * self.n].iter().sum())
            .collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `out = L x`, accumulated as `Σ_j a_ij (x_i − x_j)` so that each edge
    /// contributes an antisymmetric pair.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let xi = x[i];
            *o = self.neighbors[i].iter().map(|&j| xi - x[j]).sum();
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            entries: vec![0; n * n],
            neighbors: vec![Vec::new(); n],
        }
    }
}

pub fn build_laplacian(t: &TopologyVector, space: &EdgeSpace) -> Result<LaplacianMatrix> {
    t.check(space)?;
    let n = space.n();
    let mut l = LaplacianMatrix::zero(n);
    for (e, i, j) in space.edges() {
        if t.is_active(e) {
            l.entries[i * n + j] -= 1;
            l.entries[j * n + i] -= 1;
            l.entries[i * n + i] += 1;
            l.entries[j * n + j] += 1;
            l.neighbors[i].push(j);
            l.neighbors[j].push(i);
        }
    }
    Ok(l)
}

pub fn degrees(t: &TopologyVector, space: &EdgeSpace) -> Result<Vec<usize>> {
    t.check(space)?;
    let mut deg = vec![0; space.n()];
    for (e, i, j) in space.edges() {
        if t.is_active(e) {
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    Ok(deg)
}

/// Connected components as a label per node (labels are 0-based and ordered
/// by smallest member).
pub fn components(t: &TopologyVector, space: &EdgeSpace) -> Result<Vec<usize>> {
    t.check(space)?;
    let n = space.n();
    let mut adj = vec![Vec::new(); n];
    for (e, i, j) in space.edges() {
        if t.is_active(e) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    Ok(label)
}

/// Breadth-first reachability from node 1.
pub fn is_connected(t: &TopologyVector, space: &EdgeSpace) -> Result<bool> {
    Ok(components(t, space)?.iter().all(|&c| c == 0))
}

/// Second-smallest Laplacian eigenvalue.
pub fn algebraic_connectivity(l: &LaplacianMatrix) -> Result<f64> {
    let ev = symmetric_eigenvalues(&l.to_dense())?;
    Ok(ev.get(1).copied().unwrap_or(0.0).max(0.0))
}

/// Path `1 – 2 – … – n`.
pub fn path_topology(n: usize) -> Result<TopologyVector> {
    let space = EdgeSpace::new(n)?;
    let mut t = TopologyVector::empty(space.m());
    for i in 0..n - 1 {
        t.set(space.index0(i, i + 1), true);
    }
    Ok(t)
}

/// Flows along the path rooted at node 1: arc `i → i+1` carries `n − i`
/// (1-based `i`), every other arc carries zero.
pub fn path_flows(n: usize, space: &EdgeSpace) -> Result<Vec<f64>> {
    if n != space.n() {
        return Err(Error::Dimension {
            what: "path flows",
            expected: space.n(),
            got: n,
        });
    }
    let mut f = vec![0.0; space.arc_count()];
    for i in 0..n - 1 {
        // forward arc of edge (i, i+1) has even index
        f[2 * space.index0(i, i + 1)] = (n - 1 - i) as f64;
    }
    Ok(f)
}

/// Sort key making the canonical bitstring order numeric: edge (bit) 0 becomes
/// the most significant bit, so smaller keys are lexicographically smaller
/// bitstrings.
#[inline]
pub fn lexicographic_key(mask: u64, m: usize) -> u64 {
    if m == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - m)
    }
}
