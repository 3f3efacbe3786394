//! The per-snapshot topology MIQP: weights, cost, constraints, and an
//! exhaustive enumeration baseline.
//!
//! Flow variables live on arcs (see [`EdgeSpace`]); the flow root is node 1
//! (index 0 internally) and every arc has capacity `(n − 1) z_e`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use crate::graph::{is_connected, lexicographic_key, EdgeSpace, TopologyVector};
use crate::{Error, Result};

/// Largest edge count accepted by [`enumerate_optimum`].
pub const ENUMERATION_MAX_EDGES: usize = 24;

/// Absolute slack used when deciding whether a constraint is violated.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MiqpInstance {
    pub space: EdgeSpace,
    pub w: Vec<f64>,
    pub kappa: Vec<f64>,
    pub gamma: usize,
}

impl MiqpInstance {
    pub fn new(space: EdgeSpace, w: Vec<f64>, kappa: Vec<f64>, gamma: usize) -> Result<Self> {
        let (n, m) = (space.n(), space.m());
        if w.len() != m {
            return Err(Error::Dimension {
                what: "edge weights",
                expected: m,
                got: w.len(),
            });
        }
        if kappa.len() != n {
            return Err(Error::Dimension {
                what: "kappa",
                expected: n,
                got: kappa.len(),
            });
        }
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Parameter("edge weights must be finite and nonnegative".into()));
        }
        if kappa.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Parameter("kappa must be finite and nonnegative".into()));
        }
        let min_gamma = if n >= 3 { 2 } else { 1 };
        if gamma < min_gamma || gamma > n - 1 {
            return Err(Error::Parameter(alloc::format!(
                "gamma must lie in {min_gamma}..={} for n = {n}, got {gamma}",
                n - 1
            )));
        }
        Ok(Self {
            space,
            w,
            kappa,
            gamma,
        })
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn m(&self) -> usize {
        self.space.m()
    }

    /// Flow root, 0-based.
    pub fn root(&self) -> usize {
        0
    }

    /// Arc capacity multiplier `n − 1`.
    pub fn big_m(&self) -> f64 {
        (self.n() - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiqpSolution {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub objective: f64,
}

/// `w_e = c_e + |x_i − x_j|` for scalar agent positions.
pub fn edge_weights(positions: &[f64], c_comm: &[f64], space: &EdgeSpace) -> Result<Vec<f64>> {
    let points: Vec<[f64; 1]> = positions.iter().map(|&p| [p]).collect();
    edge_weights_nd(&points, c_comm, space)
}

/// `w_e = c_e + ‖x_i − x_j‖₂` for points of any dimension.
pub fn edge_weights_nd<P: AsRef<[f64]>>(
    points: &[P],
    c_comm: &[f64],
    space: &EdgeSpace,
) -> Result<Vec<f64>> {
    if points.len() != space.n() {
        return Err(Error::Dimension {
            what: "positions",
            expected: space.n(),
            got: points.len(),
        });
    }
    if c_comm.len() != space.m() {
        return Err(Error::Dimension {
            what: "communication costs",
            expected: space.m(),
            got: c_comm.len(),
        });
    }
    if let Some(c) = c_comm.iter().find(|c| !(**c >= 0.0)) {
        return Err(Error::Parameter(alloc::format!("negative communication cost {c}")));
    }
    Ok(space
        .edges()
        .map(|(e, i, j)| {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            c_comm[e] + num_traits::Float::sqrt(d2)
        })
        .collect())
}

/// Node degrees of a (possibly fractional) edge vector.
pub fn relaxed_degrees(z: &[f64], space: &EdgeSpace) -> Vec<f64> {
    let mut deg = vec![0.0; space.n()];
    for (e, i, j) in space.edges() {
        deg[i] += z[e];
        deg[j] += z[e];
    }
    deg
}

/// `Σ w_e z_e + Σ_i κ_i deg_i(z)²`.
pub fn miqp_objective(z: &[f64], inst: &MiqpInstance) -> f64 {
    let lin: f64 = inst.w.iter().zip(z).map(|(w, z)| w * z).sum();
    let quad: f64 = relaxed_degrees(z, &inst.space)
        .iter()
        .zip(&inst.kappa)
        .map(|(d, k)| k * d * d)
        .sum();
    lin + quad
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Edge variable outside `[0, 1]` (or non-binary when binary is required).
    EdgeBounds(usize),
    /// Degree above γ at a node (0-based).
    Degree(usize),
    /// Negative arc flow.
    FlowSign(usize),
    /// Arc flow above `(n − 1) z_e`.
    Capacity(usize),
    /// Non-root node inflow − outflow ≠ 1.
    Balance(usize),
    /// Root outflow − inflow ≠ n − 1.
    RootBalance(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    pub magnitude: f64,
}

/// Net inflow (inflow − outflow) per node.
pub fn net_inflow(f: &[f64], space: &EdgeSpace) -> Vec<f64> {
    let mut net = vec![0.0; space.n()];
    for (a, &fa) in f.iter().enumerate() {
        let (u, v) = space.arc(a);
        net[u] -= fa;
        net[v] += fa;
    }
    net
}

/// Checks the relaxed constraint set (box, degree, flow sign, capacity,
/// balances); entries violated by more than `tol` are reported.
pub fn check_relaxed(z: &[f64], f: &[f64], inst: &MiqpInstance, tol: f64) -> Result<Vec<Violation>> {
    let space = &inst.space;
    if z.len() != space.m() {
        return Err(Error::Dimension {
            what: "edge vector",
            expected: space.m(),
            got: z.len(),
        });
    }
    if f.len() != space.arc_count() {
        return Err(Error::Dimension {
            what: "flow vector",
            expected: space.arc_count(),
            got: f.len(),
        });
    }
    let mut out = Vec::new();
    let mut push = |constraint, magnitude: f64| {
        if magnitude > tol {
            out.push(Violation {
                constraint,
                magnitude,
            });
        }
    };
    for (e, &ze) in z.iter().enumerate() {
        push(ConstraintKind::EdgeBounds(e), (-ze).max(ze - 1.0));
    }
    for (i, d) in relaxed_degrees(z, space).iter().enumerate() {
        push(ConstraintKind::Degree(i), d - inst.gamma as f64);
    }
    let big_m = inst.big_m();
    for (a, &fa) in f.iter().enumerate() {
        push(ConstraintKind::FlowSign(a), -fa);
        push(ConstraintKind::Capacity(a), fa - big_m * z[a / 2]);
    }
    for (i, net) in net_inflow(f, space).iter().enumerate() {
        if i == inst.root() {
            push(ConstraintKind::RootBalance(i), (-net - big_m).abs());
        } else {
            push(ConstraintKind::Balance(i), (net - 1.0).abs());
        }
    }
    Ok(out)
}

/// Violation report for a binary topology with flows; empty means feasible.
pub fn check_feasible(t: &TopologyVector, f: &[f64], inst: &MiqpInstance) -> Result<Vec<Violation>> {
    check_relaxed(&t.as_f64(), f, inst, FEASIBILITY_TOL)
}

/// Routes one unit to every non-root node along a BFS tree from node 1.
pub fn flows_from_spanning_tree(t: &TopologyVector, inst: &MiqpInstance) -> Result<Vec<f64>> {
    let space = &inst.space;
    if !is_connected(t, space)? {
        return Err(Error::Disconnected);
    }
    let n = space.n();
    let mut adj = vec![Vec::new(); n];
    for (e, i, j) in space.edges() {
        if t.is_active(e) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let root = inst.root();
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    parent[root] = root;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut subtree = vec![1usize; n];
    let mut f = vec![0.0; space.arc_count()];
    for &v in order.iter().rev() {
        if v == root {
            continue;
        }
        let p = parent[v];
        subtree[p] += subtree[v];
        let e = space.index0(p, v);
        let arc = if space.endpoints(e).0 == p { 2 * e } else { 2 * e + 1 };
        f[arc] = subtree[v] as f64;
    }
    Ok(f)
}

/// Cheapest nearest-neighbour Hamiltonian path: from every start node, walk to
/// the cheapest unvisited node; keep the walk with the smallest total weight
/// (earliest start on ties). Like the index path it is connected with degree
/// at most two.
pub fn greedy_path(inst: &MiqpInstance) -> TopologyVector {
    let space = &inst.space;
    let n = space.n();
    let mut best: Option<(f64, TopologyVector)> = None;
    for start in 0..n {
        let mut t = TopologyVector::empty(space.m());
        let mut seen = vec![false; n];
        seen[start] = true;
        let (mut cur, mut cost) = (start, 0.0);
        for _ in 1..n {
            let next = (0..n)
                .filter(|&j| !seen[j])
                .min_by(|&a, &b| inst.w[space.index0(cur, a)].total_cmp(&inst.w[space.index0(cur, b)]))
                .expect("an unvisited node remains");
            let e = space.index0(cur, next);
            t.set(e, true);
            cost += inst.w[e];
            seen[next] = true;
            cur = next;
        }
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, t));
        }
    }
    best.expect("n ≥ 2").1
}

/// Best topology found in a mask range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationBest {
    pub objective: f64,
    pub mask: u64,
}

fn tie_eps(a: f64, b: f64) -> f64 {
    1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Compares by objective (ties within a relative 1e-12) then bitstring.
pub fn compare_candidates(a: &EnumerationBest, b: &EnumerationBest, m: usize) -> Ordering {
    if (a.objective - b.objective).abs() <= tie_eps(a.objective, b.objective) {
        lexicographic_key(a.mask, m).cmp(&lexicographic_key(b.mask, m))
    } else {
        a.objective.total_cmp(&b.objective)
    }
}

/// Deterministic merge of per-range results.
pub fn merge_best(
    parts: impl IntoIterator<Item = Option<EnumerationBest>>,
    m: usize,
) -> Option<EnumerationBest> {
    parts.into_iter().flatten().fold(None, |acc, c| match acc {
        Some(b) if compare_candidates(&b, &c, m) != Ordering::Greater => Some(b),
        _ => Some(c),
    })
}

/// Scans masks `lo..hi` for the best feasible topology.
pub fn enumerate_range(inst: &MiqpInstance, lo: u64, hi: u64) -> Option<EnumerationBest> {
    let space = &inst.space;
    let (n, m) = (space.n(), space.m());
    let mut incident = vec![0u64; n];
    let mut edge_nodes = Vec::with_capacity(m);
    for (e, i, j) in space.edges() {
        incident[i] |= 1 << e;
        incident[j] |= 1 << e;
        edge_nodes.push((i, j));
    }
    let gamma = inst.gamma as u32;
    let mut best: Option<EnumerationBest> = None;
    let mut adj = vec![0u32; n];
    for mask in lo..hi {
        if (mask.count_ones() as usize) < n - 1 {
            continue;
        }
        if incident.iter().any(|&inc| (mask & inc).count_ones() > gamma) {
            continue;
        }
        adj.iter_mut().for_each(|a| *a = 0);
        let mut bits = mask;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (i, j) = edge_nodes[e];
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let u = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = adj[u] & !seen;
            seen |= fresh;
            frontier |= fresh;
        }
        if seen != all {
            continue;
        }
        let mut objective = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            objective += inst.w[e];
        }
        for (i, &inc) in incident.iter().enumerate() {
            let d = (mask & inc).count_ones() as f64;
            objective += inst.kappa[i] * d * d;
        }
        let cand = EnumerationBest { objective, mask };
        best = merge_best([best, Some(cand)], m);
    }
    best
}

/// Exact MIQP optimum by exhaustive search over all `2^m` topologies.
pub fn enumerate_optimum(inst: &MiqpInstance) -> Result<MiqpSolution> {
    let m = inst.m();
    if m > ENUMERATION_MAX_EDGES {
        return Err(Error::Capacity {
            what: "edge count",
            size: m,
            limit: ENUMERATION_MAX_EDGES,
        });
    }
    let total = 1u64 << m;
    let chunks = 16u64.min(total);
    let step = total.div_ceil(chunks);
    let parts = (0..chunks).map(|c| enumerate_range(inst, c * step, ((c + 1) * step).min(total)));
    let best = merge_best(parts, m)
        .ok_or_else(|| Error::Infeasible("no connected topology respects the degree bound".into()))?;
    let t = TopologyVector::from_mask(best.mask, m);
    let f = flows_from_spanning_tree(&t, inst)?;
    Ok(MiqpSolution {
        z: t.as_f64(),
        f,
        objective: miqp_objective(&t.as_f64(), inst),
    })
}
