//! The relaxed edge/flow subproblem of each ADMM sweep.
//!
//! Decision vector `x = [z (m); f (2m)]`. The quadratic program is solved by an
//! operator-splitting scheme (OSQP-style ADMM on `l ≤ Ax ≤ u` with a dense
//! Cholesky of the reduced KKT matrix and adaptive step size), followed by an
//! active-set polish that solves the equality-constrained KKT system exactly.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::graph::{path_flows, path_topology};
use crate::linalg::{dot, nnls, norm2, norm_inf};
use crate::miqp::{check_relaxed, miqp_objective, MiqpInstance};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 20_000;
pub const DEFAULT_EPS_F: f64 = 1e-6;
/// Slack under which an inequality counts as active in [`kkt_residual`].
pub const ACTIVE_TOL: f64 = 1e-6;

const SIGMA: f64 = 1e-6;
const ALPHA: f64 = 1.6;
const EQ_RHO_SCALE: f64 = 1e3;
const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 50;
const POLISH_DELTA: f64 = 1e-9;
const POLISH_REFINE: usize = 30;

#[derive(Debug, Clone)]
pub struct Block1Problem<'a> {
    pub inst: &'a MiqpInstance,
    pub r_fixed: Vec<f64>,
    pub s_fixed: Vec<f64>,
    pub lambda_fixed: Vec<f64>,
    pub rho: f64,
    pub eps_f: f64,
}

impl Block1Problem<'_> {
    fn validate(&self) -> Result<()> {
        let m = self.inst.m();
        for (what, len) in [
            ("r", self.r_fixed.len()),
            ("s", self.s_fixed.len()),
            ("lambda", self.lambda_fixed.len()),
        ] {
            if len != m {
                return Err(Error::Dimension {
                    what,
                    expected: m,
                    got: len,
                });
            }
        }
        if !(self.rho > 0.0) || !(self.eps_f >= 0.0) {
            return Err(Error::Parameter(alloc::format!(
                "block-1 needs rho > 0 and eps_f >= 0, got {} and {}",
                self.rho,
                self.eps_f
            )));
        }
        Ok(())
    }

    /// `J(z) + λᵀ(z − r + s) + (ρ/2)‖z − r + s‖² + (ε/2)‖f‖²`.
    pub fn objective(&self, z: &[f64], f: &[f64]) -> f64 {
        let mut coupling = 0.0;
        for e in 0..z.len() {
            let d = z[e] - self.r_fixed[e] + self.s_fixed[e];
            coupling += self.lambda_fixed[e] * d + 0.5 * self.rho * d * d;
        }
        miqp_objective(z, self.inst) + coupling + 0.5 * self.eps_f * dot(f, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Splitting-method multipliers, reusable as a warm start.
    pub dual: Vec<f64>,
}

/// Starting point for [`solve_block1_warm`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub dual: Vec<f64>,
}

/// Dense `l ≤ Ax ≤ u` form of the Block-1 program.
struct QpData {
    m: usize,
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
}

impl QpData {
    fn build(prob: &Block1Problem) -> Self {
        let inst = prob.inst;
        let space = &inst.space;
        let (n, m) = (space.n(), space.m());
        let nv = 3 * m;
        let mut p = DMatrix::zeros(nv, nv);
        // 2 IᵀKI: edges e, g sharing node i couple through κ_i
        for (e, i, j) in space.edges() {
            for (g, a, b) in space.edges() {
                let mut k = 0.0;
                for node in [i, j] {
                    if node == a || node == b {
                        k += inst.kappa[node];
                    }
                }
                p[(e, g)] = 2.0 * k;
            }
            p[(e, e)] += prob.rho;
        }
        for a in 0..2 * m {
            p[(m + a, m + a)] = prob.eps_f;
        }
        let mut q = DVector::zeros(nv);
        for e in 0..m {
            q[e] = inst.w[e] + prob.lambda_fixed[e] + prob.rho * (prob.s_fixed[e] - prob.r_fixed[e]);
        }

        // rows: z box | f ≥ 0 | capacity | degree | non-root balances
        let rows = m + 2 * m + 2 * m + n + (n - 1);
        let mut a = DMatrix::zeros(rows, nv);
        let mut l = vec![0.0; rows];
        let mut u = vec![0.0; rows];
        let big_m = inst.big_m();
        let mut row = 0;
        for e in 0..m {
            a[(row, e)] = 1.0;
            u[row] = 1.0;
            row += 1;
        }
        for arc in 0..2 * m {
            a[(row, m + arc)] = 1.0;
            u[row] = f64::INFINITY;
            row += 1;
        }
        for arc in 0..2 * m {
            a[(row, m + arc)] = 1.0;
            a[(row, arc / 2)] = -big_m;
            l[row] = f64::NEG_INFINITY;
            row += 1;
        }
        for node in 0..n {
            for (e, i, j) in space.edges() {
                if i == node || j == node {
                    a[(row, e)] = 1.0;
                }
            }
            l[row] = f64::NEG_INFINITY;
            u[row] = inst.gamma as f64;
            row += 1;
        }
        // the root balance is implied by the others and is left out
        for node in (0..n).filter(|&v| v != inst.root()) {
            for arc in 0..2 * m {
                let (from, to) = space.arc(arc);
                if to == node {
                    a[(row, m + arc)] = 1.0;
                } else if from == node {
                    a[(row, m + arc)] = -1.0;
                }
            }
            l[row] = 1.0;
            u[row] = 1.0;
            row += 1;
        }
        debug_assert_eq!(row, rows);
        Self { m, p, q, a, l, u }
    }

    fn rows(&self) -> usize {
        self.l.len()
    }

    fn is_eq(&self, i: usize) -> bool {
        self.l[i] == self.u[i]
    }
}

fn kkt_factor(data: &QpData, rho: &[f64]) -> Result<Cholesky<f64, Dyn>> {
    let mut m = data.p.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += SIGMA;
    }
    let scaled = DMatrix::from_fn(data.rows(), data.a.ncols(), |i, j| data.a[(i, j)] * rho[i]);
    m += data.a.transpose() * scaled;
    Cholesky::new(m).ok_or_else(|| Error::Numerical("block-1 KKT matrix is not positive definite".into()))
}

fn split(x: &DVector<f64>, m: usize) -> (Vec<f64>, Vec<f64>) {
    (x.rows(0, m).iter().copied().collect(), x.rows(m, 2 * m).iter().copied().collect())
}

/// Solves the equality-constrained KKT system on a guessed active set.
fn polish(data: &QpData, zc: &[f64], y: &[f64]) -> Option<DVector<f64>> {
    let nv = data.a.ncols();
    let mut active = Vec::new();
    let mut target = Vec::new();
    for i in 0..data.rows() {
        if data.is_eq(i) || zc[i] - data.l[i] < -y[i] {
            active.push(i);
            target.push(data.l[i]);
        } else if data.u[i] - zc[i] < y[i] {
            active.push(i);
            target.push(data.u[i]);
        }
    }
    let k = active.len();
    let dim = nv + k;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&data.p);
    for (r, &i) in active.iter().enumerate() {
        for j in 0..nv {
            let v = data.a[(i, j)];
            kkt[(nv + r, j)] = v;
            kkt[(j, nv + r)] = v;
        }
    }
    let exact = kkt.clone();
    for i in 0..dim {
        kkt[(i, i)] += if i < nv { POLISH_DELTA } else { -POLISH_DELTA };
    }
    let lu = kkt.lu();
    let mut rhs = DVector::zeros(dim);
    for i in 0..nv {
        rhs[i] = -data.q[i];
    }
    for (r, t) in target.iter().enumerate() {
        rhs[nv + r] = *t;
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..POLISH_REFINE {
        let res = &rhs - &exact * &sol;
        if res.amax() < 1e-13 {
            break;
        }
        sol += lu.solve(&res)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(sol.rows(0, nv).into_owned())
}

/// Independent residual split into (primal violation, stationarity).
fn kkt_parts(z: &[f64], f: &[f64], p: &Block1Problem) -> Result<(f64, f64)> {
    let inst = p.inst;
    let space = &inst.space;
    let (n, m) = (space.n(), space.m());
    let primal = check_relaxed(z, f, inst, 0.0)?
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.magnitude));

    let nv = 3 * m;
    // gradient of the objective
    let mut g = vec![0.0; nv];
    let deg = crate::miqp::relaxed_degrees(z, space);
    for (e, i, j) in space.edges() {
        let d = z[e] - p.r_fixed[e] + p.s_fixed[e];
        g[e] = inst.w[e] + 2.0 * (inst.kappa[i] * deg[i] + inst.kappa[j] * deg[j]) + p.lambda_fixed[e] + p.rho * d;
    }
    for a in 0..2 * m {
        g[m + a] = p.eps_f * f[a];
    }
    // outward normals of the ε-active constraints (equalities in both signs)
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let unit = |idx: usize, s: f64| {
        let mut c = vec![0.0; nv];
        c[idx] = s;
        c
    };
    for e in 0..m {
        if z[e] <= ACTIVE_TOL {
            cols.push(unit(e, -1.0));
        }
        if z[e] >= 1.0 - ACTIVE_TOL {
            cols.push(unit(e, 1.0));
        }
    }
    let big_m = inst.big_m();
    for a in 0..2 * m {
        if f[a] <= ACTIVE_TOL {
            cols.push(unit(m + a, -1.0));
        }
        if f[a] - big_m * z[a / 2] >= -ACTIVE_TOL {
            let mut c = unit(m + a, 1.0);
            c[a / 2] = -big_m;
            cols.push(c);
        }
    }
    for node in 0..n {
        if deg[node] >= inst.gamma as f64 - ACTIVE_TOL {
            let mut c = vec![0.0; nv];
            for (e, i, j) in space.edges() {
                if i == node || j == node {
                    c[e] = 1.0;
                }
            }
            cols.push(c);
        }
    }
    for node in 0..n {
        let mut c = vec![0.0; nv];
        for a in 0..2 * m {
            let (from, to) = space.arc(a);
            if to == node {
                c[m + a] = 1.0;
            } else if from == node {
                c[m + a] = -1.0;
            }
        }
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        cols.push(c);
        cols.push(neg);
    }
    // min ‖g + Σ μ_i a_i‖ over μ ≥ 0, i.e. NNLS with target −g
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let (_, resid) = nnls(&cols, &neg_g);
    Ok((primal, norm2(&resid)))
}

/// Max of primal violation and the stationarity residual
/// `min_{μ ≥ 0} ‖∇F(x) + Σ μ_i ∇g_i(x)‖₂` over ε-active constraints.
pub fn kkt_residual(sol: &QpSolution, p: &Block1Problem) -> Result<f64> {
    let (primal, stat) = kkt_parts(&sol.z, &sol.f, p)?;
    Ok(primal.max(stat))
}

pub fn solve_block1(p: &Block1Problem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    solve_block1_warm(p, tol, max_iter, None)
}

pub fn solve_block1_warm(
    p: &Block1Problem,
    tol: f64,
    max_iter: usize,
    warm: Option<&WarmStart>,
) -> Result<QpSolution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(alloc::format!("tolerance must be positive, got {tol}")));
    }
    let data = QpData::build(p);
    let m = data.m;
    let nv = 3 * m;
    let rows = data.rows();
    let n = p.inst.n();

    let mut x = DVector::zeros(nv);
    let mut y = DVector::zeros(rows);
    match warm {
        Some(w) if w.z.len() == m && w.f.len() == 2 * m => {
            x.rows_mut(0, m).copy_from_slice(&w.z);
            x.rows_mut(m, 2 * m).copy_from_slice(&w.f);
            if w.dual.len() == rows {
                y.copy_from_slice(&w.dual);
            }
        }
        _ => {
            x.rows_mut(0, m).copy_from_slice(&path_topology(n)?.as_f64());
            x.rows_mut(m, 2 * m).copy_from_slice(&path_flows(n, &p.inst.space)?);
        }
    }
    let clamp = |v: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(rows, (0..rows).map(|i| v[i].clamp(data.l[i], data.u[i])))
    };
    let mut zc = clamp(&(&data.a * &x));

    let mut rho_base = 0.1;
    let rho_vec = |base: f64| -> Vec<f64> {
        (0..rows)
            .map(|i| if data.is_eq(i) { base * EQ_RHO_SCALE } else { base })
            .collect::<Vec<f64>>()
    };
    let mut rho = rho_vec(rho_base);
    let mut chol = kkt_factor(&data, &rho)?;

    let mut eps = 1e-3;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut iterations = 0;
    let at = data.a.transpose();

    let finish = |xs: &DVector<f64>, y: &DVector<f64>, iterations: usize, converged: bool, resid: f64| {
        let (z, f) = split(xs, m);
        QpSolution {
            objective: p.objective(&z, &f),
            z,
            f,
            kkt_residual: resid,
            iterations,
            converged,
            dual: y.iter().copied().collect(),
        }
    };

    while iterations < max_iter {
        iterations += 1;
        let rz = DVector::from_iterator(rows, (0..rows).map(|i| rho[i] * zc[i] - y[i]));
        let rhs = SIGMA * &x - &data.q + &at * rz;
        let xt = chol.solve(&rhs);
        let zt = &data.a * &xt;
        x = ALPHA * &xt + (1.0 - ALPHA) * &x;
        let zr = ALPHA * &zt + (1.0 - ALPHA) * &zc;
        let znew = clamp(&DVector::from_iterator(rows, (0..rows).map(|i| zr[i] + y[i] / rho[i])));
        for i in 0..rows {
            y[i] += rho[i] * (zr[i] - znew[i]);
        }
        zc = znew;

        if iterations % CHECK_EVERY != 0 && iterations != max_iter {
            continue;
        }
        let ax = &data.a * &x;
        let px = &data.p * &x;
        let aty = &at * &y;
        let r_prim = (&ax - &zc).amax();
        let r_dual = (&px + &data.q + &aty).amax();
        let scale_prim = ax.amax().max(zc.amax());
        let scale_dual = px.amax().max(aty.amax()).max(data.q.amax());

        if r_prim <= eps * (1.0 + scale_prim) && r_dual <= eps * (1.0 + scale_dual) {
            let zs: Vec<f64> = zc.iter().copied().collect();
            let ys: Vec<f64> = y.iter().copied().collect();
            for cand in [polish(&data, &zs, &ys), Some(x.clone())].into_iter().flatten() {
                let (z, f) = split(&cand, m);
                let (primal, stat) = kkt_parts(&z, &f, p)?;
                let resid = primal.max(stat);
                if resid <= tol {
                    return Ok(finish(&cand, &y, iterations, true, resid));
                }
                if best.as_ref().is_none_or(|b| resid < b.0) {
                    best = Some((resid, cand));
                }
            }
            eps = (eps * 0.1).max(1e-12);
        }

        if iterations % ADAPT_EVERY == 0 {
            let ratio = (r_prim / (1e-30 + scale_prim)) / (r_dual / (1e-30 + scale_dual) + 1e-30);
            let proposed = (rho_base * num_traits::Float::sqrt(ratio)).clamp(1e-6, 1e6);
            if proposed > 5.0 * rho_base || proposed < 0.2 * rho_base {
                rho_base = proposed;
                let new_rho = rho_vec(rho_base);
                // keep the scaled dual consistent across the change
                rho = new_rho;
                chol = kkt_factor(&data, &rho)?;
            }
        }
    }

    let (resid, xb) = match best {
        Some(b) => b,
        None => {
            let (z, f) = split(&x, m);
            let (primal, stat) = kkt_parts(&z, &f, p)?;
            (primal.max(stat), x)
        }
    };
    Ok(finish(&xb, &y, iterations, resid <= tol, resid))
}

/// Convenience: norm of the Block-1 coupling residual `z − r + s`.
pub fn coupling_residual(z: &[f64], p: &Block1Problem) -> f64 {
    let d: Vec<f64> = (0..z.len()).map(|e| z[e] - p.r_fixed[e] + p.s_fixed[e]).collect();
    norm_inf(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeSpace;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(inst: &MiqpInstance, r: Vec<f64>, s: Vec<f64>, lambda: Vec<f64>, rho: f64) -> Block1Problem<'_> {
        Block1Problem {
            inst,
            r_fixed: r,
            s_fixed: s,
            lambda_fixed: lambda,
            rho,
            eps_f: DEFAULT_EPS_F,
        }
    }

    #[test]
    fn two_node_case() {
        let inst = MiqpInstance::new(EdgeSpace::new(2).unwrap(), vec![0.0], vec![0.0; 2], 1).unwrap();
        let p = problem(&inst, vec![1.0], vec![0.0], vec![0.0], 20.0);
        let sol = solve_block1(&p, 1e-6, 20_000).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.f[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.f[1], 0.0, epsilon = 1e-6);
        assert!(sol.objective.abs() < 1e-6);
        // the feasible set forces f = (1, 0) and z ≥ 1; a grid over z agrees
        let grid_best = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .filter(|&z| z >= 1.0)
            .map(|z| p.objective(&[z], &[1.0, 0.0]))
            .fold(f64::INFINITY, f64::min);
        assert!((sol.objective - grid_best).abs() < 1e-6);
    }

    #[test]
    fn residual_of_exact_two_node_point() {
        let inst = MiqpInstance::new(EdgeSpace::new(2).unwrap(), vec![0.0], vec![0.0; 2], 1).unwrap();
        let p = problem(&inst, vec![1.0], vec![0.0], vec![0.0], 20.0);
        let exact = QpSolution {
            z: vec![1.0],
            f: vec![1.0, 0.0],
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
            dual: Vec::new(),
        };
        assert!(kkt_residual(&exact, &p).unwrap() <= 1e-10);
    }

    #[test]
    fn residual_counts_violation_and_gradient() {
        let inst = MiqpInstance::new(EdgeSpace::new(3).unwrap(), vec![1.0; 3], vec![0.0; 3], 2).unwrap();
        let p = problem(&inst, vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], 1.0);
        // balances broken by one unit at both non-root nodes
        let bad = QpSolution {
            z: vec![0.5; 3],
            f: vec![0.0; 6],
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
            converged: false,
            dual: Vec::new(),
        };
        assert!(kkt_residual(&bad, &p).unwrap() >= 1.0);

        // a two-node point with z interior: only the balance rows are active,
        // and they touch f only, so the residual is |∂J/∂z|
        let inst2 = MiqpInstance::new(EdgeSpace::new(2).unwrap(), vec![0.0], vec![0.0; 2], 1).unwrap();
        let mut p2 = problem(&inst2, vec![0.0], vec![0.0], vec![0.0], 2.0);
        p2.eps_f = 0.0;
        let inner = QpSolution {
            z: vec![0.9],
            f: vec![0.5, 0.2],
            ..bad.clone()
        };
        // the balance is off here, so look at the stationarity part alone
        let (_, stat) = kkt_parts(&inner.z, &inner.f, &p2).unwrap();
        assert_relative_eq!(stat, 1.8, epsilon = 1e-12);
    }

    /// Dykstra's alternating projection onto the constraint pieces.
    fn dykstra_project(x0: &[f64], inst: &MiqpInstance, sweeps: usize) -> Vec<f64> {
        let space = &inst.space;
        let (n, m) = (space.n(), space.m());
        let nv = 3 * m;
        let big_m = inst.big_m();
        // halfspaces aᵀx ≤ b
        let mut halfspaces: Vec<(Vec<f64>, f64)> = Vec::new();
        let unit = |i: usize, s: f64| {
            let mut a = vec![0.0; nv];
            a[i] = s;
            a
        };
        for e in 0..m {
            halfspaces.push((unit(e, 1.0), 1.0));
            halfspaces.push((unit(e, -1.0), 0.0));
        }
        for a in 0..2 * m {
            halfspaces.push((unit(m + a, -1.0), 0.0));
            let mut c = unit(m + a, 1.0);
            c[a / 2] = -big_m;
            halfspaces.push((c, 0.0));
        }
        for node in 0..n {
            let mut c = vec![0.0; nv];
            for (e, i, j) in space.edges() {
                if i == node || j == node {
                    c[e] = 1.0;
                }
            }
            halfspaces.push((c, inst.gamma as f64));
        }
        // affine balance set handled as one block via its own normal equations
        let mut bal_rows: Vec<Vec<f64>> = Vec::new();
        let mut bal_rhs = Vec::new();
        for node in 1..n {
            let mut c = vec![0.0; nv];
            for a in 0..2 * m {
                let (from, to) = space.arc(a);
                if to == node {
                    c[m + a] = 1.0;
                } else if from == node {
                    c[m + a] = -1.0;
                }
            }
            bal_rows.push(c);
            bal_rhs.push(1.0);
        }
        let k = bal_rows.len();
        let gram = DMatrix::from_fn(k, k, |i, j| dot(&bal_rows[i], &bal_rows[j]));
        let gram_chol = gram.cholesky().unwrap();
        let project_affine = |x: &[f64]| -> Vec<f64> {
            let res = DVector::from_iterator(k, (0..k).map(|i| dot(&bal_rows[i], x) - bal_rhs[i]));
            let mult = gram_chol.solve(&res);
            let mut out = x.to_vec();
            for i in 0..k {
                for j in 0..nv {
                    out[j] -= mult[i] * bal_rows[i][j];
                }
            }
            out
        };
        let sets = halfspaces.len() + 1;
        let mut corr = vec![vec![0.0; nv]; sets];
        let mut x = x0.to_vec();
        for _ in 0..sweeps {
            for sidx in 0..sets {
                let y: Vec<f64> = x.iter().zip(&corr[sidx]).map(|(a, b)| a + b).collect();
                let proj = if sidx < halfspaces.len() {
                    let (a, b) = &halfspaces[sidx];
                    let viol = dot(a, &y) - b;
                    if viol > 0.0 {
                        let s = viol / dot(a, a);
                        y.iter().zip(a).map(|(yi, ai)| yi - s * ai).collect()
                    } else {
                        y.clone()
                    }
                } else {
                    project_affine(&y)
                };
                corr[sidx] = y.iter().zip(&proj).map(|(a, b)| a - b).collect();
                x = proj;
            }
        }
        x
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..3 {
            let space = EdgeSpace::new(3).unwrap();
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..3.0)).collect();
            let inst = MiqpInstance::new(space, w, vec![0.1; 3], 2).unwrap();
            let (r, s, lam) = if trial == 0 {
                (vec![0.0; 3], vec![0.0; 3], vec![0.0; 3])
            } else {
                (
                    (0..3).map(|_| rng.gen_range(0..2) as f64).collect(),
                    (0..3).map(|_| rng.gen_range(-0.2..0.2)).collect(),
                    (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            };
            let mut p = problem(&inst, r, s, lam, 2.0);
            p.eps_f = 0.05;
            let sol = solve_block1(&p, 1e-7, 20_000).unwrap();
            assert!(sol.converged, "kkt {}", sol.kkt_residual);

            let data = QpData::build(&p);
            let mut x: Vec<f64> = sol.z.iter().chain(&sol.f).map(|v| v * 0.0 + 0.5).collect();
            let lip = data.p.norm();
            let step = 1.0 / lip;
            for _ in 0..3000 {
                let xv = DVector::from_column_slice(&x);
                let g = &data.p * &xv + &data.q;
                let moved: Vec<f64> = (0..x.len()).map(|i| x[i] - step * g[i]).collect();
                x = dykstra_project(&moved, &inst, 200);
            }
            let (z, f) = (x[..3].to_vec(), x[3..].to_vec());
            let viol = check_relaxed(&z, &f, &inst, 0.0)
                .unwrap()
                .iter()
                .fold(0.0f64, |a, v| a.max(v.magnitude));
            assert!(viol < 1e-5, "oracle infeasible by {viol}");
            let oracle = p.objective(&z, &f);
            assert!(
                (sol.objective - oracle).abs() < 1e-5,
                "solver {} oracle {}",
                sol.objective,
                oracle
            );
        }
    }

    fn random_problem(inst: &MiqpInstance, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = inst.m();
        (
            (0..m).map(|_| rng.gen_range(0..2) as f64).collect(),
            (0..m).map(|_| rng.gen_range(-0.3..0.3)).collect(),
            (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        )
    }

    #[test]
    fn random_instances_converge_and_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [4usize, 5, 6, 7] {
            let space = EdgeSpace::new(n).unwrap();
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let w = crate::miqp::edge_weights(&xs, &vec![0.0; space.m()], &space).unwrap();
            let inst = MiqpInstance::new(space, w, vec![0.1; n], 2).unwrap();
            let (r, s, lam) = random_problem(&inst, &mut rng);
            let p = problem(&inst, r, s, lam, 20.0);
            let sol = solve_block1(&p, 1e-6, 20_000).unwrap();
            assert!(sol.converged, "n={n} kkt={}", sol.kkt_residual);
            assert!(kkt_residual(&sol, &p).unwrap() <= 1e-6);
            assert!((sol.objective - p.objective(&sol.z, &sol.f)).abs() <= 1e-6);
            // a different start lands on the same minimiser
            let warm = WarmStart {
                z: vec![0.5; inst.m()],
                f: sol.f.iter().map(|v| v + 0.1).collect(),
                dual: Vec::new(),
            };
            let other = solve_block1_warm(&p, 1e-6, 20_000, Some(&warm)).unwrap();
            for (a, b) in sol.z.iter().zip(&other.z) {
                assert!((a - b).abs() <= 1e-5, "n={n}: {a} vs {b}");
            }
        }
    }
}
