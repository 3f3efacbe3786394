//! First- and second-order consensus dynamics under a fixed Laplacian.
//!
//! `ẋ = −Lx` or `ẋ = v, v̇ = −αLx − βLv`, advanced with classical RK4.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::graph::LaplacianMatrix;
use crate::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub t: f64,
}

impl AgentState {
    pub fn first_order(x: Vec<f64>) -> Self {
        Self { x, v: None, t: 0.0 }
    }

    pub fn second_order(x: Vec<f64>, v: Vec<f64>) -> Self {
        Self {
            x,
            v: Some(v),
            t: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    fn ensure_finite(&self) -> Result<()> {
        let finite = self.x.iter().all(|v| v.is_finite())
            && self.v.as_ref().is_none_or(|v| v.iter().all(|a| a.is_finite()));
        if finite && self.t.is_finite() {
            Ok(())
        } else {
            Err(Error::Integration { t: self.t })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub order: u8,
    pub alpha: f64,
    pub beta_gain: f64,
    pub dt: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            order: 1,
            alpha: 3.0,
            beta_gain: 3.0,
            dt: DEFAULT_DT,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(alloc::format!("dt must be positive, got {}", self.dt)));
        }
        match self.order {
            1 => Ok(()),
            2 if self.alpha > 0.0 && self.beta_gain > 0.0 => Ok(()),
            2 => Err(Error::Parameter("alpha and beta_gain must be positive".into())),
            o => Err(Error::Parameter(alloc::format!("order must be 1 or 2, got {o}"))),
        }
    }

    /// Advances `s` by one step of `self.dt` according to the configured order.
    pub fn step(&self, s: &AgentState, l: &LaplacianMatrix) -> Result<AgentState> {
        match self.order {
            1 => step_first_order(s, l, self.dt),
            _ => step_second_order(s, l, self, self.dt),
        }
    }
}

fn check_sizes(s: &AgentState, l: &LaplacianMatrix, dt: f64) -> Result<()> {
    if s.n() != l.n() {
        return Err(Error::Dimension {
            what: "agent state",
            expected: l.n(),
            got: s.n(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(alloc::format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

pub fn step_first_order(s: &AgentState, l: &LaplacianMatrix, dt: f64) -> Result<AgentState> {
    check_sizes(s, l, dt)?;
    if s.v.is_some() {
        return Err(Error::Parameter("first-order step given a velocity".into()));
    }
    let n = s.n();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let f = |x: &[f64], out: &mut [f64]| {
        l.apply(x, out);
        out.iter_mut().for_each(|o| *o = -*o);
    };
    f(&s.x, &mut k[0]);
    for stage in 1..4 {
        let h = if stage == 3 { dt } else { 0.5 * dt };
        for i in 0..n {
            tmp[i] = s.x[i] + h * k[stage - 1][i];
        }
        let (_, rest) = k.split_at_mut(stage);
        f(&tmp, &mut rest[0]);
    }
    let x = (0..n)
        .map(|i| s.x[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect();
    let out = AgentState {
        x,
        v: None,
        t: s.t + dt,
    };
    out.ensure_finite()?;
    Ok(out)
}

pub fn step_second_order(
    s: &AgentState,
    l: &LaplacianMatrix,
    cfg: &DynamicsConfig,
    dt: f64,
) -> Result<AgentState> {
    check_sizes(s, l, dt)?;
    let v0 = s
        .v
        .as_ref()
        .ok_or_else(|| Error::Parameter("second-order step needs a velocity".into()))?;
    if v0.len() != s.n() {
        return Err(Error::Dimension {
            what: "velocity",
            expected: s.n(),
            got: v0.len(),
        });
    }
    let n = s.n();
    let (alpha, beta) = (cfg.alpha, cfg.beta_gain);
    let mut lx = vec![0.0; n];
    let mut lv = vec![0.0; n];
    // returns (ẋ, v̇) at (x, v)
    let mut f = |x: &[f64], v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        l.apply(x, &mut lx);
        l.apply(v, &mut lv);
        let dv = (0..n).map(|i| -alpha * lx[i] - beta * lv[i]).collect();
        (v.to_vec(), dv)
    };
    let axpy = |a: &[f64], h: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + h * q).collect()
    };
    let (k1x, k1v) = f(&s.x, v0);
    let (k2x, k2v) = f(&axpy(&s.x, 0.5 * dt, &k1x), &axpy(v0, 0.5 * dt, &k1v));
    let (k3x, k3v) = f(&axpy(&s.x, 0.5 * dt, &k2x), &axpy(v0, 0.5 * dt, &k2v));
    let (k4x, k4v) = f(&axpy(&s.x, dt, &k3x), &axpy(v0, dt, &k3v));
    let combine = |y: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    let out = AgentState {
        x: combine(&s.x, &k1x, &k2x, &k3x, &k4x),
        v: Some(combine(v0, &k1v, &k2v, &k3v, &k4v)),
        t: s.t + dt,
    };
    out.ensure_finite()?;
    Ok(out)
}

fn spread(a: &[f64]) -> f64 {
    let (lo, hi) = a
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if a.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Position spread and, when present, velocity spread.
pub fn consensus_error(s: &AgentState) -> (f64, Option<f64>) {
    (spread(&s.x), s.v.as_deref().map(spread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, is_connected, EdgeSpace, TopologyVector};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single_edge() -> LaplacianMatrix {
        let s = EdgeSpace::new(2).unwrap();
        build_laplacian(&TopologyVector::from_bits(vec![1]).unwrap(), &s).unwrap()
    }

    /// `exp(A t)` for a 2×2 matrix by scaling and squaring a Taylor series.
    fn expm2(a: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
        let mul = |p: [[f64; 2]; 2], q: [[f64; 2]; 2]| {
            let mut r = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] = p[i][0] * q[0][j] + p[i][1] * q[1][j];
                }
            }
            r
        };
        let squarings = 12;
        let h = t / f64::from(1u32 << squarings);
        let m = [[a[0][0] * h, a[0][1] * h], [a[1][0] * h, a[1][1] * h]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        let mut sum = term;
        for k in 1..30 {
            term = mul(term, m);
            term.iter_mut().flatten().for_each(|v| *v /= k as f64);
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            sum = mul(sum, sum);
        }
        sum
    }

    #[test]
    fn empty_graph_is_static() {
        let l = LaplacianMatrix::zero(3);
        let s = AgentState::first_order(vec![1.0, -2.0, 7.5]);
        let out = step_first_order(&s, &l, 0.1).unwrap();
        assert_eq!(out.x, s.x);
    }

    #[test]
    fn two_agents_decay_at_rate_two() {
        let l = single_edge();
        let mut s = AgentState::first_order(vec![1.0, -1.0]);
        for _ in 0..500 {
            s = step_first_order(&s, &l, 1e-3).unwrap();
        }
        let expect = (-1.0f64).exp();
        assert_relative_eq!(s.x[0], expect, epsilon = 1e-6);
        assert_relative_eq!(s.x[1], -expect, epsilon = 1e-6);
        assert_relative_eq!(s.t, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn agreement_is_a_fixed_point() {
        let sp = EdgeSpace::new(4).unwrap();
        let l = build_laplacian(&TopologyVector::from_mask(0b111111, sp.m()), &sp).unwrap();
        let s = AgentState::first_order(vec![2.5; 4]);
        assert_eq!(step_first_order(&s, &l, 0.01).unwrap().x, s.x);
        let cfg = DynamicsConfig {
            order: 2,
            ..Default::default()
        };
        let s2 = AgentState::second_order(vec![2.5; 4], vec![0.0; 4]);
        let out = step_second_order(&s2, &l, &cfg, 0.01).unwrap();
        assert_eq!(out.x, s2.x);
        assert_eq!(out.v, s2.v);
    }

    #[test]
    fn free_drift() {
        let l = LaplacianMatrix::zero(2);
        let cfg = DynamicsConfig {
            order: 2,
            ..Default::default()
        };
        let s = AgentState::second_order(vec![1.0, 2.0], vec![1.0, 1.0]);
        let out = step_second_order(&s, &l, &cfg, 1.0).unwrap();
        assert_relative_eq!(out.x[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(out.x[1], 3.0, epsilon = 1e-15);
        assert_eq!(out.v, s.v);
    }

    #[test]
    fn second_order_disagreement_matches_matrix_exponential() {
        let l = single_edge();
        let cfg = DynamicsConfig {
            order: 2,
            alpha: 3.0,
            beta_gain: 3.0,
            dt: 1e-3,
        };
        let mut s = AgentState::second_order(vec![1.0, -1.0], vec![0.0, 0.0]);
        for _ in 0..1000 {
            s = step_second_order(&s, &l, &cfg, cfg.dt).unwrap();
        }
        // ξ = x1 − x2 obeys ξ̈ = −6ξ − 6ξ̇ with ξ(0) = 2, ξ̇(0) = 0
        let e = expm2([[0.0, 1.0], [-6.0, -6.0]], 1.0);
        let xi = 2.0 * e[0][0];
        let xidot = 2.0 * e[1][0];
        let v = s.v.as_ref().unwrap();
        assert_relative_eq!(s.x[0] - s.x[1], xi, epsilon = 1e-6);
        assert_relative_eq!(v[0] - v[1], xidot, epsilon = 1e-6);
        assert!(step_second_order(&AgentState::first_order(vec![0.0; 2]), &l, &cfg, 0.1).is_err());
    }

    #[test]
    fn consensus_error_examples() {
        assert_eq!(consensus_error(&AgentState::first_order(vec![3.0; 3])), (0.0, None));
        assert_eq!(
            consensus_error(&AgentState::first_order(vec![-5.0, 0.0, 5.0])),
            (10.0, None)
        );
        assert_eq!(
            consensus_error(&AgentState::second_order(vec![1.0, 2.0], vec![0.5, -0.5])),
            (1.0, Some(1.0))
        );
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let l = single_edge();
        let s = AgentState::first_order(vec![f64::NAN, 0.0]);
        assert!(matches!(step_first_order(&s, &l, 1e-3), Err(Error::Integration { .. })));
    }

    fn connected_instance() -> impl Strategy<Value = (usize, u64, Vec<f64>)> {
        (2usize..=6).prop_flat_map(|n| {
            let m = n * (n - 1) / 2;
            (Just(n), 0u64..(1u64 << m), proptest::collection::vec(-5.0f64..5.0, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn spread_never_grows_on_a_connected_graph((n, mask, x) in connected_instance()) {
            let sp = EdgeSpace::new(n).unwrap();
            let t = TopologyVector::from_mask(mask, sp.m());
            prop_assume!(is_connected(&t, &sp).unwrap());
            let l = build_laplacian(&t, &sp).unwrap();
            let mut s = AgentState::first_order(x);
            let mut prev = consensus_error(&s).0;
            for _ in 0..50 {
                s = step_first_order(&s, &l, 1e-2).unwrap();
                let e = consensus_error(&s).0;
                prop_assert!(e <= prev + 1e-9);
                prev = e;
            }
        }

        #[test]
        fn sums_are_conserved(
            (n, mask, x) in connected_instance(),
            v in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            let sp = EdgeSpace::new(n).unwrap();
            let l = build_laplacian(&TopologyVector::from_mask(mask, sp.m()), &sp).unwrap();
            let sx: f64 = x.iter().sum();
            let scale = x.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
            let s = step_first_order(&AgentState::first_order(x.clone()), &l, 1e-3).unwrap();
            prop_assert!((s.x.iter().sum::<f64>() - sx).abs() <= 1e-12 * scale);

            let cfg = DynamicsConfig { order: 2, ..Default::default() };
            let v = v[..n].to_vec();
            let sv: f64 = v.iter().sum();
            let s2 = step_second_order(&AgentState::second_order(x, v.clone()), &l, &cfg, 1e-3).unwrap();
            let vscale = v.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
            prop_assert!((s2.v.unwrap().iter().sum::<f64>() - sv).abs() <= 1e-12 * vscale);
            prop_assert!((s2.x.iter().sum::<f64>() - sx - sv * 1e-3).abs() <= 1e-12 * scale);
        }
    }
}
