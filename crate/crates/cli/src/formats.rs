//! JSON input documents: closed-loop configs, MIQP snapshots and QUBOs.

use std::fs;
use std::path::Path;

use dqtopo_core::closed_loop::ClosedLoopConfig;
use dqtopo_core::graph::EdgeSpace;
use dqtopo_core::miqp::{edge_weights_nd, MiqpInstance};
use dqtopo_core::qubo::QuboProblem;
use dqtopo_core::Error as CoreError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(path, e))
}

/// Validation failures of a parsed document are reported as config errors,
/// except capacity limits which keep their own exit code.
fn invalid(path: &Path, e: CoreError) -> CliError {
    match e {
        CoreError::Capacity { .. } => CliError::Capacity(e),
        e => CliError::config(path, e),
    }
}

pub fn load_config(path: &Path) -> CliResult<ClosedLoopConfig> {
    let cfg: ClosedLoopConfig = read_json(path)?;
    cfg.validate().map_err(|e| invalid(path, e))?;
    Ok(cfg)
}

/// Agent position: a scalar for 1-D agents or a coordinate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Position {
    Scalar(f64),
    Point(Vec<f64>),
}

impl Position {
    fn coords(&self) -> Vec<f64> {
        match self {
            Position::Scalar(x) => vec![*x],
            Position::Point(p) => p.clone(),
        }
    }
}

/// One MIQP snapshot; edge weights are derived from the positions on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    #[serde(default = "default_gamma")]
    pub gamma: usize,
    /// Defaults to 0.1 on every node.
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    /// Defaults to zero on every edge.
    #[serde(default)]
    pub c_comm: Option<Vec<f64>>,
    pub positions: Vec<Position>,
}

fn default_gamma() -> usize {
    2
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<MiqpInstance, CoreError> {
        let space = EdgeSpace::new(self.n)?;
        let c = self.c_comm.clone().unwrap_or_else(|| vec![0.0; space.m()]);
        let points: Vec<Vec<f64>> = self.positions.iter().map(Position::coords).collect();
        let w = edge_weights_nd(&points, &c, &space)?;
        let kappa = self.kappa.clone().unwrap_or_else(|| vec![0.1; self.n]);
        MiqpInstance::new(space, w, kappa, self.gamma)
    }
}

pub fn load_instance(path: &Path) -> CliResult<(InstanceFile, MiqpInstance)> {
    let file: InstanceFile = read_json(path)?;
    let inst = file.to_instance().map_err(|e| invalid(path, e))?;
    Ok((file, inst))
}

/// `Φ(r) = Σ linear_i r_i + Σ val·r_i r_j + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuboFile {
    pub m: usize,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub couplings: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub offset: f64,
}

impl QuboFile {
    pub fn to_problem(&self) -> Result<QuboProblem, CoreError> {
        QuboProblem::from_terms(self.m, self.linear.clone(), &self.couplings, self.offset)
    }
}

pub fn load_qubo(path: &Path) -> CliResult<(QuboFile, QuboProblem)> {
    let file: QuboFile = read_json(path)?;
    let p = file.to_problem().map_err(|e| invalid(path, e))?;
    Ok((file, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_instance_has_unit_weights() {
        let f: InstanceFile =
            serde_json::from_str(r#"{"n": 3, "positions": [0, 0, 0], "c_comm": [1, 1, 1]}"#).unwrap();
        let inst = f.to_instance().unwrap();
        assert_eq!(inst.w, vec![1.0; 3]);
        assert_eq!(inst.kappa, vec![0.1; 3]);
        assert_eq!(inst.gamma, 2);
    }

    #[test]
    fn points_and_scalars_give_distances() {
        let f: InstanceFile = serde_json::from_str(r#"{"n": 3, "positions": [[0, 0], [3, 4], [3, 0]]}"#).unwrap();
        assert_eq!(f.to_instance().unwrap().w, vec![5.0, 3.0, 4.0]);
        let g: InstanceFile = serde_json::from_str(r#"{"n": 3, "positions": [0, 3, 4]}"#).unwrap();
        assert_eq!(g.to_instance().unwrap().w, vec![3.0, 4.0, 1.0]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = serde_json::from_str::<InstanceFile>(r#"{"n": 2, "positions": [0, 1], "weights": [1]}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field `weights`"));
    }

    #[test]
    fn qubo_terms_round_trip() {
        let f: QuboFile =
            serde_json::from_str(r#"{"m": 2, "linear": [1, -2], "couplings": [[0, 1, 3]], "offset": 0.5}"#).unwrap();
        let p = f.to_problem().unwrap();
        assert_eq!(p.eval_mask(0b00), 0.5);
        assert_eq!(p.eval_mask(0b01), 1.5);
        assert_eq!(p.eval_mask(0b10), -1.5);
        assert_eq!(p.eval_mask(0b11), 2.5);
    }

    proptest::proptest! {
        #[test]
        fn sparse_terms_match_direct_evaluation(
            lin in proptest::collection::vec(-5.0f64..5.0, 1..6),
            raw in proptest::collection::vec((0usize..6, 0usize..6, -3.0f64..3.0), 0..10),
            mask in 0u64..64,
        ) {
            let m = lin.len();
            let couplings: Vec<(usize, usize, f64)> =
                raw.into_iter().filter(|&(i, j, _)| i < m && j < m).collect();
            let f = QuboFile { m, linear: lin.clone(), couplings: couplings.clone(), offset: 0.5 };
            let p = f.to_problem().unwrap();
            let mask = mask & ((1u64 << m) - 1);
            let bit = |i: usize| ((mask >> i) & 1) as f64;
            let direct = 0.5
                + (0..m).map(|i| lin[i] * bit(i)).sum::<f64>()
                + couplings.iter().map(|&(i, j, v)| v * bit(i) * bit(j)).sum::<f64>();
            proptest::prop_assert!((p.eval_mask(mask) - direct).abs() < 1e-9);
        }
    }
}
