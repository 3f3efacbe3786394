//! Online communication-topology design for linear consensus networks.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the numerical core:
//!
//! * [`graph`]: candidate-edge indexing, Laplacians, connectivity and the
//!   path-graph feasibility construction.
//! * [`dynamics`]: RK4 integration of first- and second-order consensus.
//! * [`miqp`]: the flow-constrained topology MIQP, its feasibility checker and
//!   an exhaustive enumeration baseline.
//! * [`qp`]: the convex relaxed-edge/flow subproblem solved by operator
//!   splitting.
//! * [`qubo`]: binary-block QUBO assembly, the Ising mapping and brute force.
//! * [`qite`]: statevector imaginary-time evolution (exact and McLachlan
//!   variational), sampling and candidate selection.
//! * [`admm`]: the three-block ADMM sweep with residual and Lyapunov monitors.
//! * [`closed_loop`]: the alternating consensus / re-optimisation loop.
//!
//! File formats, CLI and tracing to disk live in the `dqtopo` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod admm;
pub mod closed_loop;
pub mod dynamics;
mod error;
pub mod graph;
pub mod linalg;
pub mod miqp;
pub mod qite;
pub mod qp;
pub mod qubo;

pub use error::{Error, Result};
