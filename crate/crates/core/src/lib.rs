//! Destriping of 3-D image cubes.
//!
//! A cube `V` is split into a clean part `U` and a stripe part `S` by
//! minimising a regularizer on `U` plus a stripe penalty on `S`, subject to
//! `‖V - (U + S)‖_F ≤ ε`. Vertical stripes are modelled by the flatness
//! constraint `D_v S = O` (optionally also `D_t S = O`), and the problem is
//! solved with a diagonally preconditioned primal-dual splitting whose
//! stepsizes are computed from the operator structure.

pub mod config;
pub mod cube;
pub mod error;
pub mod io;
pub mod linop;
pub mod metrics;
pub mod prox;
pub mod regularizers;
pub mod run;
pub mod sim;
pub mod solver;
pub mod stripe;

pub use config::{Epsilon, RunConfig};
pub use cube::{Axis, Cube, CubeTuple, Dims};
pub use error::{Error, Result};
pub use io::{read_cube, write_cube};
pub use linop::{LinOp, OperatorMatrix};
pub use metrics::{mpsnr, mssim};
pub use prox::{Precond, ProxKind, ProxTerm};
pub use regularizers::{Regularizer, RegularizerKind};
pub use run::{run_benchmark, run_destripe, MetricsRow, RunOutcome};
pub use sim::{make_case, Case, Degraded, NoiseSpec};
pub use solver::{solve, ProblemSpec, SolveResult, TraceRecord};
pub use stripe::{StripeModel, StripeModelKind};
