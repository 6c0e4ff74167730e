//! Uniform-norm prototypes for groups of discretized signals.
//!
//! A group of signals sampled on a common grid is summarized by its upper and
//! lower envelope. The prototype minimizing the maximal deviation from every
//! member depends on the envelope alone, and is computed either by linear
//! programming ([`lpsolver`]) or by an exchange procedure ([`exchange`]).
//! [`optimality`] certifies results independently, and [`clustering`] builds
//! a k-medoid style clustering on top.

pub mod basis;
pub mod cli;
pub mod clustering;
pub mod envelope;
pub mod error;
pub mod exchange;
pub(crate) mod linalg;
pub mod lpsolver;
pub mod optimality;

pub use basis::{BasisKind, ChebyshevBasis, DesignMatrix, Grid};
pub use envelope::{build_envelope, lower_bound, Envelope, LowerBound, Side, SignalGroup, SignalId};
pub use error::{Error, Result};
pub use exchange::{solve_exchange, ExchangeOptions, ReferenceBasis, SolveReport, Termination, WarmStart};
pub use clustering::{
    k_medoid, BasisSpec, ClusterConfig, ClusterEvent, ClusteringState, IterationLog, Prototype, SkipRule, SolverChoice,
};
pub use lpsolver::{build_lp, solve_simplex, LpProblem, LpSolution, LpStatus};
pub use optimality::{check_alternation, check_subdifferential, deviation_profile, Certificate, OptimalityVerdict};
