//! State and fault estimation for multi-agent systems that sense each other
//! through relative measurements.
//!
//! A network of agents evolves as `x_i(k) = A_i x_i(k-1) + B_i u_i(k-1) + f_i(k)`,
//! where `f_i` is an unknown per-node fault signal that is active on at most a
//! few nodes at any step. Followers only measure differences `x_i - x_j` to
//! their graph neighbours; a designated leader (node 1) can additionally
//! publish its own absolute state when it is in the active mode. This crate
//! provides:
//!
//! - graph plumbing: incidence matrices, connectivity and bipartition checks
//!   ([`graph`]),
//! - the stacked plant and output models plus closed-loop simulation
//!   ([`plant`]),
//! - the coordinate-major rearrangement that exposes the block structure of
//!   the output matrices ([`permute`]),
//! - an operator-splitting basis-pursuit solver with equality and
//!   norm-ball constraint support ([`solver`]),
//! - centralized sparse estimators and a Kalman baseline ([`estimator`]),
//! - recovery-limit and error-bound analysis: null-space property checks, the
//!   `|I| < M/2` recovery threshold, worst-case fault/state error bounds and
//!   counterexample construction ([`analysis`]),
//! - a distributed basis-pursuit runtime where each node solves a small local
//!   subproblem and exchanges iterates with its neighbours ([`distributed`]),
//! - scenario files, trace/plot emission and the experiment CLI backend
//!   ([`scenario`], [`runner`], [`plot`]).

pub mod analysis;
pub mod distributed;
pub mod estimator;
pub mod graph;
pub mod linalg;
pub mod permute;
pub mod plant;
pub mod plot;
pub mod runner;
pub mod scenario;
pub mod solver;
