//! Data-driven Lagrangian relaxation for small mixed-integer linear programs.
//!
//! The crate is organized bottom-up:
//!
//! - [`instance`]: MILP instances `min cᵀx s.t. Ax ≥ b, Cx ≥ d`, the multiplier
//!   box `[0, π_max]^s`, and verification of the bounded-violation constant `B`.
//! - [`subproblem`]: exact enumeration oracles for the Lagrangian subproblem and
//!   for `OPT(P)`, plus a separable fast path for restricted instances.
//! - [`dual`]: dual values with subgradients and per-instance dual ascent.
//! - [`learners`]: stochastic subgradient ascent with averaging, empirical risk
//!   maximization, and the warm-start sample mean.
//! - [`hard_family`]: two-point instance distributions with closed-form risks,
//!   Varshamov–Gilbert packings, and KL/Fano diagnostics.
//! - [`bounds`]: covering-number, Dudley, and rate calculators, plus a Monte
//!   Carlo Rademacher estimator.
//! - [`vrp`]: a toy capacitated vehicle-routing decomposition.
//! - [`experiments`]: the seeded rate harness, CSV output, and log-log fits.

pub mod bounds;
pub mod dual;
pub mod error;
pub mod experiments;
pub mod hard_family;
pub mod instance;
pub mod learners;
pub mod rng;
pub mod subproblem;
pub mod vrp;

pub use error::{Error, Result};
pub use instance::{MilpInstance, MultiplierVector, ProblemBounds};
