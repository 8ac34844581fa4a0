//! Online maximization of non-negative, non-monotone DR-submodular
//! functions over down-closed convex sets.
//!
//! The pipeline maps a linear learner's iterate `x_t` to the played point
//! `h(x_t) = 1 - e^{-x_t}` and feeds it a single-query unbiased estimate of
//! the gradient of a surrogate potential. This reduces `1/e`-regret to
//! linear regret. Wrappers adapt the loop to semi-bandit, zeroth-order and
//! bandit feedback, and the harness measures static, adaptive and dynamic
//! regret together with exact per-trace certificates.

pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learners;
pub mod objectives;
pub mod quadrature;
pub mod reductions;
pub mod surrogate;
pub mod vecops;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Domain, DomainKind, Separation};
pub use learners::{Ader, ExpertProjection, LearnerKind, LearnerParams, LinearLearner, SoOga};
pub use objectives::{Objective, OracleSpec, StochasticOracle};
pub use reductions::{FeedbackMode, ReductionParams};
pub use surrogate::{SurrogateContext, ALPHA, BETA};
