//! Online linear optimization base learners.
//!
//! Both learners maximize `sum_t <o_t, x_t>` for reward vectors `o_t` with
//! `||o_t|| <= G`. They are deterministic: replaying a feed sequence
//! reproduces the action sequence.

mod ader;
mod so_oga;

pub use ader::{Ader, ExpertProjection};
pub use so_oga::{default_v, so_ip, so_ip_trajectory, SoIpOutcome, SoOga};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Domain;

/// Uniform contract shared by every base learner.
pub trait LinearLearner: Send {
    /// The action for the current round; always feasible.
    fn next_action(&self) -> &[f64];
    /// Consumes the reward vector of the current round and advances.
    fn feed(&mut self, reward: &[f64]) -> Result<()>;
    /// Returns to the round-one state.
    fn reset(&mut self);
    /// The set the actions live in.
    fn domain(&self) -> &Domain;
    fn name(&self) -> &'static str;
}

/// Which base learner to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    SoOga,
    Ader,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::SoOga => "so_oga",
            LearnerKind::Ader => "ader",
        }
    }
}

/// Everything needed to instantiate a learner for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    pub kind: LearnerKind,
    /// Number of rounds the learner will see.
    pub horizon: usize,
    /// Bound on the norm of every fed reward vector.
    pub grad_bound: f64,
    /// SO-OGA free parameter; `None` means [`default_v`].
    pub v: Option<f64>,
    pub expert_projection: ExpertProjection,
}

impl LearnerParams {
    pub fn build(&self, domain: Domain) -> Result<Box<dyn LinearLearner>> {
        Ok(match self.kind {
            LearnerKind::SoOga => {
                let v = self.v.unwrap_or_else(|| so_oga::default_v(&domain, self.horizon));
                Box::new(SoOga::new(domain, self.horizon, self.grad_bound, v)?)
            }
            LearnerKind::Ader => Box::new(Ader::new(
                domain,
                self.horizon,
                self.grad_bound,
                self.expert_projection,
            )?),
        })
    }
}
