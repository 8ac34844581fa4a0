//! Adversaries, regret metrics, the experiment engine and CSV persistence.

pub mod adversary;
pub mod experiment;
pub mod metrics;
pub mod persist;

pub use adversary::{AdversaryKind, AdversarySpec, Family, Sequence};
pub use experiment::{
    evaluate, mix_seed, run_grid, run_once, summarize, Environment, ExperimentSpec, HorizonResult,
    HorizonSummary, IntervalSeries, RegretReport, RunOptions, RunOutcome, RunRecord,
};
pub use metrics::{fit_slope, regret_adaptive, regret_dynamic, regret_static, IntervalPlan, SlopeFit};
