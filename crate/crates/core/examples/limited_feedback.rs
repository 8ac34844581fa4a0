//! The same adversary under all four feedback models.
//!
//! Run with `cargo run --release --example limited_feedback`.

use dr_online::harness::{run_grid, AdversaryKind, AdversarySpec, ExperimentSpec, RunOptions};
use dr_online::{Domain, FeedbackMode, LearnerKind};

fn main() -> dr_online::Result<()> {
    let adv = AdversarySpec { kind: AdversaryKind::IidRandom, instance_seed: 5, ..AdversarySpec::default() };
    let t = 4096;
    for mode in FeedbackMode::ALL {
        let spec = ExperimentSpec::new(Domain::unit_box(3)?, adv.clone(), mode, LearnerKind::SoOga);
        let p = spec.reduction_params(t);
        let res = run_grid(&spec, &[t], &[0, 1, 2], RunOptions::default())?;
        let s = &res[0].summary;
        let queries = res[0].runs[0].report.total_queries;
        println!(
            "{:<12} L = {:<3} delta = {:.4}  certificate {:>8.2}  regret {:>8.2}  queries {queries}",
            mode.as_str(),
            p.block_len,
            p.delta_smooth,
            s.static_certificate,
            s.static_regret
        );
    }
    Ok(())
}
