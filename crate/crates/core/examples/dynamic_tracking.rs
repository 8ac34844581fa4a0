//! Ader versus a single SO-OGA learner on a drifting adversary.
//!
//! Run with `cargo run --release --example dynamic_tracking`.

use dr_online::harness::{run_grid, AdversaryKind, AdversarySpec, ExperimentSpec, RunOptions};
use dr_online::{Domain, FeedbackMode, LearnerKind};

fn main() -> dr_online::Result<()> {
    let adv = AdversarySpec { kind: AdversaryKind::Drifting, instance_seed: 7, ..AdversarySpec::default() };
    for learner in [LearnerKind::Ader, LearnerKind::SoOga] {
        let mut spec = ExperimentSpec::new(Domain::unit_box(3)?, adv.clone(), FeedbackMode::FirstFull, learner);
        spec.dynamic = true;
        for h in run_grid(&spec, &[1024, 4096], &[0, 1, 2], RunOptions::default())? {
            let s = &h.summary;
            let scale = (s.horizon as f64 * (1.0 + s.path_length_pt)).sqrt();
            println!(
                "{:<7} T = {:<5} P_T = {:>6.3}  dynamic regret {:>9.2}  certificate / sqrt(T(1+P_T)) {:.4}",
                learner.as_str(),
                s.horizon,
                s.path_length_pt,
                s.dynamic_regret,
                s.dynamic_certificate / scale
            );
        }
    }
    Ok(())
}
