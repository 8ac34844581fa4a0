//! One full-information run: realized 1/e-regret and its certificate.
//!
//! Run with `cargo run --release --example static_regret`.

use dr_online::harness::{evaluate, run_once, AdversaryKind, AdversarySpec, Environment, ExperimentSpec, RunOptions};
use dr_online::{Domain, FeedbackMode, LearnerKind};

fn main() -> dr_online::Result<()> {
    let adv = AdversarySpec { kind: AdversaryKind::IidRandom, instance_seed: 3, ..AdversarySpec::default() };
    let dom = Domain::knapsack(vec![1.0, 1.0, 2.0], 2.0)?;
    let spec = ExperimentSpec::new(dom, adv, FeedbackMode::FirstFull, LearnerKind::SoOga);
    for t in [1024, 4096] {
        let env = Environment::build(&spec, t)?;
        let rec = run_once(&env, &spec, 0, RunOptions::default())?;
        let (r, _) = evaluate(&env, &rec)?;
        println!(
            "T = {t}: reward {:.1}, best fixed {:.1}, 1/e-regret {:.2}, certificate {:.2} (linear regret {:.2})",
            r.total_reward, r.benchmark_value, r.static_regret, r.static_certificate, r.linear_regret
        );
    }
    Ok(())
}
