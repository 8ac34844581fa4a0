//! Log-log slope of the regret certificate, persisted as CSV and SVG.
//!
//! Run with `cargo run --release --example rate_sweep`.

use dr_online::harness::persist::{write_plot, write_summary, PlotSeries};
use dr_online::harness::{fit_slope, run_grid, AdversaryKind, AdversarySpec, ExperimentSpec, RunOptions};
use dr_online::{Domain, FeedbackMode, LearnerKind};

fn main() -> dr_online::Result<()> {
    let out = std::env::temp_dir().join("dr_online_rate_sweep");
    let adv = AdversarySpec { kind: AdversaryKind::IidRandom, instance_seed: 7, ..AdversarySpec::default() };
    let horizons = [512, 1024, 2048, 4096];
    let seeds: Vec<u64> = (0..4).collect();
    let mut series = Vec::new();
    for (mode, target) in [(FeedbackMode::FirstFull, 0.5), (FeedbackMode::SemiBandit, 2.0 / 3.0)] {
        let spec = ExperimentSpec::new(Domain::unit_box(3)?, adv.clone(), mode, LearnerKind::SoOga);
        let rows: Vec<_> = run_grid(&spec, &horizons, &seeds, RunOptions::default())?.into_iter().map(|h| h.summary).collect();
        let pts: Vec<(f64, f64)> = rows.iter().map(|s| (s.horizon as f64, s.static_certificate)).collect();
        let fit = fit_slope(&pts)?;
        println!("{:<12} slope {:.3} (target {target:.3}), r2 {:.3}", mode.as_str(), fit.slope, fit.r2);
        write_summary(&out, mode.as_str(), "so_oga", &rows)?;
        series.push(PlotSeries { label: mode.as_str().to_string(), points: pts });
    }
    write_plot(&out.join("certificate.svg"), "regret certificate", &series)?;
    println!("wrote {}", out.display());
    Ok(())
}
