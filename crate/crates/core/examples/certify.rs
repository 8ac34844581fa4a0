//! Structural certification sweeps with a reduced budget.
//!
//! Run with `cargo run --release --example certify`.

use dr_online::config::VerifySpec;
use dr_online::verify::{certify, format_checks};

fn main() -> dr_online::Result<()> {
    let spec = VerifySpec { instances: 5, samples: 2000, bqnd_draws: 20_000, so_ip_cases: 200, ..VerifySpec::default() };
    let checks = certify(&spec, 128, false)?;
    print!("{}", format_checks(&checks));
    let sabotaged = certify(&spec, 128, true)?;
    let caught: Vec<_> = sabotaged.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    println!("sign-flipped estimator is caught by: {caught:?}");
    Ok(())
}
