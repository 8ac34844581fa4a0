//! Geometry oracles on the three supported down-closed domains.
//!
//! Run with `cargo run --example domains`.

use dr_online::geometry::{Domain, Separation, MEMBERSHIP_TOL};

fn main() -> dr_online::Result<()> {
    let domains = [
        ("unit box", Domain::unit_box(3)?),
        ("scaled box", Domain::scaled_box(3, 0.6)?),
        ("knapsack", Domain::knapsack(vec![1.0, 2.0, 0.5], 1.5)?),
    ];
    let outside = [1.4, -0.2, 0.9];
    let c = [1.0, -1.0, 0.5];
    for (name, dom) in &domains {
        println!("{name}: center {:.4?}, r = {:.4}, D = {:.4}", dom.center(), dom.inner_radius(), dom.diameter());
        let p = dom.euclidean_project(&outside)?;
        println!("  projection of {outside:?} -> {p:.4?} (feasible: {})", dom.contains(&p, MEMBERSHIP_TOL)?);
        if let Separation::Hyperplane(g) = dom.separate(&outside)? {
            println!("  separating normal {g:.4?}");
        }
        println!("  argmax <c, x> for c = {c:?}: {:.4?}", dom.linear_maximize(&c)?);
        let small = dom.shrink(0.5 * dom.inner_radius())?;
        println!("  shrunk by r/2: r = {:.4}, contraction {:.4}", small.inner_radius(), small.contraction());
    }
    Ok(())
}
