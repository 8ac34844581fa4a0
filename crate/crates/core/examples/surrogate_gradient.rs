//! The surrogate gradient by quadrature versus its one-query estimator.
//!
//! Run with `cargo run --example surrogate_gradient`.

use dr_online::objectives::{Objective, OracleSpec, StochasticOracle};
use dr_online::surrogate::{bqnd_estimate, h_map, SurrogateContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dr_online::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = Objective::random(4, 0.5, &mut rng);
    let ctx = SurrogateContext::new(&f, 128)?;
    let x = [0.3, 0.8, 0.1, 0.5];
    println!("f(h(x)) = {:.6}", f.value(&h_map(&x))?);
    let exact = ctx.grad_f_quadrature(&x)?;
    println!("quadrature gradient: {exact:.6?}");

    let mut oracle = StochasticOracle::new(OracleSpec::first_order(f.lipschitz(), 4, 0.1, 2));
    let n = 50_000;
    let mut mean = vec![0.0; 4];
    for _ in 0..n {
        for (m, g) in mean.iter_mut().zip(bqnd_estimate(&ctx, &x, &mut oracle, &mut rng)?) {
            *m += g / n as f64;
        }
    }
    println!("mean of {n} single-query estimates: {mean:.6?}");
    println!("oracle queries used: {}", oracle.queries());

    let y = [1.0, 0.0, 0.5, 0.2];
    println!("linearization gap at (x, y): {:.3e}", ctx.certify_linearization(&x, &y)?);
    Ok(())
}
