//! Empirical check of a declared Lipschitz constant. The estimate is a lower
//! bound on the true constant, so it can refute a declaration but never
//! confirm one.
//!
//! `cargo run --example lipschitz_estimate`

use cbf_trigger::{double_integrator, estimate_lipschitz};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cbf_trigger::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for declared in [1.0, 0.9, 2.0] {
        let sys = double_integrator().with_lipschitz_const(declared)?;
        let est = estimate_lipschitz(
            &sys,
            &[-10.0, -10.0],
            &[10.0, 10.0],
            &[-20.0],
            &[20.0],
            10_000,
            &mut rng,
        )?;
        println!(
            "declared L = {declared:<4} sampled max ratio = {:.6} over {} pairs: {}",
            est.max_ratio,
            est.samples,
            if est.consistent_with_declaration() { "consistent" } else { "REFUTED" }
        );
    }
    Ok(())
}
