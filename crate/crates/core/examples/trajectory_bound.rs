//! How one hold duration is certified: the Lipschitz tube around `x_k`, the
//! resulting lower bound on each barrier constraint, and the CLF period,
//! compared against the exact held-input flow.
//!
//! `cargo run --example trajectory_bound`

use cbf_trigger::trigger::{clf_update_period_detail, zeta_lower_bound};
use cbf_trigger::qp::{assemble, solve};
use cbf_trigger::{decide, trajectory_bound, zeta, DoubleIntegratorSetup, StateVector, TriggerConfig, Vector};

fn main() -> cbf_trigger::Result<()> {
    let plant = DoubleIntegratorSetup::default().build()?;
    let cfg = TriggerConfig::default();
    let x_k = StateVector::from_slice(0.0, &[8.0, 4.0])?;
    let p = assemble(&x_k.entries, &plant.safety, &plant.clf, (&plant.input_box.0, &plant.input_box.1))?;
    let u = solve(&p)?.u_star;
    let bound = trajectory_bound(&plant.system, &x_k, &u)?;
    let d = decide(&plant.safety, &plant.clf, &plant.system, &x_k, &u, &cfg)?;

    println!("x_k = [8, 4], u_k = {:.4}", u[0]);
    println!("‖F(x_k, u_k)‖ = {:.4}, L = {}", bound.speed_norm, bound.lipschitz_const);
    for (i, tau) in d.tau_cbf_per_barrier.iter().enumerate() {
        println!("  tau_cbf(h{}) = {tau:.5}", i + 1);
    }
    let clf = clf_update_period_detail(&plant.clf, &x_k, &u, &cfg);
    println!(
        "  tau_clf = {:.5} (V̇ = {:.4}, D = {:.4}, certified = {})",
        clf.tau, clf.vdot, clf.curvature, clf.certified
    );
    println!("hold tau = {:.5}, limited by {}", d.tau, d.limiting);
    println!();

    // exact flow of ẍ = u for comparison
    let flow = |t: f64| {
        Vector::from_column_slice(&[
            x_k.entries[0] + x_k.entries[1] * t + 0.5 * u[0] * t * t,
            x_k.entries[1] + u[0] * t,
        ])
    };
    let b = &plant.safety.barriers()[1];
    println!("{:>7} {:>10} {:>10} {:>12} {:>12}", "t", "r̄(t)", "‖x − x_k‖", "ζ2 lower", "ζ2 exact");
    for j in 0..=10 {
        let t = d.tau * j as f64 / 10.0;
        let x = flow(t);
        println!(
            "{:>7.4} {:>10.5} {:>10.5} {:>12.4} {:>12.4}",
            t,
            bound.radius(t),
            (&x - &x_k.entries).norm(),
            zeta_lower_bound(b, &x_k, &u, &bound, t)?,
            zeta(b, &x, &u)?
        );
    }
    Ok(())
}
