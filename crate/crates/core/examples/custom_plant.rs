//! A user-defined plant: planar single integrator `ẋ = u` with two inputs,
//! a ceiling `x2 ≤ 1` and a slanted wall `x1 − x2 ≤ 4`, steered from
//! `[-3, -1]` to `[3, 0.5]`.
//!
//! `cargo run --release --example custom_plant`

use cbf_trigger::system::Matrix;
use cbf_trigger::{
    run, AffineSystem, BarrierCertificate, LieTerms, LyapunovCertificate, SafetySpec, SimConfig,
    StateVector, Vector,
};

const GOAL: [f64; 2] = [3.0, 0.5];
const K: f64 = 1.0;

/// Half-plane `h = c − aᵀx ≥ 0`. Under held `u`, `ζ̇ = −k·aᵀu` exactly.
fn half_plane(label: &str, a: [f64; 2], c: f64) -> cbf_trigger::Result<BarrierCertificate> {
    let av = Vector::from_column_slice(&a);
    let a_lie = av.clone();
    BarrierCertificate::zeroing(
        label,
        K,
        move |x| c - av.dot(x),
        move |_| LieTerms { drift: 0.0, input: -&a_lie },
        move |_, u, _| -K * (a[0] * u[0] + a[1] * u[1]),
    )
}

fn main() -> cbf_trigger::Result<()> {
    // F(x) = u does not depend on x; any positive constant is valid
    let sys = AffineSystem::new(
        "single_integrator_2d",
        2,
        2,
        1e-6,
        |_| Vector::zeros(2),
        |_| Matrix::identity(2, 2),
    )?;
    let safety = SafetySpec::new(vec![
        half_plane("ceiling x2 <= 1", [0.0, 1.0], 1.0)?,
        half_plane("wall x1 - x2 <= 4", [1.0, -1.0], 4.0)?,
    ])?;
    let goal = Vector::from_column_slice(&GOAL);
    let (g_v, g_lie) = (goal.clone(), goal.clone());
    // V = ‖x − x_d‖², so V'' = 2‖u‖² along any held-input flow
    // ε = 1 would make the CLF row infeasible at x0 under |u_i| ≤ 2
    let clf = LyapunovCertificate::new(
        goal,
        0.5,
        move |x| (x - &g_v).norm_squared(),
        move |x| LieTerms { drift: 0.0, input: 2.0 * (x - &g_lie) },
        |_, u| 2.0 * u.norm_squared(),
    )?;
    let lo = Vector::from_element(2, -2.0);
    let hi = Vector::from_element(2, 2.0);

    let cfg = SimConfig::self_triggered(StateVector::from_slice(0.0, &[-3.0, -1.0])?);
    let trace = run(&sys, &safety, &clf, (&lo, &hi), &cfg)?;

    println!("{:>8} {:>9} {:>9} {:>9} {:>9} {:>8}  limiting", "t", "x1", "x2", "u1", "u2", "tau");
    for up in &trace.updates {
        let d = up.kind.decision().expect("self-triggered run");
        println!(
            "{:>8.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.4}  {}",
            up.t, up.x[0], up.x[1], up.u[0], up.u[1], d.tau, d.limiting
        );
    }
    println!();
    println!("terminated: {} at t = {:.4}", trace.terminated, trace.t_final);
    println!(
        "min margin: {:.6} ({} at t = {:.4})",
        trace.min_margin.value,
        safety.barriers()[trace.min_margin.barrier].label(),
        trace.min_margin.time
    );
    println!("violated:   {}", trace.violated);
    if let Some(msg) = &trace.diagnostic {
        println!("diagnostic: {msg}");
    }
    Ok(())
}
