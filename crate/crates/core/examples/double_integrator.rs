//! Self-triggered run of the double integrator from `[6, 5]` to `[-7, 0]`
//! inside the box `|x_i| ≤ 10`.
//!
//! `cargo run --release --example double_integrator`

use cbf_trigger::{run, DoubleIntegratorSetup, SimConfig, StateVector};

fn main() -> cbf_trigger::Result<()> {
    let setup = DoubleIntegratorSetup::default();
    let plant = setup.build()?;
    let cfg = SimConfig::self_triggered(StateVector::new(0.0, setup.x0())?);
    let started = std::time::Instant::now();
    let trace = run(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        &cfg,
    )?;
    let elapsed = started.elapsed();

    println!("{:>9} {:>10} {:>10} {:>10} {:>9}  limiting", "t", "x1", "x2", "u", "tau");
    for up in &trace.updates {
        let d = up.kind.decision().expect("self-triggered run");
        println!(
            "{:>9.4} {:>10.4} {:>10.4} {:>10.4} {:>9.4}  {}",
            up.t, up.x[0], up.x[1], up.u[0], d.tau, d.limiting
        );
    }
    println!();
    println!("terminated:    {} at t = {:.4}", trace.terminated, trace.t_final);
    println!("updates:       {}", trace.updates.len());
    println!(
        "min margin:    {:.6} (h{} at t = {:.4})",
        trace.min_margin.value,
        trace.min_margin.barrier + 1,
        trace.min_margin.time
    );
    println!("violated:      {}", trace.violated);
    let tail: Vec<f64> = trace.intervals().into_iter().rev().take(10).collect();
    if !tail.is_empty() {
        println!(
            "tail interval: {:.4} (mean of last {})",
            tail.iter().sum::<f64>() / tail.len() as f64,
            tail.len()
        );
    }
    println!("wall time:     {elapsed:.2?} for {} substeps", trace.substeps);
    Ok(())
}
