//! Self-triggered control against fixed-period sampling on the reference
//! double integrator. At `t_p = 0.75` the held input overshoots the position
//! limit; shorter periods stay safe at the cost of many more QP solves.
//!
//! `cargo run --release --example periodic_failure`

use cbf_trigger::{compare, DoubleIntegratorSetup, Mode, SimConfig, StateVector};

fn main() -> cbf_trigger::Result<()> {
    let setup = DoubleIntegratorSetup::default();
    let plant = setup.build()?;
    let base = SimConfig::self_triggered(StateVector::new(0.0, setup.x0())?);
    let report = compare(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        &base,
        &[0.75, 0.25, 0.05],
    )?;

    println!(
        "{:<16} {:>8} {:>12} {:>9} {:>11}  terminated",
        "run", "updates", "min_margin", "violated", "t_converge"
    );
    for (row, trace) in report.rows.iter().zip(&report.traces) {
        let label = match row.mode {
            Mode::SelfTriggered => "self-triggered".to_string(),
            Mode::Periodic { t_p } => format!("periodic {t_p}"),
        };
        println!(
            "{:<16} {:>8} {:>12.6} {:>9} {:>11}  {}",
            label,
            row.updates,
            row.min_margin,
            row.violated,
            row.t_converge.map_or("-".to_string(), |t| format!("{t:.4}")),
            row.terminated,
        );
        for v in &trace.violations {
            println!("    h{} < 0 on [{:.4}, {:.4}]", v.barrier + 1, v.start, v.end);
        }
    }
    Ok(())
}
