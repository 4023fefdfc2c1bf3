//! Standalone use of the minimum-norm QP: the double-integrator program at a
//! few states, a hand-built planar problem, and the effect of CLF relaxation.
//!
//! `cargo run --example qp_solve`

use cbf_trigger::qp::{assemble, solve};
use cbf_trigger::{DoubleIntegratorSetup, QpProblem, QpRow, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn main() -> cbf_trigger::Result<()> {
    let plant = DoubleIntegratorSetup::default().build()?;
    let input_box = (&plant.input_box.0, &plant.input_box.1);

    println!("double integrator, rows: h1..h4 (>= 0), CLF (<= 0)");
    for x in [[6.0, 5.0], [9.0, 3.0], [-9.0, -3.0], [-7.5, 0.0]] {
        let p = assemble(&v(&x), &plant.safety, &plant.clf, input_box)?;
        match solve(&p) {
            Ok(s) => println!(
                "  x = {x:?}: u* = {:.4}, active rows {:?}",
                s.u_star[0],
                s.active_set.iter().map(|i| i + 1).collect::<Vec<_>>()
            ),
            Err(e) => {
                let relaxed = solve(&p.clone().with_relaxation(Some(1e3)))?;
                println!(
                    "  x = {x:?}: {e}; relaxed u* = {:.4}, slack = {:.4}",
                    relaxed.u_star[0], relaxed.slack
                );
            }
        }
    }

    // min ‖u‖² s.t. u1 + u2 ≥ 2, u1 − u2 ≤ 1, |u_i| ≤ 3
    let p = QpProblem::new(
        vec![QpRow::geq(v(&[1.0, 1.0]), -2.0), QpRow::leq(v(&[1.0, -1.0]), -1.0)],
        v(&[-3.0, -3.0]),
        v(&[3.0, 3.0]),
    );
    let s = solve(&p)?;
    println!();
    println!(
        "planar: u* = [{:.4}, {:.4}], objective {:.4}, active {:?}",
        s.u_star[0], s.u_star[1], s.objective, s.active_set
    );

    let conflicting = QpProblem::new(
        vec![QpRow::geq(v(&[1.0, 1.0]), -2.0), QpRow::leq(v(&[1.0, 1.0]), -1.0)],
        v(&[-3.0, -3.0]),
        v(&[3.0, 3.0]),
    );
    println!("conflicting rows: {}", solve(&conflicting).unwrap_err());

    // relaxation trades the LEQ row against input effort: u1 ≥ 1 and u1 + u2 ≥ 3 − δ
    let soft = QpProblem::new(
        vec![QpRow::geq(v(&[1.0, 0.0]), -1.0), QpRow::leq(v(&[-1.0, -1.0]), 3.0)],
        v(&[-3.0, -3.0]),
        v(&[3.0, 3.0]),
    );
    let s = solve(&soft)?;
    println!("hard: u* = [{:.4}, {:.4}]", s.u_star[0], s.u_star[1]);
    for penalty in [0.1, 1.0, 10.0, 1e3] {
        let s = solve(&soft.clone().with_relaxation(Some(penalty)))?;
        println!(
            "  penalty {penalty:>6}: u* = [{:.4}, {:.4}], slack {:.5}",
            s.u_star[0], s.u_star[1], s.slack
        );
    }
    Ok(())
}
