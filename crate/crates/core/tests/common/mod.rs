#![allow(dead_code)]

use cbf_trigger::double_integrator::{DoubleIntegratorSetup, Plant, RateSigning};
use cbf_trigger::simulator::{run, SimConfig, SimTrace};
use cbf_trigger::{StateVector, Vector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const KP: f64 = 105.0;
pub const KV: f64 = 20.5;
pub const K: f64 = 2.0;
pub const X1_MIN: f64 = -10.0;
pub const X1_MAX: f64 = 10.0;
pub const X2_MIN: f64 = -10.0;
pub const X2_MAX: f64 = 10.0;
pub const U_MAX: f64 = 20.0;

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reference_plant() -> Plant {
    DoubleIntegratorSetup::default().build().unwrap()
}

pub fn plant_with(signing: RateSigning) -> Plant {
    DoubleIntegratorSetup { signing, ..DoubleIntegratorSetup::default() }.build().unwrap()
}

pub fn simulate(plant: &Plant, cfg: &SimConfig) -> SimTrace {
    run(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        cfg,
    )
    .unwrap()
}

pub fn reference_run() -> SimTrace {
    let plant = reference_plant();
    let x0 = StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap();
    simulate(&plant, &SimConfig::self_triggered(x0))
}

/// Exact double-integrator flow under held `u` (valid for negative `t`).
pub fn ballistic(x: [f64; 2], u: f64, t: f64) -> [f64; 2] {
    [x[0] + x[1] * t + 0.5 * u * t * t, x[1] + u * t]
}

/// `V` about `[-7, 0]` with `P = [[1, ½], [½, 1]]`, written out by hand.
pub fn v_ref(x: [f64; 2]) -> f64 {
    let (e1, e2) = (x[0] + 7.0, x[1]);
    e1 * e1 + e1 * e2 + e2 * e2
}

/// The four box constraints at the reference gains, written out by hand.
pub fn zetas_ref(x: [f64; 2], u: f64) -> [f64; 4] {
    [
        u + KV * x[1] + KP * (x[0] - X1_MIN),
        -u - KV * x[1] + KP * (X1_MAX - x[0]),
        u + K * (x[1] - X2_MIN),
        -u + K * (X2_MAX - x[1]),
    ]
}

pub fn random_state(r: &mut ChaCha8Rng) -> [f64; 2] {
    [r.random_range(X1_MIN..=X1_MAX), r.random_range(X2_MIN..=X2_MAX)]
}

pub fn random_input(r: &mut ChaCha8Rng) -> f64 {
    r.random_range(-U_MAX..=U_MAX)
}

pub fn report(id: u32, title: &str, passed: bool, detail: &str) {
    println!(
        "[{}] criterion {id}: {title} | {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}
