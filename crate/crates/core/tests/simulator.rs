mod common;

use cbf_trigger::simulator::{compare, integrate_held, Mode, SimConfig, Termination, UpdateKind};
use cbf_trigger::trigger::Limiting;
use cbf_trigger::{double_integrator, StateVector};
use common::*;
use rand::RngExt;

#[test]
fn rk4_matches_closed_form() {
    let sys = double_integrator();
    let mut r = rng(21);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let (x, u) = (random_state(&mut r), random_input(&mut r));
        let tau = r.random_range(0.0..=1.0);
        let dt = r.random_range(1e-4..=0.05);
        let y = integrate_held(&sys, &StateVector::from_slice(0.0, &x).unwrap(), &v(&[u]), tau, dt).unwrap();
        let exact = ballistic(x, u, tau);
        worst = worst.max((y.entries[0] - exact[0]).abs()).max((y.entries[1] - exact[1]).abs());
        assert_eq!(y.time, tau);
    }
    assert!(worst <= 1e-10, "max deviation {worst:e}");
}

#[test]
fn zoh_contract_and_sample_ordering() {
    for trace in [reference_run(), {
        let plant = reference_plant();
        simulate(&plant, &SimConfig::periodic(StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap(), 0.75))
    }] {
        assert!(trace.samples.windows(2).all(|w| w[0].t < w[1].t));
        let mut held = None;
        for s in &trace.samples {
            match s.update {
                Some(k) => {
                    assert_eq!(s.t, trace.updates[k].t);
                    assert_eq!(s.u, trace.updates[k].u);
                    held = Some(s.u.clone());
                }
                None => assert_eq!(Some(&s.u), held.as_ref(), "u changed inside a hold at t = {}", s.t),
            }
        }
        assert_eq!(trace.samples.iter().filter(|s| s.update.is_some()).count(), trace.updates.len());
    }
}

#[test]
fn randomized_initial_states_stay_safe() {
    let plant = reference_plant();
    let mut r = rng(22);
    let x0s: Vec<[f64; 2]> = (0..100)
        .map(|_| [r.random_range(X1_MIN + 1.0..=X1_MAX - 1.0), r.random_range(X2_MIN + 1.0..=X2_MAX - 1.0)])
        .collect();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = x0s
            .chunks(25)
            .map(|chunk| {
                let plant = &plant;
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|x0| {
                            let cfg = SimConfig::self_triggered(StateVector::from_slice(0.0, x0).unwrap());
                            (*x0, simulate(plant, &cfg))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let mut outcomes = std::collections::BTreeMap::new();
    for (x0, trace) in &results {
        assert!(!trace.violated, "x0 = {x0:?}: min margin {:?}", trace.min_margin);
        *outcomes.entry(trace.terminated.to_string()).or_insert(0) += 1;
        // descent over every CLF-limited hold
        for (k, up) in trace.updates.iter().enumerate() {
            if up.kind.decision().unwrap().limiting == Limiting::Clf {
                let next = trace.updates.get(k + 1).map_or(&trace.x_final, |n| &n.x);
                assert!(v_ref([next[0], next[1]]) <= up.v + 1e-8, "x0 = {x0:?}, update {k}");
            }
        }
    }
    println!("randomized runs by termination: {outcomes:?}");
}

#[test]
fn halving_the_step_leaves_the_final_state() {
    let plant = reference_plant();
    let x0 = StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap();
    let coarse = simulate(&plant, &SimConfig::self_triggered(x0.clone()));
    let fine_cfg = SimConfig { dt_int: 1.25e-5, log_every: 80, ..SimConfig::self_triggered(x0) };
    let fine = simulate(&plant, &fine_cfg);
    assert_eq!(coarse.terminated, fine.terminated);
    assert_eq!(coarse.updates.len(), fine.updates.len());
    let diff = (&coarse.x_final - &fine.x_final).norm();
    assert!(diff < 1e-8, "final states differ by {diff:e}");
}

#[test]
fn identical_config_gives_identical_trace() {
    assert_eq!(reference_run(), reference_run());
}

#[test]
fn fast_periodic_control_stays_safe_with_many_more_updates() {
    let plant = reference_plant();
    let base = SimConfig::self_triggered(StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap());
    let report = compare(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        &base,
        &[0.75, 1e-3],
    )
    .unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.rows[0].mode, Mode::SelfTriggered);
    assert!(!report.rows[0].violated);
    assert!(report.rows[1].violated);
    assert!(!report.rows[2].violated);
    assert!(report.rows[2].updates > 10 * report.rows[0].updates);
    assert!(compare(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        &base,
        &[],
    )
    .is_err());
}

#[test]
fn periodic_run_records_failure_after_leaving_the_safe_set() {
    let plant = reference_plant();
    let trace = simulate(&plant, &SimConfig::periodic(StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap(), 0.75));
    assert_eq!(trace.terminated, Termination::InfeasibleQp);
    assert!(trace.diagnostic.as_deref().unwrap().contains("outside the safe set"));
    assert!(trace.updates.iter().all(|u| matches!(u.kind, UpdateKind::Periodic { t_p } if t_p == 0.75)));
    assert_eq!(trace.min_margin.barrier, 0);
}

#[test]
fn t_end_truncates_the_last_hold() {
    let plant = reference_plant();
    let cfg = SimConfig { t_end: 1.0, ..SimConfig::self_triggered(StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap()) };
    let trace = simulate(&plant, &cfg);
    assert_eq!(trace.terminated, Termination::TEnd);
    assert_eq!(trace.t_final, 1.0);
    assert_eq!(trace.samples.last().unwrap().t, 1.0);
}

#[test]
fn relaxed_clf_stays_safe_and_approaches_the_goal() {
    // slack keeps V̇ near zero close to the goal, so holds shrink to tau_min there
    let plant = reference_plant();
    let cfg = SimConfig {
        clf_penalty: Some(1e3),
        ..SimConfig::self_triggered(StateVector::from_slice(0.0, &[6.0, 5.0]).unwrap())
    };
    let trace = simulate(&plant, &cfg);
    assert!(!trace.violated);
    assert!(trace.updates.iter().all(|u| u.slack >= 0.0));
    let v0 = v_ref([6.0, 5.0]);
    let v_end = v_ref([trace.x_final[0], trace.x_final[1]]);
    assert!(v_end < 1e-3 * v0, "V fell from {v0} to {v_end}");
}
