//! Subcommand bodies. Each returns the process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, SimMode};
use super::output::{describe, write_comparison_csv, write_summary, write_trace_csv, write_updates_csv};
use super::plot::{plot_traces, Reference};
use crate::double_integrator::Plant;
use crate::simulator::{self, Mode, SimTrace, Termination};
use crate::system::estimate_lipschitz;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_CONTROLLER_FAILURE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Exit code for a finished run: violation first, then controller failure.
pub fn exit_code(trace: &SimTrace) -> i32 {
    if trace.violated {
        EXIT_VIOLATION
    } else if matches!(
        trace.terminated,
        Termination::InfeasibleQp | Termination::NonpositiveMargin
    ) {
        EXIT_CONTROLLER_FAILURE
    } else {
        EXIT_OK
    }
}

fn box_references(cfg: &ExperimentConfig) -> Vec<Reference> {
    let p = &cfg.plant;
    vec![
        Reference { state: 0, value: p.x1_min, label: "x1_min".into() },
        Reference { state: 0, value: p.x1_max, label: "x1_max".into() },
        Reference { state: 1, value: p.x2_min, label: "x2_min".into() },
        Reference { state: 1, value: p.x2_max, label: "x2_max".into() },
    ]
}

fn build(cfg: &ExperimentConfig) -> Result<Plant> {
    cfg.setup().build().context("building plant")
}

fn simulate(plant: &Plant, cfg: &ExperimentConfig) -> Result<SimTrace> {
    simulator::run(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        &cfg.sim_config(),
    )
    .context("starting simulation")
}

/// trace.csv, updates.csv and summary.txt for one run.
pub fn write_run_files(dir: &Path, trace: &SimTrace, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trace_csv(&dir.join("trace.csv"), trace)?;
    write_updates_csv(&dir.join("updates.csv"), trace)?;
    write_summary(&dir.join("summary.txt"), trace, &cfg.to_text())?;
    Ok(())
}

fn mode_label(mode: Mode) -> String {
    match mode {
        Mode::SelfTriggered => "self_triggered".to_string(),
        Mode::Periodic { t_p } => format!("periodic_{t_p}"),
    }
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<i32> {
    let plant = build(cfg)?;
    let trace = simulate(&plant, cfg)?;
    write_run_files(out, &trace, cfg)?;
    let label = mode_label(cfg.sim_config().mode);
    plot_traces(out, &[(&label, &trace)], &box_references(cfg))?;
    print!("{}", describe(&trace));
    println!("output          {}", out.display());
    Ok(exit_code(&trace))
}

pub fn cmd_compare(cfg: &ExperimentConfig, t_p_list: &[f64], out: &Path) -> Result<i32> {
    if t_p_list.is_empty() {
        eprintln!("config error: compare needs at least one period");
        return Ok(EXIT_CONFIG);
    }
    if let Some(bad) = t_p_list.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        eprintln!("config error: periods must be positive, got {bad}");
        return Ok(EXIT_CONFIG);
    }
    let plant = build(cfg)?;
    let report = simulator::compare(
        &plant.system,
        &plant.safety,
        &plant.clf,
        (&plant.input_box.0, &plant.input_box.1),
        &cfg.sim_config(),
        t_p_list,
    )?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let labels: Vec<String> = report.rows.iter().map(|r| mode_label(r.mode)).collect();
    for ((row, trace), label) in report.rows.iter().zip(&report.traces).zip(&labels) {
        let mut run_cfg = cfg.clone();
        match row.mode {
            Mode::SelfTriggered => run_cfg.sim.mode = SimMode::SelfTriggered,
            Mode::Periodic { t_p } => {
                run_cfg.sim.mode = SimMode::Periodic;
                run_cfg.sim.t_p = t_p;
                run_cfg.sim.dt_int = cfg.sim.dt_int.min(t_p / 10.0);
            }
        }
        write_run_files(&out.join(label), trace, &run_cfg)?;
    }
    write_comparison_csv(&out.join("comparison.csv"), &report)?;
    let runs: Vec<(&str, &SimTrace)> = labels.iter().map(String::as_str).zip(&report.traces).collect();
    plot_traces(out, &runs, &box_references(cfg))?;
    println!("{:<22}{:>8}{:>14}{:>10}{:>12}", "run", "updates", "min_margin", "violated", "t_converge");
    for (row, label) in report.rows.iter().zip(&labels) {
        println!(
            "{:<22}{:>8}{:>14.6}{:>10}{:>12}",
            label,
            row.updates,
            row.min_margin,
            row.violated,
            row.t_converge.map_or("-".to_string(), |t| format!("{t:.4}"))
        );
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Mean and coefficient of variation of the last `n` inter-update intervals.
pub fn tail_statistics(trace: &SimTrace, n: usize) -> Option<(f64, f64)> {
    let iv = trace.intervals();
    if iv.len() < n || n == 0 {
        return None;
    }
    let tail = &iv[iv.len() - n..];
    let mean = tail.iter().sum::<f64>() / n as f64;
    let var = tail.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
    Some((mean, var.sqrt() / mean))
}

/// The three reference checks: self-triggered safety, periodic violation
/// window, and the settled update interval.
pub fn replication_checks(self_triggered: &SimTrace, periodic: &SimTrace) -> Vec<Check> {
    let st = self_triggered;
    let safe = st.min_margin.value >= -1e-6 && st.terminated == Termination::Goal;
    let window: Vec<String> = periodic
        .violations_of(0)
        .map(|v| format!("[{:.4}, {:.4}]", v.start, v.end))
        .collect();
    let hits = periodic.violations_of(0).any(|v| v.start <= 4.5 && v.end >= 2.5);
    let tail = tail_statistics(st, 10);
    vec![
        Check {
            name: "self-triggered run stays safe and reaches the goal",
            passed: safe,
            detail: format!(
                "min margin {:.6e} (h{}), terminated {} at t = {:.4}",
                st.min_margin.value,
                st.min_margin.barrier + 1,
                st.terminated,
                st.t_final
            ),
        },
        Check {
            name: "periodic run violates x1_min around t in [3, 4]",
            passed: periodic.violated && hits,
            detail: format!(
                "violated = {}, h1 negative on {}",
                periodic.violated,
                if window.is_empty() { "-".to_string() } else { window.join(", ") }
            ),
        },
        Check {
            name: "settled update interval in [0.30, 0.34] with CV < 5%",
            passed: tail.is_some_and(|(mean, cv)| (0.30..=0.34).contains(&mean) && cv < 0.05),
            detail: match tail {
                Some((mean, cv)) => format!("last 10 intervals: mean {mean:.4} s, CV {:.1}%", 100.0 * cv),
                None => "fewer than 10 intervals".to_string(),
            },
        },
    ]
}

pub fn cmd_replicate_paper(out: &Path) -> Result<i32> {
    let base = ExperimentConfig::default();
    let mut periodic_cfg = base.clone();
    periodic_cfg.sim.mode = SimMode::Periodic;
    let plant = build(&base)?;
    let (st, per) = std::thread::scope(|s| {
        let a = s.spawn(|| simulate(&plant, &base));
        let b = s.spawn(|| simulate(&plant, &periodic_cfg));
        (a.join().expect("run panicked"), b.join().expect("run panicked"))
    });
    let (st, per) = (st?, per?);
    write_run_files(&out.join("self_triggered"), &st, &base)?;
    write_run_files(&out.join("periodic"), &per, &periodic_cfg)?;
    let label = format!("periodic t_p = {}", periodic_cfg.sim.t_p);
    plot_traces(out, &[("self-triggered", &st), (&label, &per)], &box_references(&base)[..1])?;

    let checks = replication_checks(&st, &per);
    let mut report = String::new();
    for c in &checks {
        report.push_str(&format!(
            "[{}] {}\n       {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    report.push_str(&format!(
        "\nself-triggered updates: {}, periodic updates: {}\n",
        st.updates.len(),
        per.updates.len()
    ));
    fs::write(out.join("report.txt"), &report).context("writing report")?;
    print!("{report}");
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn cmd_estimate_lipschitz(cfg: &ExperimentConfig, out: Option<&PathBuf>) -> Result<i32> {
    let plant = build(cfg)?;
    let p = &cfg.plant;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.output.seed);
    let est = estimate_lipschitz(
        &plant.system,
        &[p.x1_min, p.x2_min],
        &[p.x1_max, p.x2_max],
        &[p.u_min],
        &[p.u_max],
        cfg.output.lipschitz_samples,
        &mut rng,
    )?;
    let mut text = format!(
        "declared L      {}\nsampled max     {}\nsamples         {}\nseed            {}\n",
        est.declared, est.max_ratio, est.samples, cfg.output.seed
    );
    if !est.consistent_with_declaration() {
        text.push_str("WARNING: sampled ratio exceeds the declared constant; trajectory bounds are not valid\n");
    }
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("lipschitz.txt"), &text).context("writing lipschitz.txt")?;
    }
    Ok(EXIT_OK)
}
