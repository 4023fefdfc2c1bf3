//! Closed-loop zero-order-hold simulation in self-triggered and periodic mode.
//!
//! Barrier margins and `V` are evaluated at every RK4 substep. The stored
//! sample list is decimated by `log_every`; the minimum margin and the
//! violation intervals are not.

use std::fmt;

use crate::certificates::{LyapunovCertificate, SafetySpec};
use crate::error::{check_dim, Error, Result};
use crate::qp::{assemble, solve};
use crate::system::{AffineSystem, StateVector, Vector};
use crate::trigger::{decide, TriggerConfig, TriggerDecision};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    SelfTriggered,
    Periodic { t_p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub x0: StateVector,
    pub goal_radius: f64,
    pub t_end: f64,
    pub dt_int: f64,
    pub mode: Mode,
    pub trigger: TriggerConfig,
    /// CLF slack penalty; `None` keeps the CLF row hard.
    pub clf_penalty: Option<f64>,
    /// Store every `log_every`-th substep in `SimTrace::samples`.
    pub log_every: usize,
}

impl SimConfig {
    pub fn self_triggered(x0: StateVector) -> Self {
        let trigger = TriggerConfig::default();
        Self {
            x0,
            goal_radius: 1e-2,
            t_end: 20.0,
            dt_int: trigger.tau_min / 4.0,
            mode: Mode::SelfTriggered,
            trigger,
            clf_penalty: None,
            log_every: 40,
        }
    }

    pub fn periodic(x0: StateVector, t_p: f64) -> Self {
        let base = Self::self_triggered(x0);
        Self {
            dt_int: base.dt_int.min(t_p / 10.0),
            mode: Mode::Periodic { t_p },
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("goal_radius", self.goal_radius)?;
        positive("t_end", self.t_end)?;
        positive("dt_int", self.dt_int)?;
        if self.log_every == 0 {
            return Err(Error::InvalidParameter("log_every must be at least 1".to_string()));
        }
        if let Some(p) = self.clf_penalty {
            positive("clf_penalty", p)?;
        }
        match self.mode {
            Mode::SelfTriggered => {
                self.trigger.validate()?;
                if self.dt_int > self.trigger.tau_min / 4.0 {
                    return Err(Error::InvalidParameter(format!(
                        "dt_int = {} exceeds tau_min / 4 = {}",
                        self.dt_int,
                        self.trigger.tau_min / 4.0
                    )));
                }
            }
            Mode::Periodic { t_p } => {
                positive("t_p", t_p)?;
                if self.dt_int > t_p / 10.0 {
                    return Err(Error::InvalidParameter(format!(
                        "dt_int = {} exceeds t_p / 10 = {}",
                        self.dt_int,
                        t_p / 10.0
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    pub u: Vector,
    pub h: Vec<f64>,
    pub v: f64,
    /// Index into `SimTrace::updates` when this sample is an update instant.
    pub update: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateKind {
    SelfTriggered(TriggerDecision),
    Periodic { t_p: f64 },
}

impl UpdateKind {
    /// Scheduled hold, before truncation at `t_end`.
    pub fn tau(&self) -> f64 {
        match self {
            UpdateKind::SelfTriggered(d) => d.tau,
            UpdateKind::Periodic { t_p } => *t_p,
        }
    }

    pub fn decision(&self) -> Option<&TriggerDecision> {
        match self {
            UpdateKind::SelfTriggered(d) => Some(d),
            UpdateKind::Periodic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub t: f64,
    pub x: Vector,
    pub u: Vector,
    pub v: f64,
    pub kind: UpdateKind,
    pub active_set: Vec<usize>,
    /// CLF slack; zero when the CLF row is hard.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMargin {
    pub value: f64,
    pub barrier: usize,
    pub time: f64,
}

/// Substep-resolution interval on which a barrier was negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationInterval {
    pub barrier: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Goal,
    TEnd,
    InfeasibleQp,
    NonpositiveMargin,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Goal => "GOAL",
            Termination::TEnd => "T_END",
            Termination::InfeasibleQp => "INFEASIBLE_QP",
            Termination::NonpositiveMargin => "NONPOSITIVE_MARGIN",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub samples: Vec<Sample>,
    pub updates: Vec<UpdateRecord>,
    pub min_margin: MinMargin,
    pub violated: bool,
    pub violations: Vec<ViolationInterval>,
    pub terminated: Termination,
    pub diagnostic: Option<String>,
    pub t_final: f64,
    pub x_final: Vector,
    pub substeps: usize,
}

impl SimTrace {
    /// Differences between consecutive update instants.
    pub fn intervals(&self) -> Vec<f64> {
        self.updates.windows(2).map(|w| w[1].t - w[0].t).collect()
    }

    pub fn mean_interval(&self) -> Option<f64> {
        let iv = self.intervals();
        (!iv.is_empty()).then(|| iv.iter().sum::<f64>() / iv.len() as f64)
    }

    pub fn max_interval(&self) -> Option<f64> {
        self.intervals().into_iter().reduce(f64::max)
    }

    /// Time the goal ball was reached, if it was.
    pub fn t_converge(&self) -> Option<f64> {
        (self.terminated == Termination::Goal).then_some(self.t_final)
    }

    pub fn violations_of(&self, barrier: usize) -> impl Iterator<Item = &ViolationInterval> {
        self.violations.iter().filter(move |v| v.barrier == barrier)
    }
}

fn rk4_step(sys: &AffineSystem, x: &Vector, u: &Vector, h: f64) -> Vector {
    let k1 = sys.vector_field_unchecked(x, u);
    let k2 = sys.vector_field_unchecked(&(x + &k1 * (0.5 * h)), u);
    let k3 = sys.vector_field_unchecked(&(x + &k2 * (0.5 * h)), u);
    let k4 = sys.vector_field_unchecked(&(x + &k3 * h), u);
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Integrates under held `u` for `duration`, calling `on_step(j, elapsed, x)`
/// after each substep `j = 1..=n`. Substep `n` lands exactly on `duration`.
fn hold(
    sys: &AffineSystem,
    x: &Vector,
    u: &Vector,
    duration: f64,
    dt: f64,
    mut on_step: impl FnMut(usize, usize, f64, &Vector),
) -> Vector {
    if duration <= 0.0 {
        return x.clone();
    }
    let full = (duration / dt).floor();
    let remainder = duration - full * dt;
    let mut n = full as usize;
    let partial = remainder > 1e-12 * duration;
    if partial {
        n += 1;
    }
    let mut x = x.clone();
    let mut prev = 0.0;
    for j in 1..=n {
        let elapsed = if j == n { duration } else { j as f64 * dt };
        x = rk4_step(sys, &x, u, elapsed - prev);
        prev = elapsed;
        on_step(j, n, elapsed, &x);
    }
    x
}

/// Fixed-step RK4 under a held input; the last substep is shortened to land
/// exactly on `x.time + duration`.
pub fn integrate_held(
    sys: &AffineSystem,
    x: &StateVector,
    u: &Vector,
    duration: f64,
    dt_int: f64,
) -> Result<StateVector> {
    check_dim("state", sys.state_dim(), x.entries.len())?;
    check_dim("input", sys.input_dim(), u.len())?;
    if !(duration >= 0.0 && duration.is_finite()) || !(dt_int > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "integration needs duration >= 0 and dt_int > 0, got {duration} and {dt_int}"
        )));
    }
    let entries = hold(sys, &x.entries, u, duration, dt_int, |_, _, _, _| {});
    Ok(StateVector {
        time: x.time + duration,
        entries,
    })
}

struct MarginTracker {
    min: MinMargin,
    open: Vec<Option<ViolationInterval>>,
    closed: Vec<ViolationInterval>,
}

impl MarginTracker {
    fn new(barriers: usize) -> Self {
        Self {
            min: MinMargin {
                value: f64::INFINITY,
                barrier: 0,
                time: 0.0,
            },
            open: vec![None; barriers],
            closed: Vec::new(),
        }
    }

    fn observe(&mut self, t: f64, h: &[f64]) {
        for (i, &hi) in h.iter().enumerate() {
            if hi < self.min.value {
                self.min = MinMargin { value: hi, barrier: i, time: t };
            }
            if hi < 0.0 {
                match &mut self.open[i] {
                    Some(iv) => iv.end = t,
                    slot @ None => {
                        *slot = Some(ViolationInterval { barrier: i, start: t, end: t })
                    }
                }
            } else if let Some(iv) = self.open[i].take() {
                self.closed.push(iv);
            }
        }
    }

    fn finish(mut self) -> (MinMargin, Vec<ViolationInterval>) {
        self.closed.extend(self.open.into_iter().flatten());
        self.closed
            .sort_by(|a, b| a.start.total_cmp(&b.start).then(a.barrier.cmp(&b.barrier)));
        (self.min, self.closed)
    }
}

/// Runs the sample-solve-hold loop until the goal ball, `t_end`, or a
/// controller failure. Only configuration and dimension problems are errors.
pub fn run(
    sys: &AffineSystem,
    safety: &SafetySpec,
    clf: &LyapunovCertificate,
    input_box: (&Vector, &Vector),
    cfg: &SimConfig,
) -> Result<SimTrace> {
    cfg.validate()?;
    check_dim("initial state", sys.state_dim(), cfg.x0.entries.len())?;
    check_dim("CLF target", sys.state_dim(), clf.target().len())?;
    check_dim("input lower bound", sys.input_dim(), input_box.0.len())?;
    check_dim("input upper bound", sys.input_dim(), input_box.1.len())?;
    if let Some((i, h)) = safety
        .margins(&cfg.x0.entries)
        .into_iter()
        .enumerate()
        .find(|(_, h)| !(*h > 0.0))
    {
        return Err(Error::StateOutsideSafeSet { barrier: i, value: h });
    }

    let target = clf.target().clone();
    let mut tracker = MarginTracker::new(safety.len());
    let mut samples: Vec<Sample> = Vec::new();
    let mut updates: Vec<UpdateRecord> = Vec::new();
    let mut t = cfg.x0.time;
    let mut x = cfg.x0.entries.clone();
    let mut u_held = Vector::zeros(sys.input_dim());
    let mut substeps = 0usize;
    let mut diagnostic = None;
    tracker.observe(t, &safety.margins(&x));

    let terminated = loop {
        if (&x - &target).norm() < cfg.goal_radius {
            break Termination::Goal;
        }
        if t >= cfg.t_end * (1.0 - 1e-15) {
            break Termination::TEnd;
        }
        let solution = assemble(&x, safety, clf, input_box)
            .map(|p| p.with_relaxation(cfg.clf_penalty))
            .and_then(|p| solve(&p));
        let sol = match solution {
            Ok(sol) => sol,
            Err(e) => {
                diagnostic = Some(format!("t = {t}: {e}"));
                break Termination::InfeasibleQp;
            }
        };
        let kind = match cfg.mode {
            Mode::Periodic { t_p } => UpdateKind::Periodic { t_p },
            Mode::SelfTriggered => {
                let x_k = StateVector { time: t, entries: x.clone() };
                match decide(safety, clf, sys, &x_k, &sol.u_star, &cfg.trigger) {
                    Ok(d) => UpdateKind::SelfTriggered(d),
                    Err(e @ Error::NonpositiveMargin { .. }) => {
                        diagnostic = Some(format!("t = {t}: {e}"));
                        break Termination::NonpositiveMargin;
                    }
                    Err(e) => {
                        diagnostic = Some(format!("t = {t}: {e}"));
                        break Termination::InfeasibleQp;
                    }
                }
            }
        };
        u_held = sol.u_star;
        let duration = kind.tau().min(cfg.t_end - t);
        let v = clf.value(&x);
        samples.push(Sample {
            t,
            x: x.clone(),
            u: u_held.clone(),
            h: safety.margins(&x),
            v,
            update: Some(updates.len()),
        });
        updates.push(UpdateRecord {
            t,
            x: x.clone(),
            u: u_held.clone(),
            v,
            kind,
            active_set: sol.active_set,
            slack: sol.slack,
        });

        let t_k = t;
        x = hold(sys, &x, &u_held, duration, cfg.dt_int, |j, n, elapsed, xs| {
            let ts = t_k + elapsed;
            let h = safety.margins(xs);
            tracker.observe(ts, &h);
            if j < n && j % cfg.log_every == 0 {
                samples.push(Sample {
                    t: ts,
                    x: xs.clone(),
                    u: u_held.clone(),
                    h,
                    v: clf.value(xs),
                    update: None,
                });
            }
        });
        substeps += (duration / cfg.dt_int).ceil() as usize;
        t = t_k + duration;
    };

    if samples.last().is_none_or(|s| s.t < t) {
        samples.push(Sample {
            t,
            x: x.clone(),
            u: u_held,
            h: safety.margins(&x),
            v: clf.value(&x),
            update: None,
        });
    }
    let (min_margin, violations) = tracker.finish();
    Ok(SimTrace {
        samples,
        updates,
        violated: min_margin.value < 0.0,
        min_margin,
        violations,
        terminated,
        diagnostic,
        t_final: t,
        x_final: x,
        substeps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub mode: Mode,
    pub updates: usize,
    pub min_margin: f64,
    pub violated: bool,
    pub t_converge: Option<f64>,
    pub mean_interval: Option<f64>,
    pub max_interval: Option<f64>,
    pub terminated: Termination,
}

impl ComparisonRow {
    fn from_trace(mode: Mode, trace: &SimTrace) -> Self {
        Self {
            mode,
            updates: trace.updates.len(),
            min_margin: trace.min_margin.value,
            violated: trace.violated,
            t_converge: trace.t_converge(),
            mean_interval: trace.mean_interval(),
            max_interval: trace.max_interval(),
            terminated: trace.terminated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Self-triggered first, then one row per period in input order.
    pub rows: Vec<ComparisonRow>,
    pub traces: Vec<SimTrace>,
}

/// One self-triggered run plus one periodic run per `t_p`, executed on
/// separate threads. Periodic runs use `dt_int = min(base.dt_int, t_p / 10)`.
pub fn compare(
    sys: &AffineSystem,
    safety: &SafetySpec,
    clf: &LyapunovCertificate,
    input_box: (&Vector, &Vector),
    base: &SimConfig,
    t_p_list: &[f64],
) -> Result<ComparisonReport> {
    if t_p_list.is_empty() {
        return Err(Error::InvalidParameter("t_p list must be nonempty".to_string()));
    }
    let mut configs = vec![SimConfig {
        mode: Mode::SelfTriggered,
        ..base.clone()
    }];
    configs.extend(t_p_list.iter().map(|&t_p| SimConfig {
        mode: Mode::Periodic { t_p },
        dt_int: base.dt_int.min(t_p / 10.0),
        ..base.clone()
    }));
    let results: Vec<Result<SimTrace>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run(sys, safety, clf, input_box, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let mut rows = Vec::with_capacity(configs.len());
    let mut traces = Vec::with_capacity(configs.len());
    for (cfg, trace) in configs.iter().zip(results) {
        let trace = trace?;
        rows.push(ComparisonRow::from_trace(cfg.mode, &trace));
        traces.push(trace);
    }
    Ok(ComparisonReport { rows, traces })
}
