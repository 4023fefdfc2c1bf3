//! CSV and summary writers. Floats use the shortest representation that
//! parses back to the same `f64`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::simulator::{ComparisonReport, Mode, SimTrace, UpdateKind};

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), num)
}

/// One `trace.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub h: Vec<f64>,
    pub v: f64,
    pub is_update: bool,
    pub tau_cbf: Option<f64>,
    pub tau_clf: Option<f64>,
    pub tau: Option<f64>,
    pub limiting: String,
}

pub fn trace_rows(trace: &SimTrace) -> Vec<TraceRow> {
    trace
        .samples
        .iter()
        .map(|s| {
            let kind = s.update.map(|i| &trace.updates[i].kind);
            let (tau_cbf, tau_clf, tau, limiting) = match kind {
                Some(UpdateKind::SelfTriggered(d)) => {
                    (Some(d.tau_cbf), Some(d.tau_clf), Some(d.tau), d.limiting.to_string())
                }
                Some(UpdateKind::Periodic { t_p }) => (None, None, Some(*t_p), "PERIODIC".to_string()),
                None => (None, None, None, String::new()),
            };
            TraceRow {
                t: s.t,
                x: s.x.iter().copied().collect(),
                u: s.u.iter().copied().collect(),
                h: s.h.clone(),
                v: s.v,
                is_update: s.update.is_some(),
                tau_cbf,
                tau_clf,
                tau,
                limiting,
            }
        })
        .collect()
}

fn trace_header(n: usize, m: usize, q: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    if m == 1 {
        h.push("u".to_string());
    } else {
        h.extend((1..=m).map(|j| format!("u{j}")));
    }
    h.extend((1..=q).map(|i| format!("h{i}")));
    h.extend(["V", "is_update", "tau_cbf", "tau_clf", "tau", "limiting"].map(String::from));
    h
}

pub fn write_trace_csv(path: &Path, trace: &SimTrace) -> Result<()> {
    let rows = trace_rows(trace);
    let Some(first) = rows.first() else {
        bail!("trace has no samples");
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(trace_header(first.x.len(), first.u.len(), first.h.len()))?;
    let blank = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in &rows {
        let mut rec = vec![num(r.t)];
        rec.extend(r.x.iter().copied().map(num));
        rec.extend(r.u.iter().copied().map(num));
        rec.extend(r.h.iter().copied().map(num));
        rec.push(num(r.v));
        rec.push(if r.is_update { "1" } else { "0" }.to_string());
        rec.push(blank(r.tau_cbf));
        rec.push(blank(r.tau_clf));
        rec.push(blank(r.tau));
        rec.push(r.limiting.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let count = |p: &str| {
        header
            .iter()
            .filter(|c| c.starts_with(p) && c[p.len()..].chars().all(|ch| ch.is_ascii_digit()))
            .count()
    };
    let (n, m, q) = (count("x"), count("u"), count("h"));
    if header.len() != 1 + n + m + q + 6 {
        bail!("unexpected trace header {header:?}");
    }
    let parse = |s: &str| -> Result<f64> { s.parse::<f64>().with_context(|| format!("bad number `{s}`")) };
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse(s).map(Some)
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f: Vec<&str> = rec.iter().collect();
        let mut i = 1;
        let mut take = |k: usize| -> Result<Vec<f64>> {
            let out = f[i..i + k].iter().map(|s| parse(s)).collect();
            i += k;
            out
        };
        let x = take(n)?;
        let u = take(m)?;
        let h = take(q)?;
        let base = 1 + n + m + q;
        rows.push(TraceRow {
            t: parse(f[0])?,
            x,
            u,
            h,
            v: parse(f[base])?,
            is_update: f[base + 1] == "1",
            tau_cbf: parse_opt(f[base + 2])?,
            tau_clf: parse_opt(f[base + 3])?,
            tau: parse_opt(f[base + 4])?,
            limiting: f[base + 5].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_updates_csv(path: &Path, trace: &SimTrace) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let (n, m) = trace
        .updates
        .first()
        .map_or((0, 0), |u| (u.x.len(), u.u.len()));
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    if m == 1 {
        header.push("u".to_string());
    } else {
        header.extend((1..=m).map(|j| format!("u{j}")));
    }
    header.extend(
        ["V", "tau_cbf", "tau_clf", "tau", "limiting", "active_set", "slack"].map(String::from),
    );
    w.write_record(&header)?;
    for (k, up) in trace.updates.iter().enumerate() {
        let mut rec = vec![k.to_string(), num(up.t)];
        rec.extend(up.x.iter().copied().map(num));
        rec.extend(up.u.iter().copied().map(num));
        rec.push(num(up.v));
        match &up.kind {
            UpdateKind::SelfTriggered(d) => {
                rec.extend([num(d.tau_cbf), num(d.tau_clf), num(d.tau), d.limiting.to_string()]);
            }
            UpdateKind::Periodic { t_p } => {
                rec.extend([String::new(), String::new(), num(*t_p), "PERIODIC".to_string()]);
            }
        }
        let active: Vec<String> = up.active_set.iter().map(|i| (i + 1).to_string()).collect();
        rec.push(active.join(";"));
        rec.push(num(up.slack));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "mode",
        "t_p",
        "updates",
        "min_margin",
        "violated",
        "t_converge",
        "mean_interval",
        "max_interval",
    ])?;
    for row in &report.rows {
        let (mode, t_p) = match row.mode {
            Mode::SelfTriggered => ("self_triggered", "-".to_string()),
            Mode::Periodic { t_p } => ("periodic", num(t_p)),
        };
        w.write_record([
            mode.to_string(),
            t_p,
            row.updates.to_string(),
            num(row.min_margin),
            row.violated.to_string(),
            opt(row.t_converge),
            opt(row.mean_interval),
            opt(row.max_interval),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable run statistics.
pub fn describe(trace: &SimTrace) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<16}{v}\n"));
    line("terminated", trace.terminated.to_string());
    line("t_final", num(trace.t_final));
    line(
        "x_final",
        format!("{:?}", trace.x_final.iter().copied().collect::<Vec<_>>()),
    );
    line("updates", trace.updates.len().to_string());
    line(
        "min_margin",
        format!(
            "{} (h{} at t = {})",
            num(trace.min_margin.value),
            trace.min_margin.barrier + 1,
            num(trace.min_margin.time)
        ),
    );
    line("violated", trace.violated.to_string());
    for v in &trace.violations {
        line(
            "violation",
            format!("h{} on [{}, {}]", v.barrier + 1, num(v.start), num(v.end)),
        );
    }
    line("mean_interval", opt(trace.mean_interval()));
    line("max_interval", opt(trace.max_interval()));
    let floor_hits = trace
        .updates
        .iter()
        .filter_map(|u| u.kind.decision())
        .filter(|d| d.limiting == crate::trigger::Limiting::TauMin)
        .count();
    if floor_hits > 0 {
        line("tau_min_binds", floor_hits.to_string());
    }
    if let Some(d) = &trace.diagnostic {
        line("diagnostic", d.clone());
    }
    s
}

/// Statistics as comment lines followed by the resolved config; the file is
/// itself a valid config for repeating the run.
pub fn write_summary(path: &Path, trace: &SimTrace, resolved_config: &str) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for line in describe(trace).lines() {
        writeln!(f, "# {line}")?;
    }
    f.write_all(b"\n# resolved config\n")?;
    f.write_all(resolved_config.as_bytes())?;
    Ok(())
}
