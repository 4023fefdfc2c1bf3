//! One SVG line chart per panel: each state, each input (with update
//! markers) and the inter-update interval.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use crate::simulator::SimTrace;

const PALETTE: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
];

/// Horizontal reference line on one state panel.
#[derive(Debug, Clone)]
pub struct Reference {
    pub state: usize,
    pub value: f64,
    pub label: String,
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    markers: Vec<(f64, f64)>,
}

fn range(series: &[Series], refs: &[f64]) -> (f64, f64, f64, f64) {
    let all = series.iter().flat_map(|s| s.points.iter().chain(&s.markers));
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in all {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for &r in refs {
        y0 = y0.min(r);
        y1 = y1.max(r);
    }
    if !t0.is_finite() {
        return (0.0, 1.0, -1.0, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    (t0, t1, y0 - pad, y1 + pad)
}

fn panel(path: &Path, title: &str, y_label: &str, series: &[Series], refs: &[(f64, String)]) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| anyhow!("plotting {}: {e}", path.display());
    let root = SVGBackend::new(path, (900, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let ref_values: Vec<f64> = refs.iter().map(|r| r.0).collect();
    let (t0, t1, y0, y1) = range(series, &ref_values);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(t0..t1, y0..y1)
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc(y_label)
        .draw()
        .map_err(|e| err(&e))?;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        if !s.markers.is_empty() {
            chart
                .draw_series(s.markers.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(|e| err(&e))?;
        }
    }
    for (value, label) in refs {
        chart
            .draw_series(LineSeries::new([(t0, *value), (t1, *value)], BLACK.stroke_width(1)))
            .map_err(|e| err(&e))?
            .label(label.clone())
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

// Piecewise-constant input: add the corner at each jump.
fn step_points(trace: &SimTrace, j: usize) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(trace.samples.len() * 2);
    for s in &trace.samples {
        if let Some(&(_, prev)) = pts.last() {
            if prev != s.u[j] {
                pts.push((s.t, prev));
            }
        }
        pts.push((s.t, s.u[j]));
    }
    pts
}

/// Writes `x{i}.svg`, `u.svg` (or `u{j}.svg`) and `interval.svg` into `dir`;
/// returns the paths written.
pub fn plot_traces(dir: &Path, runs: &[(&str, &SimTrace)], refs: &[Reference]) -> Result<Vec<PathBuf>> {
    let Some((_, first)) = runs.first() else {
        return Ok(Vec::new());
    };
    let Some(sample) = first.samples.first() else {
        return Ok(Vec::new());
    };
    let (n, m) = (sample.x.len(), sample.u.len());
    let mut written = Vec::new();

    for i in 0..n {
        let series: Vec<Series> = runs
            .iter()
            .map(|(label, tr)| Series {
                label: label.to_string(),
                points: tr.samples.iter().map(|s| (s.t, s.x[i])).collect(),
                markers: Vec::new(),
            })
            .collect();
        let lines: Vec<(f64, String)> = refs
            .iter()
            .filter(|r| r.state == i)
            .map(|r| (r.value, r.label.clone()))
            .collect();
        let path = dir.join(format!("x{}.svg", i + 1));
        let name = format!("x{}", i + 1);
        panel(&path, &name, &name, &series, &lines)?;
        written.push(path);
    }

    for j in 0..m {
        let series: Vec<Series> = runs
            .iter()
            .map(|(label, tr)| Series {
                label: label.to_string(),
                points: step_points(tr, j),
                markers: tr.updates.iter().map(|u| (u.t, u.u[j])).collect(),
            })
            .collect();
        let name = if m == 1 { "u".to_string() } else { format!("u{}", j + 1) };
        let path = dir.join(format!("{name}.svg"));
        panel(&path, &format!("{name} (markers: updates)"), &name, &series, &[])?;
        written.push(path);
    }

    let series: Vec<Series> = runs
        .iter()
        .map(|(label, tr)| {
            let pts: Vec<(f64, f64)> = tr.updates.windows(2).map(|w| (w[0].t, w[1].t - w[0].t)).collect();
            Series {
                label: label.to_string(),
                markers: pts.clone(),
                points: pts,
            }
        })
        .collect();
    let path = dir.join("interval.svg");
    panel(&path, "inter-update interval", "t_{k+1} - t_k [s]", &series, &[])?;
    written.push(path);
    Ok(written)
}
