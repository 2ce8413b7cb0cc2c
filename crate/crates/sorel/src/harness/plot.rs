//! Trace aggregation and static SVG charts: log-scale suboptimality against
//! passes or wall time, one polyline per run, colored by method.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::experiment::{Manifest, RunStatus};
use crate::trace::TrainingTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Passes,
    Seconds,
}

impl XAxis {
    fn label(self) -> &'static str {
        match self {
            XAxis::Passes => "passes",
            XAxis::Seconds => "seconds",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub x: XAxis,
    /// Log charts cannot render nonpositive suboptimality; values at or
    /// below this floor are clamped to it and flagged with a footnote.
    pub floor: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            x: XAxis::Passes,
            floor: 1e-12,
        }
    }
}

struct LoadedRun {
    dataset: String,
    spectrum: String,
    method: String,
    seed: u64,
    trace: TrainingTrace,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Reads every `manifest-*.json` under `dir`, writes a tidy long-format
/// table of all traces plus one SVG chart per (dataset, spectrum) group,
/// and returns the paths written.
pub fn emit_plots(dir: &Path, opts: &PlotOptions) -> Result<Vec<PathBuf>> {
    let mut runs: Vec<LoadedRun> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned());
        let is_manifest = name
            .as_deref()
            .is_some_and(|n| n.starts_with("manifest") && n.ends_with(".json"));
        if !is_manifest {
            continue;
        }
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        for record in &manifest.runs {
            if record.status == RunStatus::Failed {
                continue;
            }
            let Some(file) = &record.trace_file else { continue };
            let trace = TrainingTrace::read_csv(&dir.join(file))?;
            runs.push(LoadedRun {
                dataset: manifest.dataset.clone(),
                spectrum: manifest.spectrum.clone(),
                method: record.method.clone(),
                seed: record.seed,
                trace,
            });
        }
    }
    if runs.is_empty() {
        return Err(Error::Config(format!(
            "no traces found under {}",
            dir.display()
        )));
    }

    let mut written = Vec::new();

    // (a) tidy long-format table of every row of every trace
    let mut table = String::from("dataset,spectrum,method,seed,k,passes,seconds,objective,subopt\n");
    for run in &runs {
        for row in &run.trace.rows {
            let sub = row.subopt.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                table,
                "{},{},{},{},{},{},{},{},{}",
                run.dataset,
                run.spectrum,
                run.method,
                run.seed,
                row.k,
                row.passes,
                row.seconds,
                row.objective,
                sub
            );
        }
    }
    let table_path = dir.join("traces_long.csv");
    std::fs::write(&table_path, table)?;
    written.push(table_path);

    // (b) one chart per (dataset, spectrum)
    let mut groups: BTreeMap<(String, String), Vec<&LoadedRun>> = BTreeMap::new();
    for run in &runs {
        groups
            .entry((run.dataset.clone(), run.spectrum.clone()))
            .or_default()
            .push(run);
    }
    for ((dataset, spectrum), group) in &groups {
        let Some(svg) = render_group(dataset, spectrum, group, opts) else {
            log::warn!("no suboptimality data for {dataset}/{spectrum}; chart skipped");
            continue;
        };
        let file = format!(
            "chart-{}-{}-{}.svg",
            sanitize(dataset),
            sanitize(spectrum),
            opts.x.label()
        );
        let path = dir.join(file);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn render_group(
    dataset: &str,
    spectrum: &str,
    group: &[&LoadedRun],
    opts: &PlotOptions,
) -> Option<String> {
    // Stable method -> color assignment.
    let mut methods: Vec<String> = group.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let color_of = |method: &str| {
        let idx = methods.iter().position(|m| m == method).unwrap_or(0);
        PALETTE[idx % PALETTE.len()]
    };

    struct Series {
        color: &'static str,
        points: Vec<(f64, f64)>,
    }
    let mut clamped = false;
    let mut series: Vec<Series> = Vec::new();
    for run in group {
        let mut points = Vec::new();
        for row in &run.trace.rows {
            let Some(sub) = row.subopt else { continue };
            let y = if sub <= opts.floor {
                clamped = true;
                opts.floor
            } else {
                sub
            };
            let x = match opts.x {
                XAxis::Passes => row.passes,
                XAxis::Seconds => row.seconds,
            };
            points.push((x, y));
        }
        if !points.is_empty() {
            series.push(Series {
                color: color_of(&run.method),
                points,
            });
        }
    }
    if series.is_empty() {
        return None;
    }

    let (width, height) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 55.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let y_min_raw = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(f64::INFINITY, f64::min);
    let y_max_raw = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(f64::NEG_INFINITY, f64::max);
    let y_lo = y_min_raw.log10().floor();
    let y_hi = (y_max_raw.log10().ceil()).max(y_lo + 1.0);

    let x_pos = |x: f64| left + x / x_max * plot_w;
    let y_pos = |y: f64| top + (y_hi - y.log10()) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{} / {}</text>"#,
        left + plot_w / 2.0,
        dataset,
        spectrum
    );

    // axes
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333" stroke-width="1"/>"##
    );
    // y ticks at powers of ten
    let decades = (y_hi - y_lo) as i64;
    let stride = (decades as f64 / 8.0).ceil().max(1.0) as i64;
    let mut dec = y_lo as i64;
    while dec <= y_hi as i64 {
        let y = y_pos(10f64.powi(dec as i32));
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd" stroke-width="0.7"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">1e{dec}</text>"#,
            left - 6.0,
            y + 3.5
        );
        dec += stride;
    }
    // x ticks
    for t in 0..=5 {
        let x_val = x_max * t as f64 / 5.0;
        let x = x_pos(x_val);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#333" stroke-width="1"/>"##,
            top + plot_h,
            top + plot_h + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            top + plot_h + 18.0,
            format_tick(x_val)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        height - 18.0,
        opts.x.label()
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">suboptimality</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    // polylines
    for Series { color, points } in &series {
        let mut attr = String::new();
        for (x, y) in points {
            let _ = write!(attr, "{:.2},{:.2} ", x_pos(*x), y_pos(*y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6" opacity="0.9"/>"#,
            attr.trim_end()
        );
    }

    // legend (one entry per method)
    for (i, method) in methods.iter().enumerate() {
        let y = top + 14.0 + 16.0 * i as f64;
        let x = left + plot_w - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
            x + 22.0,
            color_of(method)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            x + 28.0,
            y + 3.5,
            method
        );
    }

    if clamped {
        let _ = writeln!(
            svg,
            r##"<text x="{left}" y="{}" font-size="10" fill="#777">&#8224; values at or below {:e} are clamped to the floor</text>"##,
            height - 4.0,
            opts.floor
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v >= 100.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}
