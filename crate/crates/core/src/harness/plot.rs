use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{read_trace, Manifest, TraceRecord};
use super::HarnessError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 1500;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MinVoltage,
    Cost,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Self::MinVoltage => "voltage",
            Self::Cost => "cost",
        }
    }

    fn axis(self) -> &'static str {
        match self {
            Self::MinVoltage => "min. voltage (p.u.)",
            Self::Cost => "incentive cost",
        }
    }

    fn of(self, r: &TraceRecord) -> f64 {
        match self {
            Self::MinVoltage => r.min_voltage,
            Self::Cost => r.cost,
        }
    }
}

/// A labelled line.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn downsample(records: &[TraceRecord], metric: Metric) -> Vec<(f64, f64)> {
    let stride = records.len().div_ceil(MAX_POINTS).max(1);
    let mut pts: Vec<(f64, f64)> = records.iter().step_by(stride).map(|r| (r.iteration as f64, metric.of(r))).collect();
    if let Some(last) = records.last() {
        if pts.last().map(|p| p.0) != Some(last.iteration as f64) {
            pts.push((last.iteration as f64, metric.of(last)));
        }
    }
    pts
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= count as f64).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn fmt_tick(x: f64) -> String {
    if x.abs() >= 1000.0 {
        format!("{x:.0}")
    } else {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders line series plus an optional dashed overlay (one value per
/// point, drawn as a step line) to SVG text.
pub fn render_svg(title: &str, y_label: &str, series: &[Series], overlay: Option<(&str, &[(f64, f64)])>) -> String {
    let all = series.iter().flat_map(|s| s.points.iter()).chain(overlay.into_iter().flat_map(|o| o.1.iter()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6 * (1.0 + y1.abs()));
    y0 -= pad;
    y1 += pad;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in nice_ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(t));
    }
    for t in nice_ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(s, r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#, TOP + ph / 2.0, escape(y_label));

    let mut legend_y = TOP + 10.0;
    let legend_x = LEFT + pw + 12.0;
    if let Some((label, pts)) = overlay {
        let value = pts.first().map(|p| p.1).unwrap_or(f64::NAN);
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = writeln!(s, r#"<path class="overlay" data-value="{value}" d="{}" fill="none" stroke="black" stroke-dasharray="6 4"/>"#, d.trim_end());
        let _ = writeln!(s, r#"<line x1="{legend_x}" y1="{legend_y}" x2="{:.1}" y2="{legend_y}" stroke="black" stroke-dasharray="6 4"/>"#, legend_x + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, legend_x + 26.0, legend_y + 4.0, escape(label));
        legend_y += 18.0;
    }
    for (k, series) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: String = series.points.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
        let _ = writeln!(s, r#"<line x1="{legend_x}" y1="{legend_y}" x2="{:.1}" y2="{legend_y}" stroke="{color}" stroke-width="2"/>"#, legend_x + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, legend_x + 26.0, legend_y + 4.0, escape(&series.label));
        legend_y += 18.0;
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes `<scenario>_s<seed>_voltage.svg` and `_cost.svg` next to the
/// manifest for every scenario with at least one trace.
pub fn emit_plots(manifest_path: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let manifest = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut groups: BTreeMap<(String, u64), Vec<(String, Vec<TraceRecord>)>> = BTreeMap::new();
    for run in &manifest.runs {
        if let Some(rel) = &run.trace {
            let records = read_trace(&dir.join(rel))?;
            if !records.is_empty() {
                groups.entry((run.scenario.clone(), run.seed)).or_default().push((run.algorithm.clone(), records));
            }
        }
    }
    if groups.is_empty() {
        return Err(HarnessError::Output("manifest lists no traces to plot".into()));
    }
    let mut written = Vec::new();
    for ((scenario, seed), runs) in &groups {
        let env = manifest.environments.iter().find(|e| &e.scenario == scenario && e.seed == *seed);
        let x_end = runs.iter().map(|r| r.1.len()).max().unwrap_or(1) as f64;
        for metric in [Metric::MinVoltage, Metric::Cost] {
            let series: Vec<Series> = runs.iter().map(|(label, recs)| Series { label: label.clone(), points: downsample(recs, metric) }).collect();
            let overlay: Option<(String, Vec<(f64, f64)>)> = match metric {
                Metric::MinVoltage => env.map(|e| ("lower bound".to_string(), vec![(1.0, e.v_lower), (x_end, e.v_lower)])),
                Metric::Cost => env.and_then(|e| e.baseline.as_ref()).map(|b| {
                    let label = match b.kind {
                        super::runner::BaselineKind::Optimum => "optimum",
                        super::runner::BaselineKind::Bound => "lower bound",
                    };
                    let per = x_end / b.values.len() as f64;
                    let mut pts = Vec::with_capacity(2 * b.values.len());
                    for (k, &v) in b.values.iter().enumerate() {
                        pts.push(((k as f64 * per).max(1.0), v));
                        pts.push(((k + 1) as f64 * per, v));
                    }
                    (label.to_string(), pts)
                }),
            };
            let title = format!("{scenario} (seed {seed})");
            let svg = render_svg(&title, metric.axis(), &series, overlay.as_ref().map(|(l, p)| (l.as_str(), p.as_slice())));
            let path = dir.join(format!("{scenario}_s{seed}_{}.svg", metric.name()));
            fs::write(&path, svg)?;
            written.push(path);
        }
    }
    Ok(written)
}
