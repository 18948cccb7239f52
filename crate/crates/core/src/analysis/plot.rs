//! Static SVG plots, CSV tables and the ASCII PLY heatmap point file.
//! Output bytes depend only on the inputs.

use std::path::{Path, PathBuf};

use svg::node::element::{Circle, Group, Line as SvgLine, Polygon, Polyline, Rectangle, Text};
use svg::Document;

use super::{AnalysisError, CoverageSeries, HeatmapResult, PerturbationHistogram};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 30.0, 50.0]; // left, right, top, bottom
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One curve; `band` holds optional `(x, low, high)` rows drawn as a shaded area.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub band: Vec<(f64, f64, f64)>,
}

fn round(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Four significant digits, no trailing noise.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.2e}");
    }
    let digits = (3 - a.log10().floor() as i32).max(0) as usize;
    let s = format!("{v:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = (self.x.1 - self.x.0).max(f64::MIN_POSITIVE);
        round(MARGIN[0] + (x - self.x.0) / span * (WIDTH - MARGIN[0] - MARGIN[1]))
    }

    fn py(&self, y: f64) -> f64 {
        let span = (self.y.1 - self.y.0).max(f64::MIN_POSITIVE);
        round(HEIGHT - MARGIN[3] - (y - self.y.0) / span * (HEIGHT - MARGIN[2] - MARGIN[3]))
    }
}

fn text(x: f64, y: f64, anchor: &str, s: impl Into<String>) -> Text {
    Text::new(s).set("x", round(x)).set("y", round(y)).set("text-anchor", anchor).set("font-size", 11).set("font-family", "sans-serif")
}

fn axes(doc: Document, frame: &Frame, title: &str, x_label: &str, y_label: &str, x_ticks: &[(f64, String)]) -> Document {
    let (x0, x1) = (MARGIN[0], WIDTH - MARGIN[1]);
    let (y0, y1) = (HEIGHT - MARGIN[3], MARGIN[2]);
    let mut g = Group::new().set("class", "axes").set("stroke", "#000").set("stroke-width", 1);
    g = g.add(SvgLine::new().set("x1", x0).set("y1", y0).set("x2", x1).set("y2", y0));
    g = g.add(SvgLine::new().set("x1", x0).set("y1", y0).set("x2", x0).set("y2", y1));
    let mut labels = Group::new().set("class", "labels");
    for (x, label) in x_ticks {
        let px = frame.px(*x);
        g = g.add(SvgLine::new().set("x1", px).set("y1", y0).set("x2", px).set("y2", y0 + 4.0));
        labels = labels.add(text(px, y0 + 16.0, "middle", label.clone()));
    }
    for i in 0..=4 {
        let y = frame.y.0 + (frame.y.1 - frame.y.0) * i as f64 / 4.0;
        let py = frame.py(y);
        g = g.add(SvgLine::new().set("x1", x0 - 4.0).set("y1", py).set("x2", x0).set("y2", py));
        labels = labels.add(text(x0 - 6.0, py + 4.0, "end", tick_label(y)));
    }
    labels = labels
        .add(text(WIDTH / 2.0, 18.0, "middle", title))
        .add(text((x0 + x1) / 2.0, HEIGHT - 12.0, "middle", x_label))
        .add(text(14.0, (y0 + y1) / 2.0, "middle", y_label).set("transform", format!("rotate(-90 14 {})", round((y0 + y1) / 2.0))));
    doc.add(g).add(labels)
}

fn document() -> Document {
    Document::new()
        .set("width", WIDTH)
        .set("height", HEIGHT)
        .set("viewBox", (0, 0, WIDTH, HEIGHT))
        .add(Rectangle::new().set("width", WIDTH).set("height", HEIGHT).set("fill", "#fff"))
}

fn even_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).map(|x| (x, tick_label(x))).collect()
}

/// Line plot with one polyline per curve and a legend.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> String {
    let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0).chain(c.band.iter().map(|b| b.0)));
    let ys = curves.iter().flat_map(|c| c.points.iter().map(|p| p.1).chain(c.band.iter().map(|b| b.2)));
    let x_hi = xs.fold(0.0f64, f64::max);
    let y_hi = ys.fold(0.0f64, f64::max);
    let frame = Frame { x: (0.0, if x_hi > 0.0 { x_hi } else { 1.0 }), y: (0.0, if y_hi > 0.0 { y_hi * 1.05 } else { 1.0 }) };
    let mut doc = axes(document(), &frame, title, x_label, y_label, &even_ticks(frame.x.0, frame.x.1));
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !c.band.is_empty() {
            let upper = c.band.iter().map(|b| format!("{},{}", frame.px(b.0), frame.py(b.2)));
            let lower = c.band.iter().rev().map(|b| format!("{},{}", frame.px(b.0), frame.py(b.1)));
            let pts: Vec<String> = upper.chain(lower).collect();
            doc = doc.add(Polygon::new().set("points", pts.join(" ")).set("fill", color).set("fill-opacity", 0.2).set("stroke", "none"));
        }
        let pts: Vec<String> = c.points.iter().map(|p| format!("{},{}", frame.px(p.0), frame.py(p.1))).collect();
        doc = doc.add(Polyline::new().set("points", pts.join(" ")).set("fill", "none").set("stroke", color).set("stroke-width", 1.5));
        let ly = MARGIN[2] + 14.0 * (i as f64 + 1.0);
        doc = doc
            .add(SvgLine::new().set("x1", MARGIN[0] + 10.0).set("y1", ly).set("x2", MARGIN[0] + 30.0).set("y2", ly).set("stroke", color).set("stroke-width", 2))
            .add(text(MARGIN[0] + 34.0, ly + 4.0, "start", c.label.clone()));
    }
    doc.to_string()
}

/// Step curve of a coverage series.
pub fn coverage_curve(label: &str, series: &CoverageSeries) -> Curve {
    let mut points = Vec::with_capacity(series.points.len() * 2);
    for (i, p) in series.points.iter().enumerate() {
        if i > 0 {
            points.push((p.evaluations as f64, series.points[i - 1].coverage));
        }
        points.push((p.evaluations as f64, p.coverage));
    }
    Curve { label: label.to_string(), points, band: Vec::new() }
}

pub fn coverage_svg(label: &str, series: &CoverageSeries) -> String {
    line_plot_svg("coverage", "evaluations", "coverage", &[coverage_curve(label, series)])
}

pub fn histogram_csv(h: &PerturbationHistogram) -> String {
    let mut s = String::from("lower,upper,count,exemplar_cell,exemplar_trial,exemplar_variance\n");
    for (i, &c) in h.counts.iter().enumerate() {
        let (cell, trial, var) = match h.exemplars[i] {
            Some(e) => (e.cell.to_string(), e.trial.map(|t| t.to_string()).unwrap_or_default(), e.variance.to_string()),
            None => Default::default(),
        };
        s.push_str(&format!("{:e},{:e},{c},{cell},{trial},{var}\n", h.edges[i], h.edges[i + 1]));
    }
    s
}

/// Bars over log₁₀ of the bin edges.
pub fn histogram_svg(h: &PerturbationHistogram) -> String {
    let lo = h.edges.first().map_or(0.0, |e| e.log10());
    let hi = h.edges.last().map_or(1.0, |e| e.log10());
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame { x: (lo, hi), y: (0.0, top) };
    let ticks: Vec<(f64, String)> = (lo.ceil() as i32..=hi.floor() as i32).step_by(2).map(|e| (e as f64, format!("1e{e}"))).collect();
    let doc = axes(document(), &frame, "perturbation variance", "variance (log10)", "count", &ticks);
    let mut bars = Group::new().set("fill", PALETTE[0]);
    for (i, &c) in h.counts.iter().enumerate().filter(|(_, &c)| c > 0) {
        let (x0, x1) = (frame.px(h.edges[i].log10()), frame.px(h.edges[i + 1].log10()));
        let (y0, y1) = (frame.py(0.0), frame.py(c as f64));
        bars = bars.add(Rectangle::new().set("x", x0).set("y", y1).set("width", round(x1 - x0)).set("height", round(y0 - y1)));
    }
    doc.add(bars).to_string()
}

/// Header plus one `x y z quality` line per point.
pub fn heatmap_ply(h: &HeatmapResult) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\ncomment fitness_shift {}\ncomment chunk_fraction {}\ncomment elites {}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty double quality\nend_header\n",
        h.fitness_shift,
        h.chunk_fraction,
        h.elites,
        h.points.len()
    );
    for (p, q) in h.points.iter().zip(&h.quality) {
        s.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, q));
    }
    s
}

/// Parses the records of a file written by [`heatmap_ply`].
pub fn read_heatmap_ply(text: &str) -> Result<Vec<[f64; 4]>, String> {
    let mut lines = text.lines();
    let mut count = None;
    for line in lines.by_ref() {
        if let Some(n) = line.strip_prefix("element vertex ") {
            count = Some(n.trim().parse::<usize>().map_err(|e| e.to_string())?);
        }
        if line == "end_header" {
            break;
        }
    }
    let count = count.ok_or("missing vertex count")?;
    let rows: Vec<[f64; 4]> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|e| format!("{e}"))?;
            <[f64; 4]>::try_from(v).map_err(|_| "expected 4 values".to_string())
        })
        .collect::<Result<_, _>>()?;
    if rows.len() != count {
        return Err(format!("header declares {count} points, found {}", rows.len()));
    }
    Ok(rows)
}

fn heat_color(q: f64) -> String {
    // dark blue through yellow
    const STOPS: [[f64; 3]; 4] = [[40.0, 40.0, 90.0], [30.0, 120.0, 170.0], [120.0, 200.0, 90.0], [250.0, 230.0, 40.0]];
    let t = q.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let c: Vec<u8> = (0..3).map(|k| (STOPS[i][k] + (STOPS[i + 1][k] - STOPS[i][k]) * f).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Three orthographic views of the object points (xy, xz, yz), colored by
/// quality; hotter points are drawn last.
pub fn heatmap_svg(h: &HeatmapResult) -> String {
    let mut doc = document();
    let extent = h.points.iter().flat_map(|p| [p.x.abs(), p.y.abs(), p.z.abs()]).fold(0.0f64, f64::max).max(1e-9);
    let panel = WIDTH / 3.0;
    let scale = (panel / 2.0 - 20.0) / extent;
    let mut order: Vec<usize> = (0..h.points.len()).collect();
    order.sort_by(|&a, &b| h.quality[a].total_cmp(&h.quality[b]).then(a.cmp(&b)));
    let views: [(&str, fn(&nalgebra::Point3<f64>) -> (f64, f64)); 3] =
        [("top (x, y)", |p| (p.x, p.y)), ("front (x, z)", |p| (p.x, p.z)), ("side (y, z)", |p| (p.y, p.z))];
    for (k, (name, project)) in views.iter().enumerate() {
        let cx = panel * (k as f64 + 0.5);
        let cy = HEIGHT / 2.0;
        let mut g = Group::new().set("class", "view");
        for &i in &order {
            let (u, v) = project(&h.points[i]);
            g = g.add(Circle::new().set("cx", round(cx + u * scale)).set("cy", round(cy - v * scale)).set("r", 1.5).set("fill", heat_color(h.quality[i])));
        }
        doc = doc.add(g).add(text(cx, 20.0, "middle", *name));
    }
    doc.add(text(WIDTH / 2.0, HEIGHT - 10.0, "middle", format!("relative contact quality, fitness shift {}", h.fitness_shift))).to_string()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, AnalysisError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_coverage(dir: &Path, label: &str, series: &CoverageSeries) -> Result<Vec<PathBuf>, AnalysisError> {
    Ok(vec![write(dir, "coverage.csv", &series.to_csv())?, write(dir, "coverage.svg", &coverage_svg(label, series))?])
}

pub fn write_heatmap(dir: &Path, h: &HeatmapResult) -> Result<Vec<PathBuf>, AnalysisError> {
    Ok(vec![write(dir, "heatmap.ply", &heatmap_ply(h))?, write(dir, "heatmap.svg", &heatmap_svg(h))?])
}

pub fn write_histogram(dir: &Path, h: &PerturbationHistogram) -> Result<Vec<PathBuf>, AnalysisError> {
    let stem = match h.aggregation {
        super::Aggregation::PerTrial => "histogram_trials",
        super::Aggregation::PoseMean => "histogram_pose_mean",
    };
    Ok(vec![write(dir, &format!("{stem}.csv"), &histogram_csv(h))?, write(dir, &format!("{stem}.svg"), &histogram_svg(h))?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Aggregation, CoveragePoint, Exemplar};
    use nalgebra::Point3;

    fn series() -> CoverageSeries {
        let p = |e, f| CoveragePoint { evaluations: e, filled_success_cells: f, total_cells: 100, coverage: f as f64 / 100.0 };
        CoverageSeries { points: vec![p(0, 0), p(10, 3), p(40, 7), p(50, 7)] }
    }

    fn heatmap() -> HeatmapResult {
        HeatmapResult {
            points: (0..50).map(|i| Point3::new(i as f64 * 0.01, -0.2, 0.1 * (i % 3) as f64)).collect(),
            quality: (0..50).map(|i| i as f64 / 49.0).collect(),
            accumulated: (0..50).map(|i| i as f64).collect(),
            fitness_shift: 1e-6,
            chunk_fraction: 0.1,
            elites: 3,
        }
    }

    #[test]
    fn outputs_are_deterministic() {
        assert_eq!(coverage_svg("a", &series()), coverage_svg("a", &series()));
        assert_eq!(heatmap_svg(&heatmap()), heatmap_svg(&heatmap()));
        let dir = tempfile::tempdir().unwrap();
        let a = write_coverage(dir.path(), "a", &series()).unwrap();
        let first: Vec<Vec<u8>> = a.iter().map(|p| std::fs::read(p).unwrap()).collect();
        write_coverage(dir.path(), "a", &series()).unwrap();
        let second: Vec<Vec<u8>> = a.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn empty_plot_has_axes_and_no_curves() {
        let svg = line_plot_svg("t", "x", "y", &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("class=\"axes\""));
        assert!(!svg.contains("<polyline"));
        assert!(!svg.contains("<script"));
        let one = line_plot_svg("t", "x", "y", &[Curve::default()]);
        assert_eq!(one.matches("<polyline").count(), 1);
    }

    #[test]
    fn ply_round_trips_points() {
        let h = heatmap();
        let rows = read_heatmap_ply(&heatmap_ply(&h)).unwrap();
        assert_eq!(rows.len(), 50);
        for (r, (p, q)) in rows.iter().zip(h.points.iter().zip(&h.quality)) {
            assert_eq!(*r, [p.x, p.y, p.z, *q]);
        }
        let truncated = heatmap_ply(&h).lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(read_heatmap_ply(&truncated).is_err());
    }

    #[test]
    fn histogram_table_has_a_row_per_bin() {
        let h = PerturbationHistogram {
            aggregation: Aggregation::PerTrial,
            edges: vec![1e-6, 1e-5, 1e-4],
            counts: vec![2, 0],
            exemplars: vec![Some(Exemplar { cell: 4, trial: Some(1), variance: 2e-6 }), None],
        };
        let csv = histogram_csv(&h);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("1e-6,1e-5,2,4,1,0.000002"));
        assert!(histogram_svg(&h).contains("<rect"));
    }

    #[test]
    fn tick_labels_are_short() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(2500.0), "2500");
        assert_eq!(tick_label(0.00425), "0.00425");
        assert_eq!(tick_label(1e-7), "1.00e-7");
    }
}
