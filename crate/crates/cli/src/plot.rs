//! Standalone SVG line plots. Each file carries its data as a CSV block in a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use carleman::barriers::{psi_eval, BarrierConfig, BarrierSpec};
use carleman::diagnostics::DiagnosticsReport;
use carleman::model::io::{read_binary, Snapshot};
use log::warn;

use crate::artifacts::Artifacts;
use crate::Failure;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Figure {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.floor() as i32, hi.ceil() as i32);
        return (a..=b).map(f64::from).filter(|&e| e >= lo - 1e-9 && e <= hi + 1e-9).collect();
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v as i32)
    } else if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:.1e}")
    }
}

impl Figure {
    /// Renders the figure; `None` when no series has a plottable point.
    pub fn render(&self) -> Option<String> {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let ok = |&(x, y): &(f64, f64)| {
            x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
        };
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| s.points.iter().filter(|p| ok(p)).map(|&(x, y)| (tx(x), ty(y))).collect())
            .collect();
        let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
        if all.is_empty() {
            return None;
        }
        let bounds = |f: fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                (lo - 0.5 - 0.05 * lo.abs(), hi + 0.5 + 0.05 * hi.abs())
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = bounds(|p| p.0);
        let (y0, y1) = bounds(|p| p.1);
        let (ml, mr, mt, mb) = MARGIN;
        let px = |x: f64| ml + (x - x0) / (x1 - x0) * (W - ml - mr);
        let py = |y: f64| H - mb - (y - y0) / (y1 - y0) * (H - mt - mb);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, "<!-- data\nseries,x,y");
        for ser in &self.series {
            for (x, y) in &ser.points {
                let _ = writeln!(s, "{},{x:e},{y:e}", ser.name);
            }
        }
        let _ = writeln!(s, "-->");
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - ml - mr,
            H - mt - mb
        );
        for t in ticks(x0, x1, self.log_x) {
            let x = px(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - mb, H - mb + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, H - mb + 18.0, label(t, self.log_x));
        }
        for t in ticks(y0, y1, self.log_y) {
            let y = py(t);
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="black"/>"#, ml - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, ml - 8.0, y + 4.0, label(t, self.log_y));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (W + ml - mr) / 2.0, H - 12.0, escape(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (H - mb + mt) / 2.0,
            escape(&self.ylabel)
        );
        for (k, (ser, p)) in self.series.iter().zip(&pts).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            if p.len() <= 12 {
                for &(x, y) in p {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
                }
            }
            let ly = mt + 16.0 + 16.0 * k as f64;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - mr - 150.0, W - mr - 130.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - mr - 125.0, ly + 4.0, escape(&ser.name));
        }
        s.push_str("</svg>\n");
        Some(s)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Cells on the line through the domain center along axis 0.
fn midline(snap: &Snapshot) -> Vec<(f64, Vec<f64>)> {
    let g = &snap.grid;
    let n = g.dim();
    (0..g.len())
        .filter(|&k| (1..n).all(|a| g.axis_index(k, a) == g.cells()[a] / 2))
        .map(|k| {
            let x = g.center(k);
            (x[0], x[..n].to_vec())
        })
        .collect()
}

fn midline_rho(snap: &Snapshot) -> Vec<(f64, f64)> {
    let g = &snap.grid;
    let n = g.dim();
    (0..g.len())
        .filter(|&k| (1..n).all(|a| g.axis_index(k, a) == g.cells()[a] / 2))
        .map(|k| (g.center(k)[0], snap.fields.iter().map(|f| f[k]).sum()))
        .collect()
}

fn read_snapshot(out: &Path, rel: &str) -> Option<Snapshot> {
    let mut f = std::fs::File::open(out.join(rel)).ok()?;
    read_binary(&mut f).map_err(|e| warn!("{rel}: {e}")).ok()
}

/// Snapshot files grouped by directory ("limit", "kinetic/eps_…"), in file order.
fn snapshot_sets(files: &BTreeMap<String, String>) -> BTreeMap<String, Vec<String>> {
    let mut sets: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for f in files.keys().filter(|f| f.ends_with(".bin")) {
        if let Some((dir, _)) = f.rsplit_once('/') {
            sets.entry(dir.to_string()).or_default().push(f.clone());
        }
    }
    sets
}

fn eps_of(dir: &str) -> Option<f64> {
    dir.rsplit_once("eps_").and_then(|(_, e)| e.parse().ok())
}

pub fn emit(out: &Path) -> Result<usize, Failure> {
    let mut art = Artifacts::open(out).map_err(|e| Failure::Io(e.to_string()))?;
    let report: Option<DiagnosticsReport> = crate::report::load(out).ok();
    if report.is_none() {
        warn!("no diagnostics.json under {}", out.display());
    }
    let files = snapshot_sets(&art.manifest().files);
    let mut figures: Vec<(String, Figure)> = Vec::new();

    if let Some(table) = report.as_ref().and_then(|r| r.sweeps.get("convergence")) {
        figures.push((
            "convergence.svg".into(),
            Figure {
                title: "kinetic to limit error".into(),
                xlabel: "epsilon".into(),
                ylabel: "e(epsilon)".into(),
                log_x: true,
                log_y: true,
                series: vec![
                    Series { name: "e".into(), points: table.rows.iter().map(|r| (r.epsilon, r.error)).collect() },
                    Series { name: "isotropy gap".into(), points: table.rows.iter().map(|r| (r.epsilon, r.isotropy_gap)).collect() },
                ],
            },
        ));
    } else {
        warn!("no convergence sweep: skipping the e(epsilon) plot");
    }

    let contraction: Vec<Series> = report
        .iter()
        .flat_map(|r| r.series.iter())
        .filter(|(k, _)| k.starts_with("contraction/"))
        .map(|(k, v)| Series { name: k.trim_start_matches("contraction/").into(), points: v.clone() })
        .collect();
    if contraction.is_empty() {
        warn!("no contraction series: skipping the contraction plot");
    } else {
        figures.push((
            "contraction.svg".into(),
            Figure {
                title: "L1 distance of the positive part".into(),
                xlabel: "t".into(),
                ylabel: "sum_i |(u_i - v_i)+|_1".into(),
                log_x: false,
                log_y: false,
                series: contraction,
            },
        ));
    }

    for (dir, snaps) in &files {
        let series: Vec<Series> = snaps
            .iter()
            .filter_map(|f| read_snapshot(out, f))
            .map(|s| Series { name: format!("t = {}", label(s.t, false)), points: midline_rho(&s) })
            .collect();
        if series.is_empty() {
            continue;
        }
        let stem = dir.replace('/', "_");
        figures.push((
            format!("profile_{stem}.svg"),
            Figure {
                title: format!("rho along the midline ({dir})"),
                xlabel: "x_1".into(),
                ylabel: "rho".into(),
                log_x: false,
                log_y: false,
                series,
            },
        ));
    }
    if files.is_empty() {
        warn!("no snapshots: skipping profile plots");
    }

    // Barrier bounds on rho: the lower barrier gives rho >= Psi/2, the upper rho <= 3 Psi/2.
    let smallest = files.keys().filter_map(|d| eps_of(d).map(|e| (e, d))).min_by(|a, b| a.0.total_cmp(&b.0));
    match (barriers(out), smallest) {
        (Some((lower, upper)), Some((eps, dir))) if lower.is_some() || upper.is_some() => {
            if let Some(snap) = files[dir].last().and_then(|f| read_snapshot(out, f)) {
                let line = midline(&snap);
                let mut series = vec![Series { name: format!("rho, eps = {eps}"), points: midline_rho(&snap) }];
                for (name, spec, factor) in [("lower bound", &lower, 0.5), ("upper bound", &upper, 1.5)] {
                    if let Some(spec) = spec {
                        let pts = line
                            .iter()
                            .filter_map(|(x0, x)| psi_eval(spec, x, snap.t).ok().map(|p| (*x0, factor * p)))
                            .collect();
                        series.push(Series { name: name.into(), points: pts });
                    }
                }
                figures.push((
                    "barriers.svg".into(),
                    Figure {
                        title: format!("barrier bounds at t = {}", label(snap.t, false)),
                        xlabel: "x_1".into(),
                        ylabel: "rho".into(),
                        log_x: false,
                        log_y: false,
                        series,
                    },
                ));
            }
        }
        _ => warn!("no barriers or kinetic snapshots: skipping the barrier cross-section"),
    }

    let mut written = 0;
    for (name, fig) in figures {
        match fig.render() {
            Some(svg) => {
                art.write(&format!("plots/{name}"), svg.as_bytes()).map_err(|e| Failure::Io(e.to_string()))?;
                written += 1;
            }
            None => warn!("{name}: no finite points, skipped"),
        }
    }
    if written == 0 {
        warn!("nothing to plot under {}", out.display());
        return Ok(0);
    }
    art.finish().map_err(|e| Failure::Io(e.to_string()))?;
    Ok(written)
}

type BarrierPair = (Option<BarrierSpec>, Option<BarrierSpec>);

fn barriers(out: &Path) -> Option<BarrierPair> {
    let text = std::fs::read_to_string(out.join("config.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    let b = v.get("config")?.get("barriers")?;
    let spec = |key: &str| {
        b.get(key)
            .filter(|v| !v.is_null())
            .and_then(|v| serde_json::from_value::<BarrierConfig>(v.clone()).ok())
            .and_then(|c| BarrierSpec::try_from(c).ok())
    };
    Some((spec("lower"), spec("upper")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_ticks_are_decades() {
        assert_eq!(ticks(-2.2, 0.1, true), vec![-2.0, -1.0, 0.0]);
    }

    #[test]
    fn linear_ticks_cover_range() {
        let t = ticks(0.0, 1.0, false);
        assert!(t.len() >= 3 && t[0] == 0.0 && (t[t.len() - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_figure_renders_nothing() {
        let f = Figure {
            title: "x".into(),
            xlabel: "x".into(),
            ylabel: "y".into(),
            log_x: true,
            log_y: true,
            series: vec![Series { name: "s".into(), points: vec![(0.0, 1.0), (1.0, -1.0)] }],
        };
        assert!(f.render().is_none());
    }

    #[test]
    fn svg_embeds_data() {
        let f = Figure {
            title: "a < b".into(),
            xlabel: "x".into(),
            ylabel: "y".into(),
            log_x: false,
            log_y: false,
            series: vec![Series { name: "s".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] }],
        };
        let svg = f.render().unwrap();
        assert!(svg.contains("s,1e0,2e0"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
