//! CSV, text and SVG files written next to a run.
//!
//! Every CSV starts with a header row; floats are written with 17
//! significant digits so that files round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use drift_ap_core::ConservedState;

use crate::config::{mode_name, scheme_name, side_assignment_note};
use crate::harness::{DiffMetrics, RunReport};

/// Float formatting used in every CSV file.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// File-name form of an observation time, e.g. `0.1` or `1`.
pub fn time_tag(t: f64) -> String {
    format!("{t}")
}

/// Values along the two middle sections of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Coordinate along the section.
    pub s: Vec<f64>,
    /// `(n, nu_x, nu_y, nu_z)` at each point.
    pub values: Vec<[f64; 4]>,
}

fn cell_values(state: &ConservedState, i: usize, j: usize) -> [f64; 4] {
    [state.n.get(i, j), state.mx.get(i, j), state.my.get(i, j), state.mz.get(i, j)]
}

fn average(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2]), 0.5 * (a[3] + b[3])]
}

/// Row `y = 0.5` of the interior. With an even number of rows no cell
/// center lies on the line and the two adjacent rows are averaged.
pub fn section_y_mid(state: &ConservedState) -> Section {
    let g = &state.grid;
    let (s, values) = (1..=g.nx)
        .map(|i| {
            let v = if g.ny.is_multiple_of(2) {
                average(cell_values(state, i, g.ny / 2), cell_values(state, i, g.ny / 2 + 1))
            } else {
                cell_values(state, i, g.ny / 2 + 1)
            };
            (g.x_center(i), v)
        })
        .unzip();
    Section { s, values }
}

/// Column `x = 0.5`, same convention as [`section_y_mid`].
pub fn section_x_mid(state: &ConservedState) -> Section {
    let g = &state.grid;
    let (s, values) = (1..=g.ny)
        .map(|j| {
            let v = if g.nx.is_multiple_of(2) {
                average(cell_values(state, g.nx / 2, j), cell_values(state, g.nx / 2 + 1, j))
            } else {
                cell_values(state, g.nx / 2 + 1, j)
            };
            (g.y_center(j), v)
        })
        .unzip();
    Section { s, values }
}

pub fn write_dt_log(report: &RunReport, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "step,t,dt")?;
    for r in &report.dt_log {
        writeln!(w, "{},{},{}", r.step, fmt_f64(r.t), fmt_f64(r.dt))?;
    }
    Ok(())
}

pub fn write_metrics(report: &RunReport, w: &mut impl Write) -> io::Result<()> {
    let m: DiffMetrics = report.metrics;
    writeln!(w, "scheme,mode,epsilon,t,steps,n_rel_pct,nu_x_rel_pct,nu_y_rel_pct,nu_z_abs,wall_seconds,diverged")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{}",
        scheme_name(report.config.scheme),
        mode_name(report.config.effective_mode()),
        fmt_f64(report.config.epsilon),
        fmt_f64(report.final_time),
        report.steps,
        fmt_f64(m.n_rel_pct),
        fmt_f64(m.mx_rel_pct),
        fmt_f64(m.my_rel_pct),
        fmt_f64(m.mz_abs),
        fmt_f64(report.wall_seconds),
        report.diverged.as_ref().map(|e| e.to_string().replace(',', ";")).unwrap_or_default(),
    )
}

pub fn write_snapshot(state: &ConservedState, w: &mut impl Write) -> io::Result<()> {
    let g = &state.grid;
    writeln!(w, "i,j,x,y,n,mx,my,mz")?;
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            let v = cell_values(state, i, j);
            writeln!(
                w,
                "{i},{j},{},{},{},{},{},{}",
                fmt_f64(g.x_center(i)),
                fmt_f64(g.y_center(j)),
                fmt_f64(v[0]),
                fmt_f64(v[1]),
                fmt_f64(v[2]),
                fmt_f64(v[3])
            )?;
        }
    }
    Ok(())
}

pub fn write_section(section: &Section, coord: &str, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "{coord},n,mx,my,mz")?;
    for (s, v) in section.s.iter().zip(&section.values) {
        writeln!(w, "{},{},{},{},{}", fmt_f64(*s), fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]), fmt_f64(v[3]))?;
    }
    Ok(())
}

/// Resolved configuration followed by the boundary side assignment.
pub fn resolved_config_text(report: &RunReport) -> String {
    let mut s = report.config.render();
    s.push_str(&side_assignment_note());
    s
}

/// Minimal SVG line plot with axes, a legend and a title.
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl LinePlot {
    pub fn to_svg(&self) -> String {
        let (w, h, left, right, top, bottom) = (640.0, 420.0, 80.0, 20.0, 40.0, 50.0);
        let pts = self.series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x1 > x0) {
            x0 = if x0.is_finite() { x0 - 0.5 } else { 0.0 };
            x1 = x0 + 1.0;
        }
        if !(y1 > y0) {
            let mid = if y0.is_finite() { y0 } else { 0.0 };
            let pad = if mid == 0.0 { 1.0 } else { mid.abs() * 1e-3 };
            y0 = mid - pad;
            y1 = mid + pad;
        }
        let (pw, ph) = (w - left - right, h - top - bottom);
        let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, xml_escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(xv), h - bottom + 16.0, tick(xv));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 4.0, py(yv) + 4.0, tick(yv));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 10.0, xml_escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            top + ph / 2.0,
            top + ph / 2.0,
            xml_escape(&self.y_label)
        );
        for (k, (name, points)) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = top + 16.0 + 16.0 * k as f64;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - right - 150.0, w - right - 130.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - right - 125.0, ly + 4.0, xml_escape(name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn section_plot(section: &Section, coord: &str, label: &str, t: f64) -> LinePlot {
    let names = ["n", "n u_x", "n u_y", "n u_z"];
    LinePlot {
        title: format!("{label}, section {coord}, t = {}", time_tag(t)),
        x_label: if coord.starts_with('y') { "x".into() } else { "y".into() },
        y_label: "value".into(),
        series: names
            .iter()
            .enumerate()
            .map(|(k, n)| (n.to_string(), section.s.iter().zip(&section.values).map(|(&s, v)| (s, v[k])).collect()))
            .collect(),
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    w.flush()
}

/// Writes every output of a run into `dir` and returns the created paths.
pub fn write_run(report: &RunReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, f: &dyn Fn(&mut io::BufWriter<fs::File>) -> io::Result<()>| -> io::Result<()> {
        let path = dir.join(name);
        write_file(&path, |w| f(w))?;
        written.push(path);
        Ok(())
    };
    put("config_resolved.txt".into(), &|w| w.write_all(resolved_config_text(report).as_bytes()))?;
    put("dt_log.csv".into(), &|w| write_dt_log(report, w))?;
    put("metrics.csv".into(), &|w| write_metrics(report, w))?;

    let label = format!("{} {}", scheme_name(report.config.scheme), mode_name(report.config.effective_mode()));
    let mut observed: Vec<(f64, &ConservedState)> = report.snapshots.iter().map(|s| (s.t, &s.state)).collect();
    observed.push((report.final_time, &report.final_state));
    for (t, state) in observed {
        let tag = time_tag(t);
        put(format!("snapshot_{tag}.csv"), &|w| write_snapshot(state, w))?;
        let (sy, sx) = (section_y_mid(state), section_x_mid(state));
        put(format!("section_y0.5_{tag}.csv"), &|w| write_section(&sy, "x", w))?;
        put(format!("section_x0.5_{tag}.csv"), &|w| write_section(&sx, "y", w))?;
        put(format!("section_y0.5_{tag}.svg"), &|w| w.write_all(section_plot(&sy, "y=0.5", &label, t).to_svg().as_bytes()))?;
        put(format!("section_x0.5_{tag}.svg"), &|w| w.write_all(section_plot(&sx, "x=0.5", &label, t).to_svg().as_bytes()))?;
    }
    let dt_plot = LinePlot {
        title: format!("{label}, time step history"),
        x_label: "t".into(),
        y_label: "log10 dt".into(),
        series: vec![(label.clone(), report.dt_log.iter().map(|r| (r.t, r.dt.log10())).collect())],
    };
    put("dt_history.svg".into(), &|w| w.write_all(dt_plot.to_svg().as_bytes()))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use drift_ap_core::mesh::BoundaryValues;
    use drift_ap_core::GridSpec;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-7, 8164.965809277261, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(time_tag(0.1), "0.1");
        assert_eq!(time_tag(1.0), "1");
    }

    #[test]
    fn sections_average_the_middle_rows() {
        let g = GridSpec::unit_square(4, 4).unwrap();
        let mut s = ConservedState::uniform(&g, BoundaryValues::new(1.0, -1.0, 1.0, 0.0));
        s.n = drift_ap_core::Field::from_fn(&g, |x, y| 1.0 + x + 10.0 * y);
        let row = section_y_mid(&s);
        assert_eq!(row.s.len(), 4);
        for (x, v) in row.s.iter().zip(&row.values) {
            assert!((v[0] - (1.0 + x + 5.0)).abs() < 1e-12);
        }
        let col = section_x_mid(&s);
        for (y, v) in col.s.iter().zip(&col.values) {
            assert!((v[0] - (1.5 + 10.0 * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_has_header_and_all_cells() {
        let g = GridSpec::unit_square(3, 2).unwrap();
        let s = ConservedState::uniform(&g, BoundaryValues::new(1.0, -1.0, 1.0, 0.0));
        let mut buf = Vec::new();
        write_snapshot(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,x,y,n,mx,my,mz");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("1,1,1.6666666666666666e-1,2.5000000000000000e-1,"));
    }

    #[test]
    fn svg_is_well_formed() {
        let plot = LinePlot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![("flat".into(), vec![(0.0, 1.0), (1.0, 1.0)])],
        };
        let svg = plot.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b") && svg.contains("polyline"));
    }
}
