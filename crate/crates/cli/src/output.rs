//! Data export: trajectory/branch/cascade CSV files (bit-exact round trip
//! through the loader), simple SVG line plots, and JSON reports.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use opinionlab_core::dynamics::Trajectory;

/// Shortest round-trip decimal formatting; `parse::<f64>()` recovers the
/// exact bits.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `t, <state columns...>` with one row per recorded step (thinned
/// by `record_every`, always keeping the final step).
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, record_every: usize) -> Result<()> {
    let every = record_every.max(1);
    let mut out = String::new();
    out.push('t');
    for label in traj.layout.labels() {
        out.push(',');
        out.push_str(&label);
    }
    out.push('\n');
    let last = traj.len() - 1;
    for idx in 0..traj.len() {
        if idx % every != 0 && idx != last {
            continue;
        }
        out.push_str(&fmt_f64(traj.times[idx]));
        for v in traj.states[idx].iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// A loaded CSV table: header names plus rows of floats.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Re-serializes the table; loading then writing a file produced by
    /// this module reproduces it byte for byte.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&fmt_f64(*v));
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header = lines.next().context("empty csv")?;
    let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .with_context(|| format!("line {}: bad number `{s}`", lineno + 2))
            })
            .collect::<Result<_>>()?;
        if row.len() != columns.len() {
            bail!(
                "line {}: {} fields, header has {}",
                lineno + 2,
                row.len(),
                columns.len()
            );
        }
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}

/// Branch data rows: `u, projection, stable, residual`.
pub fn write_branch_csv(
    path: &Path,
    branches: &[opinionlab_core::dynamics::BranchPoint],
) -> Result<()> {
    let mut out = String::from("u,projection,stable,residual\n");
    for point in branches {
        for eq in &point.equilibria {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(point.u),
                fmt_f64(eq.projection),
                if eq.stable { 1 } else { 0 },
                fmt_f64(eq.residual)
            );
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One cascade-study cell.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CascadeCell {
    pub magnitude: f64,
    pub alignment: f64,
    pub trials: usize,
    pub cascades: usize,
    pub frequency: f64,
    pub seed: u64,
}

pub fn write_cascade_csv(path: &Path, cells: &[CascadeCell]) -> Result<()> {
    let mut out = String::from("magnitude,alignment,trials,cascades,frequency,seed\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(c.magnitude),
            fmt_f64(c.alignment),
            c.trials,
            c.cascades,
            fmt_f64(c.frequency),
            c.seed
        );
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Minimal static SVG line chart: one polyline per series over a common
/// time axis. Plots are a convenience; the CSV files are the contract.
pub fn write_line_svg(
    path: &Path,
    title: &str,
    times: &[f64],
    series: &[(String, Vec<f64>)],
) -> Result<()> {
    const W: f64 = 760.0;
    const H: f64 = 420.0;
    const ML: f64 = 56.0;
    const MR: f64 = 16.0;
    const MT: f64 = 34.0;
    const MB: f64 = 40.0;

    if times.is_empty() || series.is_empty() {
        bail!("nothing to plot");
    }
    let (tmin, tmax) = (times[0], *times.last().unwrap());
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (_, vs) in series {
        for &v in vs {
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    if !(vmax > vmin) {
        vmax = vmin + 1.0;
    }
    let pad = 0.05 * (vmax - vmin);
    let (vmin, vmax) = (vmin - pad, vmax + pad);

    let x = |t: f64| ML + (t - tmin) / (tmax - tmin).max(1e-300) * (W - ML - MR);
    let y = |v: f64| H - MB - (v - vmin) / (vmax - vmin) * (H - MT - MB);

    let palette = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
        "#17becf", "#bcbd22",
    ];

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        ML,
        xml_escape(title)
    );
    // axes
    let _ = write!(
        svg,
        r##"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="#333"/>"##,
        H - MB,
        W - MR,
        H - MB
    );
    let _ = write!(
        svg,
        r##"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="#333"/>"##,
        H - MB
    );
    // axis labels: ends only, keeps the writer tiny
    for (t, anchor) in [(tmin, "start"), (tmax, "end")] {
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{:.3}</text>"#,
            x(t),
            H - MB + 16.0,
            t
        );
    }
    for v in [vmin, vmax] {
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
            ML - 6.0,
            y(v) + 4.0,
            v
        );
    }
    // zero line when visible
    if vmin < 0.0 && vmax > 0.0 {
        let _ = write!(
            svg,
            r##"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            y(0.0),
            W - MR,
            y(0.0)
        );
    }
    let step = (times.len() / 1500).max(1);
    for (s_idx, (name, vs)) in series.iter().enumerate() {
        let color = palette[s_idx % palette.len()];
        let mut points = String::new();
        for (idx, (&t, &v)) in times.iter().zip(vs.iter()).enumerate() {
            if idx % step != 0 && idx != times.len() - 1 {
                continue;
            }
            let _ = write!(points, "{:.2},{:.2} ", x(t), y(v));
        }
        let _ = write!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{points}"/>"#
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            W - MR - 70.0,
            MT + 14.0 * s_idx as f64,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>");
    fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Serializes any report to pretty JSON.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let values = [
            0.1,
            -0.30000000000000004,
            1.0 / 3.0,
            2f64.sqrt(),
            1e-308,
            -4.9e-324,
            12345.678901234567,
            0.0,
        ];
        let mut text = String::from("a,b\n");
        for pair in values.chunks(2) {
            text.push_str(&format!("{},{}\n", pair[0], pair[1]));
        }
        let table = parse_csv(&text).unwrap();
        assert_eq!(table.to_csv(), text);
        for (row, pair) in table.rows.iter().zip(values.chunks(2)) {
            assert_eq!(row[0].to_bits(), pair[0].to_bits());
            assert_eq!(row[1].to_bits(), pair[1].to_bits());
        }
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        assert!(parse_csv("a,b\n1.0\n").is_err());
        assert!(parse_csv("a,b\n1.0,x\n").is_err());
    }
}
