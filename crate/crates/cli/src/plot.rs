//! Standalone SVG line chart of `test_auc` per round from run CSVs.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// `(round, auc)` pairs from a run CSV.
pub fn read_auc_series(csv: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = csv.lines();
    let header = lines.next().context("empty CSV")?;
    let cols: Vec<&str> = header.split(',').collect();
    let round_col = cols.iter().position(|c| *c == "round").context("no `round` column")?;
    let auc_col = cols.iter().position(|c| *c == "test_auc").context("no `test_auc` column")?;
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            let get = |c: usize| -> Result<f64> {
                fields
                    .get(c)
                    .context("short row")?
                    .parse::<f64>()
                    .with_context(|| format!("row {}", i + 2))
            };
            Ok((get(round_col)?, get(auc_col)?))
        })
        .collect()
}

/// Render labelled series on a shared axis; AUC is plotted on `[0, 1]`.
pub fn render_svg(series: &[(String, Vec<(f64, f64)>)]) -> Result<String> {
    if series.iter().all(|(_, s)| s.is_empty()) {
        bail!("nothing to plot");
    }
    let max_round = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .fold(1.0_f64, f64::max);
    let x = |r: f64| MARGIN + (r - 1.0).max(0.0) / (max_round - 1.0).max(1.0) * (WIDTH - 2.0 * MARGIN);
    let y = |auc: f64| HEIGHT - MARGIN - auc.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#)?;
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        svg,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )?;
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{tick}</text>"#, MARGIN - 6.0, y(tick) + 4.0)?;
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">round</text>"#, WIDTH / 2.0, HEIGHT - 12.0)?;
    writeln!(svg, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">test AUC</text>"#, HEIGHT / 2.0, HEIGHT / 2.0)?;
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points.iter().map(|&(r, a)| format!("{:.1},{:.1}", x(r), y(a))).collect();
        writeln!(svg, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, path.join(" "))?;
        let ly = MARGIN + 16.0 * i as f64;
        writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, WIDTH - MARGIN - 160.0, escape(label))?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
