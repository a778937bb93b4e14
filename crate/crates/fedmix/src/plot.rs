//! Deterministic SVG line charts for convergence traces.
//!
//! Input is one or more CSVs sharing a schema (as written by the run
//! harness); output is a fixed-size chart with one polyline per file, a
//! legend in input order and axis labels taken from column names. Identical
//! inputs produce byte-identical SVG.

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// A parsed trace: header plus rows of optional floats (empty cells parse to
/// `None`).
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<CsvTable> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or(Error::Schema("empty csv".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(Error::Schema(format!(
                    "row {} has {} fields, header has {}",
                    idx + 2,
                    fields.len(),
                    header.len()
                )));
            }
            rows.push(
                fields
                    .iter()
                    .map(|f| {
                        let t = f.trim();
                        if t.is_empty() {
                            Ok(None)
                        } else {
                            t.parse::<f64>().map(Some).map_err(|_| {
                                Error::Schema(format!("bad number `{t}` in row {}", idx + 2))
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        if rows.is_empty() {
            return Err(Error::Schema("no rows".into()));
        }
        Ok(CsvTable { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }
}

/// Plot description: which columns to draw and whether the y axis is
/// logarithmic.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x_column: String,
    pub y_column: String,
    pub log_y: bool,
    pub title: String,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            x_column: "k".into(),
            y_column: "rel_subopt".into(),
            log_y: true,
            title: String::new(),
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders the named series of every table into one chart. Tables must share
/// the two plotted columns; rows with empty cells are skipped.
pub fn render_svg(tables: &[(String, CsvTable)], spec: &PlotSpec) -> Result<String> {
    if tables.is_empty() {
        return Err(Error::Schema("no input tables".into()));
    }
    // collect series in input order
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (name, table) in tables {
        let xi = table.column_index(&spec.x_column)?;
        let yi = table.column_index(&spec.y_column)?;
        let mut pts = Vec::new();
        for row in &table.rows {
            if let (Some(x), Some(y)) = (row[xi], row[yi]) {
                if spec.log_y && y <= 0.0 {
                    continue;
                }
                let y = if spec.log_y { y.log10() } else { y };
                pts.push((x, y));
            }
        }
        if pts.is_empty() {
            return Err(Error::Schema(format!("series `{name}` has no plottable rows")));
        }
        series.push((name.clone(), pts));
    }
    let (mut x_min, mut x_max) = (f64::MAX, f64::MIN);
    let (mut y_min, mut y_max) = (f64::MAX, f64::MIN);
    for (_, pts) in &series {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if !spec.title.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"16\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            xml_escape(&spec.title)
        ));
    }
    // frame
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));
    // ticks: 5 per axis
    for t in 0..=4 {
        let fx = t as f64 / 4.0;
        let xv = x_min + fx * (x_max - x_min);
        let px = sx(xv);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#999\" stroke-width=\"0.5\"/>\n",
            fmt(px),
            fmt(MARGIN_TOP),
            fmt(MARGIN_TOP + plot_h)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(px),
            fmt(MARGIN_TOP + plot_h + 16.0),
            tick_label(xv, false)
        ));
        let yv = y_min + fx * (y_max - y_min);
        let py = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#999\" stroke-width=\"0.5\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(MARGIN_LEFT + plot_w),
            fmt(py)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(py + 4.0),
            tick_label(yv, spec.log_y)
        ));
    }
    // axis labels from column names
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 12.0),
        xml_escape(&spec.x_column)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        xml_escape(&if spec.log_y { format!("log10 {}", spec.y_column) } else { spec.y_column.clone() })
    ));
    // polylines
    for (s, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let mut path = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            path.push_str(if i == 0 { "M" } else { " L" });
            path.push_str(&format!("{} {}", fmt(sx(x)), fmt(sy(y))));
        }
        svg.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
    }
    // legend, input order
    for (s, (name, _)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let y = MARGIN_TOP + 14.0 + 16.0 * s as f64;
        let x = MARGIN_LEFT + plot_w - 150.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            fmt(x),
            fmt(y - 4.0),
            fmt(x + 18.0),
            fmt(y - 4.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
            fmt(x + 24.0),
            fmt(y),
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
