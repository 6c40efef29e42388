//! CSV tables and a bare-bones SVG line plot.

use std::fmt::Write as _;

/// Comma-separated table with a header row. Numbers use the shortest
/// representation that round-trips, so output is byte-stable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One CSV cell.
pub enum Cell {
    Num(f64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

fn render(c: Cell) -> String {
    match c {
        Cell::Num(v) => format!("{v:?}"),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s,
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row.into_iter().map(render).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// A polyline; `None` points break the line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub width: f64,
    pub points: Vec<Option<(f64, f64)>>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 48.0;

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

/// Plot of the series with axes, tick labels at the ends and a legend.
pub fn svg_plot(series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter().flatten());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
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
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{} {} H{} M{} {} V{}" stroke="black" fill="none"/>"#,
        PAD,
        H - PAD,
        W - PAD,
        PAD,
        H - PAD,
        PAD
    );
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="{anchor}">{}</text>"#,
            fmt2(sx(x)),
            H - PAD + 16.0,
            fmt2(x)
        );
    }
    for y in [y0, y1] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
            PAD - 4.0,
            fmt2(sy(y) + 4.0),
            fmt2(y)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for p in &s.points {
            match p {
                Some((x, y)) if x.is_finite() && y.is_finite() => {
                    let _ = write!(d, "{}{} {} ", if pen_down { "L" } else { "M" }, fmt2(sx(*x)), fmt2(sy(*y)));
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{}" stroke-width="{}" fill="none"/>"#,
            d.trim_end(),
            s.color,
            s.width
        );
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{}">{}</text>"#,
            W - PAD - 80.0,
            ly,
            s.color,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}
