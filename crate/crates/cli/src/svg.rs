//! SVG rendering of sweep CSV files. Output depends only on the CSV text and
//! the chosen columns.

use std::fmt::Write;

use cpf_core::sweep::fmt_value;
use cpf_core::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 70.0;

// viridis samples
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn colour(s: f64) -> String {
    let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 };
    let x = s * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn parse(csv_text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let header = reader.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|f| f.parse::<f64>().unwrap_or(f64::NAN))
                    .collect(),
            );
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("svg: no column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn frame(out: &mut String, x: &str, y: &str, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>",
        WIDTH / 2.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x}</text>",
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{y}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn ticks(out: &mut String, xs: (f64, f64), ys: (f64, f64)) {
    let (left, right) = (MARGIN, WIDTH - MARGIN);
    let (top, bottom) = (MARGIN, HEIGHT - MARGIN);
    for (x, anchor, v) in [(left, "start", xs.0), (right, "end", xs.1)] {
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>",
            bottom + 18.0,
            short(v)
        );
    }
    for (y, v) in [(bottom, ys.0), (top + 10.0, ys.1)] {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            short(v)
        );
    }
}

fn short(v: f64) -> String {
    format!("{v:.3e}")
}

/// Heatmap of `value` over the grid spanned by the `x` and `y` columns.
///
/// Cells are placed by grid index, so log-spaced axes render uniformly.
pub fn heatmap(csv_text: &str, x: &str, y: &str, value: &str) -> Result<String> {
    let t = Table::parse(csv_text)?;
    let (xc, yc, vc) = (t.column(x)?, t.column(y)?, t.column(value)?);
    let (xs, ys) = (distinct(&xc), distinct(&yc));
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidArgument("svg: empty table".into()));
    }
    let (lo, hi) = range(&vc);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (WIDTH - 2.0 * MARGIN) / xs.len() as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ys.len() as f64;

    let mut out = String::new();
    frame(&mut out, x, y, &format!("{value} (min {}, max {})", fmt_value(lo), fmt_value(hi)));
    for ((&xv, &yv), &v) in xc.iter().zip(&yc).zip(&vc) {
        let i = xs.partition_point(|&a| a < xv);
        let j = ys.partition_point(|&a| a < yv);
        let px = MARGIN + i as f64 * cw;
        let py = HEIGHT - MARGIN - (j + 1) as f64 * ch;
        let _ = writeln!(
            out,
            "<rect x=\"{px:.3}\" y=\"{py:.3}\" width=\"{cw:.3}\" height=\"{ch:.3}\" fill=\"{}\"/>",
            colour((v - lo) / span)
        );
    }
    ticks(&mut out, (xs[0], xs[xs.len() - 1]), (ys[0], ys[ys.len() - 1]));
    out.push_str("</svg>\n");
    Ok(out)
}

/// Line plot of `value` against the `x` column.
pub fn line_plot(csv_text: &str, x: &str, value: &str) -> Result<String> {
    let t = Table::parse(csv_text)?;
    let (xc, vc) = (t.column(x)?, t.column(value)?);
    let (xlo, xhi) = range(&xc);
    let (lo, hi) = range(&vc);
    let xspan = if xhi > xlo { xhi - xlo } else { 1.0 };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let log_x = xlo > 0.0 && xhi / xlo > 100.0;
    let pos = |v: f64| {
        if log_x {
            (v.ln() - xlo.ln()) / (xhi.ln() - xlo.ln())
        } else {
            (v - xlo) / xspan
        }
    };

    let mut out = String::new();
    frame(&mut out, x, value, value);
    let points: Vec<String> = xc
        .iter()
        .zip(&vc)
        .filter(|(_, v)| v.is_finite())
        .map(|(&xv, &v)| {
            let px = MARGIN + pos(xv) * (WIDTH - 2.0 * MARGIN);
            let py = HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2.0 * MARGIN);
            format!("{px:.3},{py:.3}")
        })
        .collect();
    let _ = writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>",
        colour(0.25),
        points.join(" ")
    );
    ticks(&mut out, (xlo, xhi), (lo, hi));
    out.push_str("</svg>\n");
    Ok(out)
}
