use std::fmt::Write as _;

use clusterkr::{Error, InferenceBand, Result};
use serde_json::{json, Value};

/// Shortest form that still carries 17 significant digits, so every value
/// parses back to the same double.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => quote(s),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Column-ordered rows rendered as CSV or as JSON
/// `{"columns": [...], "rows": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: impl IntoIterator<Item = impl Into<String>>) -> Table {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| quote(c)).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

const VARIANTS: [&str; 3] = ["iid", "cr", "lambda"];

fn band_intervals(b: &InferenceBand) -> [(f64, f64); 3] {
    [b.ci_iid, b.ci_cr, b.ci_lambda].map(|ci| (ci.lo, ci.hi))
}

/// Plot-ready CSV: `x..., mhat`, then `lo`/`hi` for each interval variant,
/// one row per band.
pub fn emit_plot_data(bands: &[InferenceBand]) -> Result<String> {
    let first = bands
        .first()
        .ok_or_else(|| Error::Validation("no bands to plot".into()))?;
    let d = first.x.len();
    let mut cols: Vec<String> = if d == 1 {
        vec!["x".into()]
    } else {
        (1..=d).map(|q| format!("x{q}")).collect()
    };
    cols.push("mhat".into());
    for v in VARIANTS {
        cols.push(format!("{v}_lo"));
        cols.push(format!("{v}_hi"));
    }
    let mut t = Table::new(cols);
    for b in bands {
        let mut row: Vec<Cell> = b.x.iter().map(|&v| Cell::Num(v)).collect();
        row.push(Cell::Num(b.estimate));
        for (lo, hi) in band_intervals(b) {
            row.push(Cell::Num(lo));
            row.push(Cell::Num(hi));
        }
        t.push(row);
    }
    Ok(t.to_csv())
}

/// Line chart of the estimate and the interval bounds against the first
/// coordinate.
pub fn svg_chart(bands: &[InferenceBand]) -> Result<String> {
    if bands.is_empty() {
        return Err(Error::Validation("no bands to plot".into()));
    }
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let xs: Vec<f64> = bands.iter().map(|b| b.x[0]).collect();
    let mut ys: Vec<f64> = bands.iter().map(|b| b.estimate).collect();
    for b in bands {
        for (lo, hi) in band_intervals(b) {
            ys.push(lo);
            ys.push(hi);
        }
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let line = |vals: &mut dyn Iterator<Item = (f64, f64)>, colour: &str, dash: &str| {
        let pts: Vec<String> = vals.map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            pts.join(" ")
        )
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let styles = [("#1b9e77", " stroke-dasharray=\"2,3\""), ("#7570b3", " stroke-dasharray=\"6,3\""), ("#d95f02", "")];
    for (k, (colour, dash)) in styles.iter().enumerate() {
        for side in 0..2 {
            let mut it = bands.iter().map(|b| {
                let (lo, hi) = band_intervals(b)[k];
                (b.x[0], if side == 0 { lo } else { hi })
            });
            s.push_str(&line(&mut it, colour, dash));
        }
    }
    s.push_str(&line(&mut bands.iter().map(|b| (b.x[0], b.estimate)), "black", ""));
    for (k, name) in VARIANTS.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{name}</text>",
            pad + 8.0 + 70.0 * k as f64,
            pad - 10.0,
            styles[k].0
        );
    }
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"{}\" font-size=\"11\">{}</text>", h - 12.0, fmt_num(x0));
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
        w - pad,
        h - 12.0,
        fmt_num(x1)
    );
    s.push_str("</svg>\n");
    Ok(s)
}
