//! Byte-deterministic table and figure files.

use std::fmt::Write as _;

use cryptofactor_core::report::{FigureData, TableSpec};

/// Aligned text rendering, newline terminated.
pub fn table_text(table: &TableSpec) -> String {
    let mut s = table.render_text();
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

pub fn table_json(table: &TableSpec) -> String {
    let mut s = serde_json::to_string_pretty(table).expect("tables serialise");
    s.push('\n');
    s
}

pub fn parse_table_json(text: &str) -> serde_json::Result<TableSpec> {
    serde_json::from_str(text)
}

/// `v` with six significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let rounded: f64 = sci.parse().unwrap();
        format!("{rounded:.decimals$}")
    } else {
        sci
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `x,y,label` CSV.
pub fn figure_csv(figure: &FigureData) -> String {
    let mut s = String::from("x,y,label\n");
    for p in &figure.points {
        writeln!(s, "{},{},{}", sig6(p.x), sig6(p.y), csv_field(&p.label)).unwrap();
    }
    s
}
