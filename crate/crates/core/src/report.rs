//! Table and figure models. Values are converted from decimal fractions to
//! percentage points when a table or figure is built, never at rendering.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grs::GrsResult;
use crate::ols::RegressionResult;
use crate::panel::{AssetPanel, TvlField};
use crate::portfolio::PortfolioSeries;
use crate::series::{excess, ReturnSeries};
use crate::stats::{describe, StarLevel};

pub const DESCRIPTIVE_ROWS: [&str; 7] = ["mean", "std", "min", "25%", "50%", "75%", "max"];

/// Assets with fewer defined return weeks in a year are left off scatters.
pub const MIN_SCATTER_WEEKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TableKind {
    Descriptive,
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Cell {
    Empty,
    Value { value: f64, stars: StarLevel },
    PValue { value: f64 },
}

impl Cell {
    pub fn value(value: f64) -> Self {
        Cell::Value {
            value,
            stars: StarLevel::None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Value { value, stars } => format!("{value:.2}{}", stars.stars()),
            Cell::PValue { value } => format!("({value:.2})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

/// A run of adjacent columns sharing one factor model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnGroup {
    pub label: String,
    pub start: usize,
    pub len: usize,
    pub grs: Option<GrsResult>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableSpec {
    pub kind: TableKind,
    pub title: String,
    pub columns: Vec<String>,
    pub groups: Vec<ColumnGroup>,
    pub rows: Vec<Row>,
}

impl TableSpec {
    pub fn is_rectangular(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.cells.len() == self.columns.len())
    }

    pub fn row(&self, label: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.label == label)
    }

    fn footer_rows(&self) -> Vec<Row> {
        if self.groups.iter().all(|g| g.grs.is_none()) {
            return Vec::new();
        }
        let mut stat = vec![Cell::Empty; self.columns.len()];
        let mut pval = vec![Cell::Empty; self.columns.len()];
        for g in &self.groups {
            if let (Some(grs), true) = (g.grs, g.len > 0) {
                stat[g.start] = Cell::value(grs.f_stat);
                pval[g.start] = Cell::PValue { value: grs.p_value };
            }
        }
        vec![
            Row {
                label: "GRS Stat.".into(),
                cells: stat,
            },
            Row {
                label: "p-value".into(),
                cells: pval,
            },
        ]
    }

    /// Column-aligned plain text. Deterministic for identical tables.
    pub fn render_text(&self) -> String {
        let footer = self.footer_rows();
        let body: Vec<(String, Vec<String>)> = self
            .rows
            .iter()
            .chain(footer.iter())
            .map(|r| (r.label.clone(), r.cells.iter().map(Cell::render).collect()))
            .collect();
        let label_w = body
            .iter()
            .map(|(l, _)| l.chars().count())
            .max()
            .unwrap_or(0);
        let mut widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                body.iter()
                    .map(|(_, cells)| cells[c].chars().count())
                    .chain([self.columns[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let spans: Vec<&ColumnGroup> = if self.groups.len() > 1 {
            self.groups.iter().filter(|g| g.len > 0).collect()
        } else {
            Vec::new()
        };
        for g in &spans {
            let end = g.start + g.len;
            let span = widths[g.start..end].iter().sum::<usize>() + 2 * (g.len - 1);
            let need = g.label.chars().count();
            if need > span {
                widths[end - 1] += need - span;
            }
        }
        let line = |label: &str, cells: &[String]| {
            let mut s = String::new();
            s.push_str(label);
            for _ in label.chars().count()..label_w {
                s.push(' ');
            }
            for (c, cell) in cells.iter().enumerate() {
                s.push_str("  ");
                for _ in cell.chars().count()..widths[c] {
                    s.push(' ');
                }
                s.push_str(cell);
            }
            let trimmed = s.trim_end().len();
            s.truncate(trimmed);
            s.push('\n');
            s
        };
        let total_w = label_w + widths.iter().map(|w| w + 2).sum::<usize>();
        let rule: String = "-".repeat(total_w) + "\n";

        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        out.push_str(&rule);
        if !spans.is_empty() {
            let mut s = " ".repeat(label_w);
            let mut col = 0;
            for g in &spans {
                for w in &widths[col..g.start] {
                    s.push_str(&" ".repeat(w + 2));
                }
                let span = widths[g.start..g.start + g.len].iter().sum::<usize>() + 2 * g.len;
                for _ in g.label.chars().count()..span {
                    s.push(' ');
                }
                s.push_str(&g.label);
                col = g.start + g.len;
            }
            let trimmed = s.trim_end().len();
            s.truncate(trimmed);
            s.push('\n');
            out.push_str(&s);
        }
        out.push_str(&line("", &self.columns));
        out.push_str(&rule);
        for (label, cells) in body.iter().take(self.rows.len()) {
            out.push_str(&line(label, cells));
        }
        if !footer.is_empty() {
            out.push_str(&rule);
            for (label, cells) in body.iter().skip(self.rows.len()) {
                out.push_str(&line(label, cells));
            }
        }
        out.push_str(&rule);
        out
    }
}

/// Descriptive table over arbitrary decimal return series; stars on the mean
/// row only.
pub fn descriptive_table(title: &str, columns: &[(String, &ReturnSeries)]) -> Result<TableSpec> {
    if columns.is_empty() {
        return Err(Error::Invalid(
            "descriptive table needs at least one column".to_string(),
        ));
    }
    let stats = columns
        .iter()
        .map(|(_, s)| describe(s))
        .collect::<Result<Vec<_>>>()?;
    let pp = |v: f64| v * 100.0;
    let mut rows: Vec<Row> = DESCRIPTIVE_ROWS
        .iter()
        .map(|l| Row {
            label: l.to_string(),
            cells: Vec::with_capacity(columns.len()),
        })
        .collect();
    for s in &stats {
        rows[0].cells.push(Cell::Value {
            value: pp(s.mean),
            stars: s.star_level,
        });
        for (i, v) in [s.std, s.min, s.p25, s.p50, s.p75, s.max]
            .into_iter()
            .enumerate()
        {
            rows[i + 1].cells.push(Cell::value(pp(v)));
        }
    }
    Ok(TableSpec {
        kind: TableKind::Descriptive,
        title: title.to_string(),
        columns: columns.iter().map(|(l, _)| l.clone()).collect(),
        groups: vec![ColumnGroup {
            label: String::new(),
            start: 0,
            len: columns.len(),
            grs: None,
        }],
        rows,
    })
}

/// `HML, Q1..Q4` where the quartiles are in excess of `rf` and HML is the raw
/// long-short spread.
pub fn portfolio_columns(
    portfolios: &PortfolioSeries,
    rf: &ReturnSeries,
) -> Result<Vec<(String, ReturnSeries)>> {
    let mut out = vec![("HML".to_string(), portfolios.hml.clone())];
    for (q, series) in portfolios.q_returns.iter().enumerate() {
        out.push((format!("Q{}", q + 1), excess(series, rf)?));
    }
    Ok(out)
}

pub fn portfolio_descriptive_table(
    title: &str,
    portfolios: &PortfolioSeries,
    rf: &ReturnSeries,
) -> Result<TableSpec> {
    let cols = portfolio_columns(portfolios, rf)?;
    let refs: Vec<(String, &ReturnSeries)> = cols.iter().map(|(l, s)| (l.clone(), s)).collect();
    descriptive_table(title, &refs)
}

/// One factor model's regressions, shown as adjacent columns.
#[derive(Debug, Clone)]
pub struct RegressionBlock<'a> {
    pub label: String,
    pub columns: Vec<(String, &'a RegressionResult)>,
    pub grs: Option<GrsResult>,
}

fn term_label(name: &str) -> String {
    match name {
        "alpha" => "α".to_string(),
        other => format!("β_{other}"),
    }
}

/// Alpha and beta rows with p-values beneath, an Adj-R² row, and a GRS
/// footer per block. Alphas are shown in percentage points.
pub fn regression_table(title: &str, blocks: &[RegressionBlock<'_>]) -> Result<TableSpec> {
    // Union of terms in first-appearance order across blocks.
    let mut terms: Vec<String> = Vec::new();
    for b in blocks {
        let Some((_, first)) = b.columns.first() else {
            continue;
        };
        let names: Vec<String> = first.terms().map(|c| c.name.clone()).collect();
        for (label, r) in &b.columns {
            let other: Vec<String> = r.terms().map(|c| c.name.clone()).collect();
            if other != names {
                return Err(Error::MixedModels(format!(
                    "block {} column {label}: terms {:?} vs {:?}",
                    b.label, other, names
                )));
            }
        }
        for n in names {
            if !terms.contains(&n) {
                terms.push(n);
            }
        }
    }

    let mut columns = Vec::new();
    let mut groups = Vec::new();
    for b in blocks {
        groups.push(ColumnGroup {
            label: b.label.clone(),
            start: columns.len(),
            len: b.columns.len(),
            grs: b.grs,
        });
        columns.extend(b.columns.iter().map(|(l, _)| l.clone()));
    }
    let results: Vec<&RegressionResult> = blocks
        .iter()
        .flat_map(|b| b.columns.iter().map(|(_, r)| *r))
        .collect();

    let mut rows = Vec::new();
    for term in &terms {
        let mut est = Vec::with_capacity(results.len());
        let mut pv = Vec::with_capacity(results.len());
        for r in &results {
            match r.terms().find(|c| &c.name == term) {
                Some(c) => {
                    let scale = if term == "alpha" { 100.0 } else { 1.0 };
                    est.push(Cell::Value {
                        value: c.estimate * scale,
                        stars: StarLevel::from_p_value(c.p_value),
                    });
                    pv.push(Cell::PValue { value: c.p_value });
                }
                None => {
                    est.push(Cell::Empty);
                    pv.push(Cell::Empty);
                }
            }
        }
        rows.push(Row {
            label: term_label(term),
            cells: est,
        });
        rows.push(Row {
            label: String::new(),
            cells: pv,
        });
    }
    rows.push(Row {
        label: "Adj-R²".to_string(),
        cells: results.iter().map(|r| Cell::value(r.adj_r2)).collect(),
    });
    Ok(TableSpec {
        kind: TableKind::Regression,
        title: title.to_string(),
        columns,
        groups,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FigureKind {
    TvlRatioSeries,
    ReturnVsTvlScatter,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FigurePoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FigureData {
    pub kind: FigureKind,
    pub title: String,
    pub x_units: String,
    pub y_units: String,
    pub points: Vec<FigurePoint>,
}

impl FigureData {
    /// Time series must have strictly increasing x.
    pub fn validate(&self) -> Result<()> {
        if self.kind == FigureKind::TvlRatioSeries
            && self.points.windows(2).any(|w| !(w[1].x > w[0].x))
        {
            return Err(Error::Invalid(format!(
                "figure {}: x is not strictly increasing",
                self.title
            )));
        }
        Ok(())
    }
}

/// Weekly `Σ TVL / Σ MC` over assets with both values; x is the week index
/// and the label the sampling date.
pub fn tvl_ratio_figure(panel: &AssetPanel, field: TvlField) -> FigureData {
    let mut points = Vec::new();
    for t in 0..panel.weeks() {
        let mut tvl = 0.0;
        let mut mc = 0.0;
        let mut any = false;
        for a in 0..panel.n_assets() {
            let c = panel.cell(a, t);
            if let (Some(v), Some(m)) = (c.tvl(field), c.market_cap) {
                tvl += v;
                mc += m;
                any = true;
            }
        }
        if any && mc > 0.0 {
            points.push(FigurePoint {
                x: t as f64,
                y: tvl / mc,
                label: panel.calendar().date(t).to_string(),
            });
        }
    }
    FigureData {
        kind: FigureKind::TvlRatioSeries,
        title: format!(
            "{} TVL to market capitalization",
            capitalise(field.as_str())
        ),
        x_units: "week index".into(),
        y_units: "ratio".into(),
        points,
    }
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// One point per asset: mean TVL/MC over the year against mean weekly return
/// in percentage points.
pub fn return_vs_tvl_figure(panel: &AssetPanel, year: i32, field: TvlField) -> Result<FigureData> {
    if !panel.calendar().years().contains(&year) {
        return Err(Error::YearOutOfRange(year));
    }
    let weeks = panel.calendar().weeks_in_year(year);
    let mut points = Vec::new();
    for a in 0..panel.n_assets() {
        let rets = panel.returns(a);
        let r: Vec<f64> = weeks.clone().filter_map(|t| rets.get(t)).collect();
        let ratios: Vec<f64> = weeks
            .clone()
            .filter_map(|t| {
                let c = panel.cell(a, t);
                match (c.tvl(field), c.market_cap) {
                    (Some(v), Some(m)) if m > 0.0 => Some(v / m),
                    _ => None,
                }
            })
            .collect();
        if r.len() < MIN_SCATTER_WEEKS || ratios.is_empty() {
            continue;
        }
        points.push(FigurePoint {
            x: ratios.iter().sum::<f64>() / ratios.len() as f64,
            y: 100.0 * r.iter().sum::<f64>() / r.len() as f64,
            label: panel.assets()[a].clone(),
        });
    }
    Ok(FigureData {
        kind: FigureKind::ReturnVsTvlScatter,
        title: format!(
            "Returns by {} TVL to market capitalization for {year}",
            field.as_str()
        ),
        x_units: "mean TVL/MC".into(),
        y_units: "mean weekly return (pp)".into(),
        points,
    })
}
