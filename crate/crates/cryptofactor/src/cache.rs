//! Versioned CSV cache of raw records.
//!
//! ```text
//! # cryptofactor-cache v1
//! asset_id,date,price,market_cap,tvl_total,tvl_simple,categories
//! ethereum,2023-01-02,1214.5,146250000000,25700000000,24100000000,L1|smart-contracts
//! ```
//!
//! Empty fields are missing values. Floats are written in shortest
//! round-trip form, so `load(save(x)) == x` exactly.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use cryptofactor_core::RawRecord;

pub const MAGIC: &str = "# cryptofactor-cache v1";
pub const COLUMNS: [&str; 7] = [
    "asset_id",
    "date",
    "price",
    "market_cap",
    "tvl_total",
    "tvl_simple",
    "categories",
];
const TAG_SEPARATOR: char = '|';

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line 1: expected `{MAGIC}`, found `{0}`")]
    Version(String),
    #[error("line 2: unknown column `{0}`")]
    UnknownColumn(String),
    #[error("line 2: missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("cannot write record {asset_id} {date}: {message}")]
    Unwritable {
        asset_id: String,
        date: NaiveDate,
        message: String,
    },
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_cache<W: Write>(records: &[RawRecord], writer: W) -> Result<(), CacheError> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{MAGIC}")?;
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    csv.write_record(COLUMNS).map_err(csv_io)?;
    let mut seen = BTreeSet::new();
    for r in records {
        let bad = |message: String| CacheError::Unwritable {
            asset_id: r.asset_id.clone(),
            date: r.date,
            message,
        };
        if !seen.insert((r.asset_id.as_str(), r.date)) {
            return Err(bad("duplicate (asset_id, date)".into()));
        }
        if r.asset_id.is_empty() {
            return Err(bad("empty asset_id".into()));
        }
        for v in [r.price, r.market_cap, r.tvl_total, r.tvl_simple]
            .into_iter()
            .flatten()
        {
            if !v.is_finite() {
                return Err(bad(format!("non-finite value {v}")));
            }
        }
        if let Some(t) = r
            .categories
            .iter()
            .find(|t| t.is_empty() || t.contains(TAG_SEPARATOR))
        {
            return Err(bad(format!("category tag `{t}` is empty or contains `|`")));
        }
        let tags: Vec<&str> = r.categories.iter().map(String::as_str).collect();
        csv.write_record([
            r.asset_id.clone(),
            r.date.to_string(),
            fmt_opt(r.price),
            fmt_opt(r.market_cap),
            fmt_opt(r.tvl_total),
            fmt_opt(r.tvl_simple),
            tags.join("|"),
        ])
        .map_err(csv_io)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CacheError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CacheError::Io(io),
        other => CacheError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn read_cache<R: Read>(reader: R) -> Result<Vec<RawRecord>, CacheError> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let first = first.trim_end_matches(['\r', '\n']);
    if first != MAGIC {
        return Err(CacheError::Version(first.to_string()));
    }
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = csv.headers().map_err(|e| row_error(1, e))?.clone();
    for h in header.iter() {
        if !COLUMNS.contains(&h) {
            return Err(CacheError::UnknownColumn(h.to_string()));
        }
    }
    let index: Vec<usize> = COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| CacheError::MissingColumn(c.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for row in csv.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() + 1);
            row_error(line, e)
        })?;
        // The version comment precedes what the CSV reader sees.
        let line = row.position().map_or(0, |p| p.line() + 1);
        let field = |c: usize| row.get(index[c]).unwrap_or("");
        let message = |m: String| CacheError::Row { line, message: m };
        let asset_id = field(0).to_string();
        if asset_id.is_empty() {
            return Err(message("empty asset_id".into()));
        }
        let date = NaiveDate::parse_from_str(field(1), "%Y-%m-%d")
            .map_err(|e| message(format!("date `{}`: {e}", field(1))))?;
        let num = |c: usize| -> Result<Option<f64>, CacheError> {
            let s = field(c);
            if s.is_empty() {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(message(format!(
                    "{} `{s}` is not a finite number",
                    COLUMNS[c]
                ))),
            }
        };
        let mut record = RawRecord::new(asset_id, date);
        record.price = num(2)?;
        record.market_cap = num(3)?;
        record.tvl_total = num(4)?;
        record.tvl_simple = num(5)?;
        record.categories = field(6)
            .split(TAG_SEPARATOR)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        if !seen.insert((record.asset_id.clone(), date)) {
            return Err(message(format!(
                "duplicate record {} {date}",
                record.asset_id
            )));
        }
        out.push(record);
    }
    Ok(out)
}

fn row_error(line: u64, e: csv::Error) -> CacheError {
    CacheError::Row {
        line,
        message: e.to_string(),
    }
}

pub fn save_cache(records: &[RawRecord], path: &Path) -> Result<(), CacheError> {
    write_cache(records, File::create(path)?)
}

pub fn load_cache(path: &Path) -> Result<Vec<RawRecord>, CacheError> {
    read_cache(File::open(path)?)
}
