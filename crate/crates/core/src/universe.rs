//! Raw records, the simple-TVL adjustment, and universe construction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::calendar::WeekCalendar;
use crate::error::{Error, Result};
use crate::panel::{AssetObservation, AssetPanel};

/// One dated observation as delivered by a data source. Dates need not be
/// weekly; sampling onto the calendar happens in [`build_universe`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RawRecord {
    pub asset_id: String,
    pub date: NaiveDate,
    pub price: Option<f64>,
    pub market_cap: Option<f64>,
    pub tvl_total: Option<f64>,
    pub tvl_simple: Option<f64>,
    pub categories: BTreeSet<String>,
}

impl RawRecord {
    pub fn new(asset_id: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            asset_id: asset_id.into(),
            date,
            price: None,
            market_cap: None,
            tvl_total: None,
            tvl_simple: None,
            categories: BTreeSet::new(),
        }
    }

    fn observation(&self) -> AssetObservation {
        AssetObservation {
            price: self.price,
            market_cap: self.market_cap,
            tvl_total: self.tvl_total,
            tvl_simple: self.tvl_simple,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct UniverseRule {
    pub top_n: usize,
    /// Matched case-insensitively against asset identifiers.
    pub exclude_ids: BTreeSet<String>,
    /// Matched case-insensitively against category tags.
    pub exclude_categories: BTreeSet<String>,
    pub restrict_categories: Option<BTreeSet<String>>,
    /// Oldest record, in days before a sampling date, that may fill its cell.
    pub staleness_days: u32,
}

impl Default for UniverseRule {
    fn default() -> Self {
        Self {
            top_n: 100,
            exclude_ids: ["bitcoin", "btc"].into_iter().map(String::from).collect(),
            exclude_categories: ["stablecoin"].into_iter().map(String::from).collect(),
            restrict_categories: None,
            staleness_days: 3,
        }
    }
}

fn contains_ci(set: &BTreeSet<String>, needle: &str) -> bool {
    set.iter().any(|s| s.eq_ignore_ascii_case(needle))
}

impl UniverseRule {
    /// Id/category filters only; rank membership is checked separately.
    pub fn admits(&self, id: &str, categories: &BTreeSet<String>) -> bool {
        if contains_ci(&self.exclude_ids, id) {
            return false;
        }
        if categories
            .iter()
            .any(|c| contains_ci(&self.exclude_categories, c))
        {
            return false;
        }
        match &self.restrict_categories {
            Some(keep) => categories.iter().any(|c| contains_ci(keep, c)),
            None => true,
        }
    }
}

/// One asset's date-sorted records sampled onto the calendar: each point
/// takes the latest record dated on or before it, if at most
/// `staleness_days` old.
pub fn sample_records(
    rows: &[&RawRecord],
    calendar: &WeekCalendar,
    staleness_days: u32,
) -> Vec<AssetObservation> {
    let mut out = Vec::with_capacity(calendar.count());
    let mut cursor = 0usize;
    for date in calendar.dates() {
        while cursor < rows.len() && rows[cursor].date <= date {
            cursor += 1;
        }
        let obs = match cursor.checked_sub(1).map(|i| rows[i]) {
            Some(r) if (date - r.date).num_days() <= staleness_days as i64 => r.observation(),
            _ => AssetObservation::default(),
        };
        out.push(obs);
    }
    out
}

/// Sample records onto the calendar, rank by market cap at every sampling
/// point, and keep assets that were ever within `top_n` and pass the rule's
/// filters. Assets are ordered by identifier.
pub fn build_universe(
    records: &[RawRecord],
    rule: &UniverseRule,
    calendar: &WeekCalendar,
) -> Result<AssetPanel> {
    if rule.top_n == 0 {
        return Err(Error::Invalid(String::from("top_n must be at least 1")));
    }
    let mut by_asset: BTreeMap<&str, Vec<&RawRecord>> = BTreeMap::new();
    for r in records {
        by_asset.entry(r.asset_id.as_str()).or_default().push(r);
    }
    for (id, rows) in by_asset.iter_mut() {
        rows.sort_by_key(|r| r.date);
        if let Some(w) = rows.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::Invalid(format!(
                "duplicate record for asset {id} on {}",
                w[0].date
            )));
        }
    }

    let weeks = calendar.count();
    let ids: Vec<&str> = by_asset.keys().copied().collect();
    let sampled: Vec<Vec<AssetObservation>> = ids
        .iter()
        .map(|id| sample_records(&by_asset[id], calendar, rule.staleness_days))
        .collect();

    let mut ever_member = alloc::vec![false; ids.len()];
    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(ids.len());
    for week in 0..weeks {
        ranked.clear();
        ranked.extend(
            sampled
                .iter()
                .enumerate()
                .filter_map(|(i, row)| row[week].market_cap.map(|mc| (i, mc))),
        );
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| ids[a.0].cmp(ids[b.0])));
        for &(i, _) in ranked.iter().take(rule.top_n) {
            ever_member[i] = true;
        }
    }

    let mut assets = Vec::new();
    let mut categories = Vec::new();
    let mut cells = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let tags: BTreeSet<String> = by_asset[id]
            .iter()
            .flat_map(|r| r.categories.iter().cloned())
            .collect();
        if ever_member[i] && rule.admits(id, &tags) {
            assets.push(id.to_string());
            categories.push(tags);
            cells.extend_from_slice(&sampled[i]);
        }
    }
    if assets.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    AssetPanel::new(*calendar, assets, categories, cells)
}

/// DefiLlama-style categories removed from total TVL to obtain simple TVL,
/// with the key spellings accepted for each.
pub const EXCLUDED_TVL_CATEGORIES: [(&str, &[&str]); 7] = [
    ("staking", &["staking"]),
    ("pool2", &["pool2"]),
    ("governance", &["governance", "govtokens", "gov_tokens"]),
    ("borrowed", &["borrowed", "borrows", "borrowing"]),
    (
        "doublecounted",
        &["doublecounted", "double_count", "doublecount"],
    ),
    ("liquidstaking", &["liquidstaking", "liquid_staking"]),
    ("vesting", &["vesting"]),
];

pub const TOTAL_TVL_KEY: &str = "total";

#[derive(Debug, Clone, PartialEq)]
pub enum TvlWarning {
    UnknownCategory(String),
    /// Excluded categories summed past the total; the result was floored at 0.
    Floored {
        total: f64,
        excluded: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleTvl {
    pub value: f64,
    pub warnings: Vec<TvlWarning>,
}

/// Total TVL minus the seven excluded categories, floored at zero. Unknown
/// keys are ignored and reported as warnings.
pub fn compute_simple_tvl(tvl_by_category: &BTreeMap<String, f64>) -> Result<SimpleTvl> {
    let total = *tvl_by_category
        .get(TOTAL_TVL_KEY)
        .ok_or_else(|| Error::Invalid(String::from("tvl breakdown has no \"total\" entry")))?;
    let mut warnings = Vec::new();
    let mut excluded = 0.0;
    for (key, &value) in tvl_by_category {
        if !(value >= 0.0) {
            return Err(Error::Invalid(format!("tvl category {key} is negative")));
        }
        if key == TOTAL_TVL_KEY {
            continue;
        }
        let known = EXCLUDED_TVL_CATEGORIES
            .iter()
            .any(|(_, aliases)| aliases.iter().any(|a| a.eq_ignore_ascii_case(key)));
        if known {
            excluded += value;
        } else {
            warnings.push(TvlWarning::UnknownCategory(key.clone()));
        }
    }
    let mut value = total - excluded;
    if value < 0.0 {
        warnings.push(TvlWarning::Floored { total, excluded });
        value = 0.0;
    }
    Ok(SimpleTvl { value, warnings })
}
