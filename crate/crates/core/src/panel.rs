//! Rectangular asset x week panel.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::WeekCalendar;
use crate::error::{Error, Result};
use crate::series::{simple_returns, ReturnSeries};

/// Which TVL measure a signal reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TvlField {
    Total,
    Simple,
}

impl TvlField {
    pub fn as_str(self) -> &'static str {
        match self {
            TvlField::Total => "total",
            TvlField::Simple => "simple",
        }
    }
}

/// One asset's sampled values at one week. Every field may be missing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssetObservation {
    pub price: Option<f64>,
    pub market_cap: Option<f64>,
    pub tvl_total: Option<f64>,
    pub tvl_simple: Option<f64>,
}

impl AssetObservation {
    pub fn tvl(&self, field: TvlField) -> Option<f64> {
        match field {
            TvlField::Total => self.tvl_total,
            TvlField::Simple => self.tvl_simple,
        }
    }

    /// Checks nonnegativity and `tvl_simple <= tvl_total`.
    pub fn validate(&self) -> core::result::Result<(), &'static str> {
        for (name, v) in [
            ("price", self.price),
            ("market_cap", self.market_cap),
            ("tvl_total", self.tvl_total),
            ("tvl_simple", self.tvl_simple),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(name);
                }
            }
        }
        if let (Some(s), Some(t)) = (self.tvl_simple, self.tvl_total) {
            if s > t {
                return Err("tvl_simple");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssetPanel {
    calendar: WeekCalendar,
    assets: Vec<String>,
    categories: Vec<BTreeSet<String>>,
    /// Asset-major: `cells[asset * weeks + week]`.
    cells: Vec<AssetObservation>,
}

impl AssetPanel {
    /// Builds a panel from per-asset rows of `calendar.count()` observations.
    pub fn new(
        calendar: WeekCalendar,
        assets: Vec<String>,
        categories: Vec<BTreeSet<String>>,
        cells: Vec<AssetObservation>,
    ) -> Result<Self> {
        if categories.len() != assets.len() {
            return Err(Error::Alignment(format!(
                "{} assets but {} category sets",
                assets.len(),
                categories.len()
            )));
        }
        if cells.len() != assets.len() * calendar.count() {
            return Err(Error::Alignment(format!(
                "expected {} cells, got {}",
                assets.len() * calendar.count(),
                cells.len()
            )));
        }
        let unique: BTreeSet<&String> = assets.iter().collect();
        if unique.len() != assets.len() {
            return Err(Error::Invalid(String::from("duplicate asset identifier")));
        }
        for (i, obs) in cells.iter().enumerate() {
            if let Err(field) = obs.validate() {
                return Err(Error::Invalid(format!(
                    "asset {} week {}: invalid {field}",
                    assets[i / calendar.count()],
                    i % calendar.count()
                )));
            }
        }
        Ok(Self {
            calendar,
            assets,
            categories,
            cells,
        })
    }

    pub fn calendar(&self) -> &WeekCalendar {
        &self.calendar
    }

    pub fn weeks(&self) -> usize {
        self.calendar.count()
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn categories(&self, asset: usize) -> &BTreeSet<String> {
        &self.categories[asset]
    }

    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == id)
    }

    pub fn cell(&self, asset: usize, week: usize) -> &AssetObservation {
        &self.cells[asset * self.weeks() + week]
    }

    pub fn cell_mut(&mut self, asset: usize, week: usize) -> &mut AssetObservation {
        let w = self.weeks();
        &mut self.cells[asset * w + week]
    }

    pub fn row(&self, asset: usize) -> &[AssetObservation] {
        let w = self.weeks();
        &self.cells[asset * w..(asset + 1) * w]
    }

    /// Every (asset, week) pair in asset-major order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, &AssetObservation)> {
        let w = self.weeks();
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, c)| (i / w, i % w, c))
    }

    pub fn prices(&self, asset: usize) -> Vec<Option<f64>> {
        self.row(asset).iter().map(|c| c.price).collect()
    }

    pub fn returns(&self, asset: usize) -> ReturnSeries {
        ReturnSeries::new(self.calendar, simple_returns(&self.prices(asset)))
            .expect("row length equals calendar length")
    }

    /// Asset-major return matrix.
    pub fn return_matrix(&self) -> Vec<Option<f64>> {
        (0..self.n_assets())
            .flat_map(|a| simple_returns(&self.prices(a)))
            .collect()
    }

    /// Sub-panel of the assets for which `keep` returns true.
    pub fn filter_assets(&self, keep: impl Fn(&str, &BTreeSet<String>) -> bool) -> Result<Self> {
        let mut assets = Vec::new();
        let mut cats = Vec::new();
        let mut cells = Vec::new();
        for (i, id) in self.assets.iter().enumerate() {
            if keep(id, &self.categories[i]) {
                assets.push(id.clone());
                cats.push(self.categories[i].clone());
                cells.extend_from_slice(self.row(i));
            }
        }
        if assets.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        Ok(Self {
            calendar: self.calendar,
            assets,
            categories: cats,
            cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use chrono::NaiveDate;

    fn panel(n_assets: usize, weeks: usize) -> AssetPanel {
        let cal = WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), weeks).unwrap();
        let assets = (0..n_assets).map(|i| format!("A{i}")).collect();
        AssetPanel::new(
            cal,
            assets,
            vec![BTreeSet::new(); n_assets],
            vec![AssetObservation::default(); n_assets * weeks],
        )
        .unwrap()
    }

    #[test]
    fn addressing_is_total() {
        let p = panel(7, 11);
        assert_eq!(p.iter_cells().count(), 77);
        let mut seen = BTreeSet::new();
        for (a, w, _) in p.iter_cells() {
            assert!(seen.insert((a, w)));
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let cal = WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), 2).unwrap();
        let dup = AssetPanel::new(
            cal,
            vec!["x".into(), "x".into()],
            vec![BTreeSet::new(); 2],
            vec![AssetObservation::default(); 4],
        );
        assert!(dup.is_err());
        let bad = AssetObservation {
            tvl_total: Some(1.0),
            tvl_simple: Some(2.0),
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err("tvl_simple"));
        let neg = AssetObservation {
            market_cap: Some(-1.0),
            ..Default::default()
        };
        assert_eq!(neg.validate(), Err("market_cap"));
    }

    #[test]
    fn filter_to_nothing_is_empty_universe() {
        let p = panel(3, 4);
        assert_eq!(p.filter_assets(|_, _| false), Err(Error::EmptyUniverse));
        assert_eq!(
            p.filter_assets(|id, _| id != "A1").unwrap().assets(),
            &["A0", "A2"]
        );
    }
}
