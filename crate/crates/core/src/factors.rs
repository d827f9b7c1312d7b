//! Crypto market, size and momentum factors.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::panel::AssetPanel;
use crate::portfolio::{form_quartiles, SortConfig};
use crate::series::{ensure_aligned, simple_returns, ReturnSeries};
use crate::signal::{momentum_signal, size_signal};

/// Aligned weekly factor realisations and the risk-free rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    /// Total-market return in excess of `rf`.
    pub cm: ReturnSeries,
    pub smb: ReturnSeries,
    pub mom: ReturnSeries,
    pub rf: ReturnSeries,
}

pub const FACTOR_NAMES: [&str; 3] = ["CM", "SMB", "Mom"];

impl FactorSet {
    pub fn new(
        cm: ReturnSeries,
        smb: ReturnSeries,
        mom: ReturnSeries,
        rf: ReturnSeries,
    ) -> Result<Self> {
        ensure_aligned(&cm, &smb)?;
        ensure_aligned(&cm, &mom)?;
        ensure_aligned(&cm, &rf)?;
        Ok(Self { cm, smb, mom, rf })
    }

    pub fn by_name(&self, name: &str) -> Option<&ReturnSeries> {
        match name {
            "CM" => Some(&self.cm),
            "SMB" => Some(&self.smb),
            "Mom" => Some(&self.mom),
            _ => None,
        }
    }

    /// Build the panel-derived factors and the market factor in one go.
    pub fn construct(
        panel: &AssetPanel,
        total_mcap: &[Option<f64>],
        rf: &ReturnSeries,
        config: &SortConfig,
    ) -> Result<Self> {
        let cm = market_factor(total_mcap, rf)?;
        let smb = smb_factor(panel, config);
        let mom = momentum_factor(panel, config);
        Self::new(cm, smb, mom, rf.clone())
    }
}

/// `total_t / total_{t-1} - 1 - rf_t`.
pub fn market_factor(total_mcap: &[Option<f64>], rf: &ReturnSeries) -> Result<ReturnSeries> {
    if total_mcap.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: total_mcap.len(),
        });
    }
    let raw = ReturnSeries::new(*rf.calendar(), simple_returns(total_mcap))?;
    raw.zip_with(rf, |r, f| r - f)
}

/// Long the top size quartile, short the bottom one, value weighted.
pub fn smb_factor(panel: &AssetPanel, config: &SortConfig) -> ReturnSeries {
    form_quartiles(&size_signal(panel), panel, config).hml
}

/// Long the top five-week-return quartile, short the bottom one.
pub fn momentum_factor(panel: &AssetPanel, config: &SortConfig) -> ReturnSeries {
    form_quartiles(&momentum_signal(panel), panel, config).hml
}

/// Cross-sectional sums per week, skipping missing cells.
pub fn panel_total_market_cap(panel: &AssetPanel) -> Vec<Option<f64>> {
    (0..panel.weeks())
        .map(|t| {
            let caps: Vec<f64> = (0..panel.n_assets())
                .filter_map(|a| panel.cell(a, t).market_cap)
                .collect();
            (!caps.is_empty()).then(|| caps.iter().sum())
        })
        .collect()
}
