//! One cell of the experimental grid: sort, describe, select, regress, test.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::grs::{grs_test, GrsResult};
use crate::ols::{ols, RegressionResult};
use crate::panel::{AssetPanel, TvlField};
use crate::portfolio::{form_quartiles, PortfolioSeries, SortConfig};
use crate::report::{
    descriptive_table, portfolio_columns, regression_table, RegressionBlock, TableSpec,
};
use crate::series::{intersect_defined, ReturnSeries};
use crate::signal::{dtvl_ratio_signal, tvl_ratio_signal, SignalKind};
use crate::stats::{describe, DescriptiveStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Model {
    Market,
    ThreeFactor,
}

impl Model {
    pub fn factor_names(self) -> &'static [&'static str] {
        match self {
            Model::Market => &["CM"],
            Model::ThreeFactor => &["CM", "SMB", "Mom"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Model::Market => "Market model",
            Model::ThreeFactor => "Three-factor model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSpec {
    pub field: TvlField,
    /// [`SignalKind::TvlRatio`] or [`SignalKind::DtvlRatio`].
    pub signal: SignalKind,
    pub models: Vec<Model>,
    pub sort: SortConfig,
    /// Quartiles whose mean excess return is significant at this two-sided
    /// level are regressed on the factors.
    pub selection_level: f64,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            field: TvlField::Total,
            signal: SignalKind::TvlRatio,
            models: alloc::vec![Model::Market, Model::ThreeFactor],
            sort: SortConfig::default(),
            selection_level: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub model: Model,
    /// `(portfolio label, fit)` for each selected portfolio.
    pub regressions: Vec<(String, RegressionResult)>,
    pub grs: Option<GrsResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub portfolios: PortfolioSeries,
    /// `HML, Q1..Q4`; quartiles in excess of the risk-free rate.
    pub columns: Vec<(String, ReturnSeries)>,
    pub stats: Vec<DescriptiveStats>,
    pub descriptive: TableSpec,
    pub selected: Vec<String>,
    pub fits: Vec<ModelFit>,
    /// `None` when no portfolio has a significant mean.
    pub regression: Option<TableSpec>,
}

impl CellResult {
    pub fn fit(&self, model: Model) -> Option<&ModelFit> {
        self.fits.iter().find(|f| f.model == model)
    }
}

pub fn analyze_cell(
    panel: &AssetPanel,
    factors: &FactorSet,
    spec: &CellSpec,
) -> Result<CellResult> {
    let signal = match spec.signal {
        SignalKind::TvlRatio => tvl_ratio_signal(panel, spec.field),
        SignalKind::DtvlRatio => dtvl_ratio_signal(panel, spec.field),
        other => return Err(Error::Invalid(format!("{other:?} is not a TVL signal"))),
    };
    let portfolios = form_quartiles(&signal, panel, &spec.sort);
    let columns = portfolio_columns(&portfolios, &factors.rf)?;
    let refs: Vec<(String, &ReturnSeries)> = columns.iter().map(|(l, s)| (l.clone(), s)).collect();
    let descriptive = descriptive_table("Descriptive statistics", &refs)?;
    let stats = columns
        .iter()
        .map(|(_, s)| describe(s))
        .collect::<Result<Vec<_>>>()?;
    // HML is Q4 minus Q1, so only quartiles are candidates.
    let picked: Vec<usize> = (1..columns.len())
        .filter(|&i| stats[i].p_value.is_some_and(|p| p < spec.selection_level))
        .collect();
    let selected: Vec<String> = picked.iter().map(|&i| columns[i].0.clone()).collect();

    let mut fits = Vec::new();
    if !picked.is_empty() {
        for &model in &spec.models {
            let regs: Vec<(&str, &ReturnSeries)> = model
                .factor_names()
                .iter()
                .map(|&n| (n, factors.by_name(n).expect("known factor")))
                .collect();
            // One window for every portfolio so the GRS test is well posed.
            let mut all: Vec<&ReturnSeries> = regs.iter().map(|r| r.1).collect();
            all.extend(picked.iter().map(|&i| &columns[i].1));
            let window = intersect_defined(&all)?;
            let regressions = picked
                .iter()
                .map(|&i| {
                    Ok((
                        columns[i].0.clone(),
                        ols(&columns[i].1.masked(&window), &regs, true)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let fitted: Vec<RegressionResult> = regressions.iter().map(|r| r.1.clone()).collect();
            let grs = grs_test(&fitted, &regs.iter().map(|r| r.1).collect::<Vec<_>>())?;
            fits.push(ModelFit {
                model,
                regressions,
                grs: Some(grs),
            });
        }
    }
    let regression = if fits.is_empty() {
        None
    } else {
        let blocks: Vec<RegressionBlock<'_>> = fits
            .iter()
            .map(|f| RegressionBlock {
                label: f.model.label().into(),
                columns: f.regressions.iter().map(|(l, r)| (l.clone(), r)).collect(),
                grs: f.grs,
            })
            .collect();
        Some(regression_table("Factor regressions", &blocks)?)
    };
    Ok(CellResult {
        portfolios,
        columns,
        stats,
        descriptive,
        selected,
        fits,
        regression,
    })
}
