//! Sorting variables. A signal at week `t` only reads data dated `t - 1` or
//! earlier, so portfolios formed on it are tradable at the start of week `t`.

use alloc::vec::Vec;

use crate::calendar::WeekCalendar;
use crate::panel::{AssetPanel, TvlField};
use crate::series::simple_returns;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SignalKind {
    TvlRatio,
    DtvlRatio,
    Momentum,
    Size,
}

/// Lookback of the momentum signal, in weeks.
pub const MOMENTUM_WEEKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    kind: SignalKind,
    calendar: WeekCalendar,
    n_assets: usize,
    values: Vec<Option<f64>>,
}

impl SignalMatrix {
    pub fn from_fn(
        kind: SignalKind,
        panel: &AssetPanel,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let weeks = panel.weeks();
        let mut values = Vec::with_capacity(panel.n_assets() * weeks);
        for a in 0..panel.n_assets() {
            for t in 0..weeks {
                values.push(f(a, t));
            }
        }
        Self {
            kind,
            calendar: *panel.calendar(),
            n_assets: panel.n_assets(),
            values,
        }
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn calendar(&self) -> &WeekCalendar {
        &self.calendar
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn get(&self, asset: usize, week: usize) -> Option<f64> {
        self.values[asset * self.calendar.count() + week]
    }

    /// Multiply every defined value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v.map(|x| x * factor)).collect(),
            ..self.clone()
        }
    }
}

fn ratio(panel: &AssetPanel, field: TvlField, asset: usize, week: usize) -> Option<f64> {
    let obs = panel.cell(asset, week);
    match (obs.tvl(field), obs.market_cap) {
        (Some(tvl), Some(mc)) if mc > 0.0 => Some(tvl / mc),
        _ => None,
    }
}

/// `TVL_{t-1} / MC_{t-1}`.
pub fn tvl_ratio_signal(panel: &AssetPanel, field: TvlField) -> SignalMatrix {
    SignalMatrix::from_fn(SignalKind::TvlRatio, panel, |a, t| {
        t.checked_sub(1).and_then(|s| ratio(panel, field, a, s))
    })
}

/// `TVL_{t-1}/MC_{t-1} - TVL_{t-2}/MC_{t-2}`.
pub fn dtvl_ratio_signal(panel: &AssetPanel, field: TvlField) -> SignalMatrix {
    SignalMatrix::from_fn(SignalKind::DtvlRatio, panel, |a, t| {
        if t < 2 {
            return None;
        }
        Some(ratio(panel, field, a, t - 1)? - ratio(panel, field, a, t - 2)?)
    })
}

/// Compounded return over weeks `t-5 ..= t-1`.
pub fn momentum_signal(panel: &AssetPanel) -> SignalMatrix {
    let returns: Vec<Vec<Option<f64>>> = (0..panel.n_assets())
        .map(|a| simple_returns(&panel.prices(a)))
        .collect();
    SignalMatrix::from_fn(SignalKind::Momentum, panel, |a, t| {
        if t < MOMENTUM_WEEKS + 1 {
            return None;
        }
        returns[a][t - MOMENTUM_WEEKS..t]
            .iter()
            .try_fold(1.0, |acc, r| r.map(|r| acc * (1.0 + r)))
            .map(|g| g - 1.0)
    })
}

/// `MC_{t-1}`.
pub fn size_signal(panel: &AssetPanel) -> SignalMatrix {
    SignalMatrix::from_fn(SignalKind::Size, panel, |a, t| {
        t.checked_sub(1).and_then(|s| panel.cell(a, s).market_cap)
    })
}
