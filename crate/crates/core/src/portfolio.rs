//! Value-weighted quartile sorts and the high-minus-low spread.

use alloc::vec::Vec;

use crate::calendar::WeekCalendar;
use crate::panel::AssetPanel;
use crate::series::ReturnSeries;
use crate::signal::{SignalKind, SignalMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SortConfig {
    /// Fewer eligible assets than this and the week's portfolios are missing.
    pub min_breadth: usize,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self { min_breadth: 8 }
    }
}

/// 0-based quartile of the asset at ascending `rank` among `n`.
pub fn quartile_of(rank: usize, n: usize) -> usize {
    debug_assert!(rank < n);
    core::cmp::min(3, 4 * rank / n)
}

/// Quartile membership at one formation: `(asset, weight)` per quartile,
/// weights summing to one inside each quartile.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub quartiles: [Vec<(usize, f64)>; 4],
}

impl Formation {
    pub fn quartile_of_asset(&self, asset: usize) -> Option<usize> {
        self.quartiles
            .iter()
            .position(|q| q.iter().any(|&(a, _)| a == asset))
    }

    pub fn sizes(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|q| self.quartiles[q].len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    pub kind: SignalKind,
    /// Q1 (lowest signal) through Q4 (highest).
    pub q_returns: [ReturnSeries; 4],
    /// Q4 minus Q1.
    pub hml: ReturnSeries,
    /// `None` for weeks without a valid formation.
    pub formations: Vec<Option<Formation>>,
}

impl PortfolioSeries {
    pub fn calendar(&self) -> &WeekCalendar {
        self.hml.calendar()
    }

    /// Weeks with a defined HML return.
    pub fn usable_weeks(&self) -> usize {
        self.hml.defined_count()
    }
}

/// Rank eligible assets ascending by the signal (ties by identifier), split
/// by [`quartile_of`], weight by `MC_{t-1}` within each quartile.
///
/// An asset is eligible at week `t` when its signal and a positive `MC_{t-1}`
/// are both defined. Members whose week-`t` return is missing are dropped
/// from that week's return and the remaining weights renormalised.
pub fn form_quartiles(
    signal: &SignalMatrix,
    panel: &AssetPanel,
    config: &SortConfig,
) -> PortfolioSeries {
    assert_eq!(signal.calendar(), panel.calendar(), "signal/panel calendar");
    assert_eq!(signal.n_assets(), panel.n_assets(), "signal/panel assets");
    let weeks = panel.weeks();
    let returns = panel.return_matrix();
    let ret = |a: usize, t: usize| returns[a * weeks + t];
    let min_breadth = config.min_breadth.max(4);

    let mut formations = Vec::with_capacity(weeks);
    let mut q_vals: [Vec<Option<f64>>; 4] = Default::default();
    let mut hml = Vec::with_capacity(weeks);
    let mut eligible: Vec<(usize, f64, f64)> = Vec::new();

    for t in 0..weeks {
        eligible.clear();
        if t > 0 {
            for a in 0..panel.n_assets() {
                let Some(s) = signal.get(a, t) else { continue };
                match panel.cell(a, t - 1).market_cap {
                    Some(mc) if mc > 0.0 && s.is_finite() => eligible.push((a, s, mc)),
                    _ => {}
                }
            }
        }
        if eligible.len() < min_breadth {
            formations.push(None);
            q_vals.iter_mut().for_each(|q| q.push(None));
            hml.push(None);
            continue;
        }
        let assets = panel.assets();
        eligible.sort_by(|x, y| {
            x.1.total_cmp(&y.1)
                .then_with(|| assets[x.0].cmp(&assets[y.0]))
        });
        let n = eligible.len();
        let mut quartiles: [Vec<(usize, f64)>; 4] = Default::default();
        for (rank, &(a, _, mc)) in eligible.iter().enumerate() {
            quartiles[quartile_of(rank, n)].push((a, mc));
        }
        for q in quartiles.iter_mut() {
            let total: f64 = q.iter().map(|m| m.1).sum();
            q.iter_mut().for_each(|m| m.1 /= total);
        }
        let q_ret: [Option<f64>; 4] = core::array::from_fn(|q| {
            let (num, den) = quartiles[q]
                .iter()
                .filter_map(|&(a, w)| ret(a, t).map(|r| (w * r, w)))
                .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
            (den > 0.0).then(|| num / den)
        });
        for q in 0..4 {
            q_vals[q].push(q_ret[q]);
        }
        hml.push(match (q_ret[3], q_ret[0]) {
            (Some(hi), Some(lo)) => Some(hi - lo),
            _ => None,
        });
        formations.push(Some(Formation { quartiles }));
    }

    let cal = *panel.calendar();
    let series = |v: Vec<Option<f64>>| ReturnSeries::new(cal, v).expect("one value per week");
    let [q1, q2, q3, q4] = q_vals;
    PortfolioSeries {
        kind: signal.kind(),
        q_returns: [series(q1), series(q2), series(q3), series(q4)],
        hml: series(hml),
        formations,
    }
}
