//! Pure, allocation-only core of the crypto factor-pricing engine.
//!
//! Everything here is deterministic and free of IO: the weekly panel model,
//! TVL / momentum / size signals, value-weighted quartile sorts, the crypto
//! factor set, OLS and GRS inference, table and figure models, and the
//! synthetic ground-truth generator. The `cryptofactor` crate layers caches,
//! HTTP ingestion, file emission and the CLI on top.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod calendar;
pub mod error;
pub mod factors;
pub mod grs;
pub mod linalg;
pub mod ols;
pub mod panel;
pub mod portfolio;
pub mod report;
pub mod series;
pub mod signal;
pub mod special;
pub mod stats;
pub mod synth;
pub mod universe;

pub use analysis::{analyze_cell, CellResult, CellSpec, Model, ModelFit};
pub use calendar::{build_calendar, WeekCalendar};
pub use error::{Error, Result};
pub use factors::{market_factor, momentum_factor, smb_factor, FactorSet};
pub use grs::{grs_test, GrsResult};
pub use ols::{ols, Coefficient, RegressionResult};
pub use panel::{AssetObservation, AssetPanel, TvlField};
pub use portfolio::{form_quartiles, quartile_of, PortfolioSeries, SortConfig};
pub use series::{compute_returns, excess, ReturnSeries};
pub use signal::{
    dtvl_ratio_signal, momentum_signal, size_signal, tvl_ratio_signal, SignalKind, SignalMatrix,
};
pub use stats::{describe, DescriptiveStats, StarLevel};
pub use synth::{generate, SynthOutput, SynthSpec, TvlProcess};
pub use universe::{
    build_universe, compute_simple_tvl, sample_records, RawRecord, SimpleTvl, UniverseRule,
};
