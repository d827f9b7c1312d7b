#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::NaiveDate;
use cryptofactor_core::{AssetObservation, AssetPanel, WeekCalendar};
use proptest::prelude::*;

pub fn calendar(weeks: usize) -> WeekCalendar {
    WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), weeks).unwrap()
}

fn observation() -> impl Strategy<Value = AssetObservation> {
    (
        prop::option::weighted(0.95, 0.1f64..10.0),
        prop::option::weighted(0.95, 1.0f64..1000.0),
        prop::option::weighted(0.9, 0.0f64..500.0),
        0.0f64..=1.0,
    )
        .prop_map(|(price, market_cap, tvl_total, share)| AssetObservation {
            price,
            market_cap,
            tvl_total,
            tvl_simple: tvl_total.map(|t| t * share),
        })
}

/// Random panels of 4..=24 assets over 3..=10 weeks with sparse gaps.
pub fn panel() -> impl Strategy<Value = AssetPanel> {
    (4usize..=24, 3usize..=10).prop_flat_map(|(n, weeks)| {
        prop::collection::vec(observation(), n * weeks).prop_map(move |cells| {
            let assets = (0..n).map(|i| format!("A{i:02}")).collect();
            AssetPanel::new(calendar(weeks), assets, vec![BTreeSet::new(); n], cells).unwrap()
        })
    })
}
