mod common;

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use cryptofactor_core::{build_universe, AssetPanel, Error, RawRecord, UniverseRule};
use proptest::prelude::*;

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 2).unwrap()
}

/// Daily-ish records for up to 12 assets over ~5 weeks, some tagged.
fn records() -> impl Strategy<Value = Vec<RawRecord>> {
    let asset = (
        0usize..12,
        prop::collection::btree_set(0i64..36, 1..20),
        prop::sample::select(vec!["", "L1", "stablecoin", "dex"]),
        1.0f64..1e4,
    );
    prop::collection::vec(asset, 1..12).prop_map(|assets| {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (id, days, tag, base) in assets {
            if !seen.insert(id) {
                continue;
            }
            for d in days {
                let mut r = RawRecord::new(format!("coin{id:02}"), day0() + Duration::days(d));
                r.price = Some(1.0 + d as f64 / 10.0);
                r.market_cap = Some(base * (1.0 + (d % 7) as f64));
                r.tvl_total = Some(base / 3.0);
                r.tvl_simple = Some(base / 5.0);
                if !tag.is_empty() {
                    r.categories.insert(tag.to_string());
                }
                out.push(r);
            }
        }
        out
    })
}

fn build(records: &[RawRecord], rule: &UniverseRule) -> Option<AssetPanel> {
    match build_universe(records, rule, &common::calendar(5)) {
        Ok(p) => Some(p),
        Err(Error::EmptyUniverse) => None,
        Err(e) => panic!("{e}"),
    }
}

fn as_records(panel: &AssetPanel) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for (a, id) in panel.assets().iter().enumerate() {
        for (t, date) in panel.calendar().dates().enumerate() {
            let c = panel.cell(a, t);
            let mut r = RawRecord::new(id.clone(), date);
            r.price = c.price;
            r.market_cap = c.market_cap;
            r.tvl_total = c.tvl_total;
            r.tvl_simple = c.tvl_simple;
            r.categories = panel.categories(a).clone();
            out.push(r);
        }
    }
    out
}

proptest! {
    #[test]
    fn raising_top_n_never_removes(recs in records(), n in 1usize..8, extra in 1usize..8) {
        let small = UniverseRule { top_n: n, ..Default::default() };
        let big = UniverseRule { top_n: n + extra, ..Default::default() };
        if let Some(s) = build(&recs, &small) {
            let b = build(&recs, &big).expect("larger rule keeps the smaller universe");
            for id in s.assets() {
                prop_assert!(b.asset_index(id).is_some(), "{id} dropped");
            }
        }
    }

    #[test]
    fn rebuilding_is_idempotent(recs in records(), n in 1usize..8, l1 in any::<bool>()) {
        let rule = UniverseRule {
            top_n: n,
            restrict_categories: l1.then(|| ["L1".to_string()].into()),
            ..Default::default()
        };
        if let Some(first) = build(&recs, &rule) {
            let second = build(&as_records(&first), &rule).unwrap();
            prop_assert_eq!(first, second);
        }
    }

    #[test]
    fn later_records_never_fill_earlier_cells(recs in records(), cut in 0usize..5, bump in 2.0f64..9.0) {
        let rule = UniverseRule { top_n: 100, ..Default::default() };
        let cal = common::calendar(5);
        let cutoff = cal.date(cut);
        let mutated: Vec<RawRecord> = recs
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if r.date > cutoff {
                    r.price = r.price.map(|p| p * bump);
                    r.tvl_total = None;
                }
                r
            })
            .collect();
        if let (Some(a), Some(b)) = (build(&recs, &rule), build(&mutated, &rule)) {
            prop_assert_eq!(a.assets(), b.assets());
            for i in 0..a.n_assets() {
                for t in 0..=cut {
                    prop_assert_eq!(a.cell(i, t), b.cell(i, t));
                }
            }
        }
    }
}

#[test]
fn stale_record_is_not_used() {
    let mut r = RawRecord::new("eth", day0() - Duration::days(4));
    r.price = Some(1.0);
    r.market_cap = Some(10.0);
    let mut fresh = RawRecord::new("eth", day0() + Duration::days(7));
    fresh.price = Some(2.0);
    fresh.market_cap = Some(20.0);
    let p = build(&[r, fresh], &UniverseRule::default()).unwrap();
    assert_eq!(p.cell(0, 0).price, None);
    assert_eq!(p.cell(0, 1).price, Some(2.0));
}
