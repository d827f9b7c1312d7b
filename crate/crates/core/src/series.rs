//! Calendar-aligned weekly series with explicit missing values.

use alloc::format;
use alloc::vec::Vec;

use crate::calendar::WeekCalendar;
use crate::error::{Error, Result};

/// Weekly simple returns as decimal fractions. `values[t]` is the return
/// earned over week `t`, i.e. from sampling point `t - 1` to `t`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReturnSeries {
    calendar: WeekCalendar,
    values: Vec<Option<f64>>,
}

impl ReturnSeries {
    pub fn new(calendar: WeekCalendar, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != calendar.count() {
            return Err(Error::Alignment(format!(
                "series has {} values but the calendar has {} weeks",
                values.len(),
                calendar.count()
            )));
        }
        Ok(Self { calendar, values })
    }

    /// Series with every week defined.
    pub fn from_values(calendar: WeekCalendar, values: &[f64]) -> Result<Self> {
        Self::new(calendar, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn missing(calendar: WeekCalendar) -> Self {
        Self {
            calendar,
            values: alloc::vec![None; calendar.count()],
        }
    }

    pub fn calendar(&self) -> &WeekCalendar {
        &self.calendar
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, week: usize) -> Option<f64> {
        self.values.get(week).copied().flatten()
    }

    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            calendar: self.calendar,
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }

    pub fn negate(&self) -> Self {
        self.map(|v| -v)
    }

    /// Keep only weeks where `mask` is true.
    pub fn masked(&self, mask: &[bool]) -> Self {
        Self {
            calendar: self.calendar,
            values: self
                .values
                .iter()
                .zip(mask)
                .map(|(v, &keep)| if keep { *v } else { None })
                .collect(),
        }
    }

    /// Elementwise combination; missing wherever either side is missing.
    pub fn zip_with(&self, other: &ReturnSeries, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ensure_aligned(self, other)?;
        Ok(Self {
            calendar: self.calendar,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => Some(f(*a, *b)),
                    _ => None,
                })
                .collect(),
        })
    }
}

pub(crate) fn ensure_aligned(a: &ReturnSeries, b: &ReturnSeries) -> Result<()> {
    if a.calendar != b.calendar {
        return Err(Error::Alignment(format!(
            "calendars differ: {} x{} vs {} x{}",
            a.calendar.anchor(),
            a.calendar.count(),
            b.calendar.anchor(),
            b.calendar.count()
        )));
    }
    Ok(())
}

/// Weeks where every series is defined.
pub fn intersect_defined(series: &[&ReturnSeries]) -> Result<Vec<bool>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    for s in &series[1..] {
        ensure_aligned(first, s)?;
    }
    Ok((0..first.len())
        .map(|t| series.iter().all(|s| s.values[t].is_some()))
        .collect())
}

/// `price_t / price_{t-1} - 1`, missing where either price is missing or the
/// previous price is zero.
pub fn simple_returns(prices: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(prices.len());
    if prices.is_empty() {
        return out;
    }
    out.push(None);
    for w in prices.windows(2) {
        out.push(match (w[0], w[1]) {
            (Some(prev), Some(cur)) if prev > 0.0 => Some(cur / prev - 1.0),
            _ => None,
        });
    }
    out
}

pub fn compute_returns(calendar: WeekCalendar, prices: &[Option<f64>]) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: prices.len(),
        });
    }
    ReturnSeries::new(calendar, simple_returns(prices))
}

/// `series - rf`, week by week.
pub fn excess(series: &ReturnSeries, rf: &ReturnSeries) -> Result<ReturnSeries> {
    series.zip_with(rf, |r, f| r - f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn cal(n: usize) -> WeekCalendar {
        WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), n).unwrap()
    }

    fn close(a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        }
    }

    #[test]
    fn returns_basic() {
        let r = compute_returns(cal(3), &[Some(100.0), Some(110.0), Some(99.0)]).unwrap();
        assert!(close(r.get(1), Some(0.10)));
        assert!(close(r.get(2), Some(-0.10)));
        assert_eq!(r.get(0), None);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let r = compute_returns(cal(3), &[Some(5.0); 3]).unwrap();
        assert_eq!(r.values(), &[None, Some(0.0), Some(0.0)]);
    }

    #[test]
    fn missing_price_propagates() {
        let r = compute_returns(cal(3), &[Some(100.0), None, Some(120.0)]).unwrap();
        assert_eq!(r.values(), &[None, None, None]);
    }

    #[test]
    fn zero_previous_price_is_missing() {
        let r = compute_returns(cal(3), &[Some(0.0), Some(1.0), Some(2.0)]).unwrap();
        assert_eq!(r.values(), &[None, None, Some(1.0)]);
    }

    #[test]
    fn single_price_is_insufficient() {
        assert!(matches!(
            compute_returns(cal(2), &[Some(1.0)]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn excess_cases() {
        let c = cal(2);
        let r = ReturnSeries::new(c, vec![None, Some(0.02)]).unwrap();
        let rf = ReturnSeries::new(c, vec![Some(0.001), Some(0.001)]).unwrap();
        assert!(close(excess(&r, &rf).unwrap().get(1), Some(0.019)));

        let all_missing = ReturnSeries::missing(c);
        assert_eq!(excess(&all_missing, &rf).unwrap().defined_count(), 0);

        let r = ReturnSeries::from_values(c, &[0.01, 0.03]).unwrap();
        assert_eq!(excess(&r, &r).unwrap().values(), &[Some(0.0), Some(0.0)]);
    }

    #[test]
    fn excess_rejects_calendar_mismatch() {
        let a = ReturnSeries::missing(cal(3));
        let b = ReturnSeries::missing(cal(4));
        assert!(matches!(excess(&a, &b), Err(Error::Alignment(_))));
    }

    proptest! {
        #[test]
        fn price_path_round_trip(rets in prop::collection::vec(-0.5f64..0.5, 1..60), p0 in 0.01f64..1e6) {
            let mut prices = vec![Some(p0)];
            for r in &rets {
                let last = prices.last().unwrap().unwrap();
                prices.push(Some(last * (1.0 + r)));
            }
            let out = compute_returns(cal(prices.len()), &prices).unwrap();
            for (t, r) in rets.iter().enumerate() {
                let got = out.get(t + 1).unwrap();
                prop_assert!((got - r).abs() <= 1e-12 * r.abs().max(1.0));
            }
        }

        #[test]
        fn excess_is_invertible(vals in prop::collection::vec(prop::option::of(-1.0f64..1.0), 2..40),
                                 rf in -0.01f64..0.01) {
            let c = cal(vals.len());
            let r = ReturnSeries::new(c, vals.clone()).unwrap();
            let rf = ReturnSeries::from_values(c, &vec![rf; vals.len()]).unwrap();
            let back = excess(&excess(&r, &rf).unwrap(), &rf.negate()).unwrap();
            for (a, b) in back.values().iter().zip(r.values()) {
                prop_assert!(close(*a, *b));
            }
        }
    }
}
