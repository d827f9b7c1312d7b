//! Weekly sampling calendar.

use chrono::{Datelike, Duration, NaiveDate};

use crate::error::{Error, Result};

/// Default anchor: the first Monday of the 2023-2024 sample.
pub const DEFAULT_ANCHOR: (i32, u32, u32) = (2023, 1, 2);

/// A run of sampling dates spaced exactly seven days apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeekCalendar {
    anchor: NaiveDate,
    count: usize,
}

/// Every 7-day step from `anchor` up to and including `end`.
pub fn build_calendar(anchor: NaiveDate, end: NaiveDate) -> Result<WeekCalendar> {
    let days = (end - anchor).num_days();
    if days < 7 {
        return Err(Error::InsufficientWindow);
    }
    Ok(WeekCalendar {
        anchor,
        count: (days / 7) as usize + 1,
    })
}

impl WeekCalendar {
    pub fn new(anchor: NaiveDate, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InsufficientWindow);
        }
        Ok(Self { anchor, count })
    }

    pub fn anchor(&self) -> NaiveDate {
        self.anchor
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn last(&self) -> NaiveDate {
        self.date(self.count - 1)
    }

    /// Sampling date of week `index`. Panics if out of range.
    pub fn date(&self, index: usize) -> NaiveDate {
        assert!(index < self.count, "week index {index} out of range");
        self.anchor + Duration::days(7 * index as i64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.count).map(move |i| self.date(i))
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let days = (date - self.anchor).num_days();
        if days < 0 || days % 7 != 0 {
            return None;
        }
        let idx = (days / 7) as usize;
        (idx < self.count).then_some(idx)
    }

    /// The same calendar with `weeks` extra sampling points prepended, used to
    /// carry formation-week data ahead of the first analysis week.
    pub fn extend_back(&self, weeks: usize) -> WeekCalendar {
        WeekCalendar {
            anchor: self.anchor - Duration::days(7 * weeks as i64),
            count: self.count + weeks,
        }
    }

    /// Week indices whose sampling date falls in `year`.
    pub fn weeks_in_year(&self, year: i32) -> core::ops::Range<usize> {
        let start = (0..self.count)
            .find(|&i| self.date(i).year() >= year)
            .unwrap_or(self.count);
        let end = (start..self.count)
            .find(|&i| self.date(i).year() > year)
            .unwrap_or(self.count);
        start..end
    }

    pub fn years(&self) -> core::ops::RangeInclusive<i32> {
        self.anchor.year()..=self.last().year()
    }
}

impl Default for WeekCalendar {
    fn default() -> Self {
        let (y, m, d) = DEFAULT_ANCHOR;
        WeekCalendar {
            anchor: NaiveDate::from_ymd_opt(y, m, d).unwrap(),
            count: 2,
        }
    }
}
