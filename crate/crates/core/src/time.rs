//! Calendar helpers: year-months and the study window.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

/// A calendar month. Orders chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        YearMonth { year, month }
    }

    pub fn from_date(date: NaiveDate) -> Self {
        YearMonth { year: date.year(), month: date.month() }
    }

    /// Months since year 0; consecutive months differ by one.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        YearMonth { year: ordinal.div_euclid(12) as i32, month: ordinal.rem_euclid(12) as u32 + 1 }
    }

    pub fn next(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    pub fn prev(self) -> Self {
        Self::from_ordinal(self.ordinal() - 1)
    }

    /// Calendar quarter, 1..=4.
    pub fn quarter(self) -> u32 {
        (self.month - 1) / 3 + 1
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (y, m) = s.split_once('-').ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in {s:?}"));
        }
        Ok(YearMonth { year, month })
    }
}

/// A calendar quarter label such as `2013Q4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearQuarter {
    pub year: i32,
    pub quarter: u32,
}

impl From<YearMonth> for YearQuarter {
    fn from(ym: YearMonth) -> Self {
        YearQuarter { year: ym.year, quarter: ym.quarter() }
    }
}

impl fmt::Display for YearQuarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl std::str::FromStr for YearQuarter {
    type Err = String;

    /// Parses `2013Q4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || format!("invalid quarter `{s}`, expected YYYYQn");
        let (y, q) = s.trim().split_once(['Q', 'q']).ok_or_else(err)?;
        let year = y.parse().map_err(|_| err())?;
        let quarter: u32 = q.parse().map_err(|_| err())?;
        if !(1..=4).contains(&quarter) {
            return Err(err());
        }
        Ok(YearQuarter { year, quarter })
    }
}

/// Inclusive range of calendar days covered by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Default for StudyWindow {
    fn default() -> Self {
        StudyWindow {
            start: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2016, 12, 31).unwrap(),
        }
    }
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        assert!(start <= end, "window start after end");
        StudyWindow { start, end }
    }

    /// Window covering whole months `first..=last`.
    pub fn from_months(first: YearMonth, last: YearMonth) -> Self {
        let end = last.next().first_day().pred_opt().unwrap();
        StudyWindow::new(first.first_day(), end)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn contains_year(&self, year: i32) -> bool {
        self.start.year() <= year && year <= self.end.year()
    }

    /// Every month touched by the window, in order.
    pub fn months(&self) -> Vec<YearMonth> {
        let first = YearMonth::from_date(self.start).ordinal();
        let last = YearMonth::from_date(self.end).ordinal();
        (first..=last).map(YearMonth::from_ordinal).collect()
    }

    pub fn years(&self) -> Vec<i32> {
        (self.start.year()..=self.end.year()).collect()
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}
