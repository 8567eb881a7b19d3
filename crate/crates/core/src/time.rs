//! Hour-ending civil timestamps and the calendars built on top of them.
//!
//! Every timestamp names the hour *ending* at `hour` on `date`, so hours run
//! 1..=24 and `2017-01-01T24:00` is the last hour of New Year's day. This is
//! the convention the DST rules are phrased in ("the hour ending at 1AM").

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    date: NaiveDate,
    hour: u8,
}

impl Timestamp {
    pub fn new(date: NaiveDate, hour_ending: u32) -> Result<Self> {
        if !(1..=24).contains(&hour_ending) {
            return Err(Error::Domain(format!(
                "hour ending must be in 1..=24, got {hour_ending}"
            )));
        }
        Ok(Self {
            date,
            hour: hour_ending as u8,
        })
    }

    /// Convenience constructor; panics on an invalid date or hour.
    pub fn ymdh(year: i32, month: u32, day: u32, hour_ending: u32) -> Self {
        let date = NaiveDate::from_ymd_opt(year, month, day).expect("valid calendar date");
        Self::new(date, hour_ending).expect("valid hour ending")
    }

    /// Converts an hour-beginning label (0..=23) to hour-ending.
    pub fn from_hour_beginning(date: NaiveDate, hour_beginning: u32) -> Result<Self> {
        if hour_beginning > 23 {
            return Err(Error::Domain(format!(
                "hour beginning must be in 0..=23, got {hour_beginning}"
            )));
        }
        Self::new(date, hour_beginning + 1)
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    /// Hour ending, 1..=24.
    pub fn hour(&self) -> u32 {
        self.hour as u32
    }

    pub fn year(&self) -> i32 {
        self.date.year()
    }

    pub fn month(&self) -> u32 {
        self.date.month()
    }

    pub fn weekday(&self) -> Weekday {
        self.date.weekday()
    }

    pub fn day_of_year(&self) -> u32 {
        self.date.ordinal()
    }

    /// Position within the week in hours, Monday hour-ending 1 = 0.
    pub fn hour_of_week(&self) -> u32 {
        self.date.weekday().num_days_from_monday() * 24 + self.hour() - 1
    }

    /// Absolute hour count on a continuous (DST-free) timeline.
    pub fn hour_index(&self) -> i64 {
        self.date.num_days_from_ce() as i64 * 24 + self.hour as i64 - 1
    }

    pub fn from_hour_index(index: i64) -> Self {
        let days = index.div_euclid(24);
        let hour = index.rem_euclid(24) as u8 + 1;
        let date = NaiveDate::from_num_days_from_ce_opt(days as i32).expect("date in range");
        Self { date, hour }
    }

    pub fn add_hours(&self, hours: i64) -> Self {
        Self::from_hour_index(self.hour_index() + hours)
    }

    pub fn next(&self) -> Self {
        self.add_hours(1)
    }

    /// First hour (hour ending 1) of `date`.
    pub fn start_of_day(date: NaiveDate) -> Self {
        Self { date, hour: 1 }
    }

    /// Last hour (hour ending 24) of `date`.
    pub fn end_of_day(date: NaiveDate) -> Self {
        Self { date, hour: 24 }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}T{:02}:00", self.date.format("%Y-%m-%d"), self.hour)
    }
}

/// Parses `YYYY-MM-DD[T| ]HH[:MM[:SS]]` as an hour-ending label (1..=24).
///
/// Use [`parse_clock`] when the hour field may be 0 or when the convention
/// must be chosen by the caller.
impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (date, hour) = parse_clock(s)?;
        Timestamp::new(date, hour)
    }
}

/// Splits an ISO-8601 style local date-time into its date and raw hour field.
/// Minutes and seconds, when present, must be zero.
pub fn parse_clock(s: &str) -> Result<(NaiveDate, u32)> {
    let s = s.trim();
    let bad = || Error::Domain(format!("unparseable timestamp {s:?}"));
    if s.len() < 10 {
        return Err(bad());
    }
    let date = NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d").map_err(|_| bad())?;
    let rest = &s[10..];
    if rest.is_empty() {
        return Err(bad());
    }
    let rest = rest
        .strip_prefix('T')
        .or_else(|| rest.strip_prefix(' '))
        .ok_or_else(bad)?;
    let mut parts = rest.split(':');
    let hour: u32 = parts
        .next()
        .filter(|h| !h.is_empty() && h.len() <= 2)
        .and_then(|h| h.parse().ok())
        .ok_or_else(bad)?;
    for part in parts {
        let v: u32 = part.parse().map_err(|_| bad())?;
        if v != 0 {
            return Err(Error::Domain(format!(
                "timestamp {s:?} is not on an hour boundary"
            )));
        }
    }
    if hour > 24 {
        return Err(bad());
    }
    Ok((date, hour))
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All hourly timestamps from the first hour of `first` through the last hour of `last`.
pub fn hourly_range(first: NaiveDate, last: NaiveDate) -> Vec<Timestamp> {
    let start = Timestamp::start_of_day(first).hour_index();
    let end = Timestamp::end_of_day(last).hour_index();
    (start..=end).map(Timestamp::from_hour_index).collect()
}

/// Which days lose or repeat an hour when clocks change.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum DstCalendar {
    /// US federal rules: since 2007 the second Sunday of March and the first
    /// Sunday of November; before 2007 the first Sunday of April and the last
    /// Sunday of October.
    #[default]
    UsFederal,
    Explicit {
        spring_forward: Vec<NaiveDate>,
        fall_back: Vec<NaiveDate>,
    },
    None,
}

impl DstCalendar {
    pub fn is_spring_forward(&self, date: NaiveDate) -> bool {
        match self {
            DstCalendar::UsFederal => us_transitions(date.year()).0 == date,
            DstCalendar::Explicit { spring_forward, .. } => spring_forward.contains(&date),
            DstCalendar::None => false,
        }
    }

    pub fn is_fall_back(&self, date: NaiveDate) -> bool {
        match self {
            DstCalendar::UsFederal => us_transitions(date.year()).1 == date,
            DstCalendar::Explicit { fall_back, .. } => fall_back.contains(&date),
            DstCalendar::None => false,
        }
    }
}

/// (spring-forward, fall-back) dates for a year under US federal rules.
pub fn us_transitions(year: i32) -> (NaiveDate, NaiveDate) {
    if year >= 2007 {
        (
            nth_weekday(year, 3, Weekday::Sun, 2),
            nth_weekday(year, 11, Weekday::Sun, 1),
        )
    } else {
        (
            nth_weekday(year, 4, Weekday::Sun, 1),
            last_weekday(year, 10, Weekday::Sun),
        )
    }
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("weekday exists")
}

fn last_weekday(year: i32, month: u32, weekday: Weekday) -> NaiveDate {
    let mut d = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid date")
        - Duration::days(1);
    while d.weekday() != weekday {
        d -= Duration::days(1);
    }
    d
}

/// Observed US federal holidays for `year`. Fixed-date holidays falling on a
/// Saturday are observed the Friday before, on a Sunday the Monday after.
pub fn us_federal_holidays(year: i32) -> Vec<NaiveDate> {
    let fixed = |m, d| observed(NaiveDate::from_ymd_opt(year, m, d).expect("valid date"));
    let mut days = vec![
        fixed(1, 1),
        nth_weekday(year, 1, Weekday::Mon, 3),
        nth_weekday(year, 2, Weekday::Mon, 3),
        last_weekday(year, 5, Weekday::Mon),
        fixed(7, 4),
        nth_weekday(year, 9, Weekday::Mon, 1),
        nth_weekday(year, 10, Weekday::Mon, 2),
        fixed(11, 11),
        nth_weekday(year, 11, Weekday::Thu, 4),
        fixed(12, 25),
    ];
    days.sort();
    days
}

fn observed(date: NaiveDate) -> NaiveDate {
    match date.weekday() {
        Weekday::Sat => date - Duration::days(1),
        Weekday::Sun => date + Duration::days(1),
        _ => date,
    }
}

pub fn is_us_holiday(date: NaiveDate) -> bool {
    // New Year's Day on a Saturday is observed on Dec 31 of the prior year.
    us_federal_holidays(date.year()).contains(&date)
        || us_federal_holidays(date.year() + 1).contains(&date)
}
