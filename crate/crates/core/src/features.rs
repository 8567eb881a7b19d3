//! Candidate transformations of the raw variables and their materialization.
//!
//! Every feature is identified by a canonical string id that fully
//! determines how its column is computed from timestamps and exogenous
//! inputs, so a model dump listing ids is enough to re-predict.

use std::fmt;
use std::str::FromStr;

use chrono::Weekday;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::ZoneDataset;
use crate::error::{Error, Result};
use crate::time::Timestamp;

/// Year whose trend value is 1.
pub const TREND_BASE_YEAR: i32 = 2003;

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];
const WEEKDAYS: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    /// Day-of-year position `(doy - 1) / 365.25`.
    Yearly,
    /// Hour-of-week position `how / 168`.
    Weekly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wave {
    Sin,
    Cos,
}

/// Calendar indicator used on the right-hand side of an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Indicator {
    Month(u32),
    DayOfWeek(Weekday),
}

impl Indicator {
    fn value(&self, t: &Timestamp) -> f64 {
        let on = match self {
            Indicator::Month(m) => t.month() == *m,
            Indicator::DayOfWeek(d) => t.weekday() == *d,
        };
        if on {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Indicator::Month(m) => write!(f, "month:{}", MONTHS[*m as usize - 1]),
            Indicator::DayOfWeek(d) => write!(f, "dow:{}", weekday_name(*d)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSpec {
    Intercept,
    DayOfWeek(Weekday),
    Month(u32),
    Holiday,
    Fourier {
        period: Period,
        wave: Wave,
        harmonic: u32,
    },
    /// `temp_c ^ degree`; channels are 1-based.
    Poly {
        channel: usize,
        degree: u32,
    },
    /// Trailing mean of `temp_c` over `window` hours ending at the current hour.
    MovingAverage {
        channel: usize,
        window: u32,
    },
    /// `temp_c ^ degree` times a calendar indicator.
    Interaction {
        channel: usize,
        degree: u32,
        indicator: Indicator,
    },
    /// Calendar year index, 2003 -> 1.
    Trend,
}

fn weekday_name(d: Weekday) -> &'static str {
    match d {
        Weekday::Mon => "mon",
        Weekday::Tue => "tue",
        Weekday::Wed => "wed",
        Weekday::Thu => "thu",
        Weekday::Fri => "fri",
        Weekday::Sat => "sat",
        Weekday::Sun => "sun",
    }
}

impl FeatureSpec {
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Hours of history before a row that the feature reads.
    pub fn backfill_hours(&self) -> u32 {
        match self {
            FeatureSpec::MovingAverage { window, .. } => window - 1,
            _ => 0,
        }
    }

    /// 1-based temperature channel the feature reads, if any.
    pub fn channel(&self) -> Option<usize> {
        match self {
            FeatureSpec::Poly { channel, .. }
            | FeatureSpec::MovingAverage { channel, .. }
            | FeatureSpec::Interaction { channel, .. } => Some(*channel),
            _ => None,
        }
    }

    pub fn is_trend(&self) -> bool {
        matches!(self, FeatureSpec::Trend)
    }

    fn evaluate(&self, t: &Timestamp, row: usize, exog: &Exogenous) -> f64 {
        match *self {
            FeatureSpec::Intercept => 1.0,
            FeatureSpec::DayOfWeek(d) => Indicator::DayOfWeek(d).value(t),
            FeatureSpec::Month(m) => Indicator::Month(m).value(t),
            FeatureSpec::Holiday => exog.holiday[row],
            FeatureSpec::Fourier {
                period,
                wave,
                harmonic,
            } => {
                let position = match period {
                    Period::Yearly => (t.day_of_year() - 1) as f64 / 365.25,
                    Period::Weekly => t.hour_of_week() as f64 / 168.0,
                };
                let (s, c) = fourier_pair(position, harmonic);
                match wave {
                    Wave::Sin => s,
                    Wave::Cos => c,
                }
            }
            FeatureSpec::Poly { channel, degree } => {
                exog.temperatures[channel - 1][row].powi(degree as i32)
            }
            FeatureSpec::MovingAverage { channel, window } => {
                let series = &exog.temperatures[channel - 1];
                let w = window as usize;
                series[row + 1 - w..=row].iter().sum::<f64>() / w as f64
            }
            FeatureSpec::Interaction {
                channel,
                degree,
                indicator,
            } => exog.temperatures[channel - 1][row].powi(degree as i32) * indicator.value(t),
            FeatureSpec::Trend => (t.year() - TREND_BASE_YEAR + 1) as f64,
        }
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSpec::Intercept => write!(f, "intercept"),
            FeatureSpec::DayOfWeek(d) => write!(f, "dow:{}", weekday_name(*d)),
            FeatureSpec::Month(m) => write!(f, "month:{}", MONTHS[*m as usize - 1]),
            FeatureSpec::Holiday => write!(f, "holiday"),
            FeatureSpec::Fourier {
                period,
                wave,
                harmonic,
            } => {
                let p = match period {
                    Period::Yearly => "yearly",
                    Period::Weekly => "weekly",
                };
                let w = match wave {
                    Wave::Sin => "sin",
                    Wave::Cos => "cos",
                };
                write!(f, "fourier:{p}:{w}:k={harmonic}")
            }
            FeatureSpec::Poly { channel, degree } => write!(f, "poly:temp_{channel}:d={degree}"),
            FeatureSpec::MovingAverage { channel, window } => {
                write!(f, "ma:temp_{channel}:w={window}")
            }
            FeatureSpec::Interaction {
                channel,
                degree,
                indicator,
            } => write!(f, "ix:poly:temp_{channel}:d={degree}*{indicator}"),
            FeatureSpec::Trend => write!(f, "trend"),
        }
    }
}

fn parse_weekday(s: &str) -> Option<Weekday> {
    WEEKDAYS.iter().copied().find(|d| weekday_name(*d) == s)
}

fn parse_month(s: &str) -> Option<u32> {
    MONTHS.iter().position(|m| *m == s).map(|i| i as u32 + 1)
}

fn parse_indicator(s: &str) -> Option<Indicator> {
    let (kind, value) = s.split_once(':')?;
    match kind {
        "month" => parse_month(value).map(Indicator::Month),
        "dow" => parse_weekday(value).map(Indicator::DayOfWeek),
        _ => None,
    }
}

fn parse_channel(s: &str) -> Option<usize> {
    s.strip_prefix("temp_")?.parse().ok().filter(|c| *c >= 1)
}

fn parse_param(s: &str, key: &str) -> Option<u32> {
    s.strip_prefix(key)?
        .strip_prefix('=')?
        .parse()
        .ok()
        .filter(|v| *v >= 1)
}

fn parse_poly(s: &str) -> Option<(usize, u32)> {
    let mut parts = s.split(':');
    let (Some("poly"), Some(ch), Some(d), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return None;
    };
    Some((parse_channel(ch)?, parse_param(d, "d")?))
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown feature id {s:?}"));
        let spec = match s {
            "intercept" => FeatureSpec::Intercept,
            "holiday" => FeatureSpec::Holiday,
            "trend" => FeatureSpec::Trend,
            _ if s.starts_with("ix:") => {
                let (lhs, rhs) = s[3..].split_once('*').ok_or_else(bad)?;
                let (channel, degree) = parse_poly(lhs).ok_or_else(bad)?;
                FeatureSpec::Interaction {
                    channel,
                    degree,
                    indicator: parse_indicator(rhs).ok_or_else(bad)?,
                }
            }
            _ if s.starts_with("poly:") => {
                let (channel, degree) = parse_poly(s).ok_or_else(bad)?;
                FeatureSpec::Poly { channel, degree }
            }
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["dow", d] => FeatureSpec::DayOfWeek(parse_weekday(d).ok_or_else(bad)?),
                    ["month", m] => FeatureSpec::Month(parse_month(m).ok_or_else(bad)?),
                    ["ma", ch, w] => FeatureSpec::MovingAverage {
                        channel: parse_channel(ch).ok_or_else(bad)?,
                        window: parse_param(w, "w").ok_or_else(bad)?,
                    },
                    ["fourier", p, w, k] => FeatureSpec::Fourier {
                        period: match *p {
                            "yearly" => Period::Yearly,
                            "weekly" => Period::Weekly,
                            _ => return Err(bad()),
                        },
                        wave: match *w {
                            "sin" => Wave::Sin,
                            "cos" => Wave::Cos,
                            _ => return Err(bad()),
                        },
                        harmonic: parse_param(k, "k").ok_or_else(bad)?,
                    },
                    _ => return Err(bad()),
                }
            }
        };
        Ok(spec)
    }
}

impl Serialize for FeatureSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `(sin(2π·k·x), cos(2π·k·x))`.
pub fn fourier_pair(position: f64, harmonic: u32) -> (f64, f64) {
    (2.0 * std::f64::consts::PI * harmonic as f64 * position).sin_cos()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMode {
    /// Trend is always part of the model.
    On,
    /// Trend is not a candidate.
    #[default]
    Off,
    /// Trend is an ordinary candidate for selection.
    Auto,
}

/// Parameter ranges that generate the candidate catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub yearly_harmonics: u32,
    pub weekly_harmonics: u32,
    /// Trailing moving-average windows in hours.
    pub ma_windows: Vec<u32>,
    /// Highest polynomial degree per temperature channel.
    pub poly_degree: u32,
    pub temp_month_interactions: bool,
    pub temp_dow_interactions: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            yearly_harmonics: 3,
            weekly_harmonics: 3,
            ma_windows: vec![2, 4, 8, 24, 48, 168],
            poly_degree: 3,
            temp_month_interactions: true,
            temp_dow_interactions: true,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = self.yearly_harmonics == 0
            && self.weekly_harmonics == 0
            && self.ma_windows.is_empty()
            && self.poly_degree == 0
            && !self.temp_month_interactions
            && !self.temp_dow_interactions;
        if empty {
            return Err(Error::Config("feature grid is empty".into()));
        }
        if self.ma_windows.contains(&0) {
            return Err(Error::Config(
                "moving-average windows must be >= 1 hour".into(),
            ));
        }
        let mut windows = self.ma_windows.clone();
        windows.sort_unstable();
        windows.dedup();
        if windows.len() != self.ma_windows.len() {
            return Err(Error::Config("duplicate moving-average window".into()));
        }
        Ok(())
    }

    /// Closed-form catalog size for `channels` temperature channels.
    pub fn catalog_size(&self, channels: usize, trend_mode: TrendMode) -> usize {
        let per_channel = self.poly_degree as usize
            + self.ma_windows.len()
            + if self.temp_month_interactions { 12 } else { 0 }
            + if self.temp_dow_interactions { 7 } else { 0 };
        1 + 7
            + 12
            + 1
            + 2 * self.yearly_harmonics as usize
            + 2 * self.weekly_harmonics as usize
            + channels * per_channel
            + usize::from(trend_mode != TrendMode::Off)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub specs: Vec<FeatureSpec>,
    pub grid_config: GridConfig,
}

impl FeatureCatalog {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.specs.iter().map(FeatureSpec::id).collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.specs.iter().any(|s| s.id() == id)
    }

    /// JSON list of spec ids.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.ids())?)
    }
}

/// Enumerates candidate features for a dataset with the given grid.
pub fn build_catalog(
    dataset: &ZoneDataset,
    grid: &GridConfig,
    trend_mode: TrendMode,
) -> Result<FeatureCatalog> {
    catalog_for_channels(dataset.channel_count(), grid, trend_mode)
}

pub fn catalog_for_channels(
    channels: usize,
    grid: &GridConfig,
    trend_mode: TrendMode,
) -> Result<FeatureCatalog> {
    grid.validate()?;
    if channels == 0 {
        return Err(Error::Config("no temperature channels".into()));
    }
    let mut specs = vec![FeatureSpec::Intercept];
    specs.extend(WEEKDAYS.iter().map(|d| FeatureSpec::DayOfWeek(*d)));
    specs.extend((1..=12).map(FeatureSpec::Month));
    specs.push(FeatureSpec::Holiday);
    for (period, harmonics) in [
        (Period::Yearly, grid.yearly_harmonics),
        (Period::Weekly, grid.weekly_harmonics),
    ] {
        for harmonic in 1..=harmonics {
            for wave in [Wave::Sin, Wave::Cos] {
                specs.push(FeatureSpec::Fourier {
                    period,
                    wave,
                    harmonic,
                });
            }
        }
    }
    for channel in 1..=channels {
        specs.extend((1..=grid.poly_degree).map(|degree| FeatureSpec::Poly { channel, degree }));
        specs.extend(
            grid.ma_windows
                .iter()
                .map(|&window| FeatureSpec::MovingAverage { channel, window }),
        );
        if grid.temp_month_interactions {
            specs.extend((1..=12).map(|m| FeatureSpec::Interaction {
                channel,
                degree: 1,
                indicator: Indicator::Month(m),
            }));
        }
        if grid.temp_dow_interactions {
            specs.extend(WEEKDAYS.iter().map(|d| FeatureSpec::Interaction {
                channel,
                degree: 1,
                indicator: Indicator::DayOfWeek(*d),
            }));
        }
    }
    if trend_mode != TrendMode::Off {
        specs.push(FeatureSpec::Trend);
    }
    Ok(FeatureCatalog {
        specs,
        grid_config: grid.clone(),
    })
}

/// Temperature channels and holiday flags on a contiguous hourly grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    start: Timestamp,
    temperatures: Vec<Vec<f64>>,
    holiday: Vec<f64>,
}

impl Exogenous {
    pub fn new(start: Timestamp, temperatures: Vec<Vec<f64>>, holiday: Vec<f64>) -> Result<Self> {
        if temperatures.iter().any(|c| c.len() != holiday.len()) {
            return Err(Error::Alignment(
                "exogenous channels must have equal length".into(),
            ));
        }
        Ok(Self {
            start,
            temperatures,
            holiday,
        })
    }

    /// Exogenous inputs of a DST-normalized dataset.
    pub fn from_dataset(dataset: &ZoneDataset) -> Result<Self> {
        let start = dataset
            .first()
            .ok_or_else(|| Error::Coverage("empty dataset".into()))?;
        let contiguous = dataset
            .timestamps()
            .iter()
            .enumerate()
            .all(|(i, t)| t.hour_index() == start.hour_index() + i as i64);
        if !contiguous {
            return Err(Error::DataQuality(format!(
                "zone {} is not on a contiguous hourly grid; normalize DST first",
                dataset.zone_id()
            )));
        }
        Self::new(
            start,
            dataset.temperatures().to_vec(),
            dataset.holiday().to_vec(),
        )
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn len(&self) -> usize {
        self.holiday.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holiday.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.temperatures.len()
    }

    pub fn temperatures(&self) -> &[Vec<f64>] {
        &self.temperatures
    }

    fn row(&self, t: &Timestamp) -> Option<usize> {
        let offset = t.hour_index() - self.start.hour_index();
        (0..self.len() as i64)
            .contains(&offset)
            .then_some(offset as usize)
    }
}

/// Materialized regressors, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub column_ids: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub row_timestamps: Vec<Timestamp>,
}

impl DesignMatrix {
    pub fn from_columns(
        column_ids: Vec<String>,
        columns: Vec<Vec<f64>>,
        rows: usize,
    ) -> Result<Self> {
        if column_ids.len() != columns.len() || columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Alignment("design matrix columns are ragged".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design matrix has non-finite entries".into()));
        }
        Ok(Self {
            column_ids,
            columns,
            row_timestamps: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.columns
            .first()
            .map_or(self.row_timestamps.len(), Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn column(&self, id: &str) -> Option<&[f64]> {
        self.column_ids
            .iter()
            .position(|c| c == id)
            .map(|i| self.columns[i].as_slice())
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            column_ids: self.column_ids.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            row_timestamps: rows
                .iter()
                .filter_map(|&r| self.row_timestamps.get(r).copied())
                .collect(),
        }
    }
}

/// Evaluates `specs` at every timestamp.
///
/// Moving averages read `window - 1` hours before each row from `exog`, so
/// `exog` must start at least that far before the earliest timestamp.
pub fn materialize(
    specs: &[FeatureSpec],
    timestamps: &[Timestamp],
    exog: &Exogenous,
) -> Result<DesignMatrix> {
    let backfill = specs
        .iter()
        .map(FeatureSpec::backfill_hours)
        .max()
        .unwrap_or(0) as usize;
    if let Some(spec) = specs
        .iter()
        .find(|s| s.channel().is_some_and(|c| c > exog.channel_count()))
    {
        return Err(Error::Coverage(format!(
            "feature {spec} needs a temperature channel the inputs do not have ({} channels)",
            exog.channel_count()
        )));
    }
    let mut rows = Vec::with_capacity(timestamps.len());
    for t in timestamps {
        let row = exog.row(t).ok_or_else(|| {
            Error::Coverage(format!(
                "exogenous inputs ({} hours from {}) do not cover {t}",
                exog.len(),
                exog.start
            ))
        })?;
        if row < backfill {
            return Err(Error::Coverage(format!(
                "{t} needs {backfill} hours of backfill but inputs start {row} hours earlier"
            )));
        }
        rows.push(row);
    }
    let columns = specs
        .iter()
        .map(|spec| {
            timestamps
                .iter()
                .zip(&rows)
                .map(|(t, &r)| spec.evaluate(t, r, exog))
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>();
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "materialized a non-finite feature value".into(),
        ));
    }
    Ok(DesignMatrix {
        column_ids: specs.iter().map(FeatureSpec::id).collect(),
        columns,
        row_timestamps: timestamps.to_vec(),
    })
}
