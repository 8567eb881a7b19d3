//! Weather scenarios from shifted historical temperatures, and their
//! reduction to decile forecasts.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HourlySeries, ZoneDataset};
use crate::error::{Error, Result};
use crate::features::Exogenous;
use crate::model::{predict, HourlyModelSet};
use crate::time::{hourly_range, Timestamp};

/// Decile levels of every forecast.
pub const DECILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftConfig {
    pub history_years: Vec<i32>,
    pub day_shifts: Vec<i32>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            history_years: (2004..=2016).collect(),
            day_shifts: (-3..=3).collect(),
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history_years.is_empty() {
            return Err(Error::Config("no history years for scenarios".into()));
        }
        if self.day_shifts.is_empty() {
            return Err(Error::Config("no day shifts for scenarios".into()));
        }
        let distinct = |v: &[i32]| {
            let mut s = v.to_vec();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        };
        if !distinct(&self.day_shifts) || !distinct(&self.history_years) {
            return Err(Error::Config(
                "history years and day shifts must be distinct".into(),
            ));
        }
        Ok(())
    }

    pub fn scenario_count(&self) -> usize {
        self.history_years.len() * self.day_shifts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_year: i32,
    pub shift_days: i32,
}

/// One temperature trajectory. Channel vectors start `backfill_hours`
/// before the first forecast timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub provenance: Provenance,
    pub temperatures: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub forecast_timestamps: Vec<Timestamp>,
    pub backfill_hours: usize,
    pub trajectories: Vec<Trajectory>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn provenance(&self) -> Vec<Provenance> {
        self.trajectories.iter().map(|t| t.provenance).collect()
    }

    pub fn provenance_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.provenance())?)
    }

    /// Inputs for trajectory `k` with the real calendar's holiday flags.
    pub fn exogenous(&self, k: usize, holiday: &[f64]) -> Result<Exogenous> {
        if holiday.len() != self.forecast_timestamps.len() {
            return Err(Error::Alignment(format!(
                "{} holiday flags for {} forecast hours",
                holiday.len(),
                self.forecast_timestamps.len()
            )));
        }
        let start = self.forecast_timestamps[0].add_hours(-(self.backfill_hours as i64));
        let mut flags = vec![0.0; self.backfill_hours];
        flags.extend_from_slice(holiday);
        Exogenous::new(start, self.trajectories[k].temperatures.clone(), flags)
    }
}

/// Same month and day `year_offset` years away; Feb 29 becomes Feb 28 in a
/// non-leap target year.
fn shift_years(date: NaiveDate, year_offset: i32) -> NaiveDate {
    let year = date.year() + year_offset;
    NaiveDate::from_ymd_opt(year, date.month(), date.day())
        .or_else(|| NaiveDate::from_ymd_opt(year, 2, 28))
        .expect("valid date")
}

/// Builds one trajectory per (history year, day shift), years outermost.
///
/// A forecast hour `(month, day, hour)` of trajectory `(year, d)` reads the
/// historical value at `(year, month, day, hour)` moved by `d` days along the
/// historical record. The backfill hours before the window continue that
/// record backwards from the first forecast hour's source.
pub fn generate_scenarios(
    history: &ZoneDataset,
    window: (NaiveDate, NaiveDate),
    config: &ShiftConfig,
    backfill_hours: usize,
) -> Result<ScenarioSet> {
    config.validate()?;
    let (first, last) = window;
    if first > last {
        return Err(Error::Config(format!(
            "empty forecast window {first}..{last}"
        )));
    }
    let exog = Exogenous::from_dataset(history)?;
    let base = exog.start().hour_index();
    let forecast_timestamps = hourly_range(first, last);
    let channels = exog.channel_count();

    let mut trajectories = Vec::with_capacity(config.scenario_count());
    for &year in &config.history_years {
        for &shift in &config.day_shifts {
            let provenance = Provenance {
                source_year: year,
                shift_days: shift,
            };
            let offset = year - first.year();
            let source_index = |t: &Timestamp| {
                let date = shift_years(t.date(), offset) + Duration::days(shift as i64);
                Timestamp::new(date, t.hour()).map(|s| s.hour_index() - base)
            };
            let first_source = source_index(&forecast_timestamps[0])?;
            let mut rows: Vec<i64> = (1..=backfill_hours as i64)
                .rev()
                .map(|i| first_source - i)
                .collect();
            for t in &forecast_timestamps {
                rows.push(source_index(t)?);
            }
            if rows.iter().any(|&r| r < 0 || r >= exog.len() as i64) {
                return Err(Error::Coverage(format!(
                    "scenario (year {year}, shift {shift:+} days) needs temperatures outside \
                     the history {}..{}",
                    history.first().map(|t| t.to_string()).unwrap_or_default(),
                    history.last().map(|t| t.to_string()).unwrap_or_default(),
                )));
            }
            let temperatures = (0..channels)
                .map(|c| {
                    rows.iter()
                        .map(|&r| exog.temperatures()[c][r as usize])
                        .collect()
                })
                .collect();
            trajectories.push(Trajectory {
                provenance,
                temperatures,
            });
        }
    }
    Ok(ScenarioSet {
        forecast_timestamps,
        backfill_hours,
        trajectories,
    })
}

/// Runs every trajectory through `modelset`. Calendar features come from the
/// real forecast timestamps and `holiday`; only temperatures vary.
pub fn forecast_scenarios(
    modelset: &HourlyModelSet,
    scenarios: &ScenarioSet,
    holiday: &[f64],
) -> Result<Vec<HourlySeries>> {
    let needed = modelset.backfill_hours() as usize;
    if scenarios.backfill_hours < needed {
        return Err(Error::Coverage(format!(
            "models need {needed} hours of scenario backfill, scenarios carry {}",
            scenarios.backfill_hours
        )));
    }
    (0..scenarios.len())
        .into_par_iter()
        .map(|k| {
            let exog = scenarios.exogenous(k, holiday)?;
            predict(modelset, &scenarios.forecast_timestamps, &exog)
        })
        .collect()
}

/// Empirical quantile with linear interpolation between order statistics:
/// `h = (n-1)p + 1`, `Q = x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋+1] - x[⌊h⌋])`.
///
/// `h` within a few ulps of an integer is snapped to it so that decile
/// levels hit order statistics exactly when `(n-1)p` is integral.
pub fn quantile_type7(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level {p} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let mut index = (n - 1) as f64 * p;
    let nearest = index.round();
    if (index - nearest).abs() <= 4.0 * f64::EPSILON * nearest.max(1.0) {
        index = nearest;
    }
    let lo = index.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let gamma = index - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    if gamma == 0.0 || a == b {
        return a;
    }
    (a + gamma * (b - a)).clamp(a, b)
}

/// Nine decile values per timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    pub timestamps: Vec<Timestamp>,
    pub levels: [f64; 9],
    pub values: Vec<[f64; 9]>,
}

impl QuantileForecast {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        self.values
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1]))
    }

    /// `timestamp,q10,...,q90` with `precision` decimals.
    pub fn write_csv<W: Write>(&self, writer: W, precision: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(
            self.levels
                .iter()
                .map(|p| format!("q{}", (p * 100.0).round() as u32)),
        );
        w.write_record(&header)?;
        for (t, row) in self.timestamps.iter().zip(&self.values) {
            let mut record = vec![t.to_string()];
            record.extend(row.iter().map(|v| format!("{v:.precision$}")));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path, precision: usize) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), precision)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let expected: Vec<String> = std::iter::once("timestamp".to_string())
            .chain((1..=9).map(|k| format!("q{}", k * 10)))
            .collect();
        if rdr.headers()?.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Schema(format!(
                "{} is not a decile forecast file",
                path.display()
            )));
        }
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let err = |message: String| Error::Ingest {
                path: path.to_path_buf(),
                row: i + 2,
                message,
            };
            timestamps.push(record[0].parse().map_err(|e| err(format!("{e}")))?);
            let mut row = [0.0; 9];
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = record[k + 1]
                    .parse()
                    .map_err(|_| err(format!("non-numeric decile {:?}", &record[k + 1])))?;
            }
            values.push(row);
        }
        Ok(Self {
            timestamps,
            levels: DECILES,
            values,
        })
    }
}

/// Deciles of the trajectories at each timestamp.
pub fn reduce_to_deciles(trajectories: &[HourlySeries]) -> Result<QuantileForecast> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Domain("no trajectories to reduce".into()))?;
    if let Some(bad) = trajectories
        .iter()
        .position(|t| t.timestamps != first.timestamps)
    {
        return Err(Error::Alignment(format!(
            "trajectory {bad} is not aligned with trajectory 0"
        )));
    }
    let mut column = vec![0.0; trajectories.len()];
    let values = (0..first.len())
        .map(|i| {
            for (slot, t) in column.iter_mut().zip(trajectories) {
                *slot = t.values[i];
            }
            column.sort_by(f64::total_cmp);
            DECILES.map(|p| quantile_sorted(&column, p))
        })
        .collect();
    Ok(QuantileForecast {
        timestamps: first.timestamps.clone(),
        levels: DECILES,
        values,
    })
}

/// Cell-wise mean of two forecasts on the same grid.
pub fn ensemble_average(a: &QuantileForecast, b: &QuantileForecast) -> Result<QuantileForecast> {
    if a.timestamps != b.timestamps || a.levels != b.levels {
        return Err(Error::Alignment(
            "ensemble members must share timestamps and levels".into(),
        ));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| std::array::from_fn(|k| (x[k] + y[k]) / 2.0))
        .collect();
    Ok(QuantileForecast {
        timestamps: a.timestamps.clone(),
        levels: a.levels,
        values,
    })
}
