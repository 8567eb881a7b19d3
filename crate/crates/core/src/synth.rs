//! Seeded synthetic zones for desk-scale runs.
//!
//! Layout: one lead-in year, `years` history years ending in 2016, then the
//! evaluation year 2017. Weather is shared between zones up to a per-zone
//! offset. Load depends on the hour, weekday, holidays, a yearly cycle, a
//! quadratic in dry bulb, dew point, and the trailing 24 h and 168 h mean dry
//! bulb, plus an optional linear trend and iid noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::ZoneDataset;
use crate::error::{Error, Result};
use crate::time::{hourly_range, is_us_holiday, us_transitions, Timestamp};

pub const EVALUATION_YEAR: i32 = 2017;
/// Last year with raw DST gaps and duplicates.
const LAST_RAW_DST_YEAR: i32 = 2015;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// History years, ending in 2016.
    pub years: u32,
    pub zones: Vec<String>,
    /// Linear growth per year as a fraction of the zone's base load.
    pub trend_per_year: f64,
    /// Noise standard deviation as a fraction of the zone's base load.
    pub noise: f64,
    pub inject_dst: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            years: 13,
            zones: vec!["zone_a".into(), "zone_b".into()],
            trend_per_year: 0.0,
            noise: 0.01,
            inject_dst: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.years < 4 {
            return Err(Error::Config(format!(
                "synthetic data needs at least 4 years (3 training + 1 evaluation), got {}",
                self.years
            )));
        }
        if self.zones.is_empty() {
            return Err(Error::Config(
                "synthetic data needs at least one zone".into(),
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.trend_per_year.is_finite()) {
            return Err(Error::Config("noise must be >= 0 and trend finite".into()));
        }
        Ok(())
    }

    pub fn first_history_year(&self) -> i32 {
        EVALUATION_YEAR - self.years as i32
    }

    pub fn history_years(&self) -> Vec<i32> {
        (self.first_history_year()..EVALUATION_YEAR).collect()
    }
}

/// Raw zone datasets, with DST gaps and duplicate rows when `inject_dst` is set.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<ZoneDataset>> {
    config.validate()?;
    let first = NaiveDate::from_ymd_opt(config.first_history_year() - 1, 1, 1).expect("valid date");
    let last = NaiveDate::from_ymd_opt(EVALUATION_YEAR, 12, 31).expect("valid date");
    let timestamps = hourly_range(first, last);
    let weather = Weather::generate(&timestamps, config.seed);

    config
        .zones
        .iter()
        .enumerate()
        .map(|(z, name)| {
            let clean = zone_series(config, z, &timestamps, &weather);
            let raw = if config.inject_dst {
                inject_dst(&clean, config.seed, z)
            } else {
                clean
            };
            ZoneDataset::new(name.clone(), raw.0, raw.1, raw.2, raw.3)
        })
        .collect()
}

/// Writes one CSV per zone into `dir`, returning the paths in zone order.
pub fn write_synthetic(config: &SynthConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let zones = generate_synthetic(config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    zones
        .iter()
        .map(|zone| {
            let path = dir.join(format!("{}.csv", zone.zone_id()));
            zone.write_csv_file(&path)?;
            Ok(path)
        })
        .collect()
}

struct Weather {
    dry_bulb: Vec<f64>,
    dew_point: Vec<f64>,
}

impl Weather {
    fn generate(timestamps: &[Timestamp], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let daily = Normal::new(0.0, 5.0).expect("valid sd");
        let hourly = Normal::new(0.0, 1.0).expect("valid sd");
        let dew = Normal::new(0.0, 2.0).expect("valid sd");
        let mut anomaly = 0.0;
        let mut dry_bulb = Vec::with_capacity(timestamps.len());
        let mut dew_point = Vec::with_capacity(timestamps.len());
        for t in timestamps {
            if t.hour() == 1 {
                anomaly = 0.75 * anomaly + daily.sample(&mut rng);
            }
            let season = 52.0 - 22.0 * (2.0 * PI * (t.day_of_year() as f64 - 20.0) / 365.25).cos();
            let diurnal = 7.0 * (2.0 * PI * (t.hour() as f64 - 15.0) / 24.0).cos();
            let db = season + anomaly + diurnal + hourly.sample(&mut rng);
            dry_bulb.push(db);
            dew_point.push(db - 9.0 - 0.1 * (db - 52.0) + dew.sample(&mut rng));
        }
        Self {
            dry_bulb,
            dew_point,
        }
    }
}

type RawColumns = (Vec<Timestamp>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

fn zone_series(
    config: &SynthConfig,
    zone: usize,
    timestamps: &[Timestamp],
    w: &Weather,
) -> RawColumns {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(zone as u64 + 1);
    let scale = 1000.0 * (1.0 + 0.35 * zone as f64);
    let offset = 1.5 * zone as f64;
    let noise = Normal::new(0.0, (config.noise * scale).max(f64::MIN_POSITIVE)).expect("valid sd");
    let small = Normal::new(0.0, 0.5).expect("valid sd");

    let db: Vec<f64> = w
        .dry_bulb
        .iter()
        .map(|v| v + offset + small.sample(&mut rng))
        .collect();
    let dp: Vec<f64> = w
        .dew_point
        .iter()
        .map(|v| v + offset + small.sample(&mut rng))
        .collect();
    let ma24 = trailing_mean(&db, 24);
    let ma168 = trailing_mean(&db, 168);

    let mut load = Vec::with_capacity(timestamps.len());
    let mut holiday = Vec::with_capacity(timestamps.len());
    for (i, t) in timestamps.iter().enumerate() {
        let h = t.hour() as f64;
        let shape = 0.5 * (1.0 - (2.0 * PI * (h - 4.0) / 24.0).cos());
        let is_holiday = is_us_holiday(t.date());
        let calendar = match t.weekday() {
            Weekday::Sat => -0.06 * shape,
            Weekday::Sun => -0.09 * shape,
            _ => 0.0,
        } - if is_holiday { 0.07 * shape } else { 0.0 };
        let sensitivity = 0.6 + 0.6 * shape;
        let doy = t.day_of_year() as f64;
        let relative = 0.8
            + 0.25 * shape
            + calendar
            + 0.02 * (2.0 * PI * (doy - 1.0) / 365.25).sin()
            + 0.0009 * sensitivity * (db[i] - 62.0).powi(2) / 10.0
            + 0.001 * (dp[i] - 45.0)
            - 0.003 * (ma24[i] - 52.0)
            - 0.0015 * (ma168[i] - 52.0)
            + config.trend_per_year * (t.year() - 2002) as f64;
        load.push(scale * relative + noise.sample(&mut rng));
        holiday.push(if is_holiday { 1.0 } else { 0.0 });
    }
    (timestamps.to_vec(), load, vec![db, dp], holiday)
}

/// Trailing mean over `window` hours including the current one; shorter at the start.
fn trailing_mean(x: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut sum = 0.0;
    for i in 0..x.len() {
        sum += x[i];
        if i >= window {
            sum -= x[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Drops hour-ending 2 on spring-forward days and repeats it on fall-back
/// days as two rows whose loads straddle twice the original.
fn inject_dst(clean: &RawColumns, seed: u64, zone: usize) -> RawColumns {
    let (ts, load, temps, holiday) = clean;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157);
    rng.set_stream(zone as u64);
    let split = Normal::new(0.0, 5.0).expect("valid sd");
    let mut out: RawColumns = (
        Vec::new(),
        Vec::new(),
        vec![Vec::new(); temps.len()],
        Vec::new(),
    );
    for i in 0..ts.len() {
        let t = ts[i];
        let raw_year = t.year() <= LAST_RAW_DST_YEAR;
        let (spring, fall) = us_transitions(t.year());
        if raw_year && t.hour() == 2 && t.date() == spring {
            continue;
        }
        let copies = if raw_year && t.hour() == 2 && t.date() == fall {
            2
        } else {
            1
        };
        let delta = if copies == 2 {
            split.sample(&mut rng)
        } else {
            0.0
        };
        for c in 0..copies {
            let sign = if c == 0 { 1.0 } else { -1.0 };
            out.0.push(t);
            // Two rows summing to 2·load halve back to the clean value.
            out.1.push(load[i] + sign * delta);
            for (dst, src) in out.2.iter_mut().zip(temps) {
                dst.push(src[i]);
            }
            out.3.push(holiday[i]);
        }
    }
    out
}
