//! Pinball loss, the vanilla benchmark regression and relative scoring.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{HourlySeries, ZoneDataset};
use crate::error::{Error, Result};
use crate::features::TREND_BASE_YEAR;
use crate::ols::least_squares;
use crate::scenario::{QuantileForecast, ScenarioSet};
use crate::time::Timestamp;

/// Loss of quantile forecast `z` at level `tau` when `y` is observed.
pub fn pinball(y: f64, z: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level {tau} outside (0, 1)"
        )));
    }
    Ok(if y >= z {
        (y - z) * tau
    } else {
        (z - y) * (1.0 - tau)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinballResult {
    /// Mean over every (timestamp, level) term.
    pub total: f64,
    /// Mean over timestamps, per level.
    pub per_level: [f64; 9],
    /// Mean over timestamps of the nine-level sum.
    pub per_timestamp_mean: f64,
    pub n_terms: usize,
}

pub fn total_pinball(actuals: &HourlySeries, forecast: &QuantileForecast) -> Result<PinballResult> {
    if actuals.timestamps != forecast.timestamps {
        return Err(Error::Alignment(format!(
            "actuals ({} hours) and forecast ({} hours) are not on the same timestamps",
            actuals.len(),
            forecast.len()
        )));
    }
    if actuals.is_empty() {
        return Err(Error::Domain("no timestamps to score".into()));
    }
    let mut per_level = [0.0; 9];
    for (y, row) in actuals.values.iter().zip(&forecast.values) {
        for (k, (&z, &tau)) in row.iter().zip(&forecast.levels).enumerate() {
            per_level[k] += pinball(*y, z, tau)?;
        }
    }
    let hours = actuals.len() as f64;
    let sum: f64 = per_level.iter().sum();
    Ok(PinballResult {
        total: sum / (hours * 9.0),
        per_level: per_level.map(|s| s / hours),
        per_timestamp_mean: sum / hours,
        n_terms: actuals.len() * 9,
    })
}

/// Percentage improvement of `model_loss` over `bench_loss`.
pub fn relative_score(model_loss: f64, bench_loss: f64) -> Result<f64> {
    if bench_loss.is_nan() || bench_loss <= 0.0 {
        return Err(Error::Domain(format!(
            "benchmark loss must be positive, got {bench_loss}"
        )));
    }
    Ok(100.0 * (bench_loss - model_loss) / bench_loss)
}

/// Mean of per-zone scores.
pub fn round_score(zone_scores: &[f64]) -> Result<f64> {
    if zone_scores.is_empty() {
        return Err(Error::Domain("no zone scores to average".into()));
    }
    Ok(zone_scores.iter().sum::<f64>() / zone_scores.len() as f64)
}

/// Half-up rounding to `decimals` places, as used in report output.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale + 0.5).floor() / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub zone_id: String,
    pub round_id: u32,
    pub strategy: String,
    pub model_loss: f64,
    pub bench_loss: f64,
    pub score: f64,
}

impl ScoreCard {
    pub fn new(
        zone_id: &str,
        round_id: u32,
        strategy: &str,
        model_loss: f64,
        bench_loss: f64,
    ) -> Result<Self> {
        Ok(Self {
            zone_id: zone_id.to_string(),
            round_id,
            strategy: strategy.to_string(),
            model_loss,
            bench_loss,
            score: relative_score(model_loss, bench_loss)?,
        })
    }
}

pub fn write_scorecards<W: Write>(writer: W, cards: &[ScoreCard]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "zone",
        "round",
        "strategy",
        "model_loss",
        "bench_loss",
        "score",
    ])?;
    for c in cards {
        w.write_record([
            c.zone_id.clone(),
            c.round_id.to_string(),
            c.strategy.clone(),
            format!("{:.4}", c.model_loss),
            format!("{:.4}", c.bench_loss),
            format!("{:.2}", round_half_up(c.score, 2)),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Fixed-structure benchmark regression fitted jointly over all hours:
///
/// ```text
/// load ~ trend + month + weekday×hour + T + T² + T³ + (T + T² + T³)×month + (T + T² + T³)×hour
/// ```
///
/// `T` is the mean of the configured temperature channels. It is centred and
/// scaled before fitting, which reparametrizes the same model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanillaModel {
    /// 1-based temperature channels averaged into `T`.
    pub channels: Vec<usize>,
    pub center: f64,
    pub scale: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub trained_window: (Timestamp, Timestamp),
}

const VANILLA_COLUMNS: usize = 1 + 11 + 167 + 3 + 33 + 69;

impl VanillaModel {
    pub fn fit(
        dataset: &ZoneDataset,
        window: (Timestamp, Timestamp),
        channels: &[usize],
    ) -> Result<Self> {
        let (start, end) = window;
        if end.hour_index() - start.hour_index() + 1 < 365 * 24 {
            return Err(Error::Training(format!(
                "vanilla benchmark needs at least one year of data, window is {start}..{end}"
            )));
        }
        if channels.is_empty()
            || channels
                .iter()
                .any(|&c| c == 0 || c > dataset.channel_count())
        {
            return Err(Error::Config(format!(
                "vanilla channels {channels:?} invalid for zone {} with {} channels",
                dataset.zone_id(),
                dataset.channel_count()
            )));
        }
        let train = dataset.between(start, end);
        if train.is_empty() {
            return Err(Error::Training(format!(
                "no data for zone {} in {start}..{end}",
                dataset.zone_id()
            )));
        }
        let temps = mean_channels(train.temperatures(), channels);
        let n = temps.len() as f64;
        let center = temps.iter().sum::<f64>() / n;
        let var = temps.iter().map(|t| (t - center).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let mut model = Self {
            channels: channels.to_vec(),
            center,
            scale,
            intercept: 0.0,
            coefficients: Vec::new(),
            trained_window: window,
        };
        let columns = model.design(train.timestamps(), &temps);
        let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
        let fit = least_squares(&refs, train.load())
            .map_err(|e| Error::Training(format!("vanilla fit for {}: {e}", dataset.zone_id())))?;
        model.intercept = fit.intercept;
        model.coefficients = fit.coefficients;
        Ok(model)
    }

    fn design(&self, timestamps: &[Timestamp], temps: &[f64]) -> Vec<Vec<f64>> {
        let n = timestamps.len();
        let mut cols = vec![vec![0.0; n]; VANILLA_COLUMNS];
        for (i, (t, raw)) in timestamps.iter().zip(temps).enumerate() {
            let u = (raw - self.center) / self.scale;
            let powers = [u, u * u, u * u * u];
            let month = t.month() as usize;
            let hour = t.hour() as usize;
            let wh = t.hour_of_week() as usize;
            cols[0][i] = (t.year() - TREND_BASE_YEAR + 1) as f64;
            if month > 1 {
                cols[1 + month - 2][i] = 1.0;
            }
            if wh > 0 {
                cols[12 + wh - 1][i] = 1.0;
            }
            for (d, pw) in powers.iter().enumerate() {
                cols[179 + d][i] = *pw;
                if month > 1 {
                    cols[182 + d * 11 + month - 2][i] = *pw;
                }
                if hour > 1 {
                    cols[215 + d * 23 + hour - 2][i] = *pw;
                }
            }
        }
        cols
    }

    pub fn predict(&self, timestamps: &[Timestamp], temperature: &[f64]) -> Result<HourlySeries> {
        if timestamps.len() != temperature.len() {
            return Err(Error::Alignment(format!(
                "{} timestamps but {} temperatures",
                timestamps.len(),
                temperature.len()
            )));
        }
        let cols = self.design(timestamps, temperature);
        let values = (0..timestamps.len())
            .map(|i| {
                self.coefficients
                    .iter()
                    .zip(&cols)
                    .fold(self.intercept, |acc, (b, c)| acc + b * c[i])
            })
            .collect();
        HourlySeries::new(timestamps.to_vec(), values)
    }

    /// One benchmark trajectory per scenario.
    pub fn forecast_scenarios(&self, scenarios: &ScenarioSet) -> Result<Vec<HourlySeries>> {
        let skip = scenarios.backfill_hours;
        scenarios
            .trajectories
            .iter()
            .map(|traj| {
                let temps = mean_channels(&traj.temperatures, &self.channels);
                self.predict(&scenarios.forecast_timestamps, &temps[skip..])
            })
            .collect()
    }
}

/// Mean of the selected 1-based channels at each row.
pub fn mean_channels(temperatures: &[Vec<f64>], channels: &[usize]) -> Vec<f64> {
    let n = temperatures.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            channels
                .iter()
                .map(|&c| temperatures[c - 1][i])
                .sum::<f64>()
                / channels.len() as f64
        })
        .collect()
}

/// Fits the benchmark on `window` and predicts `forecast_timestamps` under one
/// temperature trajectory.
pub fn vanilla_forecast(
    dataset: &ZoneDataset,
    window: (Timestamp, Timestamp),
    forecast_timestamps: &[Timestamp],
    temperature: &[f64],
    channels: &[usize],
) -> Result<HourlySeries> {
    VanillaModel::fit(dataset, window, channels)?.predict(forecast_timestamps, temperature)
}
