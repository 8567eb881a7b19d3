//! Round workflow: ingest and normalize zones, train per-hour model sets up
//! to the round's data cutoff, run shifted-temperature scenarios through
//! them, emit deciles, and score against the vanilla benchmark.
//!
//! Output layout under the run directory is `<round>/<zone>/` holding
//! `forecast.csv`, `model.json`, `provenance.json` and, once scored,
//! `scorecard.csv`. Competition simulations nest one such tree per strategy.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{
    aggregate_zone, ingest_csv, normalize_dst, ColumnMapping, DstOptions, HourlySeries, ZoneDataset,
};
use crate::error::{Error, Result};
use crate::eval::{
    round_half_up, round_score, total_pinball, write_scorecards, ScoreCard, VanillaModel,
};
use crate::features::{GridConfig, TrendMode};
use crate::model::{train_hourly, HourlyModelSet, SelectionConfig};
use crate::scenario::{
    ensemble_average, forecast_scenarios, generate_scenarios, reduce_to_deciles, QuantileForecast,
    ScenarioSet, ShiftConfig,
};
use crate::time::{is_us_holiday, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Trend variable forced into every hourly model.
    Trend,
    NoTrend,
    /// Mean of the trend and no-trend deciles.
    Ensemble,
    /// Trend offered to selection as an ordinary candidate.
    Auto,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Trend,
        Strategy::NoTrend,
        Strategy::Ensemble,
        Strategy::Auto,
    ];

    pub fn trend_modes(self) -> &'static [TrendMode] {
        match self {
            Strategy::Trend => &[TrendMode::On],
            Strategy::NoTrend => &[TrendMode::Off],
            Strategy::Ensemble => &[TrendMode::On, TrendMode::Off],
            Strategy::Auto => &[TrendMode::Auto],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Trend => "trend",
            Strategy::NoTrend => "no_trend",
            Strategy::Ensemble => "ensemble",
            Strategy::Auto => "auto",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy {s:?}; expected trend, no_trend, ensemble or auto"
                ))
            })
    }
}

/// A row of a competition simulation: one strategy for every round, or each
/// round's own configured strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plan {
    Fixed(Strategy),
    Schedule,
}

impl Plan {
    pub fn strategy_for(self, round: &RoundSpec) -> Strategy {
        match self {
            Plan::Fixed(s) => s,
            Plan::Schedule => round.strategy,
        }
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Plan::Fixed(s) => write!(f, "{s}"),
            Plan::Schedule => f.write_str("schedule"),
        }
    }
}

impl FromStr for Plan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "schedule" {
            Ok(Plan::Schedule)
        } else {
            s.parse().map(Plan::Fixed)
        }
    }
}

impl Serialize for Plan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSpec {
    pub round_id: u32,
    pub due_date: NaiveDate,
    /// Last hour of data available to the round.
    pub data_cutoff: Timestamp,
    pub forecast_start: NaiveDate,
    pub forecast_end: NaiveDate,
    pub strategy: Strategy,
}

impl RoundSpec {
    pub fn forecast_window(&self) -> (NaiveDate, NaiveDate) {
        (self.forecast_start, self.forecast_end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.forecast_start > self.forecast_end {
            return Err(Error::Config(format!(
                "round {}: empty forecast window",
                self.round_id
            )));
        }
        if Timestamp::start_of_day(self.forecast_start) <= self.data_cutoff {
            return Err(Error::Config(format!(
                "round {}: forecast window starts before the data cutoff {}",
                self.round_id, self.data_cutoff
            )));
        }
        Ok(())
    }
}

/// The six qualifying rounds with the submitted strategy mix.
pub fn default_rounds() -> Vec<RoundSpec> {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
    let rows = [
        (
            1,
            d(2016, 12, 15),
            d(2016, 11, 30),
            d(2017, 1, 1),
            d(2017, 1, 31),
            Strategy::Trend,
        ),
        (
            2,
            d(2016, 12, 31),
            d(2016, 11, 30),
            d(2017, 2, 1),
            d(2017, 2, 28),
            Strategy::Trend,
        ),
        (
            3,
            d(2017, 1, 15),
            d(2016, 11, 30),
            d(2017, 2, 1),
            d(2017, 2, 28),
            Strategy::Ensemble,
        ),
        (
            4,
            d(2017, 1, 31),
            d(2016, 12, 31),
            d(2017, 3, 1),
            d(2017, 3, 31),
            Strategy::Ensemble,
        ),
        (
            5,
            d(2017, 2, 14),
            d(2016, 12, 31),
            d(2017, 3, 1),
            d(2017, 3, 31),
            Strategy::Ensemble,
        ),
        (
            6,
            d(2017, 2, 28),
            d(2017, 1, 31),
            d(2017, 4, 1),
            d(2017, 4, 30),
            Strategy::Trend,
        ),
    ];
    rows.into_iter()
        .map(
            |(round_id, due_date, cutoff, forecast_start, forecast_end, strategy)| RoundSpec {
                round_id,
                due_date,
                data_cutoff: Timestamp::end_of_day(cutoff),
                forecast_start,
                forecast_end,
                strategy,
            },
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSource {
    /// Defaults to the file stem.
    #[serde(default)]
    pub id: Option<String>,
    pub path: PathBuf,
    #[serde(default)]
    pub schema: ColumnMapping,
}

impl ZoneSource {
    pub fn zone_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

/// A zone defined as the sum of other zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSource {
    pub id: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Fixed first training day; when absent, January 1st `years` years
    /// before the forecast year.
    pub start: Option<NaiveDate>,
    pub years: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            start: None,
            years: 3,
        }
    }
}

impl TrainingConfig {
    pub fn window(&self, round: &RoundSpec) -> (Timestamp, Timestamp) {
        let start = self.start.unwrap_or_else(|| {
            NaiveDate::from_ymd_opt(round.forecast_start.year() - self.years as i32, 1, 1)
                .expect("valid date")
        });
        (Timestamp::start_of_day(start), round.data_cutoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VanillaConfig {
    /// 1-based temperature channels averaged into the benchmark temperature.
    pub channels: Vec<usize>,
}

impl Default for VanillaConfig {
    fn default() -> Self {
        Self { channels: vec![1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub zones: Vec<ZoneSource>,
    pub aggregates: Vec<AggregateSource>,
    pub training: TrainingConfig,
    pub grid: GridConfig,
    pub selection: SelectionConfig,
    pub scenarios: ShiftConfig,
    pub dst: DstOptions,
    pub vanilla: VanillaConfig,
    pub rounds: Vec<RoundSpec>,
    /// Rows of a competition simulation.
    pub strategies: Vec<Plan>,
    /// Decimals in forecast files.
    pub precision: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            zones: Vec::new(),
            aggregates: Vec::new(),
            training: TrainingConfig::default(),
            grid: GridConfig::default(),
            selection: SelectionConfig::default(),
            scenarios: ShiftConfig::default(),
            dst: DstOptions::default(),
            vanilla: VanillaConfig::default(),
            rounds: default_rounds(),
            strategies: vec![
                Plan::Fixed(Strategy::Trend),
                Plan::Fixed(Strategy::NoTrend),
                Plan::Fixed(Strategy::Ensemble),
                Plan::Fixed(Strategy::Auto),
                Plan::Schedule,
            ],
            precision: 4,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses TOML; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        for zone in &mut config.zones {
            if zone.path.is_relative() {
                zone.path = base_dir.join(&zone.path);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base_dir.join(&config.output_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(Error::Config("no zones configured".into()));
        }
        let mut ids: Vec<String> = Vec::new();
        for zone in &self.zones {
            if !zone.path.is_file() {
                return Err(Error::Config(format!(
                    "zone file {} does not exist",
                    zone.path.display()
                )));
            }
            ids.push(zone.zone_id());
        }
        for agg in &self.aggregates {
            if agg.members.is_empty() {
                return Err(Error::Config(format!(
                    "aggregate {} has no members",
                    agg.id
                )));
            }
            if let Some(m) = agg.members.iter().find(|m| !ids.contains(m)) {
                return Err(Error::Config(format!(
                    "aggregate {} refers to unknown zone {m}",
                    agg.id
                )));
            }
            ids.push(agg.id.clone());
        }
        let mut sorted = ids.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("zone id {} is used twice", w[0])));
        }
        self.grid.validate()?;
        self.selection.validate()?;
        self.scenarios.validate()?;
        if self.training.years == 0 && self.training.start.is_none() {
            return Err(Error::Config("training.years must be >= 1".into()));
        }
        if self.vanilla.channels.is_empty() || self.vanilla.channels.contains(&0) {
            return Err(Error::Config(
                "vanilla.channels must list 1-based channels".into(),
            ));
        }
        let mut round_ids: Vec<u32> = self.rounds.iter().map(|r| r.round_id).collect();
        round_ids.sort_unstable();
        if round_ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("round ids must be distinct".into()));
        }
        for round in &self.rounds {
            round.validate()?;
        }
        Ok(())
    }

    pub fn zone_ids(&self) -> Vec<String> {
        self.zones
            .iter()
            .map(ZoneSource::zone_id)
            .chain(self.aggregates.iter().map(|a| a.id.clone()))
            .collect()
    }

    pub fn round(&self, id: u32) -> Result<&RoundSpec> {
        self.rounds
            .iter()
            .find(|r| r.round_id == id)
            .ok_or_else(|| Error::Config(format!("round {id} is not configured")))
    }
}

/// Ingests and normalizes every configured zone, then builds aggregates.
/// With `only`, other zones are skipped unless an aggregate needs them.
pub fn load_zones(
    config: &RunConfig,
    only: Option<&[String]>,
) -> Vec<(String, Result<ZoneDataset>)> {
    let wanted = |id: &str| only.is_none_or(|list| list.iter().any(|z| z == id));
    let needed_by_aggregate = |id: &str| {
        config
            .aggregates
            .iter()
            .any(|a| wanted(&a.id) && a.members.iter().any(|m| m == id))
    };
    let base: Vec<(String, Result<ZoneDataset>)> = config
        .zones
        .par_iter()
        .filter(|z| wanted(&z.zone_id()) || needed_by_aggregate(&z.zone_id()))
        .map(|z| {
            let id = z.zone_id();
            let data = ingest_csv(&z.path, &z.schema)
                .and_then(|raw| normalize_dst(&raw, &config.dst))
                .map(|d| d.with_zone_id(id.clone()));
            (id, data)
        })
        .collect();
    let mut out: Vec<(String, Result<ZoneDataset>)> = Vec::new();
    for agg in config.aggregates.iter().filter(|a| wanted(&a.id)) {
        let members: Result<Vec<ZoneDataset>> = agg
            .members
            .iter()
            .map(|m| match base.iter().find(|(id, _)| id == m) {
                Some((_, Ok(d))) => Ok(d.clone()),
                Some((_, Err(e))) => Err(Error::DataQuality(format!(
                    "member {m} of {} failed: {e}",
                    agg.id
                ))),
                None => Err(Error::Config(format!(
                    "aggregate {} refers to unknown zone {m}",
                    agg.id
                ))),
            })
            .collect();
        out.push((
            agg.id.clone(),
            members.and_then(|m| aggregate_zone(&m, &agg.id)),
        ));
    }
    let mut zones: Vec<(String, Result<ZoneDataset>)> =
        base.into_iter().filter(|(id, _)| wanted(id)).collect();
    zones.extend(out);
    zones
}

type ModelKey = (String, Timestamp, Timestamp, TrendMode);
type VanillaKey = (String, Timestamp, Timestamp);

/// Trained models keyed by zone, window and trend mode, so rounds sharing a
/// cutoff reuse the same fits.
#[derive(Debug, Default)]
pub struct ModelCache {
    models: Mutex<HashMap<ModelKey, Arc<HourlyModelSet>>>,
    vanilla: Mutex<HashMap<VanillaKey, Arc<VanillaModel>>>,
}

impl ModelCache {
    fn model_set(
        &self,
        config: &RunConfig,
        history: &ZoneDataset,
        window: (Timestamp, Timestamp),
        mode: TrendMode,
    ) -> Result<Arc<HourlyModelSet>> {
        let key = (history.zone_id().to_string(), window.0, window.1, mode);
        if let Some(m) = self.models.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(m));
        }
        let trained = Arc::new(train_hourly(
            history,
            window,
            &config.grid,
            mode,
            &config.selection,
        )?);
        self.models
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&trained));
        Ok(trained)
    }

    fn vanilla(
        &self,
        config: &RunConfig,
        history: &ZoneDataset,
        window: (Timestamp, Timestamp),
    ) -> Result<Arc<VanillaModel>> {
        let key = (history.zone_id().to_string(), window.0, window.1);
        if let Some(m) = self.vanilla.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(m));
        }
        let fitted = Arc::new(VanillaModel::fit(
            history,
            window,
            &config.vanilla.channels,
        )?);
        self.vanilla
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&fitted));
        Ok(fitted)
    }
}

/// Data available at the round's cutoff.
fn history_at(dataset: &ZoneDataset, round: &RoundSpec) -> Result<ZoneDataset> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Coverage(format!("zone {} has no data", dataset.zone_id())))?;
    Ok(dataset.between(first, round.data_cutoff))
}

/// Holiday flags for forecast hours: the zone's own column where it covers
/// them, the US federal calendar otherwise.
fn holiday_flags(dataset: &ZoneDataset, timestamps: &[Timestamp]) -> Vec<f64> {
    timestamps
        .iter()
        .map(|t| match dataset.position(*t) {
            Some(i) => dataset.holiday()[i],
            None if is_us_holiday(t.date()) => 1.0,
            None => 0.0,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ZoneForecast {
    pub zone_id: String,
    pub round_id: u32,
    pub strategy: Strategy,
    pub training_window: (Timestamp, Timestamp),
    pub forecast: QuantileForecast,
    pub models: Vec<Arc<HourlyModelSet>>,
    pub scenarios: ScenarioSet,
}

impl ZoneForecast {
    pub fn model_json(&self) -> Result<String> {
        model_sets_json(&self.zone_id, self.strategy, &self.models)
    }

    pub fn provenance_json(&self) -> Result<String> {
        let first = self.forecast.timestamps.first().map(ToString::to_string);
        let last = self.forecast.timestamps.last().map(ToString::to_string);
        Ok(serde_json::to_string_pretty(&json!({
            "zone": self.zone_id,
            "round": self.round_id,
            "strategy": self.strategy,
            "training_window": [self.training_window.0, self.training_window.1],
            "forecast_window": [first, last],
            "backfill_hours": self.scenarios.backfill_hours,
            "scenarios": self.scenarios.provenance(),
        }))?)
    }

    pub fn write(&self, dir: &Path, precision: usize) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.forecast
            .write_csv_file(&dir.join("forecast.csv"), precision)?;
        write_text(&dir.join("model.json"), &self.model_json()?)?;
        write_text(&dir.join("provenance.json"), &self.provenance_json()?)
    }
}

/// `model.json` body: the zone, its strategy and every model set used.
pub fn model_sets_json(
    zone_id: &str,
    strategy: Strategy,
    models: &[Arc<HourlyModelSet>],
) -> Result<String> {
    let sets = models
        .iter()
        .map(|m| serde_json::to_value(&**m))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(serde_json::to_string_pretty(&json!({
        "zone": zone_id,
        "strategy": strategy,
        "model_sets": sets,
    }))?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains the model sets a strategy needs at the round's cutoff.
pub fn train_zone(
    config: &RunConfig,
    round: &RoundSpec,
    strategy: Strategy,
    dataset: &ZoneDataset,
    cache: &ModelCache,
) -> Result<Vec<Arc<HourlyModelSet>>> {
    let history = history_at(dataset, round)?;
    let window = config.training.window(round);
    strategy
        .trend_modes()
        .iter()
        .map(|&mode| cache.model_set(config, &history, window, mode))
        .collect()
}

/// Deciles for one zone and round.
pub fn forecast_zone(
    config: &RunConfig,
    round: &RoundSpec,
    strategy: Strategy,
    dataset: &ZoneDataset,
    cache: &ModelCache,
) -> Result<ZoneForecast> {
    let history = history_at(dataset, round)?;
    let models = train_zone(config, round, strategy, dataset, cache)?;
    let backfill = models.iter().map(|m| m.backfill_hours()).max().unwrap_or(0) as usize;
    let scenarios = generate_scenarios(
        &history,
        round.forecast_window(),
        &config.scenarios,
        backfill,
    )?;
    let holiday = holiday_flags(dataset, &scenarios.forecast_timestamps);
    let deciles = models
        .iter()
        .map(|m| reduce_to_deciles(&forecast_scenarios(m, &scenarios, &holiday)?))
        .collect::<Result<Vec<_>>>()?;
    let forecast = match deciles.as_slice() {
        [single] => single.clone(),
        [a, b] => ensemble_average(a, b)?,
        _ => unreachable!("strategies use one or two model sets"),
    };
    Ok(ZoneForecast {
        zone_id: dataset.zone_id().to_string(),
        round_id: round.round_id,
        strategy,
        training_window: config.training.window(round),
        forecast,
        models,
        scenarios,
    })
}

/// Benchmark deciles for the round, over the same scenarios as the model.
pub fn benchmark_deciles(
    config: &RunConfig,
    round: &RoundSpec,
    dataset: &ZoneDataset,
    scenarios: &ScenarioSet,
    cache: &ModelCache,
) -> Result<QuantileForecast> {
    let history = history_at(dataset, round)?;
    let vanilla = cache.vanilla(config, &history, config.training.window(round))?;
    reduce_to_deciles(&vanilla.forecast_scenarios(scenarios)?)
}

/// Scores `forecast` and the benchmark against `actuals` over the forecast hours.
#[allow(clippy::too_many_arguments)]
pub fn score_zone(
    config: &RunConfig,
    round: &RoundSpec,
    strategy: &str,
    dataset: &ZoneDataset,
    forecast: &QuantileForecast,
    scenarios: &ScenarioSet,
    actuals: &HourlySeries,
    cache: &ModelCache,
) -> Result<ScoreCard> {
    let (Some(&first), Some(&last)) = (forecast.timestamps.first(), forecast.timestamps.last())
    else {
        return Err(Error::Domain("empty forecast".into()));
    };
    let observed = actuals.between(first, last);
    if observed.timestamps != forecast.timestamps {
        return Err(Error::Coverage(format!(
            "actuals for zone {} cover {} of {} hours in {first}..{last}",
            dataset.zone_id(),
            observed.len(),
            forecast.len()
        )));
    }
    let bench = benchmark_deciles(config, round, dataset, scenarios, cache)?;
    let model_loss = total_pinball(&observed, forecast)?.total;
    let bench_loss = total_pinball(&observed, &bench)?.total;
    ScoreCard::new(
        dataset.zone_id(),
        round.round_id,
        strategy,
        model_loss,
        bench_loss,
    )
}

#[derive(Debug)]
pub struct ZoneOutcome<T> {
    pub zone_id: String,
    pub result: Result<T>,
}

/// Forecasts every zone for `round` and writes `dir/<round>/<zone>/`. A
/// failing zone is reported in its outcome and the others still run.
pub fn run_round(
    config: &RunConfig,
    round: &RoundSpec,
    strategy: Strategy,
    zones: &[(String, Result<ZoneDataset>)],
    dir: &Path,
    cache: &ModelCache,
) -> Vec<ZoneOutcome<ZoneForecast>> {
    zones
        .par_iter()
        .map(|(id, data)| {
            let result = match data {
                Ok(dataset) => {
                    forecast_zone(config, round, strategy, dataset, cache).and_then(|f| {
                        f.write(&round_dir(dir, round).join(id), config.precision)?;
                        Ok(f)
                    })
                }
                Err(e) => Err(Error::DataQuality(format!("zone {id} did not load: {e}"))),
            };
            if let Err(e) = &result {
                log::error!("round {} zone {id}: {e}", round.round_id);
            }
            ZoneOutcome {
                zone_id: id.clone(),
                result,
            }
        })
        .collect()
}

pub fn round_dir(dir: &Path, round: &RoundSpec) -> PathBuf {
    dir.join(round.round_id.to_string())
}

/// Scores forecasts previously written by [`run_round`] and writes
/// `scorecard.csv` next to each.
pub fn evaluate_round(
    config: &RunConfig,
    round: &RoundSpec,
    zones: &[(String, Result<ZoneDataset>)],
    dir: &Path,
    cache: &ModelCache,
) -> Vec<ZoneOutcome<ScoreCard>> {
    zones
        .par_iter()
        .map(|(id, data)| {
            let zone_dir = round_dir(dir, round).join(id);
            let result = data
                .as_ref()
                .map_err(|e| Error::DataQuality(format!("zone {id} did not load: {e}")))
                .and_then(|dataset| {
                    let forecast = QuantileForecast::read_csv_file(&zone_dir.join("forecast.csv"))?;
                    let history = history_at(dataset, round)?;
                    let scenarios = generate_scenarios(
                        &history,
                        round.forecast_window(),
                        &config.scenarios,
                        0,
                    )?;
                    let label = read_strategy(&zone_dir).unwrap_or_else(|| "forecast".into());
                    let card = score_zone(
                        config,
                        round,
                        &label,
                        dataset,
                        &forecast,
                        &scenarios,
                        &dataset.load_series(),
                        cache,
                    )?;
                    write_scorecards_file(
                        &zone_dir.join("scorecard.csv"),
                        std::slice::from_ref(&card),
                    )?;
                    Ok(card)
                });
            ZoneOutcome {
                zone_id: id.clone(),
                result,
            }
        })
        .collect()
}

fn read_strategy(zone_dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(zone_dir.join("model.json")).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("strategy")?.as_str().map(str::to_string)
}

pub fn write_scorecards_file(path: &Path, cards: &[ScoreCard]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_scorecards(file, cards)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    pub strategy: String,
    pub round_id: u32,
    pub zone_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: String,
    /// One entry per simulated round; `None` when no zone could be scored.
    pub round_scores: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitionReport {
    pub round_ids: Vec<u32>,
    pub scorecards: Vec<ScoreCard>,
    pub rows: Vec<SummaryRow>,
    pub gaps: Vec<Gap>,
}

impl CompetitionReport {
    /// `strategy,R1..Rk,Mean,Rank`, scores rounded half-up to two decimals.
    pub fn write_summary<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let fmt = |v: Option<f64>| {
            v.map(|x| format!("{:.2}", round_half_up(x, 2)))
                .unwrap_or_default()
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["strategy".to_string()];
        header.extend(self.round_ids.iter().map(|r| format!("R{r}")));
        header.extend(["Mean".to_string(), "Rank".to_string()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.strategy.clone()];
            record.extend(row.round_scores.iter().map(|s| fmt(*s)));
            record.push(fmt(row.mean));
            record.push(row.rank.map(|r| r.to_string()).unwrap_or_default());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let summary = dir.join("summary.csv");
        let file = std::fs::File::create(&summary).map_err(|e| Error::io(&summary, e))?;
        self.write_summary(file)?;
        write_scorecards_file(&dir.join("scorecards.csv"), &self.scorecards)?;
        let gaps = dir.join("gaps.csv");
        let mut w = csv::Writer::from_path(&gaps)?;
        w.write_record(["strategy", "round", "zone", "reason"])?;
        for g in &self.gaps {
            w.write_record([
                g.strategy.clone(),
                g.round_id.to_string(),
                g.zone_id.clone(),
                g.reason.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&gaps, e))?;
        Ok(())
    }
}

/// Runs `rounds` under every plan, scores each zone against the benchmark
/// and summarizes per-round scores, their mean and the plans' ranking.
/// Forecast trees are written under `dir/<plan>/` when `dir` is given.
pub fn simulate_competition(
    config: &RunConfig,
    zones: &[(String, Result<ZoneDataset>)],
    actuals: &HashMap<String, HourlySeries>,
    plans: &[Plan],
    rounds: &[RoundSpec],
    dir: Option<&Path>,
    cache: &ModelCache,
) -> CompetitionReport {
    let mut scorecards = Vec::new();
    let mut gaps = Vec::new();
    let mut rows = Vec::new();
    for plan in plans {
        let label = plan.to_string();
        let mut round_scores = Vec::with_capacity(rounds.len());
        for round in rounds {
            let strategy = plan.strategy_for(round);
            let outcomes: Vec<ZoneOutcome<ScoreCard>> = zones
                .par_iter()
                .map(|(id, data)| {
                    let result = data
                        .as_ref()
                        .map_err(|e| Error::DataQuality(format!("zone did not load: {e}")))
                        .and_then(|dataset| {
                            let actual = actuals.get(id).ok_or_else(|| {
                                Error::Coverage(format!("no actuals for zone {id}"))
                            })?;
                            let zf = forecast_zone(config, round, strategy, dataset, cache)?;
                            let card = score_zone(
                                config,
                                round,
                                &label,
                                dataset,
                                &zf.forecast,
                                &zf.scenarios,
                                actual,
                                cache,
                            )?;
                            if let Some(dir) = dir {
                                let zone_dir = round_dir(&dir.join(&label), round).join(id);
                                zf.write(&zone_dir, config.precision)?;
                                write_scorecards_file(
                                    &zone_dir.join("scorecard.csv"),
                                    std::slice::from_ref(&card),
                                )?;
                            }
                            Ok(card)
                        });
                    ZoneOutcome {
                        zone_id: id.clone(),
                        result,
                    }
                })
                .collect();
            let mut zone_scores = Vec::new();
            for outcome in outcomes {
                match outcome.result {
                    Ok(card) => {
                        zone_scores.push(card.score);
                        scorecards.push(card);
                    }
                    Err(e) => {
                        log::warn!(
                            "{label} round {} zone {}: {e}",
                            round.round_id,
                            outcome.zone_id
                        );
                        gaps.push(Gap {
                            strategy: label.clone(),
                            round_id: round.round_id,
                            zone_id: outcome.zone_id,
                            reason: e.to_string(),
                        });
                    }
                }
            }
            round_scores.push(round_score(&zone_scores).ok());
        }
        let present: Vec<f64> = round_scores.iter().flatten().copied().collect();
        rows.push(SummaryRow {
            strategy: label,
            round_scores,
            mean: round_score(&present).ok(),
            rank: None,
        });
    }
    let mut order: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].mean.is_some())
        .collect();
    order.sort_by(|&a, &b| {
        rows[b]
            .mean
            .partial_cmp(&rows[a].mean)
            .expect("finite scores")
    });
    for (rank, i) in order.into_iter().enumerate() {
        rows[i].rank = Some(rank + 1);
    }
    CompetitionReport {
        round_ids: rounds.iter().map(|r| r.round_id).collect(),
        scorecards,
        rows,
        gaps,
    }
}

/// Observed load per loaded zone.
pub fn actuals_from(zones: &[(String, Result<ZoneDataset>)]) -> HashMap<String, HourlySeries> {
    zones
        .iter()
        .filter_map(|(id, d)| d.as_ref().ok().map(|d| (id.clone(), d.load_series())))
        .collect()
}
