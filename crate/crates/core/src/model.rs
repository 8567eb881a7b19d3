//! Sparse per-hour linear models chosen by greedy forward selection.
//!
//! Selection starts from the intercept-only model and repeatedly adds the
//! candidate that most reduces the residual sum of squares, scored by
//!
//! ```text
//! GIC = n·ln(rss/n) + λ·k
//! ```
//!
//! with `k` the number of selected features. It stops once the best step
//! no longer lowers GIC by more than `min_improvement`. Candidates are kept
//! orthogonalized against the selected columns so each step costs one pass
//! over the remaining candidates. Exact ties go to the earlier catalog entry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HourlySeries, ZoneDataset};
use crate::error::{Error, Result};
use crate::features::{
    build_catalog, materialize, DesignMatrix, Exogenous, FeatureCatalog, FeatureSpec, GridConfig,
    TrendMode,
};
use crate::ols::{least_squares, RANK_TOLERANCE};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Penalty per selected feature. `None` uses `ln n + 2·ebic_gamma·ln p`
    /// for `n` rows and `p` candidates.
    pub penalty: Option<f64>,
    pub ebic_gamma: f64,
    pub max_features: usize,
    /// A step is accepted only if it lowers GIC by more than this.
    pub min_improvement: f64,
    /// Shortest training window `train_hourly` accepts.
    pub min_window_days: u32,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            penalty: None,
            ebic_gamma: 1.0,
            max_features: 40,
            min_improvement: 0.0,
            min_window_days: 365,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!(
                    "selection penalty must be > 0, got {p}"
                )));
            }
        }
        if !(self.ebic_gamma >= 0.0 && self.ebic_gamma.is_finite()) {
            return Err(Error::Config("ebic_gamma must be >= 0".into()));
        }
        if self.max_features < 1 {
            return Err(Error::Config("max_features must be >= 1".into()));
        }
        if !(self.min_improvement >= 0.0 && self.min_improvement.is_finite()) {
            return Err(Error::Config("min_improvement must be >= 0".into()));
        }
        Ok(())
    }

    pub fn penalty_for(&self, n: usize, candidates: usize) -> f64 {
        self.penalty.unwrap_or_else(|| {
            (n as f64).ln() + 2.0 * self.ebic_gamma * (candidates.max(1) as f64).ln()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub n: usize,
    pub rss: f64,
    pub criterion: f64,
    /// GIC after each accepted step; entry 0 is the starting model.
    pub criterion_path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub selected: Vec<FeatureSpec>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Hour ending 1..=24, or 0 for a model not tied to an hour.
    pub hour: u32,
    pub fit_stats: FitStats,
}

impl LinearModel {
    pub fn intercept_only(value: f64, hour: u32) -> Self {
        Self {
            selected: Vec::new(),
            coefficients: Vec::new(),
            intercept: value,
            hour,
            fit_stats: FitStats {
                n: 0,
                rss: 0.0,
                criterion: 0.0,
                criterion_path: Vec::new(),
            },
        }
    }

    pub fn contains(&self, spec: &FeatureSpec) -> bool {
        self.selected.contains(spec)
    }

    pub fn backfill_hours(&self) -> u32 {
        self.selected
            .iter()
            .map(FeatureSpec::backfill_hours)
            .max()
            .unwrap_or(0)
    }

    /// Evaluates the model on already materialized columns of `selected`.
    fn evaluate(&self, x: &DesignMatrix, row: usize) -> f64 {
        self.coefficients
            .iter()
            .zip(&x.columns)
            .fold(self.intercept, |acc, (b, col)| acc + b * col[row])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyModelSet {
    /// Index `h - 1` holds the model for hour ending `h`.
    pub models: Vec<LinearModel>,
    pub trained_window: (Timestamp, Timestamp),
    pub trend_mode: TrendMode,
}

impl HourlyModelSet {
    pub fn model(&self, hour: u32) -> &LinearModel {
        &self.models[hour as usize - 1]
    }

    /// Longest history any selected feature reads before its row.
    pub fn backfill_hours(&self) -> u32 {
        self.models
            .iter()
            .map(LinearModel::backfill_hours)
            .max()
            .unwrap_or(0)
    }

    pub fn uses_trend(&self) -> bool {
        self.models.iter().any(|m| m.contains(&FeatureSpec::Trend))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: HourlyModelSet = serde_json::from_str(s)?;
        if set.models.len() != 24
            || set
                .models
                .iter()
                .enumerate()
                .any(|(i, m)| m.hour != i as u32 + 1)
        {
            return Err(Error::Config(
                "model set must hold hours 1..=24 in order".into(),
            ));
        }
        Ok(set)
    }
}

fn gic(rss: f64, floor: f64, n: usize, penalty: f64, k: usize) -> f64 {
    let n_f = n as f64;
    n_f * (rss.max(floor) / n_f).ln() + penalty * k as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Greedy forward selection over the catalog columns of `x_full`.
pub fn select_subset(
    catalog: &FeatureCatalog,
    x_full: &DesignMatrix,
    y: &[f64],
    config: &SelectionConfig,
) -> Result<LinearModel> {
    select_subset_forced(catalog, x_full, y, config, &[])
}

/// As [`select_subset`], with `forced` features entered before the search.
pub fn select_subset_forced(
    catalog: &FeatureCatalog,
    x_full: &DesignMatrix,
    y: &[f64],
    config: &SelectionConfig,
    forced: &[FeatureSpec],
) -> Result<LinearModel> {
    config.validate()?;
    let ids = catalog.ids();
    if x_full.column_ids != ids {
        return Err(Error::Alignment(
            "design matrix columns do not match the catalog".into(),
        ));
    }
    let n = y.len();
    if x_full.rows() != n && x_full.cols() > 0 {
        return Err(Error::Alignment(format!(
            "design matrix has {} rows, response has {n}",
            x_full.rows()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            rows: n,
            columns: 1,
        });
    }
    let floor = (dot(y, y) * 1e-20).max(f64::MIN_POSITIVE);
    let n_f = n as f64;

    // Residual of the intercept-only model.
    let mean = y.iter().sum::<f64>() / n_f;
    let mut resid: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let mut rss = dot(&resid, &resid);

    let unit = 1.0 / n_f.sqrt();
    let mut basis: Vec<Vec<f64>> = vec![vec![unit; n]];

    struct Candidate {
        index: usize,
        z: Vec<f64>,
        raw_norm2: f64,
    }
    let mut candidates: Vec<Candidate> = catalog
        .specs
        .iter()
        .enumerate()
        .filter(|(_, s)| **s != FeatureSpec::Intercept)
        .map(|(index, _)| {
            let col = &x_full.columns[index];
            let m = col.iter().sum::<f64>() / n_f;
            Candidate {
                index,
                z: col.iter().map(|v| v - m).collect(),
                raw_norm2: dot(col, col),
            }
        })
        .collect();
    let penalty = config.penalty_for(n, candidates.len());
    let tol2 = RANK_TOLERANCE * RANK_TOLERANCE;
    let usable = |c: &Candidate| {
        let z2 = dot(&c.z, &c.z);
        z2 > tol2 * c.raw_norm2 && z2 > 0.0
    };

    let mut selected: Vec<usize> = Vec::new();
    let accept = |pos: usize,
                  candidates: &mut Vec<Candidate>,
                  basis: &mut Vec<Vec<f64>>,
                  resid: &mut Vec<f64>,
                  selected: &mut Vec<usize>| {
        let cand = candidates.remove(pos);
        let mut q = cand.z;
        // Second Gram-Schmidt pass keeps the basis orthogonal.
        for b in basis.iter() {
            let c = dot(b, &q);
            axpy(-c, b, &mut q);
        }
        let qn = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|v| *v /= qn);
        let c = dot(&q, resid);
        axpy(-c, &q, resid);
        for other in candidates.iter_mut() {
            let c = dot(&q, &other.z);
            axpy(-c, &q, &mut other.z);
        }
        basis.push(q);
        selected.push(cand.index);
    };

    for spec in forced {
        if selected.len() >= config.max_features {
            break;
        }
        let Some(pos) = candidates
            .iter()
            .position(|c| catalog.specs[c.index] == *spec)
        else {
            continue;
        };
        if usable(&candidates[pos]) {
            accept(pos, &mut candidates, &mut basis, &mut resid, &mut selected);
            rss = dot(&resid, &resid);
        }
    }

    let mut current = gic(rss, floor, n, penalty, selected.len());
    let mut path = vec![current];
    while selected.len() < config.max_features && selected.len() + 2 <= n {
        let mut best: Option<(usize, f64)> = None;
        for (pos, c) in candidates.iter().enumerate() {
            if !usable(c) {
                continue;
            }
            let zr = dot(&c.z, &resid);
            let gain = zr * zr / dot(&c.z, &c.z);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((pos, gain));
            }
        }
        let Some((pos, gain)) = best else { break };
        let proposed = gic((rss - gain).max(0.0), floor, n, penalty, selected.len() + 1);
        let gain = current - proposed;
        if gain.is_nan() || gain <= config.min_improvement {
            break;
        }
        accept(pos, &mut candidates, &mut basis, &mut resid, &mut selected);
        rss = dot(&resid, &resid);
        current = gic(rss, floor, n, penalty, selected.len());
        path.push(current);
    }

    let columns: Vec<&[f64]> = selected
        .iter()
        .map(|&i| x_full.columns[i].as_slice())
        .collect();
    let fit = least_squares(&columns, y)?;
    let mut specs = Vec::with_capacity(selected.len());
    let mut coefficients = Vec::with_capacity(selected.len());
    for (slot, &i) in selected.iter().enumerate() {
        if !fit.dropped.contains(&slot) {
            specs.push(catalog.specs[i]);
            coefficients.push(fit.coefficients[slot]);
        }
    }
    let criterion = gic(fit.rss, floor, n, penalty, specs.len());
    Ok(LinearModel {
        selected: specs,
        coefficients,
        intercept: fit.intercept,
        hour: 0,
        fit_stats: FitStats {
            n,
            rss: fit.rss,
            criterion,
            criterion_path: path,
        },
    })
}

/// Trains one model per hour of day on the rows of `window`.
pub fn train_hourly(
    dataset: &ZoneDataset,
    window: (Timestamp, Timestamp),
    grid: &GridConfig,
    trend_mode: TrendMode,
    config: &SelectionConfig,
) -> Result<HourlyModelSet> {
    config.validate()?;
    let (start, end) = window;
    let (Some(first), Some(last)) = (dataset.first(), dataset.last()) else {
        return Err(Error::Training(format!(
            "zone {} has no data",
            dataset.zone_id()
        )));
    };
    if start < first || end > last || start > end {
        return Err(Error::Coverage(format!(
            "training window {start}..{end} is outside the data of zone {} ({first}..{last})",
            dataset.zone_id()
        )));
    }
    let span_hours = end.hour_index() - start.hour_index() + 1;
    if span_hours < config.min_window_days as i64 * 24 {
        return Err(Error::Training(format!(
            "training window {start}..{end} is shorter than {} days",
            config.min_window_days
        )));
    }
    let exog = Exogenous::from_dataset(dataset)?;
    let catalog = build_catalog(dataset, grid, trend_mode)?;
    let forced: Vec<FeatureSpec> = if trend_mode == TrendMode::On {
        vec![FeatureSpec::Trend]
    } else {
        Vec::new()
    };
    let lo = dataset.timestamps().partition_point(|t| *t < start);
    let hi = dataset.timestamps().partition_point(|t| *t <= end);

    let models = (1..=24u32)
        .into_par_iter()
        .map(|hour| {
            let rows: Vec<usize> = (lo..hi)
                .filter(|&i| dataset.timestamps()[i].hour() == hour)
                .collect();
            let ts: Vec<Timestamp> = rows.iter().map(|&i| dataset.timestamps()[i]).collect();
            let y: Vec<f64> = rows.iter().map(|&i| dataset.load()[i]).collect();
            let x = materialize(&catalog.specs, &ts, &exog)?;
            let mut model = select_subset_forced(&catalog, &x, &y, config, &forced)?;
            model.hour = hour;
            Ok(model)
        })
        .collect::<Result<Vec<_>>>()?;
    log::debug!(
        "trained {} ({:?}): {} features on average",
        dataset.zone_id(),
        trend_mode,
        models.iter().map(|m| m.selected.len()).sum::<usize>() as f64 / 24.0
    );
    Ok(HourlyModelSet {
        models,
        trained_window: window,
        trend_mode,
    })
}

/// Point predictions: each timestamp goes to the model for its hour.
pub fn predict(
    modelset: &HourlyModelSet,
    timestamps: &[Timestamp],
    exog: &Exogenous,
) -> Result<HourlySeries> {
    let mut values = vec![0.0; timestamps.len()];
    for hour in 1..=24u32 {
        let rows: Vec<usize> = (0..timestamps.len())
            .filter(|&i| timestamps[i].hour() == hour)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let model = modelset.model(hour);
        let ts: Vec<Timestamp> = rows.iter().map(|&i| timestamps[i]).collect();
        let x = materialize(&model.selected, &ts, exog)?;
        for (r, &i) in rows.iter().enumerate() {
            values[i] = model.evaluate(&x, r);
        }
    }
    HourlySeries::new(timestamps.to_vec(), values)
}
