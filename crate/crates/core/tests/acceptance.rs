//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use loadquant::data::{normalize_dst, samples_per_day, DstOptions, HourlySeries, ZoneDataset};
use loadquant::eval::{pinball, relative_score, round_score, total_pinball};
use loadquant::features::{DesignMatrix, FeatureCatalog, FeatureSpec, GridConfig, TrendMode};
use loadquant::model::{select_subset, train_hourly, SelectionConfig};
use loadquant::ols::least_squares;
use loadquant::orchestrator::{
    actuals_from, load_zones, simulate_competition, ModelCache, Plan, RunConfig, Strategy,
};
use loadquant::scenario::{
    generate_scenarios, quantile_type7, QuantileForecast, ShiftConfig, DECILES,
};
use loadquant::synth::{generate_synthetic, write_synthetic, SynthConfig};
use loadquant::time::{hourly_range, Timestamp};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const ZONES: [&str; 10] = [
    "CT",
    "ME",
    "NH",
    "RI",
    "VT",
    "WCMASS",
    "SEMASS",
    "NEMASSBOST",
    "MASS",
    "TOTAL",
];

/// Per zone and round: (model loss, benchmark loss, printed score).
#[rustfmt::skip]
const ZONE_RESULTS: [[(f64, f64, f64); 6]; 10] = [
    [(99.46, 114.88, 13.42), (86.59, 115.72, 25.17), (86.59, 115.72, 25.17), (100.48, 98.91, -1.59), (100.48, 98.8, -1.70), (53.69, 55.11, 2.58)],
    [(24.83, 36.95, 32.79), (22.91, 29.11, 21.30), (22.91, 29.11, 21.30), (26.49, 23.96, -10.58), (26.49, 23.88, -10.95), (16.0, 29.71, 46.15)],
    [(38.86, 41.91, 7.29), (34.32, 35.34, 2.88), (34.32, 35.34, 2.88), (27.54, 29.43, 6.42), (27.54, 29.64, 7.08), (17.75, 16.74, -6.01)],
    [(19.86, 23.32, 14.85), (17.03, 24.18, 29.56), (17.03, 24.18, 29.56), (21.31, 21.54, 1.08), (21.31, 21.53, 1.04), (10.7, 11.19, 4.39)],
    [(19.34, 22.44, 13.80), (14.9, 15.49, 3.81), (14.9, 15.49, 3.81), (16.19, 21.07, 23.17), (16.19, 20.92, 22.62), (11.84, 17.23, 31.27)],
    [(44.44, 50.58, 12.14), (46.34, 60.32, 23.18), (46.34, 60.32, 23.18), (54.92, 55.43, 0.92), (54.92, 55.25, 0.60), (30.86, 34.91, 11.59)],
    [(40.71, 44.11, 7.72), (40.95, 50.69, 19.22), (40.95, 50.69, 19.22), (46.32, 49.62, 6.66), (46.32, 49.51, 6.45), (28.61, 34.19, 16.32)],
    [(66.22, 77.85, 14.94), (62.95, 81.02, 22.30), (62.95, 81.02, 22.30), (72.18, 73.32, 1.56), (72.18, 73.16, 1.35), (38.37, 44.41, 13.60)],
    [(148.36, 170.2, 12.83), (149.88, 190.36, 21.26), (149.88, 190.36, 21.26), (170.68, 175.86, 2.94), (170.68, 175.86, 2.94), (86.75, 106.5, 18.55)],
    [(339.43, 402.68, 15.71), (313.02, 401.51, 22.04), (313.02, 401.51, 22.04), (344.05, 351.89, 2.23), (344.05, 351.7, 2.17), (180.98, 202.83, 10.77)],
];

fn check(ok: bool, message: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    check(
        start.elapsed() < limit,
        format!("took {:.1?}, limit {limit:?}", start.elapsed()),
    )
}

fn published_score_arithmetic() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for (z, zone) in ZONES.iter().enumerate() {
        for (r, &(tim, bench, printed)) in ZONE_RESULTS[z].iter().enumerate() {
            let score = relative_score(tim, bench).map_err(|e| e.to_string())?;
            let err = (score - printed).abs();
            worst = worst.max(err);
            if err > 0.01 {
                misses.push(format!("{zone} R{}: {score:.4} vs {printed}", r + 1));
            }
        }
    }
    within_time(start, Duration::from_secs(1))?;
    check(
        misses.is_empty(),
        format!(
            "{} of 60 printed scores differ by more than 0.01 (worst {worst:.4}) when recomputed from the \
             rounded losses: {}",
            misses.len(),
            misses.join("; ")
        ),
    )?;
    Ok(format!("60/60 within 0.01, worst {worst:.4}"))
}

/// Interval check behind the published zone results: every printed score is
/// reachable from losses that round to the printed ones, up to the printed
/// score's own rounding.
fn published_rounding_consistency() -> Outcome {
    let mut worst_excess: f64 = 0.0;
    for row in &ZONE_RESULTS {
        for &(tim, bench, printed) in row {
            let corners = [
                (-0.005, -0.005),
                (-0.005, 0.005),
                (0.005, -0.005),
                (0.005, 0.005),
            ];
            let scores: Vec<f64> = corners
                .iter()
                .map(|(dm, db)| relative_score(tim + dm, bench + db).unwrap())
                .collect();
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min) - 0.005;
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.005;
            worst_excess = worst_excess.max(lo - printed).max(printed - hi);
        }
    }
    check(
        worst_excess <= 1e-9,
        format!("a printed score lies {worst_excess:.4} outside its rounding interval"),
    )?;
    Ok("all 60 printed scores lie inside their input-rounding intervals".into())
}

fn published_round_means() -> Outcome {
    let start = Instant::now();
    let printed_scores =
        |r: usize| -> Vec<f64> { ZONE_RESULTS.iter().map(|row| row[r].2).collect() };
    let mut lines = Vec::new();
    for (r, expected) in [(0, 14.55), (3, 3.28), (4, 3.16), (5, 14.92)] {
        let mean = round_score(&printed_scores(r)).map_err(|e| e.to_string())?;
        check(
            (mean - expected).abs() <= 0.01,
            format!("R{}: {mean:.4} vs {expected}", r + 1),
        )?;
        lines.push(format!("R{} {mean:.3}", r + 1));
    }
    // The round summary prints 18.92 for rounds 2 and 3; the zone scores average to 19.07.
    for r in [1, 2] {
        let mean = round_score(&printed_scores(r)).map_err(|e| e.to_string())?;
        check(
            (mean - 19.07).abs() <= 0.01,
            format!("R{}: {mean:.4} vs 19.07", r + 1),
        )?;
        lines.push(format!("R{} {mean:.3} (table prints 18.92)", r + 1));
    }
    within_time(start, Duration::from_secs(1))?;
    Ok(lines.join(", "))
}

fn scenario_count_and_integral_deciles() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig {
        years: 13,
        zones: vec!["z".into()],
        ..Default::default()
    };
    let raw = &generate_synthetic(&synth).map_err(|e| e.to_string())?[0];
    let history = normalize_dst(raw, &DstOptions::default()).map_err(|e| e.to_string())?;
    let cutoff = Timestamp::ymdh(2016, 11, 30, 24);
    let history = history.between(history.first().unwrap(), cutoff);
    let window = (
        NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2017, 1, 31).unwrap(),
    );
    let shifts = ShiftConfig::default();
    check(
        shifts.history_years == synth.history_years(),
        "default history years differ from the synthetic span",
    )?;
    let set = generate_scenarios(&history, window, &shifts, 168).map_err(|e| e.to_string())?;
    check(set.len() == 91, format!("{} trajectories", set.len()))?;

    let values: Vec<f64> = (1..=91).map(f64::from).collect();
    let deciles: Vec<f64> = DECILES
        .iter()
        .map(|&p| quantile_type7(&values, p).unwrap())
        .collect();
    let expected: Vec<f64> = (1..=9).map(|k| f64::from(1 + 9 * k)).collect();
    check(deciles == expected, format!("deciles {deciles:?}"))?;
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("91 trajectories, deciles {deciles:?}"))
}

/// Linear interpolation between order statistics, 1-based, written out directly.
fn brute_force_quantile(values: &[f64], p: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len();
    let h = (n as f64 - 1.0) * p + 1.0;
    let j = h.floor() as usize;
    let gamma = h - j as f64;
    if j >= n {
        return x[n - 1];
    }
    (1.0 - gamma) * x[j - 1] + gamma * x[j]
}

fn quantile_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.random_range(1..=120);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-500.0..500.0)).collect();
        let p = if i % 4 == 0 {
            DECILES[i % 9]
        } else {
            rng.random::<f64>()
        };
        let ours = quantile_type7(&values, p).map_err(|e| e.to_string())?;
        let theirs = brute_force_quantile(&values, p);
        worst = worst.max((ours - theirs).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("1000 pairs, max deviation {worst:e}"))
}

fn pinball_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let y: f64 = rng.random_range(-1e3..1e3);
        let z: f64 = if rng.random::<f64>() < 0.1 {
            y
        } else {
            rng.random_range(-1e3..1e3)
        };
        let tau: f64 = rng.random_range(0.001..0.999);
        let loss = pinball(y, z, tau).map_err(|e| e.to_string())?;
        check(
            loss >= 0.0,
            format!("negative loss at y={y}, z={z}, tau={tau}"),
        )?;
        check(
            (loss == 0.0) == (y == z),
            format!("zero-iff-equal fails at y={y}, z={z}"),
        )?;
        for c in [0.25, 2.0, 8.0, 1024.0] {
            let scaled = pinball(c * y, c * z, tau).unwrap();
            check(
                scaled == c * loss,
                format!("homogeneity fails at c={c}, y={y}, z={z}, tau={tau}"),
            )?;
        }
    }
    check(
        pinball(100.0, 90.0, 0.9).unwrap() == 9.0,
        "upper branch example",
    )?;
    check(
        pinball(100.0, 110.0, 0.1).unwrap() == 9.0,
        "lower branch example",
    )?;

    let ts = vec![Timestamp::ymdh(2017, 1, 1, 1)];
    let mut row = [10.0; 9];
    row[8] = 20.0;
    let forecast = QuantileForecast {
        timestamps: ts.clone(),
        levels: DECILES,
        values: vec![row],
    };
    let actual = HourlySeries::new(ts.clone(), vec![10.0]).unwrap();
    let total = total_pinball(&actual, &forecast).unwrap().total;
    check(
        (total - 1.0 / 9.0).abs() < 1e-15,
        format!("nine-term example gives {total}"),
    )?;
    let doubled = QuantileForecast {
        values: vec![row.map(|v| 2.0 * v)],
        ..forecast
    };
    let actual2 = HourlySeries::new(ts, vec![20.0]).unwrap();
    check(
        total_pinball(&actual2, &doubled).unwrap().total == 2.0 * total,
        "doubling example",
    )?;
    Ok("10000 random triples, branch examples exact".into())
}

/// GIC of the best subset by exhaustive enumeration, via normal equations on
/// the Gram matrix of `[1 X]`.
fn exhaustive_best_gic(columns: &[Vec<f64>], y: &[f64], penalty: f64) -> (f64, Vec<usize>) {
    let n = y.len();
    let p = columns.len();
    let mut full = DMatrix::<f64>::from_element(n, p + 1, 1.0);
    for (j, c) in columns.iter().enumerate() {
        for i in 0..n {
            full[(i, j + 1)] = c[i];
        }
    }
    let yv = DVector::from_column_slice(y);
    let gram = full.transpose() * &full;
    let xty = full.transpose() * &yv;
    let yty = yv.dot(&yv);
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << p) {
        let idx: Vec<usize> = std::iter::once(0)
            .chain((0..p).filter(|j| mask & (1 << j) != 0).map(|j| j + 1))
            .collect();
        let k = idx.len();
        let g = DMatrix::from_fn(k, k, |a, b| gram[(idx[a], idx[b])]);
        let r = DVector::from_fn(k, |a, _| xty[idx[a]]);
        let Some(chol) = g.cholesky() else { continue };
        let beta = chol.solve(&r);
        let rss = (yty - beta.dot(&r)).max(0.0);
        let gic = n as f64 * (rss / n as f64).ln() + penalty * (k - 1) as f64;
        if gic < best.0 {
            best = (gic, idx[1..].iter().map(|j| j - 1).collect());
        }
    }
    best
}

fn selection_oracle() -> Outcome {
    let start = Instant::now();
    let n = 500;
    let mut recovered = 0;
    let mut violations = Vec::new();
    for instance in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + instance);
        let p = 10 + (instance % 3) as usize;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let noise = Normal::new(0.0, 0.01).unwrap();
        let base: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                (0..n)
                    .map(|i| base[j][i] + if j > 0 { 0.3 * base[j - 1][i] } else { 0.0 })
                    .collect()
            })
            .collect();
        let k = rng.random_range(2..=4);
        let mut truth = rand::seq::index::sample(&mut rng, p, k).into_vec();
        truth.sort_unstable();
        let coef: Vec<f64> = truth
            .iter()
            .map(|_| rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                1.0 + truth
                    .iter()
                    .zip(&coef)
                    .map(|(&j, b)| b * columns[j][i])
                    .sum::<f64>()
                    + noise.sample(&mut rng)
            })
            .collect();

        let catalog = FeatureCatalog {
            specs: std::iter::once(FeatureSpec::Intercept)
                .chain((1..=p).map(|c| FeatureSpec::Poly {
                    channel: c,
                    degree: 1,
                }))
                .collect(),
            grid_config: GridConfig::default(),
        };
        let mut all = vec![vec![1.0; n]];
        all.extend(columns.iter().cloned());
        let x = DesignMatrix::from_columns(catalog.ids(), all, n).map_err(|e| e.to_string())?;
        let model = select_subset(&catalog, &x, &y, &SelectionConfig::default())
            .map_err(|e| e.to_string())?;
        let mut chosen: Vec<usize> = model
            .selected
            .iter()
            .filter_map(|s| s.channel())
            .map(|c| c - 1)
            .collect();
        chosen.sort_unstable();
        if chosen == truth {
            recovered += 1;
        }

        let penalty = (n as f64).ln() + 2.0 * (p as f64).ln();
        let (oracle, _) = exhaustive_best_gic(&columns, &y, penalty);
        if model.fit_stats.criterion < oracle - 1e-6 {
            violations.push(format!(
                "instance {instance}: {} < {oracle}",
                model.fit_stats.criterion
            ));
        }
    }
    within_time(start, Duration::from_secs(60))?;
    check(
        violations.is_empty(),
        format!(
            "selection beat the exhaustive optimum: {}",
            violations.join("; ")
        ),
    )?;
    check(recovered >= 45, format!("recovered {recovered}/50"))?;
    Ok(format!(
        "recovered {recovered}/50, never below the exhaustive optimum"
    ))
}

fn ols_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_rss: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(30..300);
        let p = rng.random_range(1..10);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let y: Vec<f64> = (0..n).map(|_| 5.0 * normal.sample(&mut rng)).collect();
        let fit = least_squares(&refs, &y).map_err(|e| e.to_string())?;
        let resid: Vec<f64> = (0..n)
            .map(|i| {
                y[i] - fit.intercept
                    - (0..p)
                        .map(|j| fit.coefficients[j] * cols[j][i])
                        .sum::<f64>()
            })
            .collect();
        worst = worst.max(resid.iter().sum::<f64>().abs());
        for c in &cols {
            worst = worst.max(c.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>().abs());
        }

        let beta: Vec<f64> = (0..p).map(|_| normal.sample(&mut rng)).collect();
        let exact: Vec<f64> = (0..n)
            .map(|i| 3.0 + (0..p).map(|j| beta[j] * cols[j][i]).sum::<f64>())
            .collect();
        worst_rss = worst_rss.max(least_squares(&refs, &exact).unwrap().rss);
    }
    check(worst <= 1e-8, format!("max |X'r| = {worst:e}"))?;
    check(worst_rss < 1e-9, format!("noiseless rss {worst_rss:e}"))?;
    Ok(format!("max |X'r| {worst:e}, noiseless rss {worst_rss:e}"))
}

fn dst_suite() -> Outcome {
    let clean_ts = hourly_range(
        NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2014, 12, 31).unwrap(),
    );
    let value = |i: usize| 100.0 + (i % 97) as f64 * 0.5;
    let spring = NaiveDate::from_ymd_opt(2014, 3, 9).unwrap();
    let fall = NaiveDate::from_ymd_opt(2014, 11, 2).unwrap();
    let (mut ts, mut load, mut temp) = (Vec::new(), Vec::new(), Vec::new());
    let (dup_a, dup_b) = (220.0, 180.0);
    for (i, t) in clean_ts.iter().enumerate() {
        if t.date() == spring && t.hour() == 2 {
            continue;
        }
        if t.date() == fall && t.hour() == 2 {
            for v in [dup_a, dup_b] {
                ts.push(*t);
                load.push(v);
                temp.push(40.0);
            }
            continue;
        }
        ts.push(*t);
        load.push(value(i));
        temp.push(value(i) / 4.0);
    }
    let n = ts.len();
    let raw =
        ZoneDataset::new("dst", ts, load, vec![temp], vec![0.0; n]).map_err(|e| e.to_string())?;
    check(raw.len() == 8760, format!("raw rows {}", raw.len()))?;
    let norm = normalize_dst(&raw, &DstOptions::default()).map_err(|e| e.to_string())?;

    check(
        norm.len() == 8760,
        format!("{} rows after normalization", norm.len()),
    )?;
    check(
        norm.timestamps() == clean_ts.as_slice(),
        "normalized grid differs from the full hourly grid",
    )?;
    let counts = samples_per_day(&norm);
    check(
        counts.len() == 365 && counts.values().all(|&c| c == 24),
        "a day without 24 samples",
    )?;

    let at = |d: NaiveDate, h: u32| norm.position(Timestamp::new(d, h).unwrap()).unwrap();
    let (he1, he2, he3) = (at(spring, 1), at(spring, 2), at(spring, 3));
    check(
        norm.load()[he2] == (norm.load()[he1] + norm.load()[he3]) / 2.0,
        "spring-forward load is not the neighbour mean",
    )?;
    let t = &norm.temperatures()[0];
    check(
        t[he2] == (t[he1] + t[he3]) / 2.0,
        "spring-forward temperature is not the neighbour mean",
    )?;
    check(
        norm.load()[at(fall, 2)] == (dup_a + dup_b) / 2.0,
        "fall-back load is not half the sum",
    )?;

    let again = normalize_dst(&norm, &DstOptions::default()).map_err(|e| e.to_string())?;
    check(again == norm, "normalizing twice changed the data")?;
    let rebuilt = ZoneDataset::new(
        "dst",
        norm.timestamps().to_vec(),
        norm.load().to_vec(),
        norm.temperatures().to_vec(),
        norm.holiday().to_vec(),
    )
    .unwrap();
    let rerun = normalize_dst(&rebuilt, &DstOptions::default()).map_err(|e| e.to_string())?;
    check(
        rerun.load() == norm.load() && rerun.timestamps() == norm.timestamps(),
        "full days were altered",
    )?;
    Ok("gap filled, duplicate halved, idempotent, 365 days × 24".into())
}

fn synthetic_run_config(dir: &Path, synth: &SynthConfig) -> Result<RunConfig, String> {
    write_synthetic(synth, dir).map_err(|e| e.to_string())?;
    let zones = synth
        .zones
        .iter()
        .map(|z| format!("{{ path = \"{z}.csv\" }}"))
        .collect::<Vec<_>>()
        .join(", ");
    let years = synth
        .history_years()
        .iter()
        .map(i32::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    let text = format!("zones = [{zones}]\n[scenarios]\nhistory_years = [{years}]\n");
    RunConfig::from_toml_str(&text, dir).map_err(|e| e.to_string())
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synth = SynthConfig {
        seed: 2017,
        years: 13,
        zones: vec!["north".into(), "south".into()],
        ..Default::default()
    };
    let config = synthetic_run_config(tmp.path(), &synth)?;
    let round = config.round(1).map_err(|e| e.to_string())?.clone();
    let plans: Vec<Plan> = Strategy::ALL.into_iter().map(Plan::Fixed).collect();

    let mut trees = Vec::new();
    let mut reports = Vec::new();
    for run in 0..2 {
        let zones = load_zones(&config, None);
        let out = tmp.path().join(format!("run{run}"));
        let report = simulate_competition(
            &config,
            &zones,
            &actuals_from(&zones),
            &plans,
            std::slice::from_ref(&round),
            Some(&out),
            &ModelCache::default(),
        );
        report.write_files(&out).map_err(|e| e.to_string())?;
        check(report.gaps.is_empty(), format!("gaps: {:?}", report.gaps))?;
        trees.push(read_tree(&out));
        reports.push(report);
    }
    check(
        trees[0] == trees[1],
        "two identical runs wrote different files",
    )?;
    check(
        reports[0] == reports[1],
        "two identical runs produced different reports",
    )?;

    let mut forecasts = 0;
    for (path, _) in trees[0].iter().filter(|(p, _)| p.ends_with("forecast.csv")) {
        let q = QuantileForecast::read_csv_file(&tmp.path().join("run0").join(path))
            .map_err(|e| e.to_string())?;
        check(
            q.len() == 31 * 24,
            format!("{} has {} rows", path.display(), q.len()),
        )?;
        check(
            q.is_monotone(),
            format!("{} has crossing deciles", path.display()),
        )?;
        forecasts += 1;
    }
    check(
        forecasts == 8,
        format!("{forecasts} forecast files, expected 8"),
    )?;

    let report = &reports[0];
    let auto = report.rows.iter().find(|r| r.strategy == "auto").unwrap();
    let auto_score = auto.round_scores[0].ok_or("auto has no round score")?;
    check(
        auto_score > 0.0,
        format!("auto round score {auto_score:.2}"),
    )?;
    for card in report.scorecards.iter().filter(|c| c.strategy == "auto") {
        check(
            card.score > 0.0,
            format!("auto zone {} score {:.2}", card.zone_id, card.score),
        )?;
    }
    within_time(start, Duration::from_secs(600))?;
    let scores: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{} {:.2}",
                r.strategy,
                r.round_scores[0].unwrap_or(f64::NAN)
            )
        })
        .collect();
    Ok(format!(
        "deterministic, monotone, scores: {} ({:.0?})",
        scores.join(", "),
        start.elapsed()
    ))
}

fn trend_auto_suppression() -> Outcome {
    let window = (
        Timestamp::ymdh(2014, 1, 1, 1),
        Timestamp::ymdh(2016, 11, 30, 24),
    );
    let mut clean_seeds = 0;
    let mut included = Vec::new();
    for seed in 0..20 {
        let synth = SynthConfig {
            seed,
            years: 4,
            zones: vec!["z".into()],
            trend_per_year: 0.0,
            ..Default::default()
        };
        let raw = &generate_synthetic(&synth).map_err(|e| e.to_string())?[0];
        let data = normalize_dst(raw, &DstOptions::default()).map_err(|e| e.to_string())?;
        let set = train_hourly(
            &data,
            window,
            &GridConfig::default(),
            TrendMode::Auto,
            &SelectionConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let hours = set
            .models
            .iter()
            .filter(|m| m.contains(&FeatureSpec::Trend))
            .count();
        if hours == 0 {
            clean_seeds += 1;
        }
        included.push(hours);
    }
    check(
        clean_seeds >= 19,
        format!(
            "trend excluded everywhere for {clean_seeds}/20 seeds; hours with trend {included:?}"
        ),
    )?;
    Ok(format!(
        "trend excluded from all 24 hours for {clean_seeds}/20 seeds"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 zone score arithmetic", published_score_arithmetic),
        ("2 round score means", published_round_means),
        (
            "3 scenario count and deciles",
            scenario_count_and_integral_deciles,
        ),
        ("4 quantile oracle", quantile_oracle),
        ("5 pinball properties", pinball_properties),
        ("6 selection oracle", selection_oracle),
        ("7 least squares checks", ols_checks),
        ("8 DST normalization", dst_suite),
        ("9 end-to-end desk run", end_to_end),
        ("10 trend auto-suppression", trend_auto_suppression),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {name}: {reason}");
            }
        }
    }
    match published_rounding_consistency() {
        Ok(detail) => println!("note: {detail}"),
        Err(reason) => println!("note: {reason}"),
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
