//! Hourly zone datasets: CSV ingestion, DST normalization and aggregate zones.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{parse_clock, DstCalendar, Timestamp};

/// A single hourly signal with its own timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    pub timestamps: Vec<Timestamp>,
    pub values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Alignment(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The sub-series whose timestamps fall inside `[start, end]`.
    pub fn between(&self, start: Timestamp, end: Timestamp) -> HourlySeries {
        let lo = self.timestamps.partition_point(|t| *t < start);
        let hi = self.timestamps.partition_point(|t| *t <= end);
        HourlySeries {
            timestamps: self.timestamps[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

/// One zone's load, temperature channels and holiday flags on a shared grid.
///
/// Before [`normalize_dst`] the grid may miss one hour on a spring-forward
/// day and repeat one hour on a fall-back day; afterwards every day has
/// exactly 24 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneDataset {
    zone_id: String,
    timestamps: Vec<Timestamp>,
    load: Vec<f64>,
    temperatures: Vec<Vec<f64>>,
    holiday: Vec<f64>,
    dst_normalized: bool,
}

impl ZoneDataset {
    pub fn new(
        zone_id: impl Into<String>,
        timestamps: Vec<Timestamp>,
        load: Vec<f64>,
        temperatures: Vec<Vec<f64>>,
        holiday: Vec<f64>,
    ) -> Result<Self> {
        let n = timestamps.len();
        if temperatures.is_empty() {
            return Err(Error::Schema(
                "a zone needs at least one temperature channel".into(),
            ));
        }
        if load.len() != n || holiday.len() != n || temperatures.iter().any(|c| c.len() != n) {
            return Err(Error::Alignment(
                "load, temperature and holiday series must share the timestamp grid".into(),
            ));
        }
        if timestamps.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::DataQuality("timestamps are not sorted".into()));
        }
        if let Some(i) = holiday.iter().position(|&h| h != 0.0 && h != 1.0) {
            return Err(Error::DataQuality(format!(
                "holiday flag at {} is {}, expected 0 or 1",
                timestamps[i], holiday[i]
            )));
        }
        let finite = load
            .iter()
            .chain(temperatures.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::DataQuality(
                "non-finite load or temperature value".into(),
            ));
        }
        Ok(Self {
            zone_id: zone_id.into(),
            timestamps,
            load,
            temperatures,
            holiday,
            dst_normalized: false,
        })
    }

    pub fn zone_id(&self) -> &str {
        &self.zone_id
    }

    pub fn with_zone_id(mut self, zone_id: impl Into<String>) -> Self {
        self.zone_id = zone_id.into();
        self
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn temperatures(&self) -> &[Vec<f64>] {
        &self.temperatures
    }

    pub fn holiday(&self) -> &[f64] {
        &self.holiday
    }

    pub fn channel_count(&self) -> usize {
        self.temperatures.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn is_dst_normalized(&self) -> bool {
        self.dst_normalized
    }

    pub fn load_series(&self) -> HourlySeries {
        HourlySeries {
            timestamps: self.timestamps.clone(),
            values: self.load.clone(),
        }
    }

    pub fn holiday_series(&self) -> HourlySeries {
        HourlySeries {
            timestamps: self.timestamps.clone(),
            values: self.holiday.clone(),
        }
    }

    pub fn temperature_series(&self, channel: usize) -> Option<HourlySeries> {
        self.temperatures.get(channel).map(|values| HourlySeries {
            timestamps: self.timestamps.clone(),
            values: values.clone(),
        })
    }

    pub fn first(&self) -> Option<Timestamp> {
        self.timestamps.first().copied()
    }

    pub fn last(&self) -> Option<Timestamp> {
        self.timestamps.last().copied()
    }

    /// Rows with timestamps inside `[start, end]`.
    pub fn between(&self, start: Timestamp, end: Timestamp) -> ZoneDataset {
        let lo = self.timestamps.partition_point(|t| *t < start);
        let hi = self.timestamps.partition_point(|t| *t <= end);
        ZoneDataset {
            zone_id: self.zone_id.clone(),
            timestamps: self.timestamps[lo..hi].to_vec(),
            load: self.load[lo..hi].to_vec(),
            temperatures: self
                .temperatures
                .iter()
                .map(|c| c[lo..hi].to_vec())
                .collect(),
            holiday: self.holiday[lo..hi].to_vec(),
            dst_normalized: self.dst_normalized,
        }
    }

    /// Index of `t` on a normalized grid.
    pub fn position(&self, t: Timestamp) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }

    /// Writes the dataset dump: `timestamp,load,temp_1..temp_N,holiday`.
    ///
    /// Values use Rust's shortest round-trip decimal rendering, so ingesting
    /// the dump with the default mapping reproduces every value bit-exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string(), "load".to_string()];
        header.extend((1..=self.channel_count()).map(|i| format!("temp_{i}")));
        header.push("holiday".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut record = vec![self.timestamps[i].to_string(), self.load[i].to_string()];
            record.extend(self.temperatures.iter().map(|c| c[i].to_string()));
            record.push(format!("{}", self.holiday[i] as u8));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimestampColumns {
    /// One column holding `YYYY-MM-DD HH:MM`.
    Iso { iso: String },
    /// A date column plus an integer hour column.
    DateHour { date: String, hour: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourConvention {
    /// Hours 1..=24; for ISO stamps hour 0 means hour 24 of the previous day.
    #[default]
    Ending,
    /// Hours 0..=23, shifted by one on ingestion.
    Beginning,
}

/// How the repeated hour of a fall-back day appears in the raw file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FallBackConvention {
    /// Two rows share the repeated hour.
    #[default]
    DuplicateRows,
    /// A single row holds the summed load of both passes through `hour`;
    /// applies to fall-back days up to and including `last_year`.
    SummedRow { hour: u32, last_year: i32 },
}

/// Maps CSV columns onto the dataset fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub timestamp: TimestampColumns,
    pub hour_convention: HourConvention,
    pub load: String,
    /// Temperature columns in channel order; empty selects every `temp_*` column.
    pub temperatures: Vec<String>,
    pub holiday: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            timestamp: TimestampColumns::Iso {
                iso: "timestamp".into(),
            },
            hour_convention: HourConvention::Ending,
            load: "load".into(),
            temperatures: Vec::new(),
            holiday: "holiday".into(),
        }
    }
}

impl ColumnMapping {
    fn to_timestamp(&self, date: NaiveDate, hour: u32) -> Result<Timestamp> {
        match (self.hour_convention, &self.timestamp) {
            (HourConvention::Beginning, _) => Timestamp::from_hour_beginning(date, hour),
            (HourConvention::Ending, TimestampColumns::Iso { .. }) if hour == 0 => {
                Timestamp::new(date - Duration::days(1), 24)
            }
            (HourConvention::Ending, _) => Timestamp::new(date, hour),
        }
    }
}

/// Reads a zone CSV onto its raw grid. The zone id is the file stem.
///
/// Rows are sorted by timestamp with a stable sort so that the two rows of a
/// fall-back hour keep their file order. Errors report the 1-based file line.
pub fn ingest_csv(path: &Path, schema: &ColumnMapping) -> Result<ZoneDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let zone_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ingest_reader(file, path, schema).map(|d| d.with_zone_id(zone_id))
}

pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    path: &Path,
    schema: &ColumnMapping,
) -> Result<ZoneDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!("column {name:?} not found in {}", path.display()))
        })
    };
    let ts_cols = match &schema.timestamp {
        TimestampColumns::Iso { iso } => (column(iso)?, None),
        TimestampColumns::DateHour { date, hour } => (column(date)?, Some(column(hour)?)),
    };
    let load_col = column(&schema.load)?;
    let holiday_col = column(&schema.holiday)?;
    let temp_cols: Vec<usize> = if schema.temperatures.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("temp_"))
            .map(|(i, _)| i)
            .collect()
    } else {
        schema
            .temperatures
            .iter()
            .map(|t| column(t))
            .collect::<Result<_>>()?
    };
    if temp_cols.is_empty() {
        return Err(Error::Schema(format!(
            "no temperature columns found in {}",
            path.display()
        )));
    }

    let mut rows: Vec<(Timestamp, f64, Vec<f64>, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let err = |message: String| Error::Ingest {
            path: path.to_path_buf(),
            row: line,
            message,
        };
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let timestamp = match ts_cols {
            (c, None) => parse_clock(field(c)).and_then(|(d, h)| schema.to_timestamp(d, h)),
            (dc, Some(hc)) => NaiveDate::parse_from_str(field(dc), "%Y-%m-%d")
                .map_err(|_| Error::Domain(format!("unparseable date {:?}", field(dc))))
                .and_then(|d| {
                    let h: u32 = field(hc)
                        .parse()
                        .map_err(|_| Error::Domain(format!("unparseable hour {:?}", field(hc))))?;
                    schema.to_timestamp(d, h)
                }),
        }
        .map_err(|e| err(format!("bad timestamp: {e}")))?;
        let number = |c: usize, what: &str| -> Result<f64> {
            let s = field(c);
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(format!("non-numeric {what} value {s:?}"))),
            }
        };
        let load = number(load_col, "load")?;
        let temps = temp_cols
            .iter()
            .map(|&c| number(c, "temperature"))
            .collect::<Result<Vec<_>>>()?;
        let holiday = number(holiday_col, "holiday")?;
        if holiday != 0.0 && holiday != 1.0 {
            return Err(err(format!("holiday flag must be 0 or 1, got {holiday}")));
        }
        rows.push((timestamp, load, temps, holiday));
    }
    rows.sort_by_key(|r| r.0);

    let channels = temp_cols.len();
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut load = Vec::with_capacity(rows.len());
    let mut temperatures = vec![Vec::with_capacity(rows.len()); channels];
    let mut holiday = Vec::with_capacity(rows.len());
    for (t, l, temps, h) in rows {
        timestamps.push(t);
        load.push(l);
        for (c, v) in temps.into_iter().enumerate() {
            temperatures[c].push(v);
        }
        holiday.push(h);
    }
    ZoneDataset::new(String::new(), timestamps, load, temperatures, holiday)
}

/// Options for [`normalize_dst`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DstOptions {
    pub calendar: DstCalendar,
    pub fall_back: FallBackConvention,
}

/// Forces every calendar day to exactly 24 samples.
///
/// A spring-forward day missing one hour gets it back as the mean of the
/// neighbouring hours; a fall-back day with one repeated hour keeps a single
/// sample equal to half the summed value. Complete days pass through. Any
/// other gap is a data-quality error; more than one anomaly in a day is a
/// normalization error.
pub fn normalize_dst(raw: &ZoneDataset, options: &DstOptions) -> Result<ZoneDataset> {
    if raw.dst_normalized {
        return Ok(raw.clone());
    }
    let channels = raw.channel_count();
    let mut out = ZoneDataset {
        zone_id: raw.zone_id.clone(),
        timestamps: Vec::with_capacity(raw.len()),
        load: Vec::with_capacity(raw.len()),
        temperatures: vec![Vec::with_capacity(raw.len()); channels],
        holiday: Vec::with_capacity(raw.len()),
        dst_normalized: true,
    };

    let mut start = 0;
    let mut previous_date: Option<NaiveDate> = None;
    while start < raw.len() {
        let date = raw.timestamps[start].date();
        let end = start + raw.timestamps[start..].partition_point(|t| t.date() == date);
        if let Some(prev) = previous_date {
            if date != prev + Duration::days(1) {
                return Err(Error::DataQuality(format!(
                    "missing day(s) between {prev} and {date}"
                )));
            }
        }
        normalize_day(raw, start..end, date, options, &mut out)?;
        previous_date = Some(date);
        start = end;
    }
    Ok(out)
}

fn normalize_day(
    raw: &ZoneDataset,
    rows: std::ops::Range<usize>,
    date: NaiveDate,
    options: &DstOptions,
    out: &mut ZoneDataset,
) -> Result<()> {
    let mut by_hour: Vec<Vec<usize>> = vec![Vec::new(); 25];
    for i in rows {
        by_hour[raw.timestamps[i].hour() as usize].push(i);
    }
    let missing: Vec<u32> = (1..=24)
        .filter(|&h| by_hour[h as usize].is_empty())
        .collect();
    let repeats: usize = by_hour.iter().map(|r| r.len().saturating_sub(1)).sum();
    let anomalies = missing.len() + repeats;
    let norm_err = |message: String| Error::Normalization { date, message };

    if anomalies > 1 {
        return Err(norm_err(format!(
            "{} missing and {} repeated hours; at most one DST adjustment per day",
            missing.len(),
            repeats
        )));
    }
    if let Some(&gap) = missing.first() {
        if !options.calendar.is_spring_forward(date) {
            return Err(Error::DataQuality(format!(
                "hour ending {gap} missing on {date}, which is not a spring-forward day"
            )));
        }
        if gap == 1 || gap == 24 {
            return Err(norm_err(format!(
                "missing hour ending {gap} has no neighbour on both sides"
            )));
        }
    }
    if repeats == 1 && !options.calendar.is_fall_back(date) {
        return Err(Error::DataQuality(format!(
            "repeated hour on {date}, which is not a fall-back day"
        )));
    }
    let summed_hour = match options.fall_back {
        FallBackConvention::SummedRow { hour, last_year }
            if anomalies == 0
                && date.year() <= last_year
                && options.calendar.is_fall_back(date) =>
        {
            Some(hour)
        }
        _ => None,
    };

    for hour in 1..=24u32 {
        let ts = Timestamp::new(date, hour)?;
        let idx = &by_hour[hour as usize];
        let (load, temps, holiday) = match idx.as_slice() {
            [] => {
                let before = by_hour[hour as usize - 1][0];
                let after = by_hour[hour as usize + 1][0];
                (
                    (raw.load[before] + raw.load[after]) / 2.0,
                    raw.temperatures
                        .iter()
                        .map(|c| (c[before] + c[after]) / 2.0)
                        .collect::<Vec<_>>(),
                    raw.holiday[before].max(raw.holiday[after]),
                )
            }
            [i] => {
                let mut load = raw.load[*i];
                if summed_hour == Some(hour) {
                    load /= 2.0;
                }
                (
                    load,
                    raw.temperatures.iter().map(|c| c[*i]).collect(),
                    raw.holiday[*i],
                )
            }
            [a, b] => (
                (raw.load[*a] + raw.load[*b]) / 2.0,
                raw.temperatures
                    .iter()
                    .map(|c| (c[*a] + c[*b]) / 2.0)
                    .collect(),
                raw.holiday[*a].max(raw.holiday[*b]),
            ),
            _ => unreachable!("at most one repeat per day checked above"),
        };
        out.timestamps.push(ts);
        out.load.push(load);
        for (c, v) in temps.into_iter().enumerate() {
            out.temperatures[c].push(v);
        }
        out.holiday.push(holiday);
    }
    Ok(())
}

/// Builds an aggregate zone: summed load, concatenated temperature channels
/// and the elementwise maximum of the holiday flags.
pub fn aggregate_zone(children: &[ZoneDataset], zone_id: &str) -> Result<ZoneDataset> {
    let first = children
        .first()
        .ok_or_else(|| Error::Alignment("aggregate needs at least one child zone".into()))?;
    for child in &children[1..] {
        if child.timestamps != first.timestamps {
            return Err(Error::Alignment(format!(
                "zone {} does not share the timestamp grid of zone {}",
                child.zone_id, first.zone_id
            )));
        }
    }
    let mut load = first.load.clone();
    let mut holiday = first.holiday.clone();
    for child in &children[1..] {
        for (acc, v) in load.iter_mut().zip(&child.load) {
            *acc += v;
        }
        for (acc, v) in holiday.iter_mut().zip(&child.holiday) {
            *acc = acc.max(*v);
        }
    }
    Ok(ZoneDataset {
        zone_id: zone_id.to_string(),
        timestamps: first.timestamps.clone(),
        load,
        temperatures: children
            .iter()
            .flat_map(|c| c.temperatures.clone())
            .collect(),
        holiday,
        dst_normalized: children.iter().all(|c| c.dst_normalized),
    })
}

/// Count of samples per calendar date.
pub fn samples_per_day(dataset: &ZoneDataset) -> HashMap<NaiveDate, usize> {
    let mut counts = HashMap::new();
    for t in dataset.timestamps() {
        *counts.entry(t.date()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::hourly_range;

    fn d(y: i32, m: u32, dd: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, dd).unwrap()
    }

    fn day_dataset(date: NaiveDate, hours: &[u32], loads: &[f64]) -> ZoneDataset {
        let ts: Vec<_> = hours
            .iter()
            .map(|&h| Timestamp::new(date, h).unwrap())
            .collect();
        let n = ts.len();
        ZoneDataset::new("z", ts, loads.to_vec(), vec![vec![50.0; n]], vec![0.0; n]).unwrap()
    }

    fn ingest_str(s: &str) -> Result<ZoneDataset> {
        ingest_reader(
            s.as_bytes(),
            Path::new("test.csv"),
            &ColumnMapping::default(),
        )
    }

    #[test]
    fn ingests_three_rows() {
        let ds = ingest_str(
            "timestamp,load,temp_1,temp_2,holiday\n\
             2016-01-01T01:00,100,30,20,1\n\
             2016-01-01T02:00,101.5,31,21,1\n\
             2016-01-01T03:00,99,32,22,1\n",
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.channel_count(), 2);
        assert_eq!(ds.load(), &[100.0, 101.5, 99.0]);
    }

    #[test]
    fn shuffled_rows_sort() {
        let sorted = ingest_str(
            "timestamp,load,temp_1,holiday\n2016-01-01T01:00,1,5,0\n2016-01-01T02:00,2,6,0\n2016-01-01T03:00,3,7,0\n",
        )
        .unwrap();
        let shuffled = ingest_str(
            "timestamp,load,temp_1,holiday\n2016-01-01T03:00,3,7,0\n2016-01-01T01:00,1,5,0\n2016-01-01T02:00,2,6,0\n",
        )
        .unwrap();
        assert_eq!(sorted, shuffled);
    }

    #[test]
    fn non_numeric_load_names_row() {
        let err = ingest_str(
            "timestamp,load,temp_1,holiday\n2016-01-01T01:00,1,5,0\n2016-01-01T02:00,abc,6,0\n",
        )
        .unwrap_err();
        match err {
            Error::Ingest { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("load"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_and_missing_column() {
        let err = ingest_str("timestamp,load,temp_1,holiday\nnope,1,5,0\n").unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 2, .. }));
        let err = ingest_str("time,load,temp_1,holiday\n2016-01-01T01:00,1,5,0\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn date_hour_columns_hour_beginning() {
        let schema = ColumnMapping {
            timestamp: TimestampColumns::DateHour {
                date: "Date".into(),
                hour: "Hr".into(),
            },
            hour_convention: HourConvention::Beginning,
            load: "Demand".into(),
            temperatures: vec!["DryBulb".into(), "DewPnt".into()],
            holiday: "Hol".into(),
        };
        let csv =
            "Date,Hr,Demand,DryBulb,DewPnt,Hol\n2016-01-01,0,10,1,2,1\n2016-01-01,23,11,3,4,1\n";
        let ds = ingest_reader(csv.as_bytes(), Path::new("x.csv"), &schema).unwrap();
        assert_eq!(ds.timestamps()[0], Timestamp::ymdh(2016, 1, 1, 1));
        assert_eq!(ds.timestamps()[1], Timestamp::ymdh(2016, 1, 1, 24));
        assert_eq!(ds.temperatures()[1], vec![2.0, 4.0]);
    }

    #[test]
    fn iso_midnight_means_previous_hour_24() {
        let ds = ingest_str("timestamp,load,temp_1,holiday\n2016-01-02 00:00,1,5,0\n").unwrap();
        assert_eq!(ds.timestamps()[0], Timestamp::ymdh(2016, 1, 1, 24));
    }

    #[test]
    fn spring_forward_inserts_mean() {
        let date = d(2014, 3, 9);
        let hours: Vec<u32> = (1..=24).filter(|&h| h != 2).collect();
        let mut loads = vec![90.0; 23];
        loads[0] = 100.0;
        loads[1] = 110.0;
        let out =
            normalize_dst(&day_dataset(date, &hours, &loads), &DstOptions::default()).unwrap();
        assert_eq!(out.len(), 24);
        assert_eq!(out.load()[1], 105.0);
        assert_eq!(out.timestamps()[1], Timestamp::new(date, 2).unwrap());
    }

    #[test]
    fn fall_back_halves_double_count() {
        let date = d(2014, 11, 2);
        let mut hours: Vec<u32> = (1..=24).collect();
        hours.insert(2, 2);
        let mut loads = vec![90.0; 25];
        loads[1] = 120.0;
        loads[2] = 80.0;
        let out =
            normalize_dst(&day_dataset(date, &hours, &loads), &DstOptions::default()).unwrap();
        assert_eq!(out.len(), 24);
        assert_eq!(out.load()[1], 100.0);
    }

    #[test]
    fn summed_row_convention_halves() {
        let date = d(2014, 11, 2);
        let mut loads = vec![90.0; 24];
        loads[1] = 200.0;
        let opts = DstOptions {
            fall_back: FallBackConvention::SummedRow {
                hour: 2,
                last_year: 2015,
            },
            ..Default::default()
        };
        let hours: Vec<u32> = (1..=24).collect();
        let out = normalize_dst(&day_dataset(date, &hours, &loads), &opts).unwrap();
        assert_eq!(out.load()[1], 100.0);
        // Already-normalized years pass through.
        let late = d(2016, 11, 6);
        let out = normalize_dst(&day_dataset(late, &hours, &loads), &opts).unwrap();
        assert_eq!(out.load()[1], 200.0);
    }

    #[test]
    fn complete_day_unchanged() {
        let date = d(2014, 6, 2);
        let hours: Vec<u32> = (1..=24).collect();
        let loads: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let raw = day_dataset(date, &hours, &loads);
        let out = normalize_dst(&raw, &DstOptions::default()).unwrap();
        assert_eq!(out.load(), raw.load());
        assert_eq!(out.timestamps(), raw.timestamps());
    }

    #[test]
    fn gap_on_ordinary_day_is_data_quality_error() {
        let hours: Vec<u32> = (1..=24).filter(|&h| h != 5).collect();
        let raw = day_dataset(d(2014, 6, 2), &hours, &[1.0; 23]);
        assert!(matches!(
            normalize_dst(&raw, &DstOptions::default()),
            Err(Error::DataQuality(_))
        ));
    }

    #[test]
    fn two_gaps_is_normalization_error() {
        let hours: Vec<u32> = (1..=24).filter(|&h| h != 2 && h != 3).collect();
        let raw = day_dataset(d(2014, 3, 9), &hours, &[1.0; 22]);
        assert!(matches!(
            normalize_dst(&raw, &DstOptions::default()),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn missing_day_rejected() {
        let mut ts = hourly_range(d(2014, 6, 1), d(2014, 6, 1));
        ts.extend(hourly_range(d(2014, 6, 3), d(2014, 6, 3)));
        let n = ts.len();
        let raw =
            ZoneDataset::new("z", ts, vec![1.0; n], vec![vec![1.0; n]], vec![0.0; n]).unwrap();
        assert!(matches!(
            normalize_dst(&raw, &DstOptions::default()),
            Err(Error::DataQuality(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let ts = hourly_range(d(2016, 1, 1), d(2016, 1, 1));
        let mk = |id: &str, l: f64, h: f64| {
            ZoneDataset::new(
                id,
                ts.clone(),
                vec![l; 24],
                vec![vec![1.0; 24], vec![2.0; 24]],
                vec![h; 24],
            )
            .unwrap()
        };
        let agg = aggregate_zone(&[mk("a", 5.0, 0.0), mk("b", 7.0, 1.0)], "ab").unwrap();
        assert!(agg.load().iter().all(|&v| v == 12.0));
        assert!(agg.holiday().iter().all(|&v| v == 1.0));
        assert_eq!(agg.channel_count(), 4);

        let three = aggregate_zone(
            &[mk("a", 1.0, 0.0), mk("b", 2.0, 0.0), mk("c", 3.0, 0.0)],
            "MASS",
        )
        .unwrap();
        assert_eq!(three.channel_count(), 6);

        let single = aggregate_zone(&[mk("a", 5.0, 0.0)], "a2").unwrap();
        assert_eq!(single.load(), mk("a", 5.0, 0.0).load());
    }

    #[test]
    fn aggregate_rejects_mismatched_grids() {
        let a = day_dataset(d(2016, 1, 1), &[1, 2, 3], &[1.0, 1.0, 1.0]);
        let b = day_dataset(d(2016, 1, 2), &[1, 2, 3], &[1.0, 1.0, 1.0]);
        assert!(matches!(
            aggregate_zone(&[a, b], "x"),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn holiday_must_be_binary() {
        let ts = hourly_range(d(2016, 1, 1), d(2016, 1, 1));
        let err = ZoneDataset::new("z", ts, vec![1.0; 24], vec![vec![1.0; 24]], vec![0.5; 24]);
        assert!(matches!(err, Err(Error::DataQuality(_))));
    }

    proptest::proptest! {
        #[test]
        fn csv_dump_round_trips(
            rows in proptest::collection::vec(
                (-1.0e6f64..1.0e6, -60.0f64..130.0, -60.0f64..130.0, proptest::bool::ANY),
                1..72,
            )
        ) {
            let ts: Vec<_> = hourly_range(d(2016, 3, 1), d(2016, 3, 3)).into_iter().take(rows.len()).collect();
            let ds = ZoneDataset::new(
                "z",
                ts,
                rows.iter().map(|r| r.0).collect(),
                vec![rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect()],
                rows.iter().map(|r| f64::from(u8::from(r.3))).collect(),
            )
            .unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let back = ingest_reader(buf.as_slice(), Path::new("dump.csv"), &ColumnMapping::default()).unwrap();
            proptest::prop_assert_eq!(back.load, ds.load);
            proptest::prop_assert_eq!(back.temperatures, ds.temperatures);
            proptest::prop_assert_eq!(back.holiday, ds.holiday);
            proptest::prop_assert_eq!(back.timestamps, ds.timestamps);
        }
    }
}
