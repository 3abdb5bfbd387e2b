//! Sensor-record ingestion, outlier filtering, stratified splitting and
//! feature extraction.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Activity, Behavior, EMERGENCY, NON_EMERGENCY};

/// One timestamped wearable observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub timestamp: Option<String>,
    pub zone: String,
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
    pub behavior: Option<Behavior>,
    pub activity: Option<Activity>,
}

impl SensorRecord {
    /// accel x/y/z followed by gyro x/y/z.
    pub fn numeric(&self) -> [f64; 6] {
        [
            self.accel[0],
            self.accel[1],
            self.accel[2],
            self.gyro[0],
            self.gyro[1],
            self.gyro[2],
        ]
    }

    pub fn emergency_label(&self) -> Option<&'static str> {
        self.activity.map(|a| {
            if a == Activity::Emergency {
                EMERGENCY
            } else {
                NON_EMERGENCY
            }
        })
    }
}

/// Header names for each record field.
///
/// `zone` and the six numeric columns are required. The optional columns are
/// read when the header contains them and left empty otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub timestamp: Option<String>,
    pub zone: String,
    pub accel_x: String,
    pub accel_y: String,
    pub accel_z: String,
    pub gyro_x: String,
    pub gyro_y: String,
    pub gyro_z: String,
    pub behavior: Option<String>,
    pub activity: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            timestamp: Some("timestamp".into()),
            zone: "zone".into(),
            accel_x: "accel_x".into(),
            accel_y: "accel_y".into(),
            accel_z: "accel_z".into(),
            gyro_x: "gyro_x".into(),
            gyro_y: "gyro_y".into(),
            gyro_z: "gyro_z".into(),
            behavior: Some("behavior".into()),
            activity: Some("activity".into()),
        }
    }
}

impl ColumnMapping {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn numeric_columns(&self) -> [&str; 6] {
        [
            &self.accel_x,
            &self.accel_y,
            &self.accel_z,
            &self.gyro_x,
            &self.gyro_y,
            &self.gyro_z,
        ]
    }
}

struct ColumnIndex {
    timestamp: Option<usize>,
    zone: usize,
    numeric: [usize; 6],
    behavior: Option<usize>,
    activity: Option<usize>,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let required = |name: &str| {
            find(name).ok_or_else(|| Error::validation(format!("missing column '{}'", name)))
        };
        let mut numeric = [0; 6];
        for (slot, name) in numeric.iter_mut().zip(mapping.numeric_columns()) {
            *slot = required(name)?;
        }
        Ok(ColumnIndex {
            timestamp: mapping.timestamp.as_deref().and_then(find),
            zone: required(&mapping.zone)?,
            numeric,
            behavior: mapping.behavior.as_deref().and_then(find),
            activity: mapping.activity.as_deref().and_then(find),
        })
    }
}

fn cell(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<&str> {
    rec.get(idx).map(str::trim).ok_or_else(|| Error::Row {
        row,
        message: format!("missing field {}", idx + 1),
    })
}

fn optional_label<T: FromStr<Err = Error>>(
    rec: &csv::StringRecord,
    idx: Option<usize>,
    row: usize,
) -> Result<Option<T>> {
    let Some(idx) = idx else { return Ok(None) };
    let raw = cell(rec, idx, row)?;
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|e: Error| Error::Row {
        row,
        message: e.to_string(),
    })
}

/// Parse records from CSV text. Row numbers in errors are 1-based data rows
/// (the header is not counted).
pub fn read_csv<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Vec<SensorRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let columns = ColumnIndex::resolve(rdr.headers()?, mapping)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let mut values = [0.0; 6];
        for (v, (&idx, name)) in values
            .iter_mut()
            .zip(columns.numeric.iter().zip(mapping.numeric_columns()))
        {
            let raw = cell(&rec, idx, row)?;
            *v = raw
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Row {
                    row,
                    message: format!("column '{}': '{}' is not a finite number", name, raw),
                })?;
        }
        let zone = cell(&rec, columns.zone, row)?;
        if zone.is_empty() {
            return Err(Error::Row {
                row,
                message: "empty zone".into(),
            });
        }
        let timestamp = match columns.timestamp {
            Some(idx) => Some(cell(&rec, idx, row)?.to_string()).filter(|s| !s.is_empty()),
            None => None,
        };
        out.push(SensorRecord {
            timestamp,
            zone: zone.to_string(),
            accel: [values[0], values[1], values[2]],
            gyro: [values[3], values[4], values[5]],
            behavior: optional_label(&rec, columns.behavior, row)?,
            activity: optional_label(&rec, columns.activity, row)?,
        });
    }
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Vec<SensorRecord>> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), mapping)
}

/// Write records with the mapping's column names. Every optional column that
/// the mapping names is written, empty where the record has no value.
pub fn write_csv<W: Write>(
    writer: W,
    records: &[SensorRecord],
    mapping: &ColumnMapping,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if let Some(t) = &mapping.timestamp {
        header.push(t);
    }
    header.push(&mapping.zone);
    header.extend(mapping.numeric_columns());
    if let Some(b) = &mapping.behavior {
        header.push(b);
    }
    if let Some(a) = &mapping.activity {
        header.push(a);
    }
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if mapping.timestamp.is_some() {
            row.push(r.timestamp.clone().unwrap_or_default());
        }
        row.push(r.zone.clone());
        row.extend(r.numeric().iter().map(|v| v.to_string()));
        if mapping.behavior.is_some() {
            row.push(r.behavior.map(|b| b.to_string()).unwrap_or_default());
        }
        if mapping.activity.is_some() {
            row.push(r.activity.map(|a| a.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(
    path: impl AsRef<Path>,
    records: &[SensorRecord],
    mapping: &ColumnMapping,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), records, mapping)
}

/// Per-feature z-score filter over the six numeric channels.
///
/// Records whose |z| exceeds `z_threshold` on any channel are dropped, and the
/// statistics are recomputed until nothing more is removed, so the result is
/// a fixed point of the filter. Zero-variance channels never flag a record. A
/// pass that would remove every remaining record is skipped.
pub fn remove_outliers(records: &[SensorRecord], z_threshold: f64) -> Result<Vec<SensorRecord>> {
    if !(z_threshold.is_finite() && z_threshold > 0.0) {
        return Err(Error::validation(format!(
            "outlier threshold must be positive, got {}",
            z_threshold
        )));
    }
    let mut kept: Vec<SensorRecord> = records.to_vec();
    loop {
        let n = kept.len();
        if n == 0 {
            return Ok(kept);
        }
        let mut mean = [0.0; 6];
        for r in &kept {
            for (m, v) in mean.iter_mut().zip(r.numeric()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = [0.0; 6];
        for r in &kept {
            for ((s, v), m) in var.iter_mut().zip(r.numeric()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var.map(|s| (s / n as f64).sqrt());

        let is_outlier = |r: &SensorRecord| {
            r.numeric()
                .iter()
                .zip(mean.iter().zip(sd))
                .any(|(v, (m, s))| s > 0.0 && ((v - m) / s).abs() > z_threshold)
        };
        let next: Vec<SensorRecord> = kept.iter().filter(|r| !is_outlier(r)).cloned().collect();
        if next.len() == n || next.is_empty() {
            return Ok(kept);
        }
        kept = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<SensorRecord>,
    pub test: Vec<SensorRecord>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Number of training rows for `n` records: `ceil(fraction * n)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    // the epsilon keeps exact products like 0.5 * 2 from rounding up
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Seeded, behavior-stratified train/test split.
pub fn split(records: &[SensorRecord], train_fraction: f64, seed: u64) -> Result<SplitDataset> {
    split_stratified(records, train_fraction, seed, |r| {
        r.behavior.map(|b| b.to_string()).unwrap_or_default()
    })
}

/// Seeded train/test split stratified by `stratum`.
///
/// The overall training size is `ceil(fraction * N)`. Each stratum first gets
/// `floor(fraction * n_c)` rows; the leftover slots go to the strata with the
/// largest fractional remainders (ties in stratum order), so every stratum's
/// training share is within one record of `fraction * n_c`. Both halves keep
/// the input order.
pub fn split_stratified<F>(
    records: &[SensorRecord],
    train_fraction: f64,
    seed: u64,
    stratum: F,
) -> Result<SplitDataset>
where
    F: Fn(&SensorRecord) -> String,
{
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction must lie in (0, 1), got {}",
            train_fraction
        )));
    }
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata.entry(stratum(r)).or_default().push(i);
    }

    let target = train_size(records.len(), train_fraction);
    let mut quota: Vec<usize> = Vec::with_capacity(strata.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(strata.len());
    for (pos, members) in strata.values().enumerate() {
        let exact = train_fraction * members.len() as f64;
        let base = exact.floor() as usize;
        quota.push(base);
        remainders.push((exact - base as f64, pos));
    }
    // fraction < 1 keeps every floor below its stratum size, and the
    // leftover never exceeds the number of strata
    let mut leftover = target.saturating_sub(quota.iter().sum());
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, pos) in &remainders {
        if leftover == 0 {
            break;
        }
        quota[pos] += 1;
        leftover -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; records.len()];
    for (members, &q) in strata.values().zip(&quota) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..q] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in records.iter().zip(in_train) {
        if t {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok(SplitDataset {
        train,
        test,
        seed,
        train_fraction,
    })
}

/// A single numeric input to the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    AccelX,
    AccelY,
    AccelZ,
    GyroX,
    GyroY,
    GyroZ,
    /// Index of the zone in the encoder's vocabulary.
    Zone,
    /// Index of the behavior label in [`Behavior::ALL`].
    Behavior,
}

impl Feature {
    const NAMES: [(Feature, &'static str); 8] = [
        (Feature::AccelX, "accel_x"),
        (Feature::AccelY, "accel_y"),
        (Feature::AccelZ, "accel_z"),
        (Feature::GyroX, "gyro_x"),
        (Feature::GyroY, "gyro_y"),
        (Feature::GyroZ, "gyro_z"),
        (Feature::Zone, "zone"),
        (Feature::Behavior, "behavior"),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(f, _)| *f == self)
            .map(|(_, n)| *n)
            .unwrap()
    }
}

/// Ordered list of features fed to a classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet(Vec<Feature>);

impl FeatureSet {
    /// Accelerometer x/y/z.
    pub fn behavior_default() -> Self {
        FeatureSet(vec![Feature::AccelX, Feature::AccelY, Feature::AccelZ])
    }

    /// Accelerometer and gyroscope x/y/z, zone index, behavior index.
    pub fn emergency_default() -> Self {
        FeatureSet(Feature::NAMES.iter().map(|(f, _)| *f).collect())
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0.contains(&f)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|x| x.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Accepts `behavior`, `emergency`, or a comma list of feature names.
impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "behavior" => return Ok(Self::behavior_default()),
            "emergency" => return Ok(Self::emergency_default()),
            _ => {}
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let f = Feature::NAMES
                .iter()
                .find(|(_, n)| *n == part)
                .map(|(f, _)| *f)
                .ok_or_else(|| Error::validation(format!("unknown feature '{}'", part)))?;
            if out.contains(&f) {
                return Err(Error::validation(format!(
                    "feature '{}' listed twice",
                    part
                )));
            }
            out.push(f);
        }
        if out.is_empty() {
            return Err(Error::validation("empty feature set"));
        }
        Ok(FeatureSet(out))
    }
}

/// Turns records into feature vectors. The zone vocabulary is fixed from the
/// training records; unseen zones map to one past the last known index.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    set: FeatureSet,
    zones: Vec<String>,
}

impl FeatureEncoder {
    pub fn fit(set: FeatureSet, train: &[SensorRecord]) -> Self {
        let mut zones: Vec<String> = train.iter().map(|r| r.zone.clone()).collect();
        zones.sort();
        zones.dedup();
        FeatureEncoder { set, zones }
    }

    pub fn dimension(&self) -> usize {
        self.set.len()
    }

    pub fn feature_set(&self) -> &FeatureSet {
        &self.set
    }

    /// `behavior` overrides the record's own label for the behavior feature,
    /// which lets a predicted behavior stand in at test time.
    pub fn encode(&self, record: &SensorRecord, behavior: Option<Behavior>) -> Result<Vec<f64>> {
        self.set
            .features()
            .iter()
            .map(|f| {
                Ok(match f {
                    Feature::AccelX => record.accel[0],
                    Feature::AccelY => record.accel[1],
                    Feature::AccelZ => record.accel[2],
                    Feature::GyroX => record.gyro[0],
                    Feature::GyroY => record.gyro[1],
                    Feature::GyroZ => record.gyro[2],
                    Feature::Zone => self
                        .zones
                        .iter()
                        .position(|z| *z == record.zone)
                        .unwrap_or(self.zones.len()) as f64,
                    Feature::Behavior => behavior
                        .or(record.behavior)
                        .ok_or_else(|| {
                            Error::validation("behavior feature requested for an unlabeled record")
                        })?
                        .index() as f64,
                })
            })
            .collect()
    }
}
