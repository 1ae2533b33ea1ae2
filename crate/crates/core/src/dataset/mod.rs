//! Wind-tunnel trial ingestion, point sampling and baseline subtraction.

mod format;
mod manifest;
mod synthetic;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{index_dataset, load_trial, FormatConfig, IndexReport, MetadataDefaults, SkippedFile};
pub use manifest::{ConditionFilter, DatasetManifest, ManifestEntry, TrialMeta};
pub use synthetic::{generate_synthetic, write_synthetic, SyntheticCorpus, SyntheticSpec, SYNTHETIC_GASES};

/// Number of sensor channels on the wind-tunnel rig (9 boards of 8 sensors).
pub const NUM_CHANNELS: usize = 72;

/// Default baseline window, the ten seconds preceding gas release.
pub const DEFAULT_BASELINE_WINDOW: (f64, f64) = (10.0, 20.0);

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("directory not found: {0}")]
    MissingDirectory(PathBuf),
    #[error("zero parsable trials under {0}")]
    NoTrials(PathBuf),
    #[error("duplicate trial key (gas {gas}, repetition {repetition}, {condition}): {first} and {second}")]
    DuplicateKey {
        gas: String,
        repetition: u32,
        condition: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{path}:{line}: malformed row, expected {expected} columns, found {found}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: cannot parse value {value:?} in column {column}")]
    BadValue {
        path: PathBuf,
        line: u64,
        column: usize,
        value: String,
    },
    #[error("{path}:{line}: time {time} does not increase")]
    NonMonotoneTime { path: PathBuf, line: u64, time: f64 },
    #[error("{path}:{line}: channel {channel} resistance {value} is not finite and positive")]
    NonPositiveResistance {
        path: PathBuf,
        line: u64,
        channel: usize,
        value: f64,
    },
    #[error("invalid trial: {0}")]
    InvalidTrial(String),
    #[error("time {t} s outside recorded range [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },
    #[error("baseline window [{lo}, {hi}) contains no recorded rows")]
    EmptyBaselineWindow { lo: f64, hi: f64 },
    #[error("path {0} does not match the file pattern")]
    PatternMismatch(PathBuf),
    #[error("metadata field {field} unavailable for {path}: {reason}")]
    Metadata {
        path: PathBuf,
        field: &'static str,
        reason: String,
    },
    #[error("invalid format config: {0}")]
    Format(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One wind-tunnel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    meta: TrialMeta,
    times: Vec<f64>,
    readings: Vec<[f64; NUM_CHANNELS]>,
}

impl TrialRecord {
    pub fn new(
        meta: TrialMeta,
        times: Vec<f64>,
        readings: Vec<[f64; NUM_CHANNELS]>,
    ) -> Result<Self, DatasetError> {
        if times.is_empty() {
            return Err(DatasetError::InvalidTrial("no data rows".into()));
        }
        if times.len() != readings.len() {
            return Err(DatasetError::InvalidTrial(format!(
                "{} timestamps but {} reading rows",
                times.len(),
                readings.len()
            )));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DatasetError::InvalidTrial(format!(
                "time not strictly increasing at row {}",
                w + 1
            )));
        }
        for (row, values) in readings.iter().enumerate() {
            if let Some(c) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(DatasetError::InvalidTrial(format!(
                    "row {row} channel {c}: resistance {} not finite and positive",
                    values[c]
                )));
            }
        }
        Ok(Self {
            meta,
            times,
            readings,
        })
    }

    pub fn meta(&self) -> &TrialMeta {
        &self.meta
    }

    pub fn gas_label(&self) -> &str {
        &self.meta.gas_label
    }

    pub fn repetition(&self) -> u32 {
        self.meta.repetition
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn readings(&self) -> &[[f64; NUM_CHANNELS]] {
        &self.readings
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the row nearest to `t`; equidistant rows resolve to the earlier one.
    pub fn nearest_row(&self, t: f64) -> Result<usize, DatasetError> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(DatasetError::InvalidTrial("trial has no rows".into())),
        };
        if !(t >= first && t <= last) {
            return Err(DatasetError::OutOfRange { t, first, last });
        }
        // first index with time >= t
        let upper = self.times.partition_point(|&x| x < t);
        if upper == 0 {
            return Ok(0);
        }
        let lower = upper - 1;
        if upper == self.times.len() {
            return Ok(lower);
        }
        let d_lo = t - self.times[lower];
        let d_hi = self.times[upper] - t;
        Ok(if d_hi < d_lo { upper } else { lower })
    }

    /// Samples the recording at the row nearest to `t`.
    pub fn sample_at(&self, t: f64) -> Result<SampleVector, DatasetError> {
        let row = self.nearest_row(t)?;
        Ok(SampleVector {
            gas_label: self.meta.gas_label.clone(),
            repetition: self.meta.repetition,
            values: self.readings[row],
            sampled_at: self.times[row],
            baseline_subtracted: false,
            occluded_channels: BTreeSet::new(),
        })
    }

    /// Per-channel mean over rows with time in `[lo, hi)`.
    pub fn window_mean(&self, window: (f64, f64)) -> Result<[f64; NUM_CHANNELS], DatasetError> {
        let (lo, hi) = window;
        let start = self.times.partition_point(|&x| x < lo);
        let end = self.times.partition_point(|&x| x < hi);
        if end <= start {
            return Err(DatasetError::EmptyBaselineWindow { lo, hi });
        }
        let mut mean = [0.0; NUM_CHANNELS];
        for row in &self.readings[start..end] {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = (end - start) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }
}

/// The 72 channel values of one trial at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVector {
    pub gas_label: String,
    pub repetition: u32,
    #[serde(with = "channel_array")]
    pub values: [f64; NUM_CHANNELS],
    pub sampled_at: f64,
    pub baseline_subtracted: bool,
    pub occluded_channels: BTreeSet<usize>,
}

impl SampleVector {
    pub fn is_clean(&self) -> bool {
        self.occluded_channels.is_empty()
    }
}

/// Subtracts the per-channel mean over `window` from `sample`.
///
/// A sample that is already baseline-subtracted is returned unchanged, so
/// repeated application is idempotent.
pub fn subtract_baseline(
    trial: &TrialRecord,
    sample: &SampleVector,
    window: (f64, f64),
) -> Result<SampleVector, DatasetError> {
    let baseline = trial.window_mean(window)?;
    if sample.baseline_subtracted {
        return Ok(sample.clone());
    }
    let mut out = sample.clone();
    for (v, b) in out.values.iter_mut().zip(baseline) {
        *v -= b;
    }
    out.baseline_subtracted = true;
    Ok(out)
}

mod channel_array {
    use super::NUM_CHANNELS;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; NUM_CHANNELS], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; NUM_CHANNELS], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| D::Error::invalid_length(v.len(), &"72 channel values"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TrialMeta {
        TrialMeta {
            gas_label: "Toluene".into(),
            repetition: 0,
            acquired_at: 0,
            location: "P4".into(),
            airflow: 0.21,
            heater_voltage: 5.0,
        }
    }

    fn trial(times: &[f64]) -> TrialRecord {
        let readings = times
            .iter()
            .map(|t| {
                let mut row = [0.0; NUM_CHANNELS];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = 1000.0 + *t + c as f64;
                }
                row
            })
            .collect();
        TrialRecord::new(meta(), times.to_vec(), readings).unwrap()
    }

    #[test]
    fn sample_exact_and_nearest() {
        let t = trial(&[10.0, 15.0, 20.0]);
        assert_eq!(t.sample_at(15.0).unwrap().sampled_at, 15.0);
        assert_eq!(t.sample_at(14.9).unwrap().sampled_at, 15.0);
        assert_eq!(t.sample_at(10.0).unwrap().sampled_at, 10.0);
        assert_eq!(t.sample_at(20.0).unwrap().sampled_at, 20.0);
    }

    #[test]
    fn sample_tie_goes_to_earlier_row() {
        let t = trial(&[10.0, 15.0, 20.0]);
        assert_eq!(t.sample_at(12.5).unwrap().sampled_at, 10.0);
        assert_eq!(t.sample_at(17.5).unwrap().sampled_at, 15.0);
    }

    #[test]
    fn sample_out_of_range() {
        let t = trial(&[10.0, 15.0, 20.0]);
        assert!(matches!(t.sample_at(9.99), Err(DatasetError::OutOfRange { .. })));
        assert!(matches!(t.sample_at(20.01), Err(DatasetError::OutOfRange { .. })));
        assert!(t.sample_at(f64::NAN).is_err());
    }

    #[test]
    fn constant_trial_subtracts_to_zero() {
        let times: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let readings = vec![[1234.5; NUM_CHANNELS]; times.len()];
        let t = TrialRecord::new(meta(), times, readings).unwrap();
        let s = t.sample_at(30.0).unwrap();
        let b = subtract_baseline(&t, &s, DEFAULT_BASELINE_WINDOW).unwrap();
        assert!(b.baseline_subtracted);
        assert!(b.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn baseline_window_without_rows() {
        let t = trial(&[30.0, 40.0]);
        let s = t.sample_at(30.0).unwrap();
        assert!(matches!(
            subtract_baseline(&t, &s, (10.0, 20.0)),
            Err(DatasetError::EmptyBaselineWindow { .. })
        ));
    }

    #[test]
    fn baseline_is_idempotent() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let t = trial(&times);
        let s = t.sample_at(90.0).unwrap();
        let once = subtract_baseline(&t, &s, (10.0, 20.0)).unwrap();
        let twice = subtract_baseline(&t, &once, (10.0, 20.0)).unwrap();
        assert_eq!(once.values, twice.values);
        // rows 10..=19 have mean time 14.5
        assert!((once.values[0] - (90.0 - 14.5)).abs() < 1e-9);
    }

    #[test]
    fn rejects_invalid_trials() {
        let row = [1.0; NUM_CHANNELS];
        assert!(TrialRecord::new(meta(), vec![0.0, 0.0], vec![row, row]).is_err());
        assert!(TrialRecord::new(meta(), vec![0.0], vec![row, row]).is_err());
        let mut bad = row;
        bad[5] = 0.0;
        assert!(TrialRecord::new(meta(), vec![0.0], vec![bad]).is_err());
        bad[5] = f64::INFINITY;
        assert!(TrialRecord::new(meta(), vec![0.0], vec![bad]).is_err());
    }
}
