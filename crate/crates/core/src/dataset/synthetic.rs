//! Desk-scale synthetic wind-tunnel corpus with batched acquisition and drift.
//!
//! Each gas owns a fixed 72-channel response profile. Trials of one gas are
//! recorded in a contiguous batch of dates, and every trial carries:
//!
//! - a long-term additive offset growing linearly with acquisition date,
//! - a batch offset shared by all trials of the batch (ambient conditions),
//! - a per-trial baseline offset and a baseline slope that keeps drifting
//!   while the trial runs,
//! - a multiplicative responsiveness factor: long-term decay with date times
//!   a per-trial log-normal fluctuation,
//! - i.i.d. Gaussian measurement noise on every reading.
//!
//! All drift terms scale with `drift_amplitude × response_amplitude`, so a
//! drift amplitude of zero leaves only the gas response and the noise.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::FormatConfig;
use super::manifest::{DatasetManifest, ManifestEntry, TrialMeta};
use super::{DatasetError, TrialRecord, NUM_CHANNELS};

/// Gas labels of the public wind-tunnel corpus, used for the first ten synthetic gases.
pub const SYNTHETIC_GASES: [&str; 10] = [
    "Acetaldehyde",
    "Acetone",
    "Ammonia",
    "Benzene",
    "Butanol",
    "CO",
    "Ethylene",
    "Methane",
    "Methanol",
    "Toluene",
];

const LONG_TERM_RATE: (f64, f64) = (0.5, 1.0);
const BATCH_OFFSET_SD: f64 = 0.5;
const TRIAL_OFFSET_SD: f64 = 0.5;
const TRIAL_DRIFT_PER_MINUTE_SD: f64 = 0.4;
const RESPONSIVENESS_SD: f64 = 0.15;
const SENSITIVITY_DECAY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub num_gases: usize,
    pub repetitions_per_gas: usize,
    /// Drift magnitude relative to the response magnitude.
    pub drift_amplitude: f64,
    /// Ohms.
    pub response_amplitude: f64,
    /// Ohms.
    pub noise_sd: f64,
    pub gas_release_time: f64,
    pub trial_duration: f64,
    pub seed: u64,
    pub sample_rate_hz: f64,
    /// Mean channel baseline, ohms.
    pub baseline_resistance: f64,
    /// Channel baselines are drawn from `baseline × U(1 − spread, 1 + spread)`.
    pub baseline_spread: f64,
    /// Time constant of the first-order rise after gas release, seconds.
    pub rise_time: f64,
    pub location: String,
    pub airflow: f64,
    pub heater_voltage: f64,
    /// UTC seconds of the first trial.
    pub start_time: i64,
    /// Seconds between the first trials of consecutive gas batches.
    pub batch_interval: i64,
    /// Seconds between consecutive repetitions within a batch.
    pub repetition_interval: i64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_gases: 10,
            repetitions_per_gas: 20,
            drift_amplitude: 2.0,
            response_amplitude: 1000.0,
            noise_sd: 10.0,
            gas_release_time: 20.0,
            trial_duration: 260.0,
            seed: 0,
            sample_rate_hz: 10.0,
            baseline_resistance: 10_000.0,
            baseline_spread: 0.5,
            rise_time: 10.0,
            location: "P4".into(),
            airflow: 0.21,
            heater_voltage: 5.0,
            start_time: 1_277_942_400,
            batch_interval: 27 * 86_400,
            repetition_interval: 2_700,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |m: &str| Err(DatasetError::InvalidSpec(m.into()));
        if self.num_gases < 1 {
            return fail("num_gases must be >= 1");
        }
        if self.repetitions_per_gas < 1 {
            return fail("repetitions_per_gas must be >= 1");
        }
        if !(self.drift_amplitude >= 0.0 && self.drift_amplitude.is_finite()) {
            return fail("drift_amplitude must be finite and >= 0");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail("noise_sd must be finite and >= 0");
        }
        if !(self.response_amplitude >= 0.0 && self.response_amplitude.is_finite()) {
            return fail("response_amplitude must be finite and >= 0");
        }
        if !(self.sample_rate_hz > 0.0 && self.trial_duration > 0.0) {
            return fail("sample_rate_hz and trial_duration must be positive");
        }
        if self.num_rows() < 1 {
            return fail("trial shorter than one sample period");
        }
        if !(self.gas_release_time >= 0.0 && self.gas_release_time < self.trial_duration) {
            return fail("gas_release_time must lie within the trial");
        }
        if !(self.baseline_resistance > 0.0) || !(0.0..1.0).contains(&self.baseline_spread) {
            return fail("baseline_resistance must be positive and baseline_spread in [0, 1)");
        }
        if !(self.rise_time > 0.0) {
            return fail("rise_time must be positive");
        }
        if self.batch_interval < 0 || self.repetition_interval < 0 {
            return fail("acquisition intervals must be non-negative");
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        (self.trial_duration * self.sample_rate_hz).round() as usize
    }

    pub fn gas_label(&self, gas: usize) -> String {
        SYNTHETIC_GASES
            .get(gas)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("Gas{gas:02}"))
    }

    pub fn acquired_at(&self, gas: usize, repetition: usize) -> i64 {
        self.start_time + gas as i64 * self.batch_interval + repetition as i64 * self.repetition_interval
    }

    fn relative_path(&self, gas: usize, repetition: usize) -> String {
        format!(
            "{}/{}_{}ms_{}V_rep{:02}_{}.csv",
            self.gas_label(gas),
            self.location,
            self.airflow,
            self.heater_voltage,
            repetition,
            self.acquired_at(gas, repetition)
        )
    }
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ground-truth parameters and trials of one synthetic corpus.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    spec: SyntheticSpec,
    baselines: [f64; NUM_CHANNELS],
    long_term_rate: [f64; NUM_CHANNELS],
    decay: [f64; NUM_CHANNELS],
    profiles: Vec<[f64; NUM_CHANNELS]>,
    batch_offsets: Vec<[f64; NUM_CHANNELS]>,
}

impl SyntheticCorpus {
    pub fn new(spec: &SyntheticSpec) -> Result<Self, DatasetError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, u64::MAX));
        let lo = spec.baseline_resistance * (1.0 - spec.baseline_spread);
        let hi = spec.baseline_resistance * (1.0 + spec.baseline_spread);
        let mut baselines = [0.0; NUM_CHANNELS];
        let mut long_term_rate = [0.0; NUM_CHANNELS];
        let mut decay = [0.0; NUM_CHANNELS];
        for c in 0..NUM_CHANNELS {
            baselines[c] = if hi > lo { rng.random_range(lo..hi) } else { lo };
            long_term_rate[c] = rng.random_range(LONG_TERM_RATE.0..LONG_TERM_RATE.1);
            decay[c] = rng.random::<f64>();
        }
        let profiles = (0..spec.num_gases)
            .map(|_| std::array::from_fn(|_| spec.response_amplitude * rng.random::<f64>()))
            .collect();
        let batch = Normal::new(0.0, BATCH_OFFSET_SD).expect("valid sd");
        let batch_offsets = (0..spec.num_gases)
            .map(|_| std::array::from_fn(|_| batch.sample(&mut rng)))
            .collect();
        Ok(Self {
            spec: spec.clone(),
            baselines,
            long_term_rate,
            decay,
            profiles,
            batch_offsets,
        })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// Plateau response of `gas` above baseline, before drift.
    pub fn gas_profile(&self, gas: usize) -> &[f64; NUM_CHANNELS] {
        &self.profiles[gas]
    }

    pub fn channel_baselines(&self) -> &[f64; NUM_CHANNELS] {
        &self.baselines
    }

    fn acquisition_fraction(&self, gas: usize, repetition: usize) -> f64 {
        let first = self.spec.acquired_at(0, 0);
        let last = self
            .spec
            .acquired_at(self.spec.num_gases - 1, self.spec.repetitions_per_gas - 1);
        if last == first {
            0.0
        } else {
            (self.spec.acquired_at(gas, repetition) - first) as f64 / (last - first) as f64
        }
    }

    pub fn meta(&self, gas: usize, repetition: usize) -> TrialMeta {
        TrialMeta {
            gas_label: self.spec.gas_label(gas),
            repetition: repetition as u32,
            acquired_at: self.spec.acquired_at(gas, repetition),
            location: self.spec.location.clone(),
            airflow: self.spec.airflow,
            heater_voltage: self.spec.heater_voltage,
        }
    }

    pub fn trial(&self, gas: usize, repetition: usize) -> TrialRecord {
        let spec = &self.spec;
        let trial_index = (gas * spec.repetitions_per_gas + repetition) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, trial_index));
        let scale = spec.drift_amplitude * spec.response_amplitude;
        let phi = self.acquisition_fraction(gas, repetition);
        let log_sd = spec.drift_amplitude * RESPONSIVENESS_SD;

        let mut offset = [0.0; NUM_CHANNELS];
        let mut slope = [0.0; NUM_CHANNELS];
        let mut sensitivity = [0.0; NUM_CHANNELS];
        for c in 0..NUM_CHANNELS {
            let trial_offset: f64 = rng.sample(StandardNormal);
            let drift_rate: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            offset[c] = self.baselines[c]
                + scale
                    * (self.long_term_rate[c] * phi
                        + self.batch_offsets[gas][c]
                        + TRIAL_OFFSET_SD * trial_offset);
            slope[c] = scale * TRIAL_DRIFT_PER_MINUTE_SD * drift_rate / 60.0;
            sensitivity[c] = (-spec.drift_amplitude * SENSITIVITY_DECAY * self.decay[c] * phi).exp()
                * (log_sd * z - 0.5 * log_sd * log_sd).exp();
        }

        let n = spec.num_rows();
        let mut times = Vec::with_capacity(n);
        let mut readings = Vec::with_capacity(n);
        let profile = &self.profiles[gas];
        for i in 0..n {
            let t = i as f64 / spec.sample_rate_hz;
            let rise = if t >= spec.gas_release_time {
                1.0 - (-(t - spec.gas_release_time) / spec.rise_time).exp()
            } else {
                0.0
            };
            let row: [f64; NUM_CHANNELS] = std::array::from_fn(|c| {
                let noise = if spec.noise_sd > 0.0 {
                    spec.noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let v = offset[c] + slope[c] * t + rise * sensitivity[c] * profile[c] + noise;
                // three decimals on disk
                ((v * 1000.0).round() / 1000.0).max(1.0)
            });
            times.push(t);
            readings.push(row);
        }
        TrialRecord::new(self.meta(gas, repetition), times, readings).expect("generator emits valid trials")
    }

    /// All (gas, repetition) pairs in acquisition order.
    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.spec.num_gases).flat_map(move |g| (0..self.spec.repetitions_per_gas).map(move |r| (g, r)))
    }

    /// Writes every trial under `dir` plus `dir/manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest, DatasetError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DatasetError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let keys: Vec<(usize, usize)> = self.keys().collect();
        let entries = keys
            .par_iter()
            .map(|&(g, r)| {
                let rel = self.spec.relative_path(g, r);
                let path = dir.join(&rel);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(io(parent))?;
                }
                std::fs::write(&path, render_trial(&self.trial(g, r))).map_err(io(&path))?;
                Ok(ManifestEntry {
                    path: rel.into(),
                    meta: self.meta(g, r),
                })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let root = dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf());
        let manifest = DatasetManifest::new(root, FormatConfig::default(), entries)?;
        manifest.save(&dir.join("manifest.json"))?;
        Ok(manifest)
    }
}

fn render_trial(trial: &TrialRecord) -> String {
    let mut out = String::with_capacity(trial.len() * NUM_CHANNELS * 11 + 512);
    out.push_str("time");
    for c in 0..NUM_CHANNELS {
        let _ = write!(out, ",s{c:02}");
    }
    out.push('\n');
    for (t, row) in trial.times().iter().zip(trial.readings()) {
        let _ = write!(out, "{t:.3}");
        for v in row {
            let _ = write!(out, ",{v:.3}");
        }
        out.push('\n');
    }
    out
}

/// Generates the corpus described by `spec` and materialises it under `dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<DatasetManifest, DatasetError> {
    SyntheticCorpus::new(spec)?.write(dir)
}

/// Alias of [`generate_synthetic`] that also returns the in-memory corpus.
pub fn write_synthetic(
    spec: &SyntheticSpec,
    dir: &Path,
) -> Result<(SyntheticCorpus, DatasetManifest), DatasetError> {
    let corpus = SyntheticCorpus::new(spec)?;
    let manifest = corpus.write(dir)?;
    Ok((corpus, manifest))
}
