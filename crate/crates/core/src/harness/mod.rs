//! Evaluation protocols, runtime benchmark and drift probe.

mod bench;
mod output;
mod probe;
mod protocol;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attractor::{MemoryError, WeightMode, DEFAULT_CYCLES, DEFAULT_THRESHOLD};
use crate::coding::{CodingError, DEFAULT_NUM_BINS};
use crate::corruption::{OcclusionError, OcclusionRange};
use crate::dataset::{ConditionFilter, DatasetError, DEFAULT_BASELINE_WINDOW};
use crate::hash_table::TableError;

pub use bench::{bench_runtime, BenchReport, BenchRow, BenchSettings};
pub use output::{write_probe_csv, write_results_csv, RESULTS_SCHEMA, SUMMARY_SCHEMA};
pub use probe::{drift_probe, ProbeConfig, ProbePrediction, ProbeReport};
pub use protocol::{
    execute, run_protocol, train_snapshots, AttractorOutcome, ExperimentResult, HashOutcome, RunOutcome,
    SampleResult, TrainTiming,
};
pub use stats::{quantile, summarize, DenoiserSummary, JaccardCell, SummaryStats, TimingSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Train and test on the same trial, test occluded.
    #[serde(alias = "same_trial")]
    SameTrialOcclusion,
    /// Train at the stimulus plateau, test the same trial before gas release.
    PreStimulus,
    /// Train and test on different repetitions.
    CrossRepetition,
    CrossRepetitionBaselineSub,
    CrossRepetitionNoOcclusion,
    /// 1-nearest-neighbour classification of pre-release samples.
    DriftProbe,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::SameTrialOcclusion,
        Protocol::PreStimulus,
        Protocol::CrossRepetition,
        Protocol::CrossRepetitionBaselineSub,
        Protocol::CrossRepetitionNoOcclusion,
        Protocol::DriftProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::SameTrialOcclusion => "same_trial_occlusion",
            Protocol::PreStimulus => "pre_stimulus",
            Protocol::CrossRepetition => "cross_repetition",
            Protocol::CrossRepetitionBaselineSub => "cross_repetition_baseline_sub",
            Protocol::CrossRepetitionNoOcclusion => "cross_repetition_no_occlusion",
            Protocol::DriftProbe => "drift_probe",
        }
    }

    pub fn is_cross_repetition(self) -> bool {
        matches!(
            self,
            Protocol::CrossRepetition
                | Protocol::CrossRepetitionBaselineSub
                | Protocol::CrossRepetitionNoOcclusion
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserChoice {
    Attractor,
    Hashtable,
    #[default]
    Both,
}

impl DenoiserChoice {
    pub fn attractor(self) -> bool {
        matches!(self, DenoiserChoice::Attractor | DenoiserChoice::Both)
    }

    pub fn hashtable(self) -> bool {
        matches!(self, DenoiserChoice::Hashtable | DenoiserChoice::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denoiser {
    Attractor,
    Hashtable,
}

impl Denoiser {
    pub fn name(self) -> &'static str {
        match self {
            Denoiser::Attractor => "attractor",
            Denoiser::Hashtable => "hashtable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSettings {
    pub num_bins: usize,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self {
            num_bins: DEFAULT_NUM_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcclusionSettings {
    /// Overrides the protocol default (0.6, or 0 for the no-occlusion protocol).
    pub fraction: Option<f64>,
    pub range: OcclusionRange,
}

/// Protocol configuration as written by users; unset options take the
/// protocol's defaults in [`ProtocolConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub train_time: f64,
    /// Defaults to 90 s, or 15 s for the pre-stimulus protocol and drift probe.
    pub test_time: Option<f64>,
    /// Defaults to true for the baseline-subtracted and no-occlusion protocols.
    pub baseline_subtract: Option<bool>,
    pub baseline_window: (f64, f64),
    pub occlusions_per_gas: usize,
    pub train_repetition: u32,
    /// Defaults to the training repetition for same-trial protocols, else 1.
    pub test_repetition: Option<u32>,
    pub denoiser: DenoiserChoice,
    pub threshold: f64,
    pub cycles: usize,
    pub seed: u64,
    pub gas_release_time: f64,
    pub encoder: EncoderSettings,
    pub occlusion: OcclusionSettings,
    pub weight_mode: WeightMode,
    pub condition: ConditionFilter,
    /// Restricts the run to these gases; all gases under `condition` when unset.
    pub gases: Option<Vec<String>>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::SameTrialOcclusion,
            train_time: 90.0,
            test_time: None,
            baseline_subtract: None,
            baseline_window: DEFAULT_BASELINE_WINDOW,
            occlusions_per_gas: 10,
            train_repetition: 0,
            test_repetition: None,
            denoiser: DenoiserChoice::Both,
            threshold: DEFAULT_THRESHOLD,
            cycles: DEFAULT_CYCLES,
            seed: 0,
            gas_release_time: 20.0,
            encoder: EncoderSettings::default(),
            occlusion: OcclusionSettings::default(),
            weight_mode: WeightMode::Counts,
            condition: ConditionFilter::default(),
            gases: None,
        }
    }
}

impl ProtocolConfig {
    pub fn for_protocol(protocol: Protocol) -> Self {
        Self {
            protocol,
            ..Self::default()
        }
    }

    /// Materialises protocol defaults and checks protocol invariants.
    pub fn resolve(&self) -> Result<ResolvedConfig, HarnessError> {
        use Protocol::*;
        let p = self.protocol;
        let config = |m: String| Err(HarnessError::Config(m));

        let test_time = self.test_time.unwrap_or(match p {
            PreStimulus | DriftProbe => 15.0,
            _ => 90.0,
        });
        let default_fraction = match p {
            CrossRepetitionNoOcclusion | DriftProbe => 0.0,
            _ => 0.6,
        };
        let occlusion_fraction = self.occlusion.fraction.unwrap_or(default_fraction);
        if p == CrossRepetitionNoOcclusion && occlusion_fraction != 0.0 {
            return config(format!("{} requires occlusion fraction 0", p.name()));
        }
        let baseline_subtract = self.baseline_subtract.unwrap_or(matches!(
            p,
            CrossRepetitionBaselineSub | CrossRepetitionNoOcclusion
        ));
        if p == CrossRepetitionBaselineSub && !baseline_subtract {
            return config(format!("{} requires baseline subtraction", p.name()));
        }
        let test_repetition = self.test_repetition.unwrap_or(if p.is_cross_repetition() {
            if self.train_repetition == 1 {
                0
            } else {
                1
            }
        } else {
            self.train_repetition
        });

        if !(0.0..=1.0).contains(&occlusion_fraction) {
            return config(format!("occlusion fraction {occlusion_fraction} outside [0, 1]"));
        }
        if matches!(p, PreStimulus | DriftProbe) && !(test_time < self.gas_release_time) {
            return config(format!(
                "{} needs test_time ({test_time} s) before gas release ({} s)",
                p.name(),
                self.gas_release_time
            ));
        }
        if p.is_cross_repetition() && test_repetition == self.train_repetition {
            return config(format!("{} needs distinct train and test repetitions", p.name()));
        }
        if matches!(p, SameTrialOcclusion | PreStimulus) && test_repetition != self.train_repetition {
            return config(format!("{} tests on the training trial", p.name()));
        }
        if self.occlusions_per_gas == 0 {
            return config("occlusions_per_gas must be >= 1".into());
        }
        if self.cycles == 0 {
            return config("cycles must be >= 1".into());
        }
        if self.encoder.num_bins < 2 || self.encoder.num_bins > u16::MAX as usize {
            return config(format!("num_bins {} outside [2, 65535]", self.encoder.num_bins));
        }
        if !self.threshold.is_finite() {
            return config("threshold must be finite".into());
        }
        let (lo, hi) = self.baseline_window;
        if !(lo < hi) {
            return config(format!("baseline window [{lo}, {hi}) is empty"));
        }
        if baseline_subtract && hi > self.gas_release_time {
            return config(format!(
                "baseline window [{lo}, {hi}) extends past gas release at {} s",
                self.gas_release_time
            ));
        }

        Ok(ResolvedConfig {
            protocol: p,
            train_time: self.train_time,
            test_time,
            occlusion_fraction,
            occlusion_range: self.occlusion.range,
            baseline_subtract,
            baseline_window: self.baseline_window,
            occlusions_per_gas: self.occlusions_per_gas,
            train_repetition: self.train_repetition,
            test_repetition,
            denoiser: self.denoiser,
            threshold: self.threshold,
            cycles: self.cycles,
            seed: self.seed,
            gas_release_time: self.gas_release_time,
            num_bins: self.encoder.num_bins,
            weight_mode: self.weight_mode,
            condition: self.condition.clone(),
            gases: self.gases.clone(),
        })
    }
}

/// A [`ProtocolConfig`] with every default materialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub protocol: Protocol,
    pub train_time: f64,
    pub test_time: f64,
    pub occlusion_fraction: f64,
    pub occlusion_range: OcclusionRange,
    pub baseline_subtract: bool,
    pub baseline_window: (f64, f64),
    pub occlusions_per_gas: usize,
    pub train_repetition: u32,
    pub test_repetition: u32,
    pub denoiser: DenoiserChoice,
    pub threshold: f64,
    pub cycles: usize,
    pub seed: u64,
    pub gas_release_time: f64,
    pub num_bins: usize,
    pub weight_mode: WeightMode,
    pub condition: ConditionFilter,
    pub gases: Option<Vec<String>>,
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("no trial for gas {gas:?} repetition {repetition} under the selected condition")]
    MissingTrial { gas: String, repetition: u32 },
    #[error("no gases match the selected condition")]
    NoGases,
    #[error("gas {gas:?} has {found} repetition(s), the drift probe needs at least 2")]
    InsufficientRepetitions { gas: String, found: usize },
    #[error("empty experiment result")]
    EmptyResult,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Occlusion(#[from] OcclusionError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("output: {0}")]
    Output(String),
}

impl HarnessError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            HarnessError::Config(_) => ErrorKind::Config,
            HarnessError::MissingTrial { .. }
            | HarnessError::NoGases
            | HarnessError::InsufficientRepetitions { .. }
            | HarnessError::Dataset(_) => ErrorKind::Data,
            _ => ErrorKind::Internal,
        }
    }
}
