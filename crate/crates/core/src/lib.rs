//! Benchmark library for one-shot odour learning on metal-oxide gas-sensor
//! recordings.
//!
//! The pipeline has four stages:
//!
//! - [`dataset`]: ingest wind-tunnel trials (or generate a drift-aware
//!   synthetic corpus), sample single time points and subtract baselines.
//! - [`coding`]: quantise 72-channel samples into one-spike-per-channel
//!   gamma-phase codes and compare them with the Jaccard coefficient.
//! - [`corruption`]: impulse-noise occlusion of analog samples.
//! - [`attractor`] and [`hash_table`]: the two denoisers under comparison.
//!
//! [`harness`] drives the evaluation protocols, the runtime benchmark and the
//! pre-stimulus drift probe, and writes plot-ready CSV/JSON.

// `!(a < b)` is used on purpose throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod coding;
pub mod corruption;
pub mod dataset;
pub mod harness;
pub mod hash_table;
pub mod snapshot;

pub use attractor::{AttractorMemory, Classification, RecallTrace, WeightMode};
pub use coding::{jaccard, EncoderConfig, OdourCode};
pub use corruption::{occlude, OcclusionRange, OcclusionSpec};
pub use dataset::{
    DatasetManifest, FormatConfig, ManifestEntry, SampleVector, SyntheticSpec, TrialRecord, NUM_CHANNELS,
};
pub use harness::{DenoiserChoice, ExperimentResult, Protocol, ProtocolConfig, SummaryStats};
pub use hash_table::{CodeTable, Denoised};
