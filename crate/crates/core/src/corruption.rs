//! Impulse-noise occlusion: a fixed fraction of channels is overwritten with
//! uniform draws from each channel's range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::EncoderConfig;
use crate::dataset::{SampleVector, NUM_CHANNELS};

#[derive(Debug, Error, PartialEq)]
pub enum OcclusionError {
    #[error("sample already carries an occlusion mask of {0} channels")]
    AlreadyOccluded(usize),
    #[error("occlusion fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("need {NUM_CHANNELS} value ranges with lo <= hi, got {0}")]
    InvalidRanges(String),
}

/// Where replacement values are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionRange {
    /// Each channel's own training range.
    #[default]
    PerChannel,
    /// The union of all channels' training ranges.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionSpec {
    pub fraction: f64,
    pub value_ranges: Vec<(f64, f64)>,
    pub seed: u64,
}

impl OcclusionSpec {
    pub fn from_encoder(fraction: f64, encoder: &EncoderConfig, mode: OcclusionRange, seed: u64) -> Self {
        let ranges = encoder.ranges();
        let value_ranges = match mode {
            OcclusionRange::PerChannel => ranges.to_vec(),
            OcclusionRange::Global => {
                let lo = ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
                let hi = ranges.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
                vec![(lo, hi); ranges.len()]
            }
        };
        Self {
            fraction,
            value_ranges,
            seed,
        }
    }

    /// Number of occluded channels: `fraction × 72` rounded half up.
    pub fn count(&self) -> usize {
        occluded_count(self.fraction)
    }

    fn validate(&self) -> Result<(), OcclusionError> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(OcclusionError::InvalidFraction(self.fraction));
        }
        if self.value_ranges.len() != NUM_CHANNELS {
            return Err(OcclusionError::InvalidRanges(format!(
                "{} ranges",
                self.value_ranges.len()
            )));
        }
        if let Some((c, r)) = self
            .value_ranges
            .iter()
            .enumerate()
            .find(|(_, (lo, hi))| !(lo <= hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(OcclusionError::InvalidRanges(format!("channel {c}: {r:?}")));
        }
        Ok(())
    }
}

pub fn occluded_count(fraction: f64) -> usize {
    (fraction * NUM_CHANNELS as f64 + 0.5).floor() as usize
}

/// Replaces `spec.count()` channels, chosen uniformly without replacement,
/// with uniform draws from their value ranges. Untouched channels keep their
/// exact bits.
pub fn occlude(sample: &SampleVector, spec: &OcclusionSpec) -> Result<SampleVector, OcclusionError> {
    if !sample.is_clean() {
        return Err(OcclusionError::AlreadyOccluded(sample.occluded_channels.len()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = sample.clone();
    for c in rand::seq::index::sample(&mut rng, NUM_CHANNELS, spec.count()) {
        let (lo, hi) = spec.value_ranges[c];
        out.values[c] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        out.occluded_channels.insert(c);
    }
    Ok(out)
}
