//! Gamma-phase spike codes: one spike per channel, its phase bin set by the
//! channel value's position in the training range.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataset::{SampleVector, NUM_CHANNELS};

pub const DEFAULT_NUM_BINS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum CodingError {
    #[error("encoder needs at least one training sample")]
    NoSamples,
    #[error("num_bins must be >= 2, got {0}")]
    TooFewBins(usize),
    #[error("code geometry mismatch: {left_channels}x{left_bins} vs {right_channels}x{right_bins}")]
    GeometryMismatch {
        left_channels: usize,
        left_bins: usize,
        right_channels: usize,
        right_bins: usize,
    },
    #[error("bin {bin} on channel {channel} outside 0..{num_bins}")]
    BinOutOfRange {
        channel: usize,
        bin: usize,
        num_bins: usize,
    },
    #[error("invalid code: {0}")]
    Invalid(String),
}

/// Per-channel value ranges and phase-bin count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    num_bins: usize,
    ranges: Vec<(f64, f64)>,
}

/// Half-width used to open up a degenerate (single-valued) channel range.
pub fn widening(v: f64) -> f64 {
    f64::max(1e-6, 1e-6 * v.abs())
}

impl EncoderConfig {
    /// Fits per-channel `[min, max]` over the training samples.
    pub fn fit(samples: &[SampleVector], num_bins: usize) -> Result<Self, CodingError> {
        if num_bins < 2 {
            return Err(CodingError::TooFewBins(num_bins));
        }
        let first = samples.first().ok_or(CodingError::NoSamples)?;
        let mut ranges: Vec<(f64, f64)> = first.values.iter().map(|&v| (v, v)).collect();
        for s in &samples[1..] {
            for ((lo, hi), &v) in ranges.iter_mut().zip(&s.values) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        for (lo, hi) in &mut ranges {
            if !(*hi > *lo) {
                let eps = widening(*lo);
                *lo -= eps;
                *hi += eps;
            }
        }
        Ok(Self { num_bins, ranges })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn bin(&self, channel: usize, value: f64) -> u16 {
        let (lo, hi) = self.ranges[channel];
        let b = (self.num_bins as f64 * (value - lo) / (hi - lo)).floor();
        // NaN casts to 0
        (b.max(0.0) as usize).min(self.num_bins - 1) as u16
    }

    pub fn encode(&self, sample: &SampleVector) -> OdourCode {
        self.encode_values(&sample.values)
    }

    pub fn encode_values(&self, values: &[f64; NUM_CHANNELS]) -> OdourCode {
        OdourCode {
            num_bins: self.num_bins,
            bins: values.iter().enumerate().map(|(c, &v)| self.bin(c, v)).collect(),
        }
    }
}

/// The active (channel, phase bin) units of one gamma cycle, exactly one per
/// channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OdourCode {
    num_bins: usize,
    bins: Vec<u16>,
}

impl OdourCode {
    pub fn new(bins: Vec<u16>, num_bins: usize) -> Result<Self, CodingError> {
        if num_bins < 2 {
            return Err(CodingError::TooFewBins(num_bins));
        }
        if let Some((channel, &bin)) = bins.iter().enumerate().find(|(_, &b)| b as usize >= num_bins) {
            return Err(CodingError::BinOutOfRange {
                channel,
                bin: bin as usize,
                num_bins,
            });
        }
        Ok(Self { num_bins, bins })
    }

    pub fn num_channels(&self) -> usize {
        self.bins.len()
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn bins(&self) -> &[u16] {
        &self.bins
    }

    pub fn bin(&self, channel: usize) -> usize {
        self.bins[channel] as usize
    }

    pub(crate) fn set_bin(&mut self, channel: usize, bin: usize) {
        debug_assert!(bin < self.num_bins);
        self.bins[channel] = bin as u16;
    }

    /// Flat unit index of `channel`'s active unit.
    pub fn unit(&self, channel: usize) -> usize {
        channel * self.num_bins + self.bins[channel] as usize
    }

    pub fn active(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bins.iter().enumerate().map(|(c, &b)| (c, b as usize))
    }

    /// Number of channels whose bins agree.
    pub fn agreements(&self, other: &OdourCode) -> Result<usize, CodingError> {
        self.check_geometry(other)?;
        Ok(self.bins.iter().zip(&other.bins).filter(|(a, b)| a == b).count())
    }

    pub fn check_geometry(&self, other: &OdourCode) -> Result<(), CodingError> {
        if self.bins.len() != other.bins.len() || self.num_bins != other.num_bins {
            return Err(CodingError::GeometryMismatch {
                left_channels: self.bins.len(),
                left_bins: self.num_bins,
                right_channels: other.bins.len(),
                right_bins: other.num_bins,
            });
        }
        Ok(())
    }
}

/// Jaccard coefficient between the active-unit sets of two codes.
///
/// Both codes carry one unit per channel, so with `k` agreeing channels out
/// of `n` the intersection is `k` and the union `2n - k`.
pub fn jaccard(a: &OdourCode, b: &OdourCode) -> Result<f64, CodingError> {
    let k = a.agreements(b)?;
    let n = a.num_channels();
    if n == 0 {
        return Ok(1.0);
    }
    Ok(k as f64 / (2 * n - k) as f64)
}

#[derive(Serialize, Deserialize)]
struct CodeRepr {
    num_bins: usize,
    active: Vec<[usize; 2]>,
}

impl Serialize for OdourCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CodeRepr {
            num_bins: self.num_bins,
            active: self.active().map(|(c, b)| [c, b]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OdourCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CodeRepr::deserialize(d)?;
        let mut bins = vec![u16::MAX; repr.active.len()];
        for [c, b] in repr.active {
            let slot = bins
                .get_mut(c)
                .ok_or_else(|| D::Error::custom(format!("channel {c} out of range")))?;
            if *slot != u16::MAX {
                return Err(D::Error::custom(format!("channel {c} active twice")));
            }
            *slot = u16::try_from(b).map_err(D::Error::custom)?;
        }
        OdourCode::new(bins, repr.num_bins).map_err(D::Error::custom)
    }
}
