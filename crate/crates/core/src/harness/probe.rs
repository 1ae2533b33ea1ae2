use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dataset::{ConditionFilter, DatasetManifest, ManifestEntry, NUM_CHANNELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub probe_time: f64,
    pub gas_release_time: f64,
    pub condition: ConditionFilter,
    pub gases: Option<Vec<String>>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            probe_time: 15.0,
            gas_release_time: 20.0,
            condition: ConditionFilter::default(),
            gases: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePrediction {
    pub gas_truth: String,
    pub repetition: u32,
    pub predicted: String,
    pub nearest_repetition: u32,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub config: ProbeConfig,
    pub accuracy: f64,
    pub num_train: usize,
    pub num_test: usize,
    pub predictions: Vec<ProbePrediction>,
}

/// Classifies pre-release samples by their nearest neighbour (Euclidean, raw
/// channel values). Each gas's repetitions, sorted by index, alternate
/// between the training set (even positions) and the test set (odd).
///
/// Accuracy above chance means the samples carry label information that
/// cannot come from the gas itself.
pub fn drift_probe(manifest: &DatasetManifest, cfg: &ProbeConfig) -> Result<ProbeReport, HarnessError> {
    if !(cfg.probe_time < cfg.gas_release_time) {
        return Err(HarnessError::Config(format!(
            "probe time {} s is not before gas release at {} s",
            cfg.probe_time, cfg.gas_release_time
        )));
    }
    let gases = match &cfg.gases {
        Some(g) => g.clone(),
        None => manifest.gases(&cfg.condition),
    };
    if gases.is_empty() {
        return Err(HarnessError::NoGases);
    }

    let mut train: Vec<&ManifestEntry> = Vec::new();
    let mut test: Vec<&ManifestEntry> = Vec::new();
    for gas in &gases {
        let mut reps: Vec<&ManifestEntry> = manifest
            .select(&cfg.condition)
            .filter(|e| &e.meta.gas_label == gas)
            .collect();
        if reps.len() < 2 {
            return Err(HarnessError::InsufficientRepetitions {
                gas: gas.clone(),
                found: reps.len(),
            });
        }
        reps.sort_by_key(|e| e.meta.repetition);
        for (i, e) in reps.into_iter().enumerate() {
            if i % 2 == 0 {
                train.push(e);
            } else {
                test.push(e);
            }
        }
    }

    let load = |entries: &[&ManifestEntry]| -> Result<Vec<[f64; NUM_CHANNELS]>, HarnessError> {
        entries
            .par_iter()
            .map(|e| Ok(manifest.load(e)?.sample_at(cfg.probe_time)?.values))
            .collect()
    };
    let train_x = load(&train)?;
    let test_x = load(&test)?;

    let predictions: Vec<ProbePrediction> = test
        .par_iter()
        .zip(&test_x)
        .map(|(entry, x)| {
            let mut best = (0usize, f64::INFINITY);
            for (i, t) in train_x.iter().enumerate() {
                let d: f64 = x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            ProbePrediction {
                gas_truth: entry.meta.gas_label.clone(),
                repetition: entry.meta.repetition,
                predicted: train[best.0].meta.gas_label.clone(),
                nearest_repetition: train[best.0].meta.repetition,
                distance: best.1.sqrt(),
            }
        })
        .collect();
    let correct = predictions.iter().filter(|p| p.predicted == p.gas_truth).count();
    Ok(ProbeReport {
        config: cfg.clone(),
        accuracy: correct as f64 / predictions.len() as f64,
        num_train: train.len(),
        num_test: predictions.len(),
        predictions,
    })
}
