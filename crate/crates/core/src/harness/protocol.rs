use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probe::{drift_probe, ProbeConfig, ProbeReport};
use super::{Denoiser, HarnessError, Protocol, ProtocolConfig, ResolvedConfig};
use crate::attractor::AttractorMemory;
use crate::coding::{jaccard, EncoderConfig, OdourCode};
use crate::corruption::{occlude, OcclusionSpec};
use crate::dataset::{subtract_baseline, DatasetManifest, SampleVector, TrialRecord, NUM_CHANNELS};
use crate::hash_table::CodeTable;
use crate::snapshot::Snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorOutcome {
    /// `[cycle][stored gas]` Jaccard, cycles 1..=N.
    pub trajectory: Vec<Vec<f64>>,
    pub predicted: String,
    pub score: f64,
    pub recognised: bool,
    pub inference_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashOutcome {
    pub index: usize,
    pub predicted: String,
    pub overlap: usize,
    /// Jaccard of the returned representation against each stored gas.
    pub jaccard: Vec<f64>,
    pub score: f64,
    pub recognised: bool,
    pub inference_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample_idx: usize,
    pub gas_truth: String,
    pub test_repetition: u32,
    pub occlusion_seed: u64,
    pub occluded_channels: Vec<usize>,
    pub input_code: OdourCode,
    pub attractor: Option<AttractorOutcome>,
    pub hashtable: Option<HashOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTiming {
    pub attractor_ns: Option<u64>,
    pub hashtable_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ResolvedConfig,
    pub stored_gases: Vec<String>,
    pub encoder: EncoderConfig,
    pub train_timing: TrainTiming,
    pub samples: Vec<SampleResult>,
}

impl ExperimentResult {
    pub fn attractor_accuracy(&self) -> Option<f64> {
        accuracy(
            self.samples
                .iter()
                .map(|s| s.attractor.as_ref().map(|a| a.predicted == s.gas_truth)),
        )
    }

    pub fn hashtable_accuracy(&self) -> Option<f64> {
        accuracy(
            self.samples
                .iter()
                .map(|s| s.hashtable.as_ref().map(|h| h.predicted == s.gas_truth)),
        )
    }
}

fn accuracy(hits: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let mut n = 0usize;
    let mut ok = 0usize;
    for h in hits {
        let h = h?;
        n += 1;
        ok += h as usize;
    }
    (n > 0).then(|| ok as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Experiment(ExperimentResult),
    Probe(ProbeReport),
}

/// Inputs shared by protocol runs and the runtime benchmark.
pub(crate) struct Prepared {
    pub config: ResolvedConfig,
    pub gases: Vec<String>,
    pub encoder: EncoderConfig,
    pub train_codes: Vec<OdourCode>,
    pub tests: Vec<TestInput>,
}

pub(crate) struct TestInput {
    pub sample_idx: usize,
    pub gas: String,
    pub repetition: u32,
    pub occlusion_seed: u64,
    pub occluded_channels: Vec<usize>,
    pub code: OdourCode,
}

fn load_for(
    manifest: &DatasetManifest,
    cfg: &ResolvedConfig,
    gases: &[String],
    repetition: u32,
) -> Result<Vec<TrialRecord>, HarnessError> {
    gases
        .par_iter()
        .map(|gas| {
            let entry =
                manifest
                    .find(&cfg.condition, gas, repetition)
                    .ok_or_else(|| HarnessError::MissingTrial {
                        gas: gas.clone(),
                        repetition,
                    })?;
            Ok(manifest.load(entry)?)
        })
        .collect()
}

fn sample(trial: &TrialRecord, t: f64, cfg: &ResolvedConfig) -> Result<SampleVector, HarnessError> {
    let s = trial.sample_at(t)?;
    Ok(if cfg.baseline_subtract {
        subtract_baseline(trial, &s, cfg.baseline_window)?
    } else {
        s
    })
}

pub(crate) fn selected_gases(
    manifest: &DatasetManifest,
    cfg: &ResolvedConfig,
) -> Result<Vec<String>, HarnessError> {
    let gases = match &cfg.gases {
        Some(g) => g.clone(),
        None => manifest.gases(&cfg.condition),
    };
    if gases.is_empty() {
        return Err(HarnessError::NoGases);
    }
    Ok(gases)
}

pub(crate) fn prepare(cfg: &ProtocolConfig, manifest: &DatasetManifest) -> Result<Prepared, HarnessError> {
    let config = cfg.resolve()?;
    if config.protocol == Protocol::DriftProbe {
        return Err(HarnessError::Config(
            "drift_probe yields a probe report, not a denoising experiment".into(),
        ));
    }
    let gases = selected_gases(manifest, &config)?;
    let train_trials = load_for(manifest, &config, &gases, config.train_repetition)?;
    let test_trials = if config.test_repetition == config.train_repetition {
        None
    } else {
        Some(load_for(manifest, &config, &gases, config.test_repetition)?)
    };
    let test_trials = test_trials.as_ref().unwrap_or(&train_trials);

    let train_samples = train_trials
        .iter()
        .map(|t| sample(t, config.train_time, &config))
        .collect::<Result<Vec<_>, _>>()?;
    // fit on training samples only; test values clamp
    let encoder = EncoderConfig::fit(&train_samples, config.num_bins)?;
    let train_codes: Vec<OdourCode> = train_samples.iter().map(|s| encoder.encode(s)).collect();
    let test_bases = test_trials
        .iter()
        .map(|t| sample(t, config.test_time, &config))
        .collect::<Result<Vec<_>, _>>()?;

    let per_gas = config.occlusions_per_gas;
    let tests = (0..gases.len() * per_gas)
        .into_par_iter()
        .map(|sample_idx| {
            let base = &test_bases[sample_idx / per_gas];
            let occlusion_seed = config.seed.wrapping_add(sample_idx as u64);
            let spec = OcclusionSpec::from_encoder(
                config.occlusion_fraction,
                &encoder,
                config.occlusion_range,
                occlusion_seed,
            );
            let occluded = occlude(base, &spec)?;
            Ok(TestInput {
                sample_idx,
                gas: base.gas_label.clone(),
                repetition: base.repetition,
                occlusion_seed,
                occluded_channels: occluded.occluded_channels.iter().copied().collect(),
                code: encoder.encode(&occluded),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    Ok(Prepared {
        config,
        gases,
        encoder,
        train_codes,
        tests,
    })
}

pub(crate) fn train_attractor(prep: &Prepared) -> Result<AttractorMemory, HarnessError> {
    let mut memory = AttractorMemory::new(NUM_CHANNELS, prep.config.num_bins, prep.config.weight_mode);
    for (gas, code) in prep.gases.iter().zip(&prep.train_codes) {
        memory.learn_one_shot(gas, code)?;
    }
    Ok(memory)
}

pub(crate) fn train_table(prep: &Prepared) -> Result<CodeTable, HarnessError> {
    Ok(CodeTable::train(
        prep.gases
            .iter()
            .cloned()
            .zip(prep.train_codes.iter().map(|c| c.bins().to_vec())),
    )?)
}

fn elapsed_ns(start: Instant) -> u64 {
    start.elapsed().as_nanos().min(u64::MAX as u128) as u64
}

/// Runs one denoising protocol. Output is a deterministic function of
/// `(cfg, manifest)` apart from the recorded wall-clock timings.
pub fn run_protocol(
    cfg: &ProtocolConfig,
    manifest: &DatasetManifest,
) -> Result<ExperimentResult, HarnessError> {
    let prep = prepare(cfg, manifest)?;
    let config = &prep.config;

    let mut train_timing = TrainTiming::default();
    let memory = if config.denoiser.attractor() {
        let start = Instant::now();
        let m = train_attractor(&prep)?;
        train_timing.attractor_ns = Some(elapsed_ns(start));
        Some(m)
    } else {
        None
    };
    let table = if config.denoiser.hashtable() {
        let start = Instant::now();
        let t = train_table(&prep)?;
        train_timing.hashtable_ns = Some(elapsed_ns(start));
        Some(t)
    } else {
        None
    };

    let samples = prep
        .tests
        .par_iter()
        .map(|input| {
            let attractor = match &memory {
                Some(m) => {
                    let start = Instant::now();
                    let trace = m.recall(&input.code, config.cycles)?;
                    let class = m.classify_trace(&trace, &input.code, config.threshold)?;
                    let inference_ns = elapsed_ns(start);
                    Some(AttractorOutcome {
                        trajectory: trace.jaccard_matrix(),
                        predicted: class.label,
                        score: class.score,
                        recognised: class.recognised,
                        inference_ns,
                    })
                }
                None => None,
            };
            let hashtable = match &table {
                Some(t) => {
                    let start = Instant::now();
                    let d = t.denoise(input.code.bins())?;
                    let inference_ns = elapsed_ns(start);
                    let restored = OdourCode::new(d.representation.to_vec(), config.num_bins)?;
                    let jaccard = prep
                        .train_codes
                        .iter()
                        .map(|c| jaccard(&restored, c))
                        .collect::<Result<Vec<f64>, _>>()?;
                    let score = jaccard[d.index];
                    Some(HashOutcome {
                        index: d.index,
                        predicted: d.label.to_string(),
                        overlap: d.overlap,
                        jaccard,
                        score,
                        recognised: score >= config.threshold,
                        inference_ns,
                    })
                }
                None => None,
            };
            Ok(SampleResult {
                sample_idx: input.sample_idx,
                gas_truth: input.gas.clone(),
                test_repetition: input.repetition,
                occlusion_seed: input.occlusion_seed,
                occluded_channels: input.occluded_channels.clone(),
                input_code: input.code.clone(),
                attractor,
                hashtable,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    Ok(ExperimentResult {
        config: prep.config.clone(),
        stored_gases: prep.gases.clone(),
        encoder: prep.encoder.clone(),
        train_timing,
        samples,
    })
}

/// Runs any protocol, routing the drift probe to [`drift_probe`].
pub fn execute(cfg: &ProtocolConfig, manifest: &DatasetManifest) -> Result<RunOutcome, HarnessError> {
    if cfg.protocol == Protocol::DriftProbe {
        let r = cfg.resolve()?;
        let probe = ProbeConfig {
            probe_time: r.test_time,
            gas_release_time: r.gas_release_time,
            condition: r.condition,
            gases: r.gases,
        };
        return Ok(RunOutcome::Probe(drift_probe(manifest, &probe)?));
    }
    Ok(RunOutcome::Experiment(run_protocol(cfg, manifest)?))
}

/// Trains the configured denoisers and packages them as snapshots tagged
/// with the fitted encoder.
pub fn train_snapshots(
    cfg: &ProtocolConfig,
    manifest: &DatasetManifest,
) -> Result<Vec<(Denoiser, Snapshot)>, HarnessError> {
    let prep = prepare(cfg, manifest)?;
    let mut out = Vec::new();
    if prep.config.denoiser.attractor() {
        out.push((
            Denoiser::Attractor,
            Snapshot::attractor(&train_attractor(&prep)?, Some(&prep.encoder)),
        ));
    }
    if prep.config.denoiser.hashtable() {
        out.push((
            Denoiser::Hashtable,
            Snapshot::hashtable(&train_table(&prep)?, Some(&prep.encoder)),
        ));
    }
    Ok(out)
}
