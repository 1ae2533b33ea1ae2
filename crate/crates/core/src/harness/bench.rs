use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::protocol::{prepare, train_attractor, train_table, Prepared};
use super::{Denoiser, HarnessError, ProtocolConfig, ResolvedConfig};
use crate::dataset::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSettings {
    pub repeat_train: usize,
    pub repeat_infer: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            repeat_train: 10,
            repeat_infer: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub denoiser: Denoiser,
    /// Mean wall time of one full training run (all stored gases).
    pub train_mean_ns: f64,
    /// Mean wall time of one inference.
    pub infer_mean_ns: f64,
    pub total_mean_ns: f64,
    /// Elementary operations of one training run.
    pub train_ops: u64,
    /// Elementary operations of one inference.
    pub infer_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ResolvedConfig,
    pub settings: BenchSettings,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, which: Denoiser) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.denoiser == which)
    }
}

fn mean_ns<T>(
    repeats: usize,
    mut f: impl FnMut(usize) -> Result<T, HarnessError>,
) -> Result<f64, HarnessError> {
    // warm-up, discarded
    black_box(f(0)?);
    let start = Instant::now();
    for i in 0..repeats {
        black_box(f(i)?);
    }
    Ok(start.elapsed().as_nanos() as f64 / repeats as f64)
}

fn bench_attractor(prep: &Prepared, s: &BenchSettings) -> Result<BenchRow, HarnessError> {
    let train_mean_ns = mean_ns(s.repeat_train, |_| train_attractor(prep))?;
    let memory = train_attractor(prep)?;
    let cycles = prep.config.cycles;
    let infer_mean_ns = mean_ns(s.repeat_infer, |i| {
        let input = &prep.tests[i % prep.tests.len()].code;
        let trace = memory.recall(black_box(input), cycles)?;
        Ok(memory.classify_trace(&trace, input, prep.config.threshold)?)
    })?;
    Ok(BenchRow {
        denoiser: Denoiser::Attractor,
        train_mean_ns,
        infer_mean_ns,
        total_mean_ns: train_mean_ns + infer_mean_ns,
        train_ops: memory.learn_ops() * prep.gases.len() as u64,
        infer_ops: memory.recall_ops(cycles),
    })
}

fn bench_table(prep: &Prepared, s: &BenchSettings) -> Result<BenchRow, HarnessError> {
    let train_mean_ns = mean_ns(s.repeat_train, |_| train_table(prep))?;
    let table = train_table(prep)?;
    let infer_mean_ns = mean_ns(s.repeat_infer, |i| {
        let input = &prep.tests[i % prep.tests.len()].code;
        Ok(table.denoise(black_box(input.bins()))?.index)
    })?;
    Ok(BenchRow {
        denoiser: Denoiser::Hashtable,
        train_mean_ns,
        infer_mean_ns,
        total_mean_ns: train_mean_ns + infer_mean_ns,
        train_ops: prep.train_codes.iter().map(|c| c.num_channels() as u64).sum(),
        infer_ops: table.denoise_ops(),
    })
}

/// Times training and inference of the selected denoisers on the inputs of
/// the configured protocol. Each measurement is preceded by one discarded
/// warm-up call. Operation counts depend only on the configuration.
pub fn bench_runtime(
    cfg: &ProtocolConfig,
    manifest: &DatasetManifest,
    settings: &BenchSettings,
) -> Result<BenchReport, HarnessError> {
    if settings.repeat_train == 0 || settings.repeat_infer == 0 {
        return Err(HarnessError::Config(
            "benchmark repeat counts must be >= 1".into(),
        ));
    }
    let prep = prepare(cfg, manifest)?;
    let mut rows = Vec::new();
    if prep.config.denoiser.attractor() {
        rows.push(bench_attractor(&prep, settings)?);
    }
    if prep.config.denoiser.hashtable() {
        rows.push(bench_table(&prep, settings)?);
    }
    Ok(BenchReport {
        config: prep.config.clone(),
        settings: *settings,
        rows,
    })
}
