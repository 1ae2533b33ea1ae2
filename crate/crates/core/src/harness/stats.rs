use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::output::SUMMARY_SCHEMA;
use super::protocol::ExperimentResult;
use super::{Denoiser, HarnessError, ResolvedConfig};

/// Quantile by linear interpolation between closest ranks (R type 7).
/// Returns `None` for an empty slice.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(sorted_quantile(&v, p))
}

fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardCell {
    pub target_gas: String,
    pub stored_gas: String,
    pub cycle: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub train_ns: Option<u64>,
    pub inference_mean_ns: f64,
    pub inference_median_ns: f64,
    pub inference_total_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSummary {
    pub denoiser: Denoiser,
    pub accuracy: f64,
    pub recognised_rate: f64,
    pub cells: Vec<JaccardCell>,
    pub timing: TimingSummary,
}

impl DenoiserSummary {
    pub fn cell(&self, target: &str, stored: &str, cycle: usize) -> Option<&JaccardCell> {
        self.cells
            .iter()
            .find(|c| c.target_gas == target && c.stored_gas == stored && c.cycle == cycle)
    }

    pub fn final_cycle(&self) -> usize {
        self.cells.iter().map(|c| c.cycle).max().unwrap_or(0)
    }

    /// Final-cycle median Jaccard of `target` samples against `target`'s stored code.
    pub fn correct_median(&self, target: &str) -> Option<f64> {
        self.cell(target, target, self.final_cycle()).map(|c| c.median)
    }

    /// Highest final-cycle median of `target` samples against any other stored gas.
    pub fn best_wrong_median(&self, target: &str) -> Option<f64> {
        let last = self.final_cycle();
        self.cells
            .iter()
            .filter(|c| c.target_gas == target && c.stored_gas != target && c.cycle == last)
            .map(|c| c.median)
            .max_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub schema: String,
    pub config: ResolvedConfig,
    pub stored_gases: Vec<String>,
    pub num_samples: usize,
    pub denoisers: Vec<DenoiserSummary>,
}

impl SummaryStats {
    pub fn denoiser(&self, which: Denoiser) -> Option<&DenoiserSummary> {
        self.denoisers.iter().find(|d| d.denoiser == which)
    }
}

struct Row<'a> {
    truth: &'a str,
    predicted: &'a str,
    recognised: bool,
    trajectory: Vec<&'a [f64]>,
    inference_ns: u64,
}

fn summarize_denoiser(
    denoiser: Denoiser,
    stored: &[String],
    rows: &[Row<'_>],
    train_ns: Option<u64>,
) -> DenoiserSummary {
    let mut groups: BTreeMap<(&str, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        for (ci, cycle) in r.trajectory.iter().enumerate() {
            for (si, &j) in cycle.iter().enumerate() {
                groups.entry((r.truth, si, ci + 1)).or_default().push(j);
            }
        }
    }
    let cells = groups
        .into_iter()
        .map(|((target, si, cycle), mut values)| {
            values.sort_by(f64::total_cmp);
            JaccardCell {
                target_gas: target.to_string(),
                stored_gas: stored[si].clone(),
                cycle,
                median: sorted_quantile(&values, 0.5),
                q25: sorted_quantile(&values, 0.25),
                q75: sorted_quantile(&values, 0.75),
                n: values.len(),
            }
        })
        .collect();
    let n = rows.len() as f64;
    let mut ns: Vec<u64> = rows.iter().map(|r| r.inference_ns).collect();
    ns.sort_unstable();
    let total: u64 = ns.iter().sum();
    let median = if ns.is_empty() {
        0.0
    } else if ns.len() % 2 == 1 {
        ns[ns.len() / 2] as f64
    } else {
        (ns[ns.len() / 2 - 1] as f64 + ns[ns.len() / 2] as f64) / 2.0
    };
    DenoiserSummary {
        denoiser,
        accuracy: rows.iter().filter(|r| r.predicted == r.truth).count() as f64 / n,
        recognised_rate: rows.iter().filter(|r| r.recognised).count() as f64 / n,
        cells,
        timing: TimingSummary {
            train_ns,
            inference_mean_ns: total as f64 / n,
            inference_median_ns: median,
            inference_total_ns: total,
        },
    }
}

/// Median/IQR per (target gas, stored gas, cycle) and accuracy per denoiser.
pub fn summarize(result: &ExperimentResult) -> Result<SummaryStats, HarnessError> {
    if result.samples.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    let mut denoisers = Vec::new();
    let attractor: Option<Vec<Row>> = result
        .samples
        .iter()
        .map(|s| {
            s.attractor.as_ref().map(|a| Row {
                truth: &s.gas_truth,
                predicted: &a.predicted,
                recognised: a.recognised,
                trajectory: a.trajectory.iter().map(Vec::as_slice).collect(),
                inference_ns: a.inference_ns,
            })
        })
        .collect();
    if let Some(rows) = attractor {
        denoisers.push(summarize_denoiser(
            Denoiser::Attractor,
            &result.stored_gases,
            &rows,
            result.train_timing.attractor_ns,
        ));
    }
    let hashtable: Option<Vec<Row>> = result
        .samples
        .iter()
        .map(|s| {
            s.hashtable.as_ref().map(|h| Row {
                truth: &s.gas_truth,
                predicted: &h.predicted,
                recognised: h.recognised,
                trajectory: vec![h.jaccard.as_slice()],
                inference_ns: h.inference_ns,
            })
        })
        .collect();
    if let Some(rows) = hashtable {
        denoisers.push(summarize_denoiser(
            Denoiser::Hashtable,
            &result.stored_gases,
            &rows,
            result.train_timing.hashtable_ns,
        ));
    }
    Ok(SummaryStats {
        schema: SUMMARY_SCHEMA.into(),
        config: result.config.clone(),
        stored_gases: result.stored_gases.clone(),
        num_samples: result.samples.len(),
        denoisers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        // mean of the 5th and 6th order statistics
        assert!((quantile(&v, 0.5).unwrap() - 0.55).abs() < 1e-12);
        // h = 9 * 0.25 = 2.25 -> 0.3 + 0.25 * 0.1
        assert!((quantile(&v, 0.25).unwrap() - 0.325).abs() < 1e-12);
        assert!((quantile(&v, 0.75).unwrap() - 0.775).abs() < 1e-12);
        assert_eq!(quantile(&[0.4], 0.5), Some(0.4));
        assert_eq!(quantile(&[], 0.5), None);
        let shuffled = [0.7, 0.1, 1.0, 0.4, 0.2, 0.9, 0.3, 0.6, 0.8, 0.5];
        assert_eq!(quantile(&shuffled, 0.5), quantile(&v, 0.5));
    }

    #[test]
    fn constant_values_have_zero_width() {
        let v = [1.0; 10];
        assert_eq!(quantile(&v, 0.25), Some(1.0));
        assert_eq!(quantile(&v, 0.75), Some(1.0));
    }
}
