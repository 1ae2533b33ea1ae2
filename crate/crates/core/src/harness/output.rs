//! Plot-ready CSV writers.
//!
//! Results CSV (`olfbench-results/1`), one row per sample, denoiser, cycle
//! and stored gas:
//!
//! | column     | meaning                                                    |
//! |------------|------------------------------------------------------------|
//! | protocol   | protocol name                                              |
//! | gas_truth  | gas of the test sample                                     |
//! | sample_idx | test sample index (gas-major, occlusion-minor)             |
//! | cycle      | gamma cycle, from 1 (always 1 for the hash table)          |
//! | stored_gas | stored gas the Jaccard is measured against                 |
//! | jaccard    | Jaccard of the cycle's state vs the stored code, 6 d.p.    |
//! | predicted  | gas predicted by the denoiser for this sample              |
//! | denoiser   | `attractor` or `hashtable`                                 |
//! | recognised | whether the prediction's Jaccard reached the threshold     |

use std::io::Write;

use super::probe::ProbeReport;
use super::protocol::ExperimentResult;
use super::HarnessError;

pub const RESULTS_SCHEMA: &str = "olfbench-results/1";
pub const SUMMARY_SCHEMA: &str = "olfbench-summary/1";

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Output(e.to_string())
}

pub fn write_results_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "protocol",
        "gas_truth",
        "sample_idx",
        "cycle",
        "stored_gas",
        "jaccard",
        "predicted",
        "denoiser",
        "recognised",
    ])
    .map_err(csv_err)?;
    let protocol = result.config.protocol.name();
    let mut row = |s: &super::SampleResult,
                   cycle: usize,
                   stored: &str,
                   j: f64,
                   predicted: &str,
                   denoiser: &str,
                   recognised: bool| {
        w.write_record([
            protocol,
            &s.gas_truth,
            &s.sample_idx.to_string(),
            &cycle.to_string(),
            stored,
            &format!("{j:.6}"),
            predicted,
            denoiser,
            if recognised { "true" } else { "false" },
        ])
        .map_err(csv_err)
    };
    for s in &result.samples {
        if let Some(a) = &s.attractor {
            for (ci, cycle) in a.trajectory.iter().enumerate() {
                for (gas, &j) in result.stored_gases.iter().zip(cycle) {
                    row(s, ci + 1, gas, j, &a.predicted, "attractor", a.recognised)?;
                }
            }
        }
        if let Some(h) = &s.hashtable {
            for (gas, &j) in result.stored_gases.iter().zip(&h.jaccard) {
                row(s, 1, gas, j, &h.predicted, "hashtable", h.recognised)?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

/// Columns: gas_truth, repetition, predicted, nearest_repetition, distance.
pub fn write_probe_csv<W: Write>(report: &ProbeReport, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "gas_truth",
        "repetition",
        "predicted",
        "nearest_repetition",
        "distance",
    ])
    .map_err(csv_err)?;
    for p in &report.predictions {
        w.write_record([
            p.gas_truth.as_str(),
            &p.repetition.to_string(),
            &p.predicted,
            &p.nearest_repetition.to_string(),
            &format!("{:.6}", p.distance),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}
