use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{load_trial, FormatConfig};
use super::{DatasetError, TrialRecord};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Acquisition metadata shared by manifest entries and loaded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub gas_label: String,
    pub repetition: u32,
    /// UTC seconds.
    pub acquired_at: i64,
    pub location: String,
    /// m/s
    pub airflow: f64,
    /// volts
    pub heater_voltage: f64,
}

impl TrialMeta {
    pub(crate) fn condition(&self) -> String {
        format!(
            "location {}, airflow {} m/s, heater {} V",
            self.location, self.airflow, self.heater_voltage
        )
    }

    fn key(&self) -> (String, u32, String, u64, u64) {
        (
            self.gas_label.clone(),
            self.repetition,
            self.location.clone(),
            self.airflow.to_bits(),
            self.heater_voltage.to_bits(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest root.
    pub path: PathBuf,
    #[serde(flatten)]
    pub meta: TrialMeta,
}

/// Acquisition condition a protocol draws its trials from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionFilter {
    pub location: Option<String>,
    pub airflow: Option<f64>,
    pub heater_voltage: Option<f64>,
}

impl Default for ConditionFilter {
    fn default() -> Self {
        Self {
            location: Some("P4".into()),
            airflow: Some(0.21),
            heater_voltage: Some(5.0),
        }
    }
}

impl ConditionFilter {
    pub fn any() -> Self {
        Self {
            location: None,
            airflow: None,
            heater_voltage: None,
        }
    }

    pub fn matches(&self, meta: &TrialMeta) -> bool {
        const TOL: f64 = 1e-9;
        self.location.as_ref().is_none_or(|l| *l == meta.location)
            && self.airflow.is_none_or(|a| (a - meta.airflow).abs() <= TOL)
            && self
                .heater_voltage
                .is_none_or(|v| (v - meta.heater_voltage).abs() <= TOL)
    }
}

/// Index of the trials available under one corpus root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub root: PathBuf,
    pub format: FormatConfig,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Builds a manifest, rejecting duplicate (gas, repetition, condition) keys.
    pub fn new(
        root: PathBuf,
        format: FormatConfig,
        mut entries: Vec<ManifestEntry>,
    ) -> Result<Self, DatasetError> {
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let mut seen: BTreeMap<_, &PathBuf> = BTreeMap::new();
        for e in &entries {
            if let Some(first) = seen.insert(e.meta.key(), &e.path) {
                return Err(DatasetError::DuplicateKey {
                    gas: e.meta.gas_label.clone(),
                    repetition: e.meta.repetition,
                    condition: e.meta.condition(),
                    first: first.clone(),
                    second: e.path.clone(),
                });
            }
        }
        Ok(Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            root,
            format,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn path_of(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn load(&self, entry: &ManifestEntry) -> Result<TrialRecord, DatasetError> {
        load_trial(&self.path_of(entry), &entry.meta, &self.format)
    }

    /// Entries matching `filter`, in manifest order.
    pub fn select<'a>(&'a self, filter: &'a ConditionFilter) -> impl Iterator<Item = &'a ManifestEntry> {
        self.entries.iter().filter(move |e| filter.matches(&e.meta))
    }

    pub fn find(&self, filter: &ConditionFilter, gas: &str, repetition: u32) -> Option<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| filter.matches(&e.meta) && e.meta.gas_label == gas && e.meta.repetition == repetition)
    }

    /// Sorted gas labels present under `filter`.
    pub fn gases(&self, filter: &ConditionFilter) -> Vec<String> {
        let mut gases: Vec<String> = self.select(filter).map(|e| e.meta.gas_label.clone()).collect();
        gases.sort();
        gases.dedup();
        gases
    }

    /// Repetition count per gas over all conditions.
    pub fn repetition_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.meta.gas_label.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Entries ordered by acquisition time, for timeline export.
    pub fn timeline(&self) -> Vec<&ManifestEntry> {
        let mut v: Vec<&ManifestEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            a.meta
                .acquired_at
                .cmp(&b.meta.acquired_at)
                .then_with(|| a.path.cmp(&b.path))
        });
        v
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: Self = serde_json::from_str(&text)?;
        if manifest.root.is_relative() {
            if let Some(dir) = path.parent() {
                manifest.root = dir.join(&manifest.root);
            }
        }
        Self::new(manifest.root, manifest.format, manifest.entries)
    }
}
