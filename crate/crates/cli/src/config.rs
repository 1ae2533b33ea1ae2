use std::path::{Path, PathBuf};

use olfbench_core::dataset::{FormatConfig, SyntheticSpec};
use olfbench_core::ProtocolConfig;
use serde::{Deserialize, Serialize};

/// Where a run's trials come from. Exactly one of `manifest`, `root` or the
/// top-level `synthetic` section must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Manifest written by `olfbench ingest` or `olfbench synth`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Corpus directory, indexed on the fly with `format`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub dataset: DatasetSection,
    /// Generate a corpus with this spec under `<out>/corpus` before running.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    pub protocol: ProtocolConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Manifest(PathBuf),
    Root(PathBuf, FormatConfig),
    Synthetic(SyntheticSpec),
}

impl RunConfigFile {
    /// Template printed by `config show-defaults`: synthetic corpus with
    /// every protocol default materialised.
    pub fn defaults() -> Self {
        Self {
            dataset: DatasetSection::default(),
            synthetic: Some(SyntheticSpec::default()),
            protocol: ProtocolConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Relative dataset paths resolve against `base`, the config file's directory.
    pub fn source(&self, base: &Path) -> Result<DataSource, String> {
        let d = &self.dataset;
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        match (&d.manifest, &d.root, &self.synthetic) {
            (Some(m), None, None) => {
                if d.format.is_some() {
                    return Err("dataset.format applies to dataset.root, not dataset.manifest".into());
                }
                Ok(DataSource::Manifest(resolve(m)))
            }
            (None, Some(r), None) => Ok(DataSource::Root(resolve(r), d.format.clone().unwrap_or_default())),
            (None, None, Some(s)) => {
                if d.format.is_some() {
                    return Err("dataset.format does not apply to a synthetic corpus".into());
                }
                Ok(DataSource::Synthetic(s.clone()))
            }
            (None, None, None) => Err("no dataset: set dataset.manifest, dataset.root or synthetic".into()),
            _ => Err("set only one of dataset.manifest, dataset.root and synthetic".into()),
        }
    }
}
