use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::manifest::{DatasetManifest, ManifestEntry, TrialMeta};
use super::{DatasetError, TrialRecord, NUM_CHANNELS};

/// Metadata used when the file pattern does not capture a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetadataDefaults {
    pub location: String,
    pub airflow: f64,
    pub heater_voltage: f64,
}

impl Default for MetadataDefaults {
    fn default() -> Self {
        Self {
            location: "P4".into(),
            airflow: 0.21,
            heater_voltage: 5.0,
        }
    }
}

/// Layout of trial files and the rules for reading metadata off their paths.
///
/// `file_pattern` is a regex matched against the path relative to the corpus
/// root (always `/`-separated). Recognised named groups: `gas` (required),
/// `rep`, `acquired_at`, `location`, `airflow`, `voltage`. When `rep` is
/// absent, repetitions are numbered by acquisition time within each
/// (gas, condition) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormatConfig {
    pub delimiter: char,
    pub has_header: bool,
    pub num_columns: usize,
    pub time_column: usize,
    /// Multiplier taking the time column to seconds.
    pub time_scale: f64,
    pub channel_columns: Vec<usize>,
    /// Only files with this extension are considered; `None` admits all.
    pub extension: Option<String>,
    pub file_pattern: String,
    /// chrono format for the `acquired_at` group; integer UTC seconds when unset.
    pub timestamp_format: Option<String>,
    /// Maps captured `airflow` text to m/s; the text is parsed as a number when empty.
    pub airflow_map: BTreeMap<String, f64>,
    /// Multiplier taking the captured `voltage` value to volts.
    pub voltage_scale: f64,
    pub defaults: MetadataDefaults,
}

impl Default for FormatConfig {
    /// The layout written by the synthetic generator.
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: true,
            num_columns: NUM_CHANNELS + 1,
            time_column: 0,
            time_scale: 1.0,
            channel_columns: (1..=NUM_CHANNELS).collect(),
            extension: Some("csv".into()),
            file_pattern: r"^(?P<gas>[^/]+)/(?P<location>[^_/]+)_(?P<airflow>[0-9.]+)ms_(?P<voltage>[0-9.]+)V_rep(?P<rep>\d+)_(?P<acquired_at>\d+)\.csv$".into(),
            timestamp_format: None,
            airflow_map: BTreeMap::new(),
            voltage_scale: 1.0,
            defaults: MetadataDefaults::default(),
        }
    }
}

impl FormatConfig {
    /// Layout of the public wind-tunnel corpus: tab-separated, no header,
    /// time in ms, temperature and humidity, then 72 sensor columns; files
    /// under `<Gas>_<conc>/<location>/` named
    /// `<yyyymmddHHMM>_board_setPoint_<V*100>V_fan_setPoint_<fan>_mfc_setPoint_...`.
    pub fn wind_tunnel() -> Self {
        let mut airflow_map = BTreeMap::new();
        airflow_map.insert("000".into(), 0.0);
        airflow_map.insert("060".into(), 0.1);
        airflow_map.insert("080".into(), 0.21);
        airflow_map.insert("100".into(), 0.34);
        Self {
            delimiter: '\t',
            has_header: false,
            num_columns: NUM_CHANNELS + 3,
            time_column: 0,
            time_scale: 1e-3,
            channel_columns: (3..NUM_CHANNELS + 3).collect(),
            extension: None,
            file_pattern: r"^(?P<gas>[A-Za-z]+)_[^/]*/(?P<location>[^/]+)/(?P<acquired_at>\d{12})_board_setPoint_(?P<voltage>\d+)V_fan_setPoint_(?P<airflow>\d+)_mfc_setPoint_[^/]*$".into(),
            timestamp_format: Some("%Y%m%d%H%M".into()),
            airflow_map,
            voltage_scale: 0.01,
            defaults: MetadataDefaults::default(),
        }
    }

    fn validate(&self) -> Result<Regex, DatasetError> {
        if self.channel_columns.len() != NUM_CHANNELS {
            return Err(DatasetError::Format(format!(
                "{} channel columns configured, need {NUM_CHANNELS}",
                self.channel_columns.len()
            )));
        }
        let max_col = self
            .channel_columns
            .iter()
            .chain(std::iter::once(&self.time_column))
            .max()
            .copied()
            .unwrap_or(0);
        if max_col >= self.num_columns {
            return Err(DatasetError::Format(format!(
                "column {max_col} referenced but rows have {} columns",
                self.num_columns
            )));
        }
        if !self.delimiter.is_ascii() {
            return Err(DatasetError::Format("delimiter must be ASCII".into()));
        }
        let re =
            Regex::new(&self.file_pattern).map_err(|e| DatasetError::Format(format!("file_pattern: {e}")))?;
        if !re.capture_names().flatten().any(|n| n == "gas") {
            return Err(DatasetError::Format("file_pattern needs a `gas` group".into()));
        }
        Ok(re)
    }

    fn parse_meta(&self, re: &Regex, rel: &Path) -> Result<(TrialMeta, bool), DatasetError> {
        let text = rel_string(rel);
        let caps = re
            .captures(&text)
            .ok_or_else(|| DatasetError::PatternMismatch(rel.to_path_buf()))?;
        let field_err = |field: &'static str, reason: String| DatasetError::Metadata {
            path: rel.to_path_buf(),
            field,
            reason,
        };
        let gas_label = caps["gas"].to_string();
        let (repetition, has_rep) = match caps.name("rep") {
            Some(m) => (
                m.as_str().parse().map_err(|e| field_err("rep", format!("{e}")))?,
                true,
            ),
            None => (0, false),
        };
        let acquired_at = match caps.name("acquired_at") {
            None => 0,
            Some(m) => match &self.timestamp_format {
                None => m
                    .as_str()
                    .parse()
                    .map_err(|e| field_err("acquired_at", format!("{e}")))?,
                Some(fmt) => chrono::NaiveDateTime::parse_from_str(m.as_str(), fmt)
                    .map_err(|e| field_err("acquired_at", format!("{e}")))?
                    .and_utc()
                    .timestamp(),
            },
        };
        let location = caps
            .name("location")
            .map(|m| m.as_str().to_string())
            .unwrap_or_else(|| self.defaults.location.clone());
        let airflow = match caps.name("airflow") {
            None => self.defaults.airflow,
            Some(m) if !self.airflow_map.is_empty() => *self
                .airflow_map
                .get(m.as_str())
                .ok_or_else(|| field_err("airflow", format!("{:?} not in airflow_map", m.as_str())))?,
            Some(m) => m
                .as_str()
                .parse()
                .map_err(|e| field_err("airflow", format!("{e}")))?,
        };
        let heater_voltage = match caps.name("voltage") {
            None => self.defaults.heater_voltage,
            Some(m) => {
                m.as_str()
                    .parse::<f64>()
                    .map_err(|e| field_err("voltage", format!("{e}")))?
                    * self.voltage_scale
            }
        };
        Ok((
            TrialMeta {
                gas_label,
                repetition,
                acquired_at,
                location,
                airflow,
                heater_voltage,
            },
            has_rep,
        ))
    }
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IndexReport {
    pub manifest: DatasetManifest,
    pub skipped: Vec<SkippedFile>,
}

/// Walks `root`, parses metadata from each file path and validates each
/// file's contents. Files that fail either step are reported in
/// [`IndexReport::skipped`].
pub fn index_dataset(root: &Path, format: &FormatConfig) -> Result<IndexReport, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::MissingDirectory(root.to_path_buf()));
    }
    let re = format.validate()?;
    let mut files = Vec::new();
    for item in WalkDir::new(root).sort_by_file_name() {
        let item = item.map_err(|e| DatasetError::Io {
            path: e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.to_path_buf()),
            source: e.into(),
        })?;
        if !item.file_type().is_file() {
            continue;
        }
        let path = item.path();
        if let Some(ext) = &format.extension {
            if path.extension().and_then(|e| e.to_str()) != Some(ext.as_str()) {
                continue;
            }
        }
        let rel = path.strip_prefix(root).unwrap_or(path).to_path_buf();
        files.push(rel);
    }

    let parsed: Vec<Result<(ManifestEntry, bool), SkippedFile>> = files
        .par_iter()
        .map(|rel| {
            let skip = |e: DatasetError| SkippedFile {
                path: rel.clone(),
                reason: e.to_string(),
            };
            let (meta, has_rep) = format.parse_meta(&re, rel).map_err(skip)?;
            load_trial(&root.join(rel), &meta, format).map_err(skip)?;
            Ok((
                ManifestEntry {
                    path: rel.clone(),
                    meta,
                },
                has_rep,
            ))
        })
        .collect();

    let mut entries = Vec::new();
    let mut unnumbered = Vec::new();
    let mut skipped = Vec::new();
    for p in parsed {
        match p {
            Ok((e, true)) => entries.push(e),
            Ok((e, false)) => unnumbered.push(e),
            Err(s) => skipped.push(s),
        }
    }
    number_repetitions(&mut unnumbered);
    entries.extend(unnumbered);

    if entries.is_empty() {
        return Err(DatasetError::NoTrials(root.to_path_buf()));
    }
    let root = root.canonicalize().unwrap_or_else(|_| root.to_path_buf());
    let manifest = DatasetManifest::new(root, format.clone(), entries)?;
    Ok(IndexReport { manifest, skipped })
}

fn number_repetitions(entries: &mut [ManifestEntry]) {
    entries.sort_by(|a, b| {
        let ka = (
            &a.meta.gas_label,
            &a.meta.location,
            a.meta.airflow.to_bits(),
            a.meta.heater_voltage.to_bits(),
        );
        let kb = (
            &b.meta.gas_label,
            &b.meta.location,
            b.meta.airflow.to_bits(),
            b.meta.heater_voltage.to_bits(),
        );
        ka.cmp(&kb)
            .then(a.meta.acquired_at.cmp(&b.meta.acquired_at))
            .then_with(|| a.path.cmp(&b.path))
    });
    let mut prev: Option<(String, String, u64, u64)> = None;
    let mut next = 0;
    for e in entries.iter_mut() {
        let key = (
            e.meta.gas_label.clone(),
            e.meta.location.clone(),
            e.meta.airflow.to_bits(),
            e.meta.heater_voltage.to_bits(),
        );
        if prev.as_ref() != Some(&key) {
            next = 0;
            prev = Some(key);
        }
        e.meta.repetition = next;
        next += 1;
    }
}

/// Reads one trial file.
pub fn load_trial(path: &Path, meta: &TrialMeta, format: &FormatConfig) -> Result<TrialRecord, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter as u8)
        .has_headers(format.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));

    let mut times = Vec::new();
    let mut readings = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(source) => {
                return Err(DatasetError::Csv {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != format.num_columns {
            return Err(DatasetError::MalformedRow {
                path: path.to_path_buf(),
                line,
                expected: format.num_columns,
                found: record.len(),
            });
        }
        let field = |column: usize| -> Result<f64, DatasetError> {
            let text = &record[column];
            text.parse::<f64>().map_err(|_| DatasetError::BadValue {
                path: path.to_path_buf(),
                line,
                column,
                value: text.to_string(),
            })
        };
        let t = field(format.time_column)? * format.time_scale;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(DatasetError::NonMonotoneTime {
                    path: path.to_path_buf(),
                    line,
                    time: t,
                });
            }
        }
        let mut row = [0.0; NUM_CHANNELS];
        for (channel, (slot, &column)) in row.iter_mut().zip(&format.channel_columns).enumerate() {
            let v = field(column)?;
            if !(v.is_finite() && v > 0.0) {
                return Err(DatasetError::NonPositiveResistance {
                    path: path.to_path_buf(),
                    line,
                    channel,
                    value: v,
                });
            }
            *slot = v;
        }
        times.push(t);
        readings.push(row);
    }
    TrialRecord::new(meta.clone(), times, readings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn row(t: f64, cols: usize) -> String {
        let mut s = format!("{t}");
        for c in 1..cols {
            write!(s, ",{}", 1000 + c).unwrap();
        }
        s
    }

    fn header() -> String {
        let mut s = "time".to_string();
        for c in 0..NUM_CHANNELS {
            write!(s, ",s{c:02}").unwrap();
        }
        s
    }

    fn write(dir: &Path, rel: &str, body: &str) -> PathBuf {
        let p = dir.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, body).unwrap();
        p
    }

    const NAME: &str = "Toluene/P4_0.21ms_5.0V_rep00_1300000000.csv";

    #[test]
    fn empty_directory_has_no_trials() {
        let dir = tempfile::tempdir().unwrap();
        let err = index_dataset(dir.path(), &FormatConfig::default()).unwrap_err();
        assert!(matches!(err, DatasetError::NoTrials(_)));
        assert!(err.to_string().contains("zero parsable trials"));
    }

    #[test]
    fn missing_directory() {
        let err = index_dataset(Path::new("/nonexistent/olfbench"), &FormatConfig::default()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingDirectory(_)));
    }

    #[test]
    fn single_trial_indexed() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{}\n{}\n{}\n", header(), row(0.0, 73), row(0.1, 73));
        write(dir.path(), NAME, &body);
        let report = index_dataset(dir.path(), &FormatConfig::default()).unwrap();
        assert_eq!(report.manifest.len(), 1);
        assert!(report.skipped.is_empty());
        let e = &report.manifest.entries()[0];
        assert_eq!(e.meta.gas_label, "Toluene");
        assert_eq!(e.meta.acquired_at, 1_300_000_000);
        assert_eq!(e.meta.location, "P4");
        assert_eq!(e.meta.heater_voltage, 5.0);
        let trial = report.manifest.load(e).unwrap();
        assert_eq!(trial.len(), 2);
    }

    #[test]
    fn malformed_row_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{}\n{}\n{}\n", header(), row(0.0, 73), row(0.1, 50));
        let p = write(dir.path(), NAME, &body);
        let meta = FormatConfig::default()
            .parse_meta(&FormatConfig::default().validate().unwrap(), Path::new(NAME))
            .unwrap()
            .0;
        let err = load_trial(&p, &meta, &FormatConfig::default()).unwrap_err();
        match err {
            DatasetError::MalformedRow {
                line,
                found,
                expected,
                ..
            } => {
                assert_eq!(line, 3);
                assert_eq!(found, 50);
                assert_eq!(expected, 73);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(load_trial(&p, &meta, &FormatConfig::default())
            .unwrap_err()
            .to_string()
            .contains(":3:"));
    }

    #[test]
    fn non_monotone_and_non_positive() {
        let dir = tempfile::tempdir().unwrap();
        let fmt = FormatConfig::default();
        let meta = fmt
            .parse_meta(&fmt.validate().unwrap(), Path::new(NAME))
            .unwrap()
            .0;
        let p = write(
            dir.path(),
            "a.csv",
            &format!("{}\n{}\n{}\n", header(), row(1.0, 73), row(1.0, 73)),
        );
        assert!(matches!(
            load_trial(&p, &meta, &fmt),
            Err(DatasetError::NonMonotoneTime { line: 3, .. })
        ));
        let bad = row(0.0, 73).replacen(",1001", ",-5", 1);
        let p = write(dir.path(), "b.csv", &format!("{}\n{}\n", header(), bad));
        assert!(matches!(
            load_trial(&p, &meta, &fmt),
            Err(DatasetError::NonPositiveResistance { channel: 0, .. })
        ));
    }

    #[test]
    fn corrupt_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), NAME, &format!("{}\n{}\n", header(), row(0.0, 73)));
        write(
            dir.path(),
            "Toluene/P4_0.21ms_5.0V_rep01_1300000100.csv",
            &format!("{}\n{}\n", header(), row(0.0, 12)),
        );
        write(dir.path(), "Toluene/notes.csv", "hello\n");
        let report = index_dataset(dir.path(), &FormatConfig::default()).unwrap();
        assert_eq!(report.manifest.len(), 1);
        assert_eq!(report.skipped.len(), 2);
    }

    #[test]
    fn repetitions_numbered_by_time_when_not_captured() {
        let dir = tempfile::tempdir().unwrap();
        let fmt = FormatConfig {
            file_pattern: r"^(?P<gas>[^/]+)/t(?P<acquired_at>\d+)\.csv$".into(),
            ..FormatConfig::default()
        };
        let body = format!("{}\n{}\n", header(), row(0.0, 73));
        for t in ["t300.csv", "t100.csv", "t200.csv"] {
            write(dir.path(), &format!("CO/{t}"), &body);
        }
        write(dir.path(), "Ethylene/t150.csv", &body);
        let m = index_dataset(dir.path(), &fmt).unwrap().manifest;
        let co: Vec<(i64, u32)> = m
            .entries()
            .iter()
            .filter(|e| e.meta.gas_label == "CO")
            .map(|e| (e.meta.acquired_at, e.meta.repetition))
            .collect();
        assert_eq!(co, vec![(100, 0), (200, 1), (300, 2)]);
    }

    #[test]
    fn wind_tunnel_path_metadata() {
        let fmt = FormatConfig::wind_tunnel();
        let re = fmt.validate().unwrap();
        let rel = Path::new(
            "Toluene_200/L4/201106151221_board_setPoint_500V_fan_setPoint_080_mfc_setPoint_Toluene_200ppm_p1",
        );
        let (meta, has_rep) = fmt.parse_meta(&re, rel).unwrap();
        assert!(!has_rep);
        assert_eq!(meta.gas_label, "Toluene");
        assert_eq!(meta.location, "L4");
        assert!((meta.heater_voltage - 5.0).abs() < 1e-12);
        assert_eq!(meta.airflow, 0.21);
        assert_eq!(meta.acquired_at, 1_308_140_460);
    }

    #[test]
    fn bad_format_rejected() {
        let fmt = FormatConfig {
            channel_columns: vec![1, 2, 3],
            ..FormatConfig::default()
        };
        assert!(fmt.validate().is_err());
        let fmt = FormatConfig {
            num_columns: 10,
            ..FormatConfig::default()
        };
        assert!(fmt.validate().is_err());
    }
}
