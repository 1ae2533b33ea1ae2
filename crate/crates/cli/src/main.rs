mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use olfbench_core::dataset::{
    generate_synthetic, index_dataset, DatasetError, DatasetManifest, FormatConfig, SyntheticSpec,
};
use olfbench_core::harness::{
    bench_runtime, execute, summarize, train_snapshots, write_probe_csv, write_results_csv, BenchReport,
    BenchSettings, ErrorKind, HarnessError, ResolvedConfig, RunOutcome, RESULTS_SCHEMA, SUMMARY_SCHEMA,
};
use serde::Serialize;

use config::{DataSource, RunConfigFile};

#[derive(Parser)]
#[command(name = "olfbench", version, about = "One-shot odour denoising benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index a corpus directory and write its manifest.
    Ingest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Format description (JSON); see `config show-format`.
        #[arg(long, conflicts_with = "wind_tunnel")]
        format: Option<PathBuf>,
        /// Use the built-in wind-tunnel recording layout.
        #[arg(long)]
        wind_tunnel: bool,
    },
    /// Generate a synthetic corpus and its manifest.
    Synth {
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        gases: u32,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        reps: u32,
        /// Drift magnitude relative to the response magnitude.
        #[arg(long, default_value_t = 2.0)]
        drift: f64,
        /// Sensor noise standard deviation, ohms.
        #[arg(long, default_value_t = 10.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per second.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one protocol and write results CSV and summary JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the protocol seed (and the synthetic corpus seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        threads: Option<u32>,
        /// Also write trained denoiser snapshots here.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
    /// Time training and inference of both denoisers.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        repeat_train: u32,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
        repeat_infer: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        threads: Option<u32>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect configuration defaults.
    Config {
        #[command(subcommand)]
        command: ConfigCommand,
    },
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print a run config with every default filled in.
    ShowDefaults,
    /// Print the default corpus format description.
    ShowFormat {
        #[arg(long)]
        wind_tunnel: bool,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn data(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }

    fn internal(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 4,
            error: error.into(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dataset(d) => d.into(),
            e => match e.kind() {
                ErrorKind::Config => Failure::usage(e),
                ErrorKind::Data => Failure::data(e),
                ErrorKind::Internal => Failure::internal(e),
            },
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::MissingDirectory(_) | DatasetError::Format(_) | DatasetError::InvalidSpec(_) => {
                Failure::usage(e)
            }
            e => Failure::data(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::usage)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::usage)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut text = serde_json::to_vec_pretty(value).map_err(Failure::internal)?;
    text.push(b'\n');
    Ok(text)
}

fn set_threads(threads: Option<u32>) -> CmdResult {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(Failure::internal)?;
    }
    Ok(())
}

fn print_manifest_counts(manifest: &DatasetManifest) {
    println!("{} trials", manifest.len());
    for (gas, n) in manifest.repetition_counts() {
        println!("  {gas}: {n} repetition(s)");
    }
}

fn cmd_ingest(root: &Path, out: &Path, format: Option<&Path>, wind_tunnel: bool) -> CmdResult {
    let format = match (format, wind_tunnel) {
        (Some(p), _) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading format {}", p.display()))
                .map_err(Failure::usage)?;
            serde_json::from_str::<FormatConfig>(&text)
                .with_context(|| format!("parsing format {}", p.display()))
                .map_err(Failure::usage)?
        }
        (None, true) => FormatConfig::wind_tunnel(),
        (None, false) => FormatConfig::default(),
    };
    let report = index_dataset(root, &format)?;
    if !report.skipped.is_empty() {
        eprintln!("warning: skipped {} file(s):", report.skipped.len());
        for s in &report.skipped {
            eprintln!("  {}: {}", s.path.display(), s.reason);
        }
    }
    write_file(out, &to_json(&report.manifest)?)?;
    print_manifest_counts(&report.manifest);
    println!("manifest written to {}", out.display());
    Ok(())
}

fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> CmdResult {
    spec.validate()?;
    let manifest = generate_synthetic(spec, out)?;
    print_manifest_counts(&manifest);
    println!("corpus written to {}", out.display());
    Ok(())
}

struct Loaded {
    file: RunConfigFile,
    manifest: DatasetManifest,
    provenance: DatasetProvenance,
    // keeps a generated corpus alive for the duration of the command
    _scratch: Option<tempfile::TempDir>,
}

#[derive(Serialize)]
struct DatasetProvenance {
    manifest_root: PathBuf,
    num_trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic: Option<SyntheticSpec>,
}

/// Reads the config and materialises its dataset. A synthetic corpus goes to
/// `corpus_dir`, or to a scratch directory when none is given.
fn load(config: &Path, seed: Option<u64>, corpus_dir: Option<&Path>) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))
        .map_err(Failure::usage)?;
    let mut file = RunConfigFile::parse(&text)
        .with_context(|| format!("parsing config {}", config.display()))
        .map_err(Failure::usage)?;
    if let Some(s) = seed {
        file.protocol.seed = s;
        if let Some(spec) = &mut file.synthetic {
            spec.seed = s;
        }
    }
    // surface protocol errors before touching any data
    file.protocol.resolve()?;
    let base = config.parent().unwrap_or(Path::new("."));
    let source = file.source(base).map_err(|m| Failure::usage(anyhow!(m)))?;
    let mut scratch = None;
    let manifest = match &source {
        DataSource::Manifest(p) => DatasetManifest::read(p)?,
        DataSource::Root(root, format) => {
            let report = index_dataset(root, format)?;
            for s in &report.skipped {
                eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
            }
            report.manifest
        }
        DataSource::Synthetic(spec) => {
            spec.validate()?;
            let dir = match corpus_dir {
                Some(d) => d.to_path_buf(),
                None => {
                    let t = tempfile::tempdir().map_err(Failure::internal)?;
                    let p = t.path().to_path_buf();
                    scratch = Some(t);
                    p
                }
            };
            generate_synthetic(spec, &dir)?
        }
    };
    let provenance = DatasetProvenance {
        manifest_root: manifest.root.clone(),
        num_trials: manifest.len(),
        synthetic: file.synthetic.clone(),
    };
    Ok(Loaded {
        file,
        manifest,
        provenance,
        _scratch: scratch,
    })
}

#[derive(Serialize)]
struct RunSummary<'a, T: Serialize> {
    schema: &'static str,
    seed: u64,
    config: &'a ResolvedConfig,
    dataset: &'a DatasetProvenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    results_csv: Option<ResultsFile>,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ResultsFile {
    path: &'static str,
    schema: &'static str,
}

#[derive(Serialize)]
struct SummaryBody<T: Serialize> {
    summary: T,
}

#[derive(Serialize)]
struct ProbeBody<T: Serialize> {
    probe: T,
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>, snapshot_dir: Option<&Path>) -> CmdResult {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::usage)?;
    let loaded = load(config, seed, Some(&out.join("corpus")))?;
    let cfg = &loaded.file.protocol;
    let resolved = cfg.resolve()?;
    match execute(cfg, &loaded.manifest)? {
        RunOutcome::Experiment(result) => {
            let mut csv = Vec::new();
            write_results_csv(&result, &mut csv)?;
            write_file(&out.join("results.csv"), &csv)?;
            let summary = summarize(&result)?;
            let doc = RunSummary {
                schema: SUMMARY_SCHEMA,
                seed: resolved.seed,
                config: &resolved,
                dataset: &loaded.provenance,
                results_csv: Some(ResultsFile {
                    path: "results.csv",
                    schema: RESULTS_SCHEMA,
                }),
                body: SummaryBody { summary: &summary },
            };
            write_file(&out.join("summary.json"), &to_json(&doc)?)?;
            println!("{}: {} samples", resolved.protocol.name(), result.samples.len());
            for d in &summary.denoisers {
                println!(
                    "  {:<10} accuracy {:.3}  recognised {:.3}",
                    d.denoiser.name(),
                    d.accuracy,
                    d.recognised_rate
                );
            }
        }
        RunOutcome::Probe(report) => {
            let mut csv = Vec::new();
            write_probe_csv(&report, &mut csv)?;
            write_file(&out.join("probe.csv"), &csv)?;
            let doc = RunSummary {
                schema: SUMMARY_SCHEMA,
                seed: resolved.seed,
                config: &resolved,
                dataset: &loaded.provenance,
                results_csv: None,
                body: ProbeBody { probe: &report },
            };
            write_file(&out.join("summary.json"), &to_json(&doc)?)?;
            println!(
                "drift_probe: accuracy {:.3} over {} held-out trials ({} training)",
                report.accuracy, report.num_test, report.num_train
            );
        }
    }
    if let Some(dir) = snapshot_dir {
        if resolved.protocol == olfbench_core::Protocol::DriftProbe {
            return Err(Failure::usage(anyhow!(
                "the drift probe trains no denoiser to snapshot"
            )));
        }
        for (denoiser, snap) in train_snapshots(cfg, &loaded.manifest)? {
            let path = dir.join(format!("{}.snapshot.json", denoiser.name()));
            write_file(&path, (snap.to_json() + "\n").as_bytes())?;
        }
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

fn print_bench(report: &BenchReport) {
    println!(
        "{:<10} {:>15} {:>15} {:>15} {:>12} {:>12}",
        "denoiser", "train_mean_us", "infer_mean_us", "total_mean_us", "train_ops", "infer_ops"
    );
    for r in &report.rows {
        println!(
            "{:<10} {:>15.3} {:>15.3} {:>15.3} {:>12} {:>12}",
            r.denoiser.name(),
            r.train_mean_ns / 1e3,
            r.infer_mean_ns / 1e3,
            r.total_mean_ns / 1e3,
            r.train_ops,
            r.infer_ops
        );
    }
    println!(
        "({} training runs, {} inferences, one warm-up discarded)",
        report.settings.repeat_train, report.settings.repeat_infer
    );
}

fn cmd_bench(config: &Path, settings: BenchSettings, seed: Option<u64>, out: Option<&Path>) -> CmdResult {
    let loaded = load(config, seed, None)?;
    let report = bench_runtime(&loaded.file.protocol, &loaded.manifest, &settings)?;
    print_bench(&report);
    if let Some(path) = out {
        write_file(path, &to_json(&report)?)?;
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let bytes = to_json(value)?;
    std::io::stdout().write_all(&bytes).map_err(Failure::internal)
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Ingest {
            root,
            out,
            format,
            wind_tunnel,
        } => cmd_ingest(&root, &out, format.as_deref(), wind_tunnel),
        Command::Synth {
            gases,
            reps,
            drift,
            noise,
            seed,
            rate,
            out,
        } => {
            let spec = SyntheticSpec {
                num_gases: gases as usize,
                repetitions_per_gas: reps as usize,
                drift_amplitude: drift,
                noise_sd: noise,
                seed,
                sample_rate_hz: rate,
                ..SyntheticSpec::default()
            };
            cmd_synth(&spec, &out)
        }
        Command::Run {
            config,
            out,
            seed,
            threads,
            snapshot_dir,
        } => {
            set_threads(threads)?;
            cmd_run(&config, &out, seed, snapshot_dir.as_deref())
        }
        Command::Bench {
            config,
            repeat_train,
            repeat_infer,
            seed,
            threads,
            out,
        } => {
            set_threads(threads)?;
            let settings = BenchSettings {
                repeat_train: repeat_train as usize,
                repeat_infer: repeat_infer as usize,
            };
            cmd_bench(&config, settings, seed, out.as_deref())
        }
        Command::Config { command } => match command {
            ConfigCommand::ShowDefaults => print_json(&RunConfigFile::defaults()),
            ConfigCommand::ShowFormat { wind_tunnel } => print_json(&if wind_tunnel {
                FormatConfig::wind_tunnel()
            } else {
                FormatConfig::default()
            }),
        },
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
