use std::sync::OnceLock;

use olfbench_core::dataset::{generate_synthetic, DatasetManifest, SyntheticSpec};
use olfbench_core::harness::{
    bench_runtime, drift_probe, execute, run_protocol, summarize, write_probe_csv, write_results_csv,
    BenchSettings, Denoiser, DenoiserChoice, HarnessError, ProbeConfig, Protocol, ProtocolConfig, RunOutcome,
};

struct Corpus {
    _dir: tempfile::TempDir,
    manifest: DatasetManifest,
}

fn small(reps: usize, drift: f64) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        num_gases: 4,
        repetitions_per_gas: reps,
        drift_amplitude: drift,
        sample_rate_hz: 1.0,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let manifest = generate_synthetic(&spec, dir.path()).unwrap();
    Corpus { _dir: dir, manifest }
}

fn shared() -> &'static DatasetManifest {
    static C: OnceLock<Corpus> = OnceLock::new();
    &C.get_or_init(|| small(4, 2.0)).manifest
}

fn cfg(p: Protocol) -> ProtocolConfig {
    ProtocolConfig {
        occlusions_per_gas: 5,
        ..ProtocolConfig::for_protocol(p)
    }
}

#[test]
fn sample_count_is_gases_times_occlusions() {
    let r = run_protocol(&cfg(Protocol::SameTrialOcclusion), shared()).unwrap();
    assert_eq!(r.samples.len(), 4 * 5);
    assert_eq!(r.stored_gases.len(), 4);
    for (i, s) in r.samples.iter().enumerate() {
        assert_eq!(s.sample_idx, i);
        assert_eq!(s.gas_truth, r.stored_gases[i / 5]);
        assert_eq!(s.occluded_channels.len(), 43);
        assert_eq!(s.occlusion_seed, i as u64);
        let a = s.attractor.as_ref().unwrap();
        assert_eq!(a.trajectory.len(), 5);
        assert!(a.trajectory.iter().all(|c| c.len() == 4));
    }
}

#[test]
fn no_occlusion_masks_are_empty() {
    let r = run_protocol(&cfg(Protocol::CrossRepetitionNoOcclusion), shared()).unwrap();
    assert!(r.config.baseline_subtract);
    assert!(r.samples.iter().all(|s| s.occluded_channels.is_empty()));
    assert!(r.samples.iter().all(|s| s.test_repetition == 1));
}

#[test]
fn zero_occlusion_same_trial_restores_exactly_at_cycle_one() {
    let mut c = cfg(Protocol::SameTrialOcclusion);
    c.occlusion.fraction = Some(0.0);
    let r = run_protocol(&c, shared()).unwrap();
    for s in &r.samples {
        let gi = r.stored_gases.iter().position(|g| *g == s.gas_truth).unwrap();
        assert_eq!(s.attractor.as_ref().unwrap().trajectory[0][gi], 1.0);
        assert_eq!(s.hashtable.as_ref().unwrap().jaccard[gi], 1.0);
    }
}

#[test]
fn repeated_runs_are_identical_apart_from_timings() {
    let c = cfg(Protocol::CrossRepetition);
    let strip = |mut r: olfbench_core::ExperimentResult| {
        r.train_timing = Default::default();
        for s in &mut r.samples {
            s.attractor.as_mut().unwrap().inference_ns = 0;
            s.hashtable.as_mut().unwrap().inference_ns = 0;
        }
        r
    };
    let a = strip(run_protocol(&c, shared()).unwrap());
    let b = strip(run_protocol(&c, shared()).unwrap());
    assert_eq!(a, b);
}

#[test]
fn results_csv_has_one_row_per_sample_cycle_and_stored_gas() {
    let r = run_protocol(&cfg(Protocol::SameTrialOcclusion), shared()).unwrap();
    let mut buf = Vec::new();
    write_results_csv(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "protocol,gas_truth,sample_idx,cycle,stored_gas,jaccard,predicted,denoiser,recognised"
    );
    // attractor: 5 cycles x 4 stored; hash table: 1 x 4
    assert_eq!(lines.count(), 20 * (5 * 4 + 4));
    assert!(text.contains("same_trial_occlusion,"));
}

#[test]
fn summary_is_invariant_to_sample_order() {
    let mut r = run_protocol(&cfg(Protocol::CrossRepetition), shared()).unwrap();
    let a = summarize(&r).unwrap();
    r.samples.reverse();
    let b = summarize(&r).unwrap();
    assert_eq!(a, b);
    for d in &a.denoisers {
        for c in &d.cells {
            assert!((0.0..=1.0).contains(&c.median));
            assert!(c.q25 <= c.median && c.median <= c.q75);
        }
    }
    assert_eq!(a.denoiser(Denoiser::Hashtable).unwrap().final_cycle(), 1);
}

#[test]
fn empty_result_cannot_be_summarized() {
    let mut r = run_protocol(&cfg(Protocol::SameTrialOcclusion), shared()).unwrap();
    r.samples.clear();
    assert!(matches!(summarize(&r), Err(HarnessError::EmptyResult)));
}

#[test]
fn single_denoiser_runs_omit_the_other() {
    let mut c = cfg(Protocol::SameTrialOcclusion);
    c.denoiser = DenoiserChoice::Hashtable;
    let r = run_protocol(&c, shared()).unwrap();
    assert!(r
        .samples
        .iter()
        .all(|s| s.attractor.is_none() && s.hashtable.is_some()));
    assert_eq!(r.attractor_accuracy(), None);
    let s = summarize(&r).unwrap();
    assert_eq!(s.denoisers.len(), 1);
}

#[test]
fn missing_repetition_is_a_data_error() {
    let mut c = cfg(Protocol::CrossRepetition);
    c.test_repetition = Some(9);
    let e = run_protocol(&c, shared()).unwrap_err();
    assert!(matches!(e, HarnessError::MissingTrial { repetition: 9, .. }));
    assert_eq!(e.kind(), olfbench_core::harness::ErrorKind::Data);
}

#[test]
fn unknown_gas_selection_is_a_data_error() {
    let mut c = cfg(Protocol::SameTrialOcclusion);
    c.gases = Some(vec!["Xenon".into()]);
    assert!(matches!(
        run_protocol(&c, shared()),
        Err(HarnessError::MissingTrial { .. })
    ));
}

#[test]
fn drift_probe_needs_two_repetitions() {
    let one = small(1, 2.0);
    assert!(matches!(
        drift_probe(&one.manifest, &ProbeConfig::default()),
        Err(HarnessError::InsufficientRepetitions { found: 1, .. })
    ));
}

#[test]
fn drift_probe_rejects_post_release_time() {
    let cfg = ProbeConfig {
        probe_time: 30.0,
        ..ProbeConfig::default()
    };
    assert!(matches!(
        drift_probe(shared(), &cfg),
        Err(HarnessError::Config(_))
    ));
}

#[test]
fn drift_probe_splits_even_and_odd_positions() {
    let r = drift_probe(shared(), &ProbeConfig::default()).unwrap();
    assert_eq!((r.num_train, r.num_test), (8, 8));
    assert!(r
        .predictions
        .iter()
        .all(|p| p.repetition % 2 == 1 && p.nearest_repetition % 2 == 0));
    assert!((0.0..=1.0).contains(&r.accuracy));
    let mut buf = Vec::new();
    write_probe_csv(&r, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
}

#[test]
fn execute_routes_the_probe() {
    match execute(&ProtocolConfig::for_protocol(Protocol::DriftProbe), shared()).unwrap() {
        RunOutcome::Probe(p) => assert_eq!(p.config.probe_time, 15.0),
        RunOutcome::Experiment(_) => panic!("expected a probe report"),
    }
    assert!(matches!(
        run_protocol(&ProtocolConfig::for_protocol(Protocol::DriftProbe), shared()),
        Err(HarnessError::Config(_))
    ));
}

#[test]
fn bench_reports_both_denoisers_with_stable_op_counts() {
    let c = cfg(Protocol::SameTrialOcclusion);
    let s = BenchSettings {
        repeat_train: 2,
        repeat_infer: 3,
    };
    let a = bench_runtime(&c, shared(), &s).unwrap();
    let b = bench_runtime(&c, shared(), &s).unwrap();
    assert_eq!(a.rows.len(), 2);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.train_ops, x.infer_ops), (y.train_ops, y.infer_ops));
        assert!(x.train_mean_ns > 0.0 && x.infer_mean_ns > 0.0);
    }
    let att = a.row(Denoiser::Attractor).unwrap();
    assert_eq!(att.train_ops, 4 * 72 * 71);
    assert_eq!(att.infer_ops, 5 * 72 * 16 * 71);
    assert_eq!(a.row(Denoiser::Hashtable).unwrap().infer_ops, 4 * 72);
    assert!(bench_runtime(
        &c,
        shared(),
        &BenchSettings {
            repeat_train: 0,
            repeat_infer: 1
        }
    )
    .is_err());
}
