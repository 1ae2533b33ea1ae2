use std::fs;

use olfbench_core::attractor::{AttractorMemory, WeightMode};
use olfbench_core::coding::EncoderConfig;
use olfbench_core::dataset::{
    generate_synthetic, index_dataset, DatasetError, DatasetManifest, FormatConfig, SyntheticSpec,
};
use olfbench_core::hash_table::CodeTable;
use olfbench_core::snapshot::Snapshot;

fn spec() -> SyntheticSpec {
    SyntheticSpec {
        num_gases: 3,
        repetitions_per_gas: 2,
        sample_rate_hz: 1.0,
        seed: 11,
        ..SyntheticSpec::default()
    }
}

#[test]
fn generated_corpus_reindexes_to_the_same_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let written = generate_synthetic(&spec(), dir.path()).unwrap();
    let report = index_dataset(dir.path(), &FormatConfig::default()).unwrap();
    assert!(report.skipped.is_empty());
    assert_eq!(report.manifest.entries(), written.entries());

    let saved = DatasetManifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(saved.entries(), written.entries());
    let e = &saved.entries()[0];
    let a = saved.load(e).unwrap();
    let b = written.load(e).unwrap();
    assert_eq!(a, b);
}

#[test]
fn same_spec_gives_byte_identical_files() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m = generate_synthetic(&spec(), d1.path()).unwrap();
    generate_synthetic(&spec(), d2.path()).unwrap();
    for e in m.entries() {
        assert_eq!(
            fs::read(d1.path().join(&e.path)).unwrap(),
            fs::read(d2.path().join(&e.path)).unwrap()
        );
    }
}

#[test]
fn corrupt_files_are_skipped_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&spec(), dir.path()).unwrap();
    let victim = dir.path().join(&m.entries()[0].path);
    fs::write(&victim, "0.0,1,2\n").unwrap();
    let report = index_dataset(dir.path(), &FormatConfig::default()).unwrap();
    assert_eq!(report.manifest.len(), m.len() - 1);
    assert_eq!(report.skipped.len(), 1);
    assert!(report.skipped[0].path.ends_with(&m.entries()[0].path));
}

#[test]
fn empty_directory_has_no_trials() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        index_dataset(dir.path(), &FormatConfig::default()),
        Err(DatasetError::NoTrials(_))
    ));
    assert!(matches!(
        index_dataset(&dir.path().join("absent"), &FormatConfig::default()),
        Err(DatasetError::MissingDirectory(_))
    ));
}

#[test]
fn snapshots_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&spec(), dir.path()).unwrap();
    let samples: Vec<_> = m
        .entries()
        .iter()
        .filter(|e| e.meta.repetition == 0)
        .map(|e| m.load(e).unwrap().sample_at(90.0).unwrap())
        .collect();
    let enc = EncoderConfig::fit(&samples, 16).unwrap();
    let mut mem = AttractorMemory::new(72, 16, WeightMode::Counts);
    for s in &samples {
        mem.learn_one_shot(&s.gas_label, &enc.encode(s)).unwrap();
    }
    let text = Snapshot::attractor(&mem, Some(&enc)).to_json();
    let back = Snapshot::from_json(&text).unwrap();
    assert_eq!(back.encoder.as_ref(), Some(&enc));
    let restored = back.into_attractor().unwrap();
    let probe = enc.encode(&samples[1]);
    assert_eq!(
        restored.recall(&probe, 5).unwrap(),
        mem.recall(&probe, 5).unwrap()
    );

    let table = CodeTable::train(
        samples
            .iter()
            .map(|s| (s.gas_label.clone(), enc.encode(s).bins().to_vec())),
    )
    .unwrap();
    let restored = Snapshot::from_json(&Snapshot::hashtable(&table, None).to_json())
        .unwrap()
        .into_table()
        .unwrap();
    assert_eq!(restored, table);
}
