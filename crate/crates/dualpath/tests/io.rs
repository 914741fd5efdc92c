//! Text formats round-trip the generated data exactly.

use std::fs;

use dualpath::io::{load_dataset, write_dataset, DataPaths, Dataset};
use dualpath_core::synth::generate_synthetic;
use dualpath_core::{Label, Split, SyntheticConfig};

fn small() -> Dataset {
    let d = generate_synthetic(&SyntheticConfig {
        n_nodes: 120,
        fraud_fraction: 0.1,
        feature_dim: 5,
        avg_degree: 4.0,
        seed: 8,
        ..SyntheticConfig::default()
    })
    .unwrap();
    Dataset {
        graph: d.graph,
        features: d.features,
        labels: d.labels,
    }
}

#[test]
fn written_dataset_reads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = small();
    let paths = write_dataset(dir.path(), &d).unwrap();
    let back = load_dataset(&paths, 999).unwrap();
    assert_eq!(back.graph, d.graph);
    assert_eq!(back.features, d.features);
    // the mask file wins over the seed
    assert_eq!(back.labels, d.labels);
}

#[test]
fn missing_mask_file_gets_a_seeded_70_15_15_split() {
    let dir = tempfile::tempdir().unwrap();
    let mut labels = String::from("node_id,label\n");
    for i in 0..100 {
        labels.push_str(&format!("{i},{}\n", u8::from(i % 5 == 0)));
    }
    let mut features = String::from("f0\n");
    for i in 0..100 {
        features.push_str(&format!("{}\n", i as f64 / 10.0));
    }
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    fs::write(dir.path().join("features.csv"), features).unwrap();
    fs::write(dir.path().join("edges.txt"), "0 1\n1 2\n").unwrap();
    let paths = DataPaths {
        masks: None,
        ..DataPaths::in_dir(dir.path())
    };
    let a = load_dataset(&paths, 1).unwrap();
    let sizes: Vec<usize> = [Split::Train, Split::Val, Split::Test].iter().map(|&s| a.labels.indices(s).len()).collect();
    assert_eq!(sizes, vec![70, 15, 15]);
    assert_eq!(a.labels.class_counts(Split::Train), (14, 56));
    assert_eq!(load_dataset(&paths, 1).unwrap().labels, a.labels);
    assert_ne!(load_dataset(&paths, 2).unwrap().labels, a.labels);
}

#[test]
fn mask_file_is_used_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("features.csv"), "1\n2\n3\n4\n").unwrap();
    fs::write(dir.path().join("edges.txt"), "0 3 2.5\n").unwrap();
    fs::write(dir.path().join("labels.csv"), "0,1\n1,0\n2,0\n").unwrap();
    fs::write(dir.path().join("masks.csv"), "node_id,split\n0,test\n2,train\n").unwrap();
    let d = load_dataset(&DataPaths::in_dir(dir.path()), 0).unwrap();
    assert_eq!(d.labels.labels(), &[Label::Fraud, Label::Benign, Label::Benign, Label::Unknown]);
    assert_eq!(d.labels.indices(Split::Test), vec![0]);
    assert_eq!(d.labels.indices(Split::Train), vec![2]);
    assert!(d.labels.indices(Split::Val).is_empty());
    assert_eq!(d.labels.split_of(1), None);
    assert_eq!(d.graph.edges().collect::<Vec<_>>(), vec![(0, 3, 2.5)]);
}

#[test]
fn malformed_rows_report_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("features.csv"), "1\n2\n").unwrap();
    fs::write(dir.path().join("edges.txt"), "0 1\n0 7\n").unwrap();
    fs::write(dir.path().join("labels.csv"), "0,1\n").unwrap();
    let err = load_dataset(&DataPaths { masks: None, ..DataPaths::in_dir(dir.path()) }, 0).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("edges.txt") && msg.contains('2'), "{msg}");
}
