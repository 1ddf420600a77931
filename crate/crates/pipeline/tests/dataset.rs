mod common;

use std::collections::HashSet;
use std::fs;

use actgen_core::EpaVector;
use actgen_pipeline::{
    load_dataset, persist_dataset, DatasetSplit, PipelineError, Role, SplitFractions,
    TrainingTriple,
};
use proptest::prelude::*;

fn triple(i: usize) -> TrainingTriple {
    TrainingTriple {
        prompt: format!("prompt {i}"),
        alpha: EpaVector::new(
            0.1 + i as f64 / 3.0,
            -1.0 / 7.0,
            std::f64::consts::PI / (i + 1) as f64,
        ),
        response: format!("response \"{i}\""),
        speaker: if i.is_multiple_of(2) { Role::Id1 } else { Role::Id2 },
    }
}

#[test]
fn empty_split_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let split = DatasetSplit {
        seed: 4,
        ..Default::default()
    };
    persist_dataset(&split, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), split);
}

#[test]
fn three_triples_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let split = DatasetSplit {
        train: vec![triple(0), triple(1)],
        valid: vec![],
        test: vec![triple(2)],
        seed: 42,
    };
    persist_dataset(&split, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back, split);
    for (a, b) in back.train.iter().zip(&split.train) {
        assert_eq!(
            a.alpha.to_array().map(f64::to_bits),
            b.alpha.to_array().map(f64::to_bits)
        );
    }
}

#[test]
fn jsonl_schema() {
    let dir = tempfile::tempdir().unwrap();
    let split = DatasetSplit {
        train: vec![triple(1)],
        ..Default::default()
    };
    persist_dataset(&split, dir.path()).unwrap();
    let line = fs::read_to_string(dir.path().join("train.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["alpha", "c", "speaker", "x"]);
    assert_eq!(v["speaker"], "id2");
    assert_eq!(v["alpha"].as_array().unwrap().len(), 3);
}

#[test]
fn wrong_field_name_is_format_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    persist_dataset(&DatasetSplit::default(), dir.path()).unwrap();
    let good = serde_json::to_string(&triple(0)).unwrap();
    let bad = good.replace("\"x\"", "\"response\"");
    fs::write(dir.path().join("valid.jsonl"), format!("{good}\n{bad}\n")).unwrap();
    match load_dataset(dir.path()) {
        Err(PipelineError::Format { line, message }) => {
            assert_eq!(line, 2);
            assert!(message.contains("valid.jsonl"), "{message}");
        }
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn default_split_of_500() {
    let triples: Vec<_> = (0..500).map(triple).collect();
    let s = DatasetSplit::new(triples, SplitFractions::default(), 1).unwrap();
    assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (450, 25, 25));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splits_are_disjoint_and_exact(n in 0usize..300, seed in any::<u64>()) {
        let triples: Vec<_> = (0..n).map(triple).collect();
        let f = SplitFractions::default();
        let s = DatasetSplit::new(triples, f, seed).unwrap();
        let (a, b, c) = f.sizes(n);
        prop_assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (a, b, c));
        let prompts: HashSet<&str> = s.train.iter().chain(&s.valid).chain(&s.test).map(|t| t.prompt.as_str()).collect();
        prop_assert_eq!(prompts.len(), n);
        let again = DatasetSplit::new((0..n).map(triple).collect(), f, seed).unwrap();
        prop_assert_eq!(again, s);
    }
}
