mod common;

use actgen_core::{data, DeflectionWeights, ImpressionModel};
use actgen_pipeline::{construct_triples, Conversation, Role};
use common::*;
use proptest::prelude::*;

#[test]
fn two_utterances_give_one_triple() {
    let conv = Conversation {
        id: "x".into(),
        utterances: vec!["i hate you".into(), "why ?".into()],
    };
    let (t, report) = construct_triples(
        &[conv],
        &identity("friend"),
        &identity("friend"),
        &offline(),
        &data::sample_equations(),
        &DeflectionWeights::ones(),
    );
    assert_eq!(t.len(), 1);
    assert_eq!(report.pairs, 1);
    assert_eq!(t[0].speaker, Role::Id1);
}

#[test]
fn alpha_matches_independent_replay_bit_exact() {
    let convs = random_conversations(200, 5);
    let (id1, id2) = (identity("friend"), identity("enemy"));
    let (s2epa, model, w) = (
        offline(),
        data::sample_equations(),
        DeflectionWeights::ones(),
    );
    let (triples, report) = construct_triples(&convs, &id1, &id2, &s2epa, &model, &w);
    assert_eq!(report.skipped(), 0);
    let replay = replay_alphas(&convs, &id1, &id2, &s2epa, &model, &w);
    assert_eq!(triples.len(), replay.len());
    for (t, (role, alpha)) in triples.iter().zip(&replay) {
        assert_eq!(t.speaker, *role);
        assert_eq!(
            t.alpha.to_array().map(f64::to_bits),
            alpha.to_array().map(f64::to_bits)
        );
    }
}

#[test]
fn transients_reset_between_conversations() {
    let conv = |id: &str| Conversation {
        id: id.into(),
        utterances: vec!["i love you".into(), "thanks".into()],
    };
    let (t, _) = construct_triples(
        &[conv("a"), conv("b")],
        &identity("friend"),
        &identity("enemy"),
        &offline(),
        &data::sample_equations(),
        &DeflectionWeights::ones(),
    );
    assert_eq!(t[0].alpha, t[1].alpha);
}

#[test]
fn output_order_ignores_input_order() {
    let mut convs = random_conversations(20, 9);
    let args = (
        identity("friend"),
        identity("friend"),
        offline(),
        data::sample_equations(),
    );
    let w = DeflectionWeights::ones();
    let (a, _) = construct_triples(&convs, &args.0, &args.1, &args.2, &args.3, &w);
    convs.reverse();
    let (b, _) = construct_triples(&convs, &args.0, &args.1, &args.2, &args.3, &w);
    assert_eq!(a, b);
}

#[test]
fn identity_model_alpha_is_in_range() {
    let convs = random_conversations(30, 2);
    let (t, report) = construct_triples(
        &convs,
        &identity("friend"),
        &identity("enemy"),
        &offline(),
        &ImpressionModel::identity(),
        &DeflectionWeights::ones(),
    );
    assert_eq!(report.skipped(), 0);
    assert!(t
        .iter()
        .all(|t| t.alpha.to_array().iter().all(|v| v.abs() <= 4.3)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn count_and_alternation(seed in 0u64..1000, n in 1usize..12) {
        let convs = random_conversations(n, seed);
        let (t, report) = construct_triples(
            &convs,
            &identity("friend"),
            &identity("friend"),
            &offline(),
            &data::sample_equations(),
            &DeflectionWeights::ones(),
        );
        let expected: usize = convs.iter().map(|c| c.utterances.len() - 1).sum();
        prop_assert_eq!(t.len() + report.skipped(), expected);
        let mut sorted = convs.clone();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut i = 0;
        for c in &sorted {
            for k in 0..c.utterances.len() - 1 {
                prop_assert_eq!(t[i].speaker, if k % 2 == 0 { Role::Id1 } else { Role::Id2 });
                prop_assert_eq!(&t[i].prompt, &c.utterances[k]);
                prop_assert_eq!(&t[i].response, &c.utterances[k + 1]);
                i += 1;
            }
        }
    }
}
