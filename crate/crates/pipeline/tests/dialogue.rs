mod common;

use actgen_core::{
    data, optimal_behavior, surface_label, DeflectionWeights, EntryKind, ImpressionModel, Party,
};
use actgen_neural::{DecodeConfig, ModelConfig, Net, Variant, Vocab};
use actgen_pipeline::{
    open_session, respond, DialogueEngine, GeneratorChoice, IdentitySetting, PipelineError,
    ResponseGenerator, Speaker,
};
use common::offline;

fn engine_with(model: ImpressionModel<f64>) -> DialogueEngine {
    DialogueEngine::new(
        data::sample_lexicon(),
        model,
        DeflectionWeights::ones(),
        offline(),
    )
}

fn engine() -> DialogueEngine {
    engine_with(data::sample_equations())
}

#[test]
fn friend_friend_session_uses_lexicon_friend() {
    let e = engine();
    let s = open_session(&e, IdentitySetting::FriendFriend, GeneratorChoice::Template).unwrap();
    let friend = e.lexicon.epa(EntryKind::Identity, "friend").unwrap();
    assert_eq!(s.human().epa, friend);
    assert_eq!(s.agent().epa, friend);
    assert!(s.transcript.is_empty());
    assert_eq!(s.interaction.transient_of(Party::A), friend);
}

#[test]
fn unknown_identity_is_config_error() {
    let e = engine();
    let setting = IdentitySetting::Custom {
        human: "blorp".into(),
        agent: "friend".into(),
    };
    assert!(matches!(
        open_session(&e, setting, GeneratorChoice::Template),
        Err(PipelineError::Config(_))
    ));
}

#[test]
fn unloaded_generator_is_config_error() {
    let e = engine();
    assert!(matches!(
        open_session(&e, IdentitySetting::EnemyEnemy, GeneratorChoice::Cvae),
        Err(PipelineError::Config(_))
    ));
}

#[test]
fn sessions_are_independent() {
    let e = engine();
    let mut a = open_session(&e, IdentitySetting::FriendFriend, GeneratorChoice::Template).unwrap();
    let b = open_session(&e, IdentitySetting::FriendFriend, GeneratorChoice::Template).unwrap();
    assert_ne!(a.id, b.id);
    respond(&e, &mut a, "i love you").unwrap();
    assert_eq!(a.transcript.len(), 2);
    assert!(b.transcript.is_empty());
    assert_eq!(b.interaction.turn, 0);
}

#[test]
fn template_reply_names_nearest_behavior() {
    let e = engine();
    let mut s = open_session(&e, IdentitySetting::FriendFriend, GeneratorChoice::Template).unwrap();
    let (reply, ann) = respond(&e, &mut s, "thank you so much").unwrap();
    assert_eq!(ann[0].speaker, Speaker::Human);
    assert_eq!(ann[1].speaker, Speaker::Agent);
    assert_eq!(ann[1].text, reply);
    assert_eq!(
        reply,
        format!("i would {} you", surface_label(&ann[1].nearest[0].label))
    );
    assert_eq!(s.transcript.len(), 2);
}

#[test]
fn identity_model_first_exchange_has_zero_deflection() {
    let e = engine_with(ImpressionModel::identity());
    let mut s = open_session(&e, IdentitySetting::EnemyEnemy, GeneratorChoice::Template).unwrap();
    let (_, ann) = respond(&e, &mut s, "i hate you").unwrap();
    assert_eq!(ann[0].deflection, 0.0);
    assert_eq!(ann[1].deflection, 0.0);
}

#[test]
fn agent_alpha_matches_recomputation_bit_exact() {
    let e = engine();
    let mut s = open_session(&e, IdentitySetting::EnemyEnemy, GeneratorChoice::Template).unwrap();
    for text in [
        "i hate you",
        "why are you so sad ?",
        "thank you",
        "stop it now",
    ] {
        let (human, agent) = (s.human().epa, s.agent().epa);
        let (_, ann) = respond(&e, &mut s, text).unwrap();
        // state right after the human event
        let after_human = &s.interaction.history[s.interaction.history.len() - 2];
        let frame = actgen_core::StateVector9::from_parts(
            after_human.transients.object(),
            actgen_core::EpaVector::zero(),
            after_human.transients.actor(),
            actgen_core::Role::Transient,
        );
        let b = optimal_behavior(&e.model, agent, human, &frame, &e.weights)
            .unwrap()
            .behavior;
        let b = actgen_core::validate_epa(b.to_array()).unwrap().epa;
        assert_eq!(
            ann[1].epa.to_array().map(f64::to_bits),
            b.to_array().map(f64::to_bits)
        );
    }
    assert_eq!(s.transcript.len(), 8);
    assert_eq!(s.deflection_trace().len(), s.transcript.len());
    let recorded: Vec<f64> = s.transcript.iter().map(|t| t.deflection).collect();
    assert_eq!(recorded, s.deflection_trace());
    assert!(recorded.iter().all(|d| *d >= 0.0));
}

#[test]
fn failed_turn_leaves_session_unchanged() {
    // model vocabulary smaller than the bound vocab makes generation fail
    let mut cfg = ModelConfig::new(Variant::Seq2seqEpa, 6);
    cfg.embed_dim = 4;
    cfg.hidden_dim = 4;
    let network = Net::new(cfg).unwrap();
    let vocab = Vocab::from_sentences(["a b c d e f g h"], 12).unwrap();
    let e = engine()
        .with_generator(ResponseGenerator::Neural {
            network,
            vocab,
            decode: DecodeConfig::default(),
        })
        .unwrap();
    let mut s = open_session(&e, IdentitySetting::FriendFriend, GeneratorChoice::Template).unwrap();
    respond(&e, &mut s, "i love you").unwrap();
    s.generator = GeneratorChoice::Seq2seqEpa;
    let before = (s.interaction.clone(), s.transcript.clone());
    let err = respond(&e, &mut s, "i hate you").unwrap_err();
    assert!(matches!(err, PipelineError::Generator(_)), "{err}");
    assert_eq!(s.interaction, before.0);
    assert_eq!(s.transcript, before.1);
    assert!(respond(&e, &mut s, "   ").is_err());
    assert_eq!(s.interaction, before.0);
}

#[test]
fn plain_baseline_cannot_serve_sessions() {
    let mut cfg = ModelConfig::new(Variant::Seq2seqPlain, 8);
    cfg.embed_dim = 4;
    cfg.hidden_dim = 4;
    let g = ResponseGenerator::Neural {
        network: Net::new(cfg).unwrap(),
        vocab: Vocab::from_sentences(["a b"], 8).unwrap(),
        decode: DecodeConfig::default(),
    };
    assert!(engine().with_generator(g).is_err());
}
