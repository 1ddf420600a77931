use std::fmt;
use std::str::FromStr;

use actgen_core::{
    DeflectionWeights, EntryKind, Epa, EventABO, Identity, ImpressionModel, InteractionState,
    LabelMatch, Lexicon, Party, SentenceToEpa,
};
use actgen_neural::{generate_response, DecodeConfig, Net, TemplateGenerator, Variant, Vocab};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::PipelineError;

/// Labels attached to each annotated turn.
pub const NEAREST_K: usize = 2;

/// Identity pair for a session: the human plays the first, the agent the second.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IdentitySetting {
    FriendFriend,
    EnemyEnemy,
    /// Any two lexicon identities, written `human:agent`.
    Custom {
        human: String,
        agent: String,
    },
}

impl IdentitySetting {
    pub fn labels(&self) -> (&str, &str) {
        match self {
            IdentitySetting::FriendFriend => ("friend", "friend"),
            IdentitySetting::EnemyEnemy => ("enemy", "enemy"),
            IdentitySetting::Custom { human, agent } => (human, agent),
        }
    }
}

impl fmt::Display for IdentitySetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdentitySetting::FriendFriend => f.write_str("friend_friend"),
            IdentitySetting::EnemyEnemy => f.write_str("enemy_enemy"),
            IdentitySetting::Custom { human, agent } => write!(f, "{human}:{agent}"),
        }
    }
}

impl FromStr for IdentitySetting {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "friend_friend" | "friend-friend" => Ok(IdentitySetting::FriendFriend),
            "enemy_enemy" | "enemy-enemy" => Ok(IdentitySetting::EnemyEnemy),
            other => match other.split_once(':') {
                Some((h, a)) if !h.trim().is_empty() && !a.trim().is_empty() => {
                    Ok(IdentitySetting::Custom {
                        human: h.trim().to_string(),
                        agent: a.trim().to_string(),
                    })
                }
                _ => Err(PipelineError::Config(format!(
                    "unknown identity setting '{s}' (expected friend_friend, enemy_enemy or human:agent)"
                ))),
            },
        }
    }
}

impl Serialize for IdentitySetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IdentitySetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    Cvae,
    Seq2seqEpa,
    Template,
}

impl fmt::Display for GeneratorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorChoice::Cvae => "cvae",
            GeneratorChoice::Seq2seqEpa => "seq2seq_epa",
            GeneratorChoice::Template => "template",
        })
    }
}

impl FromStr for GeneratorChoice {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "cvae" => Ok(GeneratorChoice::Cvae),
            "seq2seq_epa" => Ok(GeneratorChoice::Seq2seqEpa),
            "template" => Ok(GeneratorChoice::Template),
            _ => Err(PipelineError::Config(format!("unknown generator '{s}'"))),
        }
    }
}

pub enum ResponseGenerator {
    Neural {
        network: Net,
        vocab: Vocab,
        decode: DecodeConfig,
    },
    Template(TemplateGenerator),
}

impl ResponseGenerator {
    /// Which session choice this generator serves. `None` for the α-blind
    /// baseline, which sessions never use.
    pub fn choice(&self) -> Option<GeneratorChoice> {
        match self {
            ResponseGenerator::Template(_) => Some(GeneratorChoice::Template),
            ResponseGenerator::Neural { network, .. } => match network.variant() {
                Variant::Cvae => Some(GeneratorChoice::Cvae),
                Variant::Seq2seqEpa => Some(GeneratorChoice::Seq2seqEpa),
                Variant::Seq2seqPlain => None,
            },
        }
    }

    pub fn generate(
        &self,
        prompt: &str,
        alpha: &Epa,
        lexicon: &Lexicon<f64>,
    ) -> Result<String, PipelineError> {
        match self {
            ResponseGenerator::Template(t) => Ok(t.generate(alpha, lexicon)?),
            ResponseGenerator::Neural {
                network,
                vocab,
                decode,
            } => {
                let a = alpha.to_f64().map(|v| v as f32);
                Ok(generate_response(network, vocab, prompt, &a, decode)?.surface)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Human,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnAnnotation {
    pub speaker: Speaker,
    pub text: String,
    /// Sentence EPA for human turns, target α for agent turns.
    pub epa: Epa,
    pub nearest: Vec<LabelMatch<f64>>,
    /// Deflection after this turn's event.
    pub deflection: f64,
}

#[derive(Debug, Clone)]
pub struct SessionState {
    pub id: String,
    pub setting: IdentitySetting,
    pub generator: GeneratorChoice,
    /// Party A is the human, party B the agent.
    pub interaction: InteractionState<f64>,
    pub transcript: Vec<TurnAnnotation>,
}

impl SessionState {
    pub fn human(&self) -> &Identity<f64> {
        &self.interaction.identity_a
    }

    pub fn agent(&self) -> &Identity<f64> {
        &self.interaction.identity_b
    }

    pub fn deflection_trace(&self) -> Vec<f64> {
        self.interaction.deflections().collect()
    }
}

/// Shared, read-only resources for every session.
pub struct DialogueEngine {
    pub lexicon: Lexicon<f64>,
    pub model: ImpressionModel<f64>,
    pub weights: DeflectionWeights<f64>,
    pub s2epa: SentenceToEpa<f64>,
    generators: Vec<ResponseGenerator>,
}

impl DialogueEngine {
    /// Engine with the template generator only.
    pub fn new(
        lexicon: Lexicon<f64>,
        model: ImpressionModel<f64>,
        weights: DeflectionWeights<f64>,
        s2epa: SentenceToEpa<f64>,
    ) -> Self {
        Self {
            lexicon,
            model,
            weights,
            s2epa,
            generators: vec![ResponseGenerator::Template(TemplateGenerator::default())],
        }
    }

    /// Adds or replaces the generator serving its choice.
    pub fn with_generator(mut self, generator: ResponseGenerator) -> Result<Self, PipelineError> {
        let choice = generator.choice().ok_or_else(|| {
            PipelineError::Config(
                "the alpha-blind seq2seq_plain model cannot serve sessions".into(),
            )
        })?;
        self.generators.retain(|g| g.choice() != Some(choice));
        self.generators.push(generator);
        Ok(self)
    }

    pub fn generator(&self, choice: GeneratorChoice) -> Result<&ResponseGenerator, PipelineError> {
        self.generators
            .iter()
            .find(|g| g.choice() == Some(choice))
            .ok_or_else(|| PipelineError::Config(format!("generator '{choice}' is not loaded")))
    }

    pub fn available(&self) -> Vec<GeneratorChoice> {
        self.generators
            .iter()
            .filter_map(ResponseGenerator::choice)
            .collect()
    }

    pub fn nearest(&self, epa: Epa) -> Vec<LabelMatch<f64>> {
        let k = self
            .lexicon
            .of_kind(EntryKind::Behavior)
            .count()
            .min(NEAREST_K);
        if k == 0 {
            return Vec::new();
        }
        self.lexicon
            .nearest_labels(EntryKind::Behavior, epa, k)
            .unwrap_or_default()
    }
}

/// Fresh session: transients equal fundamentals, empty transcript.
pub fn open_session(
    engine: &DialogueEngine,
    setting: IdentitySetting,
    generator: GeneratorChoice,
) -> Result<SessionState, PipelineError> {
    engine.generator(generator)?;
    let (h, a) = setting.labels();
    let resolve = |label: &str| {
        Identity::from_lexicon(&engine.lexicon, label)
            .map_err(|e| PipelineError::Config(format!("identity '{label}': {e}")))
    };
    let interaction = InteractionState::new(resolve(h)?, resolve(a)?);
    Ok(SessionState {
        id: uuid::Uuid::new_v4().to_string(),
        setting,
        generator,
        interaction,
        transcript: Vec::new(),
    })
}

/// One exchange: the human acts on the agent with the sentence EPA of
/// `user_text`, the agent answers with its deflection-minimizing behavior α,
/// and the generator verbalizes α. The session is left untouched on error.
pub fn respond(
    engine: &DialogueEngine,
    session: &mut SessionState,
    user_text: &str,
) -> Result<(String, [TurnAnnotation; 2]), PipelineError> {
    if user_text.trim().is_empty() {
        return Err(PipelineError::Input("empty message".into()));
    }
    let (model, w) = (&engine.model, &engine.weights);
    let generator = engine.generator(session.generator)?;

    let u = engine.s2epa.epa(user_text)?;
    let event = EventABO::between(&session.interaction, Party::A, u)?;
    let after_human = session.interaction.apply_event(event, model, w)?;
    let human_defl = after_human
        .history
        .last()
        .expect("event applied")
        .deflection;

    let alpha = after_human.optimal_for(Party::B, model, w)?.behavior;
    let reply = generator.generate(user_text, &alpha, &engine.lexicon)?;

    let event = EventABO::between(&after_human, Party::B, alpha)?;
    let alpha = event.behavior_f;
    let after_agent = after_human.apply_event(event, model, w)?;
    let agent_defl = after_agent
        .history
        .last()
        .expect("event applied")
        .deflection;

    let annotations = [
        TurnAnnotation {
            speaker: Speaker::Human,
            text: user_text.to_string(),
            epa: u,
            nearest: engine.nearest(u),
            deflection: human_defl,
        },
        TurnAnnotation {
            speaker: Speaker::Agent,
            text: reply.clone(),
            epa: alpha,
            nearest: engine.nearest(alpha),
            deflection: agent_defl,
        },
    ];
    session.interaction = after_agent;
    session.transcript.extend(annotations.iter().cloned());
    Ok((reply, annotations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_parse_and_print() {
        for s in ["friend_friend", "enemy_enemy", "tutor:student"] {
            let parsed: IdentitySetting = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert_eq!(
            "friend-friend".parse::<IdentitySetting>().unwrap(),
            IdentitySetting::FriendFriend
        );
        assert!("blorp".parse::<IdentitySetting>().is_err());
        assert!(":x".parse::<IdentitySetting>().is_err());
    }

    #[test]
    fn generator_choice_round_trips() {
        for c in [
            GeneratorChoice::Cvae,
            GeneratorChoice::Seq2seqEpa,
            GeneratorChoice::Template,
        ] {
            assert_eq!(c.to_string().parse::<GeneratorChoice>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{c}\""));
        }
    }
}
