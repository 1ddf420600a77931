//! Two-party interactions: sequential events, carried-over transients and
//! INTERACT-style dyadic simulation.

use serde::{Deserialize, Serialize};

use super::deflection::{deflection, DeflectionWeights};
use super::model::ImpressionModel;
use super::solver::{optimal_behavior, OptimalBehavior};
use super::ActError;
use crate::epa::{validate_epa, EpaVector, Role, StateVector9};
use crate::lexicon::{EntryKind, LabelMatch, Lexicon};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identity<T: Scalar> {
    pub label: String,
    pub epa: EpaVector<T>,
}

impl<T: Scalar> Identity<T> {
    pub fn new(label: impl Into<String>, epa: EpaVector<T>) -> Self {
        Self {
            label: label.into(),
            epa,
        }
    }

    pub fn from_lexicon(lexicon: &Lexicon<T>, label: &str) -> Result<Self, crate::LexiconError> {
        Ok(Self::new(label, lexicon.epa(EntryKind::Identity, label)?))
    }
}

/// Which of the two interactants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Self {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

/// An actor-behavior-object event between the two parties of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct EventABO<T: Scalar> {
    pub actor: Party,
    pub actor_f: EpaVector<T>,
    pub behavior_f: EpaVector<T>,
    pub object_f: EpaVector<T>,
    pub actor_label: Option<String>,
    pub behavior_label: Option<String>,
    pub object_label: Option<String>,
}

impl<T: Scalar> EventABO<T> {
    /// Event in which `actor` directs `behavior` at the other party. The
    /// behavior EPA is validated (clamped into the rating range).
    pub fn between(
        state: &InteractionState<T>,
        actor: Party,
        behavior: EpaVector<T>,
    ) -> Result<Self, ActError> {
        let behavior = validate_epa(behavior.to_array())?.epa;
        let a = state.identity(actor);
        let o = state.identity(actor.other());
        Ok(Self {
            actor,
            actor_f: a.epa,
            behavior_f: behavior,
            object_f: o.epa,
            actor_label: Some(a.label.clone()),
            behavior_label: None,
            object_label: Some(o.label.clone()),
        })
    }

    pub fn with_behavior_label(mut self, label: impl Into<String>) -> Self {
        self.behavior_label = Some(label.into());
        self
    }

    pub fn fundamentals(&self) -> StateVector9<T> {
        StateVector9::from_parts(
            self.actor_f,
            self.behavior_f,
            self.object_f,
            Role::Fundamental,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry<T: Scalar> {
    pub event: EventABO<T>,
    pub transients: StateVector9<T>,
    pub deflection: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionState<T: Scalar> {
    pub identity_a: Identity<T>,
    pub identity_b: Identity<T>,
    /// Transients of the most recent event, in that event's actor/object framing.
    pub transients: StateVector9<T>,
    pub turn: usize,
    pub history: Vec<HistoryEntry<T>>,
    transient_a: EpaVector<T>,
    transient_b: EpaVector<T>,
}

impl<T: Scalar> InteractionState<T> {
    /// Fresh state with transients equal to fundamentals.
    pub fn new(identity_a: Identity<T>, identity_b: Identity<T>) -> Self {
        let transients = StateVector9::from_parts(
            identity_a.epa,
            EpaVector::zero(),
            identity_b.epa,
            Role::Transient,
        );
        Self {
            transient_a: identity_a.epa,
            transient_b: identity_b.epa,
            identity_a,
            identity_b,
            transients,
            turn: 0,
            history: Vec::new(),
        }
    }

    pub fn identity(&self, party: Party) -> &Identity<T> {
        match party {
            Party::A => &self.identity_a,
            Party::B => &self.identity_b,
        }
    }

    pub fn transient_of(&self, party: Party) -> EpaVector<T> {
        match party {
            Party::A => self.transient_a,
            Party::B => self.transient_b,
        }
    }

    /// Current identity transients framed with `actor` in the actor slots.
    /// Behavior slots are zero.
    pub fn framing(&self, actor: Party) -> StateVector9<T> {
        StateVector9::from_parts(
            self.transient_of(actor),
            EpaVector::zero(),
            self.transient_of(actor.other()),
            Role::Transient,
        )
    }

    pub fn deflections(&self) -> impl Iterator<Item = T> + '_ {
        self.history.iter().map(|h| h.deflection)
    }

    /// Applies an event and returns the successor state.
    pub fn apply_event(
        &self,
        event: EventABO<T>,
        model: &ImpressionModel<T>,
        w: &DeflectionWeights<T>,
    ) -> Result<Self, ActError> {
        let actor = self.identity(event.actor);
        let object = self.identity(event.actor.other());
        if event.actor_f != actor.epa || event.object_f != object.epa {
            return Err(ActError::IdentityMismatch(format!(
                "event {} -> {} does not match identities {} and {}",
                event.actor_f, event.object_f, actor.epa, object.epa
            )));
        }
        if !event.behavior_f.is_finite() {
            return Err(ActError::IdentityMismatch("non-finite behavior".into()));
        }

        let pre = self.framing(event.actor).with_behavior(event.behavior_f);
        let post = model.form_impression(&pre);
        let d = deflection(&event.fundamentals(), &post, w);

        let mut next = self.clone();
        match event.actor {
            Party::A => {
                next.transient_a = post.actor();
                next.transient_b = post.object();
            }
            Party::B => {
                next.transient_b = post.actor();
                next.transient_a = post.object();
            }
        }
        next.transients = post;
        next.turn += 1;
        next.history.push(HistoryEntry {
            event,
            transients: post,
            deflection: d,
        });
        Ok(next)
    }

    /// Deflection-minimizing behavior for `actor` toward the other party.
    pub fn optimal_for(
        &self,
        actor: Party,
        model: &ImpressionModel<T>,
        w: &DeflectionWeights<T>,
    ) -> Result<OptimalBehavior<T>, ActError> {
        optimal_behavior(
            model,
            self.identity(actor).epa,
            self.identity(actor.other()).epa,
            &self.framing(actor),
            w,
        )
    }

    /// Party expected to act next: A opens, then turns alternate.
    pub fn next_actor(&self) -> Party {
        match self.history.last() {
            None => Party::A,
            Some(h) => h.event.actor.other(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow<T: Scalar> {
    pub turn: usize,
    pub actor: String,
    pub object: String,
    pub behavior: EpaVector<T>,
    pub nearest: Vec<LabelMatch<T>>,
    pub deflection: T,
}

fn trace_row<T: Scalar>(state: &InteractionState<T>, lexicon: Option<&Lexicon<T>>) -> TraceRow<T> {
    let last = state.history.last().expect("row follows an applied event");
    let nearest = lexicon
        .and_then(|lex| {
            let k = lex.of_kind(EntryKind::Behavior).count().min(2);
            (k > 0).then(|| lex.nearest_labels(EntryKind::Behavior, last.event.behavior_f, k))
        })
        .and_then(Result::ok)
        .unwrap_or_default();
    TraceRow {
        turn: state.turn,
        actor: state.identity(last.event.actor).label.clone(),
        object: state.identity(last.event.actor.other()).label.clone(),
        behavior: last.event.behavior_f,
        nearest,
        deflection: last.deflection,
    }
}

/// Advances the interaction by one turn: `behavior` if given, otherwise the
/// optimal behavior for whoever acts next.
pub fn step_dyad<T: Scalar>(
    state: &InteractionState<T>,
    behavior: Option<EpaVector<T>>,
    model: &ImpressionModel<T>,
    w: &DeflectionWeights<T>,
    lexicon: Option<&Lexicon<T>>,
) -> Result<(InteractionState<T>, TraceRow<T>), ActError> {
    let actor = state.next_actor();
    let b = match behavior {
        Some(b) => b,
        None => {
            state
                .optimal_for(actor, model, w)
                .map_err(|e| ActError::AtTurn {
                    turn: state.turn + 1,
                    source: Box::new(e),
                })?
                .behavior
        }
    };
    let event = EventABO::between(state, actor, b)?;
    let next = state.apply_event(event, model, w)?;
    let row = trace_row(&next, lexicon);
    Ok((next, row))
}

/// Runs `turns` alternating events: A opens with `initial_behavior`, then each
/// responder plays its deflection-minimizing behavior.
pub fn simulate_dyad<T: Scalar>(
    identities: (Identity<T>, Identity<T>),
    initial_behavior: EpaVector<T>,
    turns: usize,
    model: &ImpressionModel<T>,
    w: &DeflectionWeights<T>,
    lexicon: Option<&Lexicon<T>>,
) -> Result<Vec<TraceRow<T>>, ActError> {
    if turns == 0 {
        return Err(ActError::Simulation("turns must be at least 1".into()));
    }
    let mut state = InteractionState::new(identities.0, identities.1);
    let mut trace = Vec::with_capacity(turns);
    for t in 0..turns {
        let behavior = (t == 0).then_some(initial_behavior);
        let (next, row) = step_dyad(&state, behavior, model, w, lexicon)?;
        state = next;
        trace.push(row);
    }
    Ok(trace)
}
