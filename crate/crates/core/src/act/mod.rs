//! Affect control dynamics: impression formation, deflection, the
//! deflection-minimizing behavior solver and sequential interactions.

mod deflection;
mod interaction;
mod model;
mod solver;

use thiserror::Error;

use crate::epa::EpaError;

pub use deflection::{deflection, deflection_terms, DeflectionWeights};
pub use interaction::{
    simulate_dyad, step_dyad, EventABO, HistoryEntry, Identity, InteractionState, Party, TraceRow,
};
pub use model::{ImpressionModel, TermSpec};
pub use solver::{
    optimal_behavior, BehaviorObjective, OptimalBehavior, SolveMethod, MAX_NEWTON_ITERATIONS,
};

#[derive(Debug, Error)]
pub enum ActError {
    #[error("equation parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid deflection weights: {0}")]
    Weights(String),
    #[error("event does not match the interaction: {0}")]
    IdentityMismatch(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("turn {turn}: {source}")]
    AtTurn {
        turn: usize,
        #[source]
        source: Box<ActError>,
    },
    #[error("simulation: {0}")]
    Simulation(String),
    #[error(transparent)]
    Epa(#[from] EpaError),
}
