//! HTTP service and command-line front end for dialogue sessions, dyad
//! simulation and lexicon queries.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod resources;
pub mod sessions;

pub use api::{router, AppState};
pub use config::{ClassifierStrategy, ServiceConfig};
pub use error::{ApiError, ErrorCode};
pub use resources::{vocab_path, Resources};
pub use sessions::SessionStore;
