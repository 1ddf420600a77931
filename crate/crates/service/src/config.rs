use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use actgen_core::s2epa::ClassifierEndpointConfig;
use actgen_neural::DecodeConfig;
use actgen_pipeline::IdentitySetting;
use serde::{Deserialize, Serialize};

use crate::resources::ResourcePaths;
use crate::ApiError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum ClassifierStrategy {
    #[default]
    Offline,
    Remote(ClassifierEndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub data: ResourcePaths,
    /// Neural generator; the template generator is always available.
    pub checkpoint: Option<PathBuf>,
    pub decode: DecodeConfig,
    /// Identities for simulations started without any.
    pub default_setting: IdentitySetting,
    pub classifier: ClassifierStrategy,
    pub max_request_bytes: usize,
    /// Longest accepted chat message, in characters.
    pub max_text_chars: usize,
    pub session_idle_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data: ResourcePaths::default(),
            checkpoint: None,
            decode: DecodeConfig::default(),
            default_setting: IdentitySetting::FriendFriend,
            classifier: ClassifierStrategy::Offline,
            max_request_bytes: 64 * 1024,
            max_text_chars: 2000,
            session_idle_secs: 30 * 60,
        }
    }
}

impl ServiceConfig {
    /// Reads a JSON config; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, ApiError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ApiError::from(e).with_detail(path.display().to_string()))?;
        let mut cfg: ServiceConfig = serde_json::from_str(&text)
            .map_err(|e| ApiError::bad_request(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data = cfg.data.relative_to(base);
        if let Some(c) = cfg.checkpoint.as_mut().filter(|c| c.is_relative()) {
            *c = base.join(&*c);
        }
        Ok(cfg)
    }

    pub fn addr(&self) -> Result<SocketAddr, ApiError> {
        self.bind
            .parse()
            .map_err(|e| ApiError::bad_request(format!("bind address '{}': {e}", self.bind)))
    }

    pub fn idle_timeout(&self) -> Duration {
        Duration::from_secs(self.session_idle_secs)
    }

    pub fn validate(&self) -> Result<(), ApiError> {
        self.addr()?;
        let files = self
            .data
            .iter()
            .chain(self.checkpoint.as_deref().map(|c| ("checkpoint", c)));
        for (name, path) in files {
            if !path.is_file() {
                return Err(ApiError::not_found(format!(
                    "{name} file {} does not exist",
                    path.display()
                )));
            }
        }
        if self.max_request_bytes == 0 || self.max_text_chars == 0 {
            return Err(ApiError::bad_request("size limits must be positive"));
        }
        if self.session_idle_secs == 0 {
            return Err(ApiError::bad_request("session_idle_secs must be positive"));
        }
        Ok(())
    }
}
