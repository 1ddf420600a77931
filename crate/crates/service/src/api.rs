use std::collections::HashMap;
use std::sync::Arc;

use actgen_core::{
    step_dyad, surface_label, EntryKind, Epa, Identity, InteractionState, LabelMatch, TraceRow,
};
use actgen_pipeline::{
    open_session, respond, DialogueEngine, GeneratorChoice, IdentitySetting, SessionState,
    TurnAnnotation,
};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::resources::{load_generator, Resources};
use crate::sessions::SessionStore;
use crate::{ApiError, ErrorCode};

pub const MAX_SIMULATION_TURNS: usize = 100;

pub struct SimState {
    pub interaction: InteractionState<f64>,
}

/// Engine, configuration and both session stores, shared by all handlers.
pub struct AppState {
    pub engine: DialogueEngine,
    pub config: ServiceConfig,
    pub default_generator: GeneratorChoice,
    pub chats: SessionStore<SessionState>,
    pub sims: SessionStore<SimState>,
}

impl AppState {
    /// Loads data and the optional checkpoint. `seed` makes CVAE decoding
    /// sample its latent reproducibly instead of using the prior mean.
    ///
    /// With a remote classifier this builds a blocking HTTP client, so call it
    /// outside the async runtime (or inside `spawn_blocking`).
    pub fn from_config(config: ServiceConfig, seed: Option<u64>) -> Result<Self, ApiError> {
        config.validate()?;
        let resources = Resources::load(&config.data)?;
        let mut engine = resources.engine(&config.classifier)?;
        let mut default_generator = GeneratorChoice::Template;
        if let Some(path) = &config.checkpoint {
            let mut decode = config.decode.clone();
            if seed.is_some() {
                decode.seed = seed;
            }
            let generator = load_generator(path, decode)?;
            if let Some(choice) = generator.choice() {
                default_generator = choice;
            }
            engine = engine.with_generator(generator)?;
        }
        let (h, a) = config.default_setting.labels();
        for label in [h, a] {
            Identity::from_lexicon(&engine.lexicon, label)
                .map_err(|e| ApiError::bad_request(format!("default_setting: {e}")))?;
        }
        Ok(Self::new(engine, config, default_generator))
    }

    pub fn new(
        engine: DialogueEngine,
        config: ServiceConfig,
        default_generator: GeneratorChoice,
    ) -> Self {
        let idle = config.idle_timeout();
        Self {
            engine,
            config,
            default_generator,
            chats: SessionStore::new(idle),
            sims: SessionStore::new(idle),
        }
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    let limit = state.config.max_request_bytes;
    Router::new()
        .route("/health", get(health))
        .route("/chat", post(chat))
        .route("/simulate/step", post(simulate_step))
        .route("/lexicon/nearest", get(nearest))
        .route("/session/{id}", get(session))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Periodically drops idle chat and simulation sessions.
pub fn spawn_evictor(state: Shared) -> tokio::task::JoinHandle<()> {
    let period = (state.config.idle_timeout() / 4).clamp(
        std::time::Duration::from_secs(1),
        std::time::Duration::from_secs(60),
    );
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = state.chats.evict_idle() + state.sims.evict_idle();
            if n > 0 {
                tracing::info!(evicted = n, "dropped idle sessions");
            }
        }
    })
}

/// Runs CPU-bound or blocking work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(ErrorCode::GeneratorError, "request worker failed").with_detail(e.to_string())
    })?
}

fn json_body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|r| ApiError::bad_request(r.body_text()).with_detail(r.status().to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "ok": true }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub setting: Option<IdentitySetting>,
    #[serde(default)]
    pub generator: Option<GeneratorChoice>,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub setting: IdentitySetting,
    pub generator: GeneratorChoice,
    pub response: String,
    pub annotations: Vec<TurnAnnotation>,
    pub deflection_trace: Vec<f64>,
}

fn chat_turn(state: &AppState, req: ChatRequest) -> Result<ChatResponse, ApiError> {
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("text is empty"));
    }
    let chars = req.text.chars().count();
    if chars > state.config.max_text_chars {
        return Err(ApiError::bad_request(format!(
            "text has {chars} characters, limit is {}",
            state.config.max_text_chars
        )));
    }
    let engine = &state.engine;
    let finish =
        |session: &SessionState, response: String, annotations: [TurnAnnotation; 2]| ChatResponse {
            session_id: session.id.clone(),
            setting: session.setting.clone(),
            generator: session.generator,
            response,
            annotations: annotations.to_vec(),
            deflection_trace: session.deflection_trace(),
        };
    match req.session_id {
        Some(id) => {
            let handle = state
                .chats
                .get(&id)
                .ok_or_else(|| ApiError::not_found(format!("no session '{id}'")))?;
            let mut session = handle.lock();
            if let Some(s) = req.setting.filter(|s| *s != session.setting) {
                return Err(ApiError::bad_request(format!(
                    "session '{id}' uses setting {}, not {s}; start a new session to switch",
                    session.setting
                )));
            }
            if let Some(g) = req.generator.filter(|g| *g != session.generator) {
                return Err(ApiError::bad_request(format!(
                    "session '{id}' uses generator {}, not {g}",
                    session.generator
                )));
            }
            let (response, annotations) = respond(engine, &mut session, &req.text)?;
            Ok(finish(&session, response, annotations))
        }
        None => {
            let setting = req
                .setting
                .ok_or_else(|| ApiError::bad_request("either session_id or setting is required"))?;
            let generator = req.generator.unwrap_or(state.default_generator);
            let mut session = open_session(engine, setting, generator)?;
            let (response, annotations) = respond(engine, &mut session, &req.text)?;
            let out = finish(&session, response, annotations);
            state.chats.insert(session.id.clone(), session);
            Ok(out)
        }
    }
}

async fn chat(
    State(state): State<Shared>,
    payload: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<Json<ChatResponse>, ApiError> {
    let req = json_body(payload)?;
    blocking(move || chat_turn(&state, req)).await.map(Json)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationRequest {
    #[serde(default)]
    pub sim_id: Option<String>,
    /// `[actor, object]` identity labels; the actor opens.
    #[serde(default)]
    pub identities: Option<[String; 2]>,
    #[serde(default)]
    pub behavior_epa: Option<Epa>,
    #[serde(default)]
    pub behavior_label: Option<String>,
    #[serde(default)]
    pub turns: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResponse {
    pub sim_id: String,
    pub identities: [String; 2],
    /// Rows produced by this request.
    pub rows: Vec<TraceRow<f64>>,
    pub deflection_trace: Vec<f64>,
}

/// Lexicon key for a label typed either way (`confer with`, `confer_with`).
pub fn lexicon_key(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join("_")
}

fn simulation_step(
    state: &AppState,
    req: SimulationRequest,
) -> Result<SimulationResponse, ApiError> {
    let engine = &state.engine;
    let turns = req.turns.unwrap_or(1);
    if turns == 0 || turns > MAX_SIMULATION_TURNS {
        return Err(ApiError::bad_request(format!(
            "turns must be between 1 and {MAX_SIMULATION_TURNS}"
        )));
    }
    let behavior = match (req.behavior_epa, &req.behavior_label) {
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request(
                "give behavior_epa or behavior_label, not both",
            ))
        }
        (Some(epa), None) => Some(epa),
        (None, Some(label)) => Some(
            engine
                .lexicon
                .epa(EntryKind::Behavior, &lexicon_key(label))?,
        ),
        (None, None) => None,
    };
    let resolve = |label: &str| Identity::from_lexicon(&engine.lexicon, &lexicon_key(label));

    let (id, handle, is_new) = match req.sim_id {
        Some(id) => {
            let handle = state
                .sims
                .get(&id)
                .ok_or_else(|| ApiError::not_found(format!("no simulation '{id}'")))?;
            (id, handle, false)
        }
        None => {
            if behavior.is_none() {
                return Err(ApiError::bad_request(
                    "a new simulation needs behavior_epa or behavior_label for its first event",
                ));
            }
            let (a, b) = match &req.identities {
                Some([a, b]) => (a.as_str(), b.as_str()),
                None => state.config.default_setting.labels(),
            };
            let interaction = InteractionState::new(resolve(a)?, resolve(b)?);
            let id = uuid::Uuid::new_v4().to_string();
            // registered only once the first step succeeds
            let handle = Arc::new(parking_lot::Mutex::new(SimState { interaction }));
            (id, handle, true)
        }
    };
    let mut sim = handle.lock();
    if let Some([a, b]) = &req.identities {
        let current = (
            &sim.interaction.identity_a.label,
            &sim.interaction.identity_b.label,
        );
        if (lexicon_key(a), lexicon_key(b)) != (current.0.clone(), current.1.clone()) {
            return Err(ApiError::bad_request(format!(
                "simulation '{id}' is between {} and {}",
                current.0, current.1
            )));
        }
    }
    let mut next = sim.interaction.clone();
    let mut rows = Vec::with_capacity(turns);
    for t in 0..turns {
        let b = if t == 0 { behavior } else { None };
        let (s, row) = step_dyad(
            &next,
            b,
            &engine.model,
            &engine.weights,
            Some(&engine.lexicon),
        )?;
        next = s;
        rows.push(row);
    }
    sim.interaction = next;
    let out = SimulationResponse {
        sim_id: id.clone(),
        identities: [
            sim.interaction.identity_a.label.clone(),
            sim.interaction.identity_b.label.clone(),
        ],
        rows,
        deflection_trace: sim.interaction.deflections().collect(),
    };
    if is_new {
        let interaction = sim.interaction.clone();
        drop(sim);
        state.sims.insert(id, SimState { interaction });
    }
    Ok(out)
}

async fn simulate_step(
    State(state): State<Shared>,
    payload: Result<Json<SimulationRequest>, JsonRejection>,
) -> Result<Json<SimulationResponse>, ApiError> {
    let req = json_body(payload)?;
    blocking(move || simulation_step(&state, req))
        .await
        .map(Json)
}

#[derive(Debug, Clone, Serialize)]
pub struct NearestMatch {
    pub label: String,
    pub surface: String,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NearestResponse {
    pub kind: EntryKind,
    pub query: Epa,
    pub matches: Vec<NearestMatch>,
}

fn number(params: &HashMap<String, String>, key: &str) -> Result<Option<f64>, ApiError> {
    params
        .get(key)
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    ApiError::bad_request(format!("parameter {key}='{v}' is not a finite number"))
                })
        })
        .transpose()
}

pub const DEFAULT_NEAREST_K: usize = 2;

fn nearest_query(
    state: &AppState,
    params: &HashMap<String, String>,
) -> Result<NearestResponse, ApiError> {
    let kind = match params.get("kind") {
        Some(k) => k.parse::<EntryKind>().map_err(ApiError::bad_request)?,
        None => EntryKind::Behavior,
    };
    let mut epa = [0.0; 3];
    for (slot, key) in epa.iter_mut().zip(["e", "p", "a"]) {
        *slot = number(params, key)?
            .ok_or_else(|| ApiError::bad_request(format!("parameter {key} is required")))?;
    }
    let k = match params.get("k") {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|k| *k > 0)
            .ok_or_else(|| {
                ApiError::bad_request(format!("parameter k='{v}' must be a positive integer"))
            })?,
        None => DEFAULT_NEAREST_K,
    };
    let query = actgen_core::validate_epa(epa)
        .map_err(|e| ApiError::bad_request(e.to_string()))?
        .epa;
    let matches = state.engine.lexicon.nearest_labels(kind, query, k)?;
    Ok(NearestResponse {
        kind,
        query,
        matches: matches
            .into_iter()
            .map(|LabelMatch { label, distance }| NearestMatch {
                surface: surface_label(&label),
                label,
                distance,
            })
            .collect(),
    })
}

async fn nearest(
    State(state): State<Shared>,
    params: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<NearestResponse>, ApiError> {
    let Query(params) = params.map_err(|r| ApiError::bad_request(r.body_text()))?;
    nearest_query(&state, &params).map(Json)
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub setting: IdentitySetting,
    pub generator: GeneratorChoice,
    pub human: Identity<f64>,
    pub agent: Identity<f64>,
    pub transcript: Vec<TurnAnnotation>,
    pub deflection_trace: Vec<f64>,
}

async fn session(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let handle = state
        .chats
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no session '{id}'")))?;
    // a turn in progress holds the lock; wait for it off the executor
    blocking(move || {
        let s = handle.lock();
        Ok(SessionView {
            session_id: s.id.clone(),
            setting: s.setting.clone(),
            generator: s.generator,
            human: s.human().clone(),
            agent: s.agent().clone(),
            transcript: s.transcript.clone(),
            deflection_trace: s.deflection_trace(),
        })
    })
    .await
    .map(Json)
}

/// Serves until the listener fails.
pub async fn serve(state: AppState, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let state = Arc::new(state);
    spawn_evictor(state.clone());
    axum::serve(listener, router(state)).await
}
