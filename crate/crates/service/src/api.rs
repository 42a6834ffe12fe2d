//! HTTP API over documents, sessions, models and evaluation runs.
//!
//! All state lives in the [`ProjectStore`]; handlers load what they need,
//! apply one operation and write the result back. Writes to one session
//! are serialized by a per-session lock.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use casebrief_core::classifier::{train, Backend, BaselineModel, ModelArtifact, TrainConfig};
use casebrief_core::corpus::{CaseBrief, Corpus, CorpusRecord, Ingestor, SplitName, SplitRatios, Span};
use casebrief_core::evalharness::{evaluate, EvalInputs, EvalRunRecord};
use casebrief_core::session::{
    create_session, text_units, GatingTable, Operation, ProficiencyLevel, Resolution, Session, SessionContext,
    WorkedExample,
};
use casebrief_core::warnings::{WarningError, WarningThreshold};
use casebrief_core::SectionLabel;
use chrono::{DateTime, Utc};
use dashmap::DashMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::config::Config;
use crate::error::{ApiError, ErrorCode};
use crate::store::{validate_id, Collection, ProjectStore, StoreError};

pub const API_VERSION_HEADER: &str = "cabinet-api-version";
pub const API_VERSION: &str = "1";

impl From<WarningError> for ApiError {
    fn from(e: WarningError) -> Self {
        match e {
            WarningError::Classifier(c) => c.into(),
            other => ApiError::validation(other.to_string()),
        }
    }
}

/// JSON body extractor whose rejections are `Validation` errors.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rejection) => Err(json_rejection(rejection)),
        }
    }
}

fn json_rejection(rejection: JsonRejection) -> ApiError {
    ApiError::validation(rejection.body_text())
}

pub struct AppState {
    pub store: ProjectStore,
    pub gates: GatingTable,
    pub default_tau: WarningThreshold,
    pub reveal_explanations: bool,
    pub active_model: String,
    ingestor: Ingestor,
    models: DashMap<String, Arc<ModelArtifact>>,
    session_locks: DashMap<String, Arc<Mutex<()>>>,
    job_lock: Mutex<()>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    /// Opens the store and selects the active model: the configured model
    /// if any, then the store's previous choice, then a stratified baseline
    /// over the stored documents.
    pub fn new(config: &Config) -> Result<Self, ApiError> {
        let store = ProjectStore::open(&config.store_path)?;
        let active_model = match &config.model_path {
            Some(path) => {
                let model = ModelArtifact::load(path)?;
                let id = store.register_model(&model)?;
                store.set_active_model(&id)?;
                id
            }
            None => match store.active_model()?.filter(|id| store.load_model(id).is_ok()) {
                Some(id) => id,
                None => {
                    let model = default_baseline(&store)?;
                    let id = store.register_model(&model)?;
                    store.set_active_model(&id)?;
                    id
                }
            },
        };
        Ok(Self {
            store,
            gates: config.gates.clone(),
            default_tau: config.default_tau,
            reveal_explanations: config.reveal_explanations,
            active_model,
            ingestor: Ingestor::default(),
            models: DashMap::new(),
            session_locks: DashMap::new(),
            job_lock: Mutex::new(()),
        })
    }

    pub fn model(&self, id: Option<&str>) -> Result<Arc<ModelArtifact>, ApiError> {
        let id = id.unwrap_or(&self.active_model);
        if let Some(m) = self.models.get(id) {
            return Ok(m.clone());
        }
        let model = Arc::new(self.store.load_model(id)?);
        self.models.insert(id.to_string(), model.clone());
        Ok(model)
    }

    fn session_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.session_locks.entry(id.to_string()).or_default().clone()
    }

    fn corpus(&self) -> Result<Corpus, ApiError> {
        let briefs = self
            .store
            .list(Collection::Documents)?
            .iter()
            .map(|id| self.store.get::<CaseBrief>(Collection::Documents, id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Corpus::new(briefs)?)
    }
}

fn default_baseline(store: &ProjectStore) -> Result<ModelArtifact, ApiError> {
    let mut sentences = Vec::new();
    for id in store.list(Collection::Documents)? {
        sentences.extend(store.get::<CaseBrief>(Collection::Documents, &id)?.sentences);
    }
    if sentences.is_empty() {
        Ok(ModelArtifact::from_baseline(BaselineModel::uniform()))
    } else {
        Ok(train(&sentences, &[], &TrainConfig::new(Backend::Baseline))?)
    }
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(list_models))
        .route("/documents", post(create_document))
        .route("/documents/{id}", get(get_document))
        .route("/documents/{id}/worked-example", put(put_worked_example))
        .route("/sessions", post(create_session_handler))
        .route("/sessions/{id}", get(get_session).patch(update_session))
        .route("/sessions/{id}/annotations", post(submit_annotation))
        .route("/sessions/{id}/suggestions", post(suggest))
        .route("/sessions/{id}/suggestions/{aid}/resolve", post(resolve))
        .route("/sessions/{id}/highlights", get(highlights))
        .route("/sessions/{id}/worked-example", get(worked_example))
        .route("/sessions/{id}/categorizations", get(categorization_elements).post(categorize))
        .route("/sessions/{id}/brief", get(export_brief))
        .route("/eval/runs", post(start_eval_run))
        .route("/eval/runs/{id}", get(get_eval_run))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(axum::middleware::map_response(version_header))
        .with_state(state)
}

async fn version_header(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert(HeaderName::from_static(API_VERSION_HEADER), HeaderValue::from_static(API_VERSION));
    response
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    pub backend: Backend,
    pub fingerprint: String,
}

async fn list_models(State(state): State<SharedState>) -> Result<Json<serde_json::Value>, ApiError> {
    let mut models = Vec::new();
    for id in state.store.list_models()? {
        let m = state.model(Some(&id))?;
        models.push(ModelInfo { id, backend: m.backend(), fingerprint: m.fingerprint().to_string() });
    }
    Ok(Json(json!({ "active": state.active_model, "models": models })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocumentView {
    pub document: CaseBrief,
    /// Sentence spans a learner can select, in order.
    pub units: Vec<Span>,
}

impl DocumentView {
    fn new(document: CaseBrief) -> Self {
        let units = text_units(&document);
        Self { document, units }
    }
}

async fn create_document(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::validation("body is not UTF-8"))?;
    let document = match CorpusRecord::from_json(text, 1)? {
        CorpusRecord::Raw(raw) => state.ingestor.ingest_document(&raw)?,
        CorpusRecord::Processed(brief) => brief,
    };
    validate_id(&document.doc_id)?;
    state.store.insert(Collection::Documents, &document.doc_id, &document)?;
    Ok((StatusCode::CREATED, Json(DocumentView::new(document))).into_response())
}

async fn get_document(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Json<DocumentView>, ApiError> {
    Ok(Json(DocumentView::new(state.store.get(Collection::Documents, &id)?)))
}

async fn put_worked_example(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(example): ApiJson<WorkedExample>,
) -> Result<Json<WorkedExample>, ApiError> {
    let doc: CaseBrief = state.store.get(Collection::Documents, &id)?;
    example.validate(&doc)?;
    state.store.put(Collection::WorkedExamples, &id, &example)?;
    Ok(Json(example))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSessionRequest {
    #[serde(alias = "user")]
    user_id: String,
    level: i64,
    doc_id: String,
    #[serde(default)]
    tau: Option<f64>,
    #[serde(default)]
    model_id: Option<String>,
    #[serde(default)]
    reveal_explanations: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session: Session,
    pub level_name: String,
    pub operations: BTreeSet<Operation>,
}

impl SessionView {
    fn new(session: Session, gates: &GatingTable) -> Self {
        Self { level_name: session.level.name().to_string(), operations: gates.operations(session.level), session }
    }
}

async fn create_session_handler(
    State(state): State<SharedState>,
    ApiJson(req): ApiJson<CreateSessionRequest>,
) -> Result<Response, ApiError> {
    if req.user_id.trim().is_empty() {
        return Err(ApiError::validation("user_id must not be empty"));
    }
    let doc = match state.store.get::<CaseBrief>(Collection::Documents, &req.doc_id) {
        Ok(d) => Some(d),
        Err(StoreError::NotFound { .. } | StoreError::InvalidId(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let mut session = create_session(session_id, req.user_id, req.level, &req.doc_id, |_| doc.as_ref())?;
    session.tau = req.tau.map(WarningThreshold::new).transpose()?.unwrap_or(state.default_tau);
    if let Some(model_id) = req.model_id {
        state.model(Some(&model_id))?;
        session.model_id = Some(model_id);
    }
    session.reveal_explanations = req.reveal_explanations.unwrap_or(state.reveal_explanations);
    state.store.insert(Collection::Sessions, &session.session_id, &session)?;
    Ok((StatusCode::CREATED, Json(SessionView::new(session, &state.gates))).into_response())
}

async fn get_session(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session: Session = state.store.get(Collection::Sessions, &id)?;
    Ok(Json(SessionView::new(session, &state.gates)))
}

/// Runs `op` against a session under its lock, persisting the session when
/// `persist` is set and the operation succeeds.
async fn with_session<R>(
    state: &SharedState,
    id: &str,
    persist: bool,
    op: impl FnOnce(&mut Session, &SessionContext) -> Result<R, ApiError>,
) -> Result<R, ApiError> {
    let lock = state.session_lock(id);
    let _guard = lock.lock().await;
    let mut session: Session = state.store.get(Collection::Sessions, id)?;
    let document: CaseBrief = state.store.get(Collection::Documents, &session.doc_id)?;
    let worked = match state.store.get::<WorkedExample>(Collection::WorkedExamples, &session.doc_id) {
        Ok(w) => Some(w),
        Err(StoreError::NotFound { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let model = state.model(session.model_id.as_deref())?;
    let ctx = SessionContext { document: &document, model: model.as_ref(), worked_example: worked.as_ref(), gates: &state.gates };
    let result = op(&mut session, &ctx)?;
    if persist {
        state.store.put(Collection::Sessions, id, &session)?;
    }
    Ok(result)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdateSessionRequest {
    level: i64,
}

async fn update_session(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<UpdateSessionRequest>,
) -> Result<Json<SessionView>, ApiError> {
    let level = ProficiencyLevel::try_from(req.level)?;
    let session = with_session(&state, &id, true, |s, _| {
        s.reconfigure_level(level);
        Ok(s.clone())
    })
    .await?;
    Ok(Json(SessionView::new(session, &state.gates)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRequest {
    span: Span,
    label: SectionLabel,
}

async fn submit_annotation(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<AnnotationRequest>,
) -> Result<Response, ApiError> {
    let outcome = with_session(&state, &id, true, |s, ctx| Ok(s.submit_annotation(ctx, req.span, req.label)?)).await?;
    Ok((StatusCode::CREATED, Json(outcome)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuggestionRequest {
    span: Span,
}

async fn suggest(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<SuggestionRequest>,
) -> Result<Response, ApiError> {
    let suggestion = with_session(&state, &id, true, |s, ctx| Ok(s.suggest_category(ctx, req.span)?)).await?;
    Ok((StatusCode::CREATED, Json(suggestion)).into_response())
}

async fn resolve(
    State(state): State<SharedState>,
    Path((id, aid)): Path<(String, String)>,
    ApiJson(resolution): ApiJson<Resolution>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let aid: u64 = aid.parse().map_err(|_| ApiError::validation(format!("invalid annotation id `{aid}`")))?;
    let annotation = with_session(&state, &id, true, |s, ctx| Ok(s.resolve_suggestion(ctx, aid, resolution)?.clone())).await?;
    Ok(Json(json!({ "annotation": annotation })))
}

async fn highlights(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let highlights = with_session(&state, &id, false, |s, ctx| Ok(s.highlight_document(ctx)?)).await?;
    Ok(Json(json!({ "highlights": highlights })))
}

async fn worked_example(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Json<WorkedExample>, ApiError> {
    Ok(Json(with_session(&state, &id, false, |s, ctx| Ok(s.get_worked_example(ctx)?)).await?))
}

async fn categorization_elements(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let elements = with_session(&state, &id, false, |s, ctx| Ok(s.categorization_elements(ctx)?)).await?;
    Ok(Json(json!({ "elements": elements })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CategorizationRequest {
    element_id: usize,
    label: SectionLabel,
}

async fn categorize(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<CategorizationRequest>,
) -> Result<Response, ApiError> {
    let event =
        with_session(&state, &id, true, |s, ctx| Ok(s.submit_categorization(ctx, req.element_id, req.label)?)).await?;
    Ok((StatusCode::CREATED, Json(event)).into_response())
}

async fn export_brief(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let brief = with_session(&state, &id, false, |s, ctx| Ok(s.export_brief(ctx)?)).await?;
    Ok(Json(brief).into_response())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRunRequest {
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub taus: Option<Vec<f64>>,
    #[serde(default)]
    pub split_seed: Option<u64>,
    #[serde(default)]
    pub ratios: Option<SplitRatios>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalJob {
    pub run_id: String,
    pub status: JobStatus,
    pub model_id: String,
    pub taus: Vec<f64>,
    pub split_seed: u64,
    pub ratios: SplitRatios,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<EvalRunRecord>,
}

async fn start_eval_run(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: EvalRunRequest = if body.iter().all(u8::is_ascii_whitespace) {
        EvalRunRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))?
    };
    let model_id = req.model_id.unwrap_or_else(|| state.active_model.clone());
    let model = state.model(Some(&model_id))?;
    let taus = req.taus.unwrap_or_else(|| WarningThreshold::SWEEP.map(f64::from).to_vec());
    if taus.is_empty() {
        return Err(ApiError::validation("at least one threshold is required"));
    }
    for &t in &taus {
        WarningThreshold::new(t)?;
    }
    let provenance = model.manifest().provenance.clone();
    let split_seed = req.split_seed.or(provenance.as_ref().map(|p| p.split_seed)).unwrap_or(0);
    let ratios = match req.ratios.or(provenance.map(|p| p.ratios)) {
        Some(r) => r.validate().map(|_| r)?,
        None => SplitRatios::default(),
    };
    let job = EvalJob {
        run_id: uuid::Uuid::new_v4().simple().to_string(),
        status: JobStatus::Queued,
        model_id,
        taus,
        split_seed,
        ratios,
        created_at: Utc::now(),
        finished_at: None,
        error: None,
        record: None,
    };
    state.store.insert(Collection::EvalRuns, &job.run_id, &job)?;
    let response = (StatusCode::ACCEPTED, Json(job.clone())).into_response();
    tokio::spawn(run_eval_job(state.clone(), job));
    Ok(response)
}

async fn run_eval_job(state: SharedState, mut job: EvalJob) {
    let _exclusive = state.job_lock.lock().await;
    job.status = JobStatus::Running;
    if let Err(e) = state.store.put(Collection::EvalRuns, &job.run_id, &job) {
        tracing::error!(run_id = %job.run_id, error = %e, "cannot record job start");
    }
    let worker_state = state.clone();
    let queued = job.clone();
    let result = tokio::task::spawn_blocking(move || compute_eval(&worker_state, &queued))
        .await
        .unwrap_or_else(|e| Err(ApiError::new(ErrorCode::Internal, format!("evaluation task failed: {e}"))));
    job.finished_at = Some(Utc::now());
    match result {
        Ok(record) => {
            job.status = JobStatus::Succeeded;
            job.record = Some(record);
        }
        Err(e) => {
            job.status = JobStatus::Failed;
            job.error = Some(e);
        }
    }
    if let Err(e) = state.store.put(Collection::EvalRuns, &job.run_id, &job) {
        tracing::error!(run_id = %job.run_id, error = %e, "cannot record job result");
    }
}

fn compute_eval(state: &AppState, job: &EvalJob) -> Result<EvalRunRecord, ApiError> {
    let model = state.model(Some(&job.model_id))?;
    let corpus = state.corpus()?;
    let split = corpus.split(job.split_seed, job.ratios)?;
    let train = corpus.sentences_in(&split, SplitName::Train);
    let validation = corpus.sentences_in(&split, SplitName::Validation);
    let test = corpus.sentences_in(&split, SplitName::Test);
    let inputs = EvalInputs {
        corpus_fingerprint: corpus.fingerprint(),
        split_seed: job.split_seed,
        ratios: job.ratios,
        train: &train,
        validation: &validation,
        test: &test,
        taus: &job.taus,
    };
    Ok(evaluate(&model, &inputs)?)
}

async fn get_eval_run(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Json<EvalJob>, ApiError> {
    Ok(Json(state.store.get(Collection::EvalRuns, &id)?))
}
