//! HTTP API over a [`SessionStore`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use pra_core::assessment::{
    create_session, detect_divergence, AssessmentError, DivergenceFlag, EstimateEntry,
    ScenarioStatus, SystemInfoInput, TeamMode,
};
use pra_core::pathway::operator_catalog;
use pra_core::reference::reference_tables;
use pra_core::reporting::{
    emit_output_log, report_card, tallied_matrix, FocusedScheme, OutputLog, ReportCard,
    ReportingError, TalliedRiskMatrix,
};
use pra_core::taxonomy::{Rubrics, TaxonomyLevel};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::mutation::{error_code, MutationEnvelope, MutationError, SessionCommand};
use crate::store::{SessionStore, StoreError};

pub const DEFAULT_FRAMEWORK_VERSION: &str = "v0.9.1-alpha";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub rubrics: Arc<Rubrics>,
}

/// Error response: `{"error": code, "message": text}` plus optional extras.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    current_revision: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            current_revision: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(rev) = self.current_revision {
            body["current_revision"] = json!(rev);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::Exists(_) => Self::new(StatusCode::CONFLICT, "exists", e.to_string()),
            StoreError::Mutation(m) => {
                let mut err = Self::new(status_for(m), error_code(m), m.to_string());
                if let MutationError::Conflict { current_revision } = m {
                    err.current_revision = Some(*current_revision);
                }
                err
            }
            StoreError::Workbook(w) => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                error_code(w),
                w.to_string(),
            ),
        }
    }
}

impl From<AssessmentError> for ApiError {
    fn from(e: AssessmentError) -> Self {
        StoreError::Mutation(e.into()).into()
    }
}

impl From<ReportingError> for ApiError {
    fn from(e: ReportingError) -> Self {
        let status = match e {
            ReportingError::NotFinalized => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, error_code(&e), e.to_string())
    }
}

fn status_for(e: &MutationError) -> StatusCode {
    match e {
        MutationError::Conflict { .. } => StatusCode::CONFLICT,
        MutationError::AnonymousActor => StatusCode::BAD_REQUEST,
        MutationError::Assessment(
            AssessmentError::UnknownScenario(_) | AssessmentError::UnknownAspect(_),
        ) => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/reference/taxonomy", get(ref_taxonomy))
        .route("/reference/rubrics", get(ref_rubrics))
        .route("/reference/operators", get(ref_operators))
        .route("/reference/tables", get(ref_tables))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/aspects", get(aspects))
        .route("/sessions/{id}/mutations", post(mutate))
        .route("/sessions/{id}/divergences", get(divergences))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/report-card", get(card))
        .route("/sessions/{id}/tallied-matrix", get(matrix))
        .route("/sessions/{id}/output-log", post(output_log))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

async fn ref_taxonomy(State(st): State<AppState>) -> Response {
    Json(st.store.taxonomy()).into_response()
}

async fn ref_rubrics(State(st): State<AppState>) -> Response {
    Json(&*st.rubrics).into_response()
}

async fn ref_operators() -> Response {
    Json(operator_catalog()).into_response()
}

async fn ref_tables() -> Response {
    Json(reference_tables()).into_response()
}

#[derive(Debug, Deserialize)]
pub struct CreateSessionRequest {
    pub system_info: SystemInfoInput,
    pub aml: String,
    #[serde(default)]
    pub framework_version: Option<String>,
    pub team_mode: TeamMode,
}

async fn create(
    State(st): State<AppState>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let fv = req
        .framework_version
        .as_deref()
        .unwrap_or(DEFAULT_FRAMEWORK_VERSION);
    let session = create_session(req.system_info, &req.aml, fv, req.team_mode)?;
    let session = st.store.insert(session)?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn list(State(st): State<AppState>) -> Json<Vec<String>> {
    Json(st.store.ids())
}

async fn snapshot(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(st.store.snapshot(&id)?).into_response())
}

#[derive(Debug, Serialize)]
struct AspectsView {
    working_level: TaxonomyLevel,
    revision: u64,
    remaining: Vec<String>,
    completed: Vec<String>,
}

async fn aspects(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<AspectsView>> {
    let s = st.store.snapshot(&id)?;
    Ok(Json(AspectsView {
        working_level: s.working_level(),
        revision: s.revision,
        remaining: s.next_aspects(st.store.taxonomy()),
        completed: s.aspect_completion.keys().cloned().collect(),
    }))
}

async fn mutate(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<MutationEnvelope>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(envelope) = body?;
    Ok(Json(st.store.mutate(&id, envelope)?).into_response())
}

#[derive(Debug, Serialize)]
struct DivergenceView {
    scenario_id: String,
    status: ScenarioStatus,
    flags: Vec<DivergenceFlag>,
    /// Initial estimates per flagged outcome, for side-by-side comparison.
    estimates: Vec<Vec<EstimateEntry>>,
}

async fn divergences(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<DivergenceView>>> {
    let s = st.store.snapshot(&id)?;
    if s.team_mode == TeamMode::Single {
        return Ok(Json(Vec::new()));
    }
    let views = s
        .scenarios
        .iter()
        .filter(|sc| {
            matches!(
                sc.status,
                ScenarioStatus::Estimated | ScenarioStatus::Recalibrating
            )
        })
        .filter_map(|sc| {
            let flags = detect_divergence(sc, s.divergence_threshold);
            if flags.is_empty() {
                return None;
            }
            let estimates = flags
                .iter()
                .map(|f| sc.outcomes[f.outcome_index].estimates.clone())
                .collect();
            Some(DivergenceView {
                scenario_id: sc.id.clone(),
                status: sc.status,
                flags,
                estimates,
            })
        })
        .collect();
    Ok(Json(views))
}

#[derive(Debug, Deserialize)]
struct FinalizeRequest {
    expected_revision: u64,
    actor: String,
}

async fn finalize(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: FinalizeRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let applied = st.store.mutate(
        &id,
        MutationEnvelope {
            expected_revision: req.expected_revision,
            actor: req.actor,
            command: SessionCommand::Finalize,
        },
    )?;
    Ok(Json(applied).into_response())
}

#[derive(Debug, Deserialize)]
struct CardQuery {
    scheme: Option<String>,
}

/// `scheme` is either `default` or a JSON-encoded custom scheme.
fn scheme_from_query(q: &CardQuery) -> ApiResult<FocusedScheme> {
    match q.scheme.as_deref() {
        None | Some("default") => Ok(FocusedScheme::default_scheme().clone()),
        Some(text) => {
            let scheme: FocusedScheme = serde_json::from_str(text)
                .map_err(|e| ApiError::bad_request(format!("scheme: {e}")))?;
            scheme.check()?;
            Ok(scheme)
        }
    }
}

async fn card(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CardQuery>,
) -> ApiResult<Json<ReportCard>> {
    let scheme = scheme_from_query(&q)?;
    let s = st.store.snapshot(&id)?;
    Ok(Json(report_card(&s, st.store.taxonomy(), &scheme)?))
}

async fn matrix(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<TalliedRiskMatrix>> {
    let s = st.store.snapshot(&id)?;
    Ok(Json(tallied_matrix(&s)?))
}

#[derive(Debug, Deserialize)]
struct OutputLogRequest {
    completed_at: DateTime<Utc>,
}

async fn output_log(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<OutputLog>> {
    let req: OutputLogRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let at = req.completed_at;
    let log = st.store.update(&id, |doc| -> ApiResult<OutputLog> {
        let log = emit_output_log(&doc.session, at)?;
        doc.record_output(&log.content_digest);
        Ok(log)
    })?;
    Ok(Json(log))
}

pub async fn serve(state: AppState, listen: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
