use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use marginalia_core::analytics::{Bucket, GroupTimeMatrix, Grouping, RelationEdge, RelationKind};
use marginalia_core::model::{
    generate_ref, AnnotationAnchor, AnnotationKind, AnnotationObjective, AnnotationRecord,
    AnnotationType, Approach, ApproachKind, DocumentRecord, SessionContext, SessionEvent,
    SessionEventKind, Timestamp, Visibility,
};
use marginalia_core::search::{query_terms, SearchHit};
use marginalia_core::store::{AnnotationFilter, Store};
use marginalia_core::synthesizer::UserProfile;
use serde::{Deserialize, Serialize};

use super::{ApiJson, ApiQuery, AppState, CurrentUser};
use crate::error::{ApiError, ApiResult};
use crate::sessions::Login;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoginRequest {
    pub annotator_ref: String,
    pub password: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub session: SessionContext,
}

/// Time for a new event in `session_ref`: now, or the last activity if the
/// clock reads earlier.
fn event_time(store: &Store, session_ref: &str) -> ApiResult<Timestamp> {
    let last = store.get_session(session_ref)?.last_activity();
    Ok(store.now().max(last))
}

pub async fn login(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<LoginRequest>,
) -> ApiResult<Json<LoginResponse>> {
    let (user, password) = (req.annotator_ref.clone(), req.password);
    state
        .read(move |store| Ok(store.authenticate(&user, &password)?))
        .await?;
    let user = req.annotator_ref;
    let response = state
        .write(move |store, tokens| {
            // A session nobody holds a token for (say, from before a restart)
            // is closed so its owner can log in again.
            if let Some(open) = store.state().open_session_of(&user) {
                if !tokens.holds(&open.session_ref) {
                    let (session_ref, last) = (open.session_ref.clone(), open.last_activity());
                    store.close_session(&session_ref, last)?;
                }
            }
            let now = store.now();
            let session = store.open_session(&user, now)?;
            let token = tokens.issue(Login {
                session_ref: session.session_ref.clone(),
                annotator_ref: user.clone(),
            });
            Ok(LoginResponse { token, session })
        })
        .await?;
    tracing::info!(user = %response.session.annotator_ref, "login");
    Ok(Json(response))
}

pub async fn logout(
    State(state): State<AppState>,
    me: CurrentUser,
) -> ApiResult<Json<SessionContext>> {
    let session_ref = me.login.session_ref.clone();
    let closed = state
        .write(move |store, _| {
            let at = event_time(store, &session_ref)?;
            Ok(store.close_session(&session_ref, at)?)
        })
        .await?;
    state.tokens().revoke(&me.token);
    Ok(Json(closed))
}

/// Returns a document and records the consultation in the caller's session.
pub async fn get_document(
    State(state): State<AppState>,
    me: CurrentUser,
    Path(document_ref): Path<String>,
) -> ApiResult<Json<DocumentRecord>> {
    let session_ref = me.login.session_ref;
    let doc = state
        .write(move |store, _| {
            let doc = store.get_document(&document_ref)?.clone();
            let at = event_time(store, &session_ref)?;
            let kind = SessionEventKind::DocumentConsulted { document_ref };
            store.record_event(&session_ref, SessionEvent { at, kind })?;
            Ok(doc)
        })
        .await?;
    Ok(Json(doc))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SearchParams {
    #[serde(default)]
    pub q: String,
    pub limit: Option<usize>,
}

async fn run_search(
    state: AppState,
    me: CurrentUser,
    params: SearchParams,
    extended: bool,
) -> ApiResult<Json<Vec<SearchHit>>> {
    let weight = state.weight();
    let Login {
        session_ref,
        annotator_ref,
    } = me.login;
    let hits = state
        .write(move |store, _| {
            let mut hits = if extended {
                store.search_extended(&params.q, &annotator_ref, weight)?
            } else {
                store.search_base(&params.q, &annotator_ref)?
            };
            let terms = query_terms(&params.q).map_err(marginalia_core::Error::from)?;
            let at = event_time(store, &session_ref)?;
            let kind = SessionEventKind::QueryIssued {
                terms: terms.into_iter().collect(),
            };
            store.record_event(&session_ref, SessionEvent { at, kind })?;
            if let Some(limit) = params.limit {
                hits.truncate(limit);
            }
            Ok(hits)
        })
        .await?;
    Ok(Json(hits))
}

pub async fn search(
    State(state): State<AppState>,
    me: CurrentUser,
    ApiQuery(params): ApiQuery<SearchParams>,
) -> ApiResult<Json<Vec<SearchHit>>> {
    run_search(state, me, params, false).await
}

pub async fn search_extended(
    State(state): State<AppState>,
    me: CurrentUser,
    ApiQuery(params): ApiQuery<SearchParams>,
) -> ApiResult<Json<Vec<SearchHit>>> {
    run_search(state, me, params, true).await
}

/// Client-supplied part of a new annotation. Maker, session, origin and time
/// are filled in by the portal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewAnnotation {
    #[serde(default)]
    pub context_ref: Option<String>,
    pub anchor: AnnotationAnchor,
    pub ann_type: AnnotationType,
    pub objective: AnnotationObjective,
    #[serde(default)]
    pub body_text: String,
    #[serde(default = "new_approach")]
    pub approach: Approach,
    pub visibility: Visibility,
}

fn new_approach() -> Approach {
    Approach::New
}

pub async fn create_annotation(
    State(state): State<AppState>,
    me: CurrentUser,
    ApiJson(req): ApiJson<NewAnnotation>,
) -> ApiResult<(StatusCode, Json<AnnotationRecord>)> {
    let Login {
        session_ref,
        annotator_ref,
    } = me.login;
    let record = state
        .write(move |store, _| {
            let record = AnnotationRecord {
                context_ref: req.context_ref.unwrap_or_else(generate_ref),
                origin_system: store.system_id().to_string(),
                annotator_ref,
                anchor: req.anchor,
                ann_type: req.ann_type,
                objective: req.objective,
                body_text: req.body_text,
                approach: req.approach,
                created_at: event_time(store, &session_ref)?,
                session_ref,
                visibility: req.visibility,
            };
            let id = store.append_annotation(record)?;
            Ok(store.get_annotation(&id)?.clone())
        })
        .await?;
    Ok((StatusCode::CREATED, Json(record)))
}

pub async fn list_annotations(
    State(state): State<AppState>,
    me: CurrentUser,
    ApiQuery(filter): ApiQuery<AnnotationFilter>,
) -> ApiResult<Json<Vec<AnnotationRecord>>> {
    let user = me.login.annotator_ref;
    let found = state
        .read(move |store| Ok(store.query_annotations(&filter, &user)?))
        .await?;
    Ok(Json(found))
}

pub async fn profile(
    State(state): State<AppState>,
    me: CurrentUser,
    Path(annotator_ref): Path<String>,
) -> ApiResult<Json<UserProfile>> {
    if annotator_ref != me.login.annotator_ref {
        return Err(ApiError::forbidden(
            "profiles are visible to their owner only",
        ));
    }
    let profile = state
        .read(move |store| Ok(store.user_profile(&annotator_ref)?))
        .await?;
    Ok(Json(profile))
}

/// Grouping and bucket plus the fields of [`AnnotationFilter`], spelled out
/// because query strings cannot carry nested structures.
#[derive(Debug, Clone, Deserialize)]
pub struct GroupTimeParams {
    #[serde(default = "default_grouping")]
    pub grouping: Grouping,
    #[serde(default = "default_bucket")]
    pub bucket: Bucket,
    pub document_ref: Option<String>,
    pub annotator_ref: Option<String>,
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
    pub kind: Option<AnnotationKind>,
    pub objective: Option<AnnotationObjective>,
    pub approach: Option<ApproachKind>,
}

fn default_grouping() -> Grouping {
    Grouping::ByRole
}

fn default_bucket() -> Bucket {
    Bucket::Day
}

impl GroupTimeParams {
    pub fn scope(&self) -> AnnotationFilter {
        AnnotationFilter {
            document_ref: self.document_ref.clone(),
            annotator_ref: self.annotator_ref.clone(),
            from: self.from,
            to: self.to,
            kind: self.kind,
            objective: self.objective,
            approach: self.approach,
        }
    }
}

pub async fn group_time(
    State(state): State<AppState>,
    me: CurrentUser,
    ApiQuery(params): ApiQuery<GroupTimeParams>,
) -> ApiResult<Json<GroupTimeMatrix>> {
    let user = me.login.annotator_ref;
    let matrix = state
        .read(move |store| {
            Ok(store.group_time_counts(params.grouping, params.bucket, &params.scope(), &user)?)
        })
        .await?;
    Ok(Json(matrix))
}

#[derive(Debug, Clone, Deserialize)]
pub struct GraphParams {
    pub kind: RelationKind,
}

pub async fn graph(
    State(state): State<AppState>,
    me: CurrentUser,
    ApiQuery(params): ApiQuery<GraphParams>,
) -> ApiResult<Json<Vec<RelationEdge>>> {
    let user = me.login.annotator_ref;
    let edges = state
        .read(move |store| Ok(store.relationship_graph(params.kind, &user)))
        .await?;
    Ok(Json(edges))
}
