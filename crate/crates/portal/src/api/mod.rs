//! The portal's HTTP surface.
//!
//! User endpoints authenticate with a bearer token obtained from
//! `POST /login`. Peer endpoints under `/fed` authenticate with the token
//! agreed at peer registration. Every error body is `{code, message}`.

mod fed;
mod user;

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Query, Request};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use marginalia_core::model::Timestamp;
use marginalia_core::search::AnnotationWeight;
use marginalia_core::store::{SharedStore, Store};
use serde::de::DeserializeOwned;
use tower_http::cors::CorsLayer;

use crate::error::{ApiError, ApiResult};
use crate::sessions::{Login, Tokens};

/// Shared state behind every handler.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: SharedStore,
    tokens: Tokens,
    weight: AnnotationWeight,
}

impl AppState {
    pub fn new(store: SharedStore, weight: AnnotationWeight) -> Self {
        AppState {
            inner: Arc::new(Inner {
                store,
                tokens: Tokens::default(),
                weight,
            }),
        }
    }

    pub fn store(&self) -> &SharedStore {
        &self.inner.store
    }

    pub fn tokens(&self) -> &Tokens {
        &self.inner.tokens
    }

    pub fn weight(&self) -> AnnotationWeight {
        self.inner.weight
    }

    /// Runs `f` against the store on the blocking pool, under the read lock.
    pub async fn read<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&Store) -> ApiResult<T> + Send + 'static,
    {
        let me = self.clone();
        tokio::task::spawn_blocking(move || f(&me.inner.store.read()))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }

    /// Like [`AppState::read`] under the write lock.
    pub async fn write<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&mut Store, &Tokens) -> ApiResult<T> + Send + 'static,
    {
        let me = self.clone();
        tokio::task::spawn_blocking(move || f(&mut me.inner.store.write(), &me.inner.tokens))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }
}

pub fn router(state: AppState, ui_origin: Option<&str>) -> anyhow::Result<Router> {
    let mut app = Router::new()
        .route("/login", post(user::login))
        .route("/logout", post(user::logout))
        .route("/documents/{document_ref}", get(user::get_document))
        .route("/search", get(user::search))
        .route("/search-extended", get(user::search_extended))
        .route(
            "/annotations",
            post(user::create_annotation).get(user::list_annotations),
        )
        .route("/profile/{annotator_ref}", get(user::profile))
        .route("/analytics/group-time", get(user::group_time))
        .route("/analytics/graph", get(user::graph))
        .route("/fed/register", post(fed::register))
        .route("/fed/annotations", get(fed::annotations))
        .route("/fed/deposit", post(fed::deposit))
        .route("/fed/export-sink", post(fed::export_sink))
        .route("/fed/sync", post(fed::sync))
        .fallback(unknown_route)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    if let Some(origin) = ui_origin {
        let origin: HeaderValue = origin.parse()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

async fn unknown_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "UnknownRoute", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "MethodNotAllowed",
        "method not allowed here",
    )
}

/// JSON body whose rejections use the portal error format.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e: JsonRejection| ApiError::bad_request(e.body_text()))
    }
}

/// Query string whose rejections use the portal error format.
pub struct ApiQuery<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| ApiQuery(v))
            .map_err(|e: QueryRejection| ApiError::bad_request(e.body_text()))
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
        .filter(|t| !t.is_empty())
}

/// Bearer token presented by a peer system.
pub struct PeerToken(pub String);

impl<S: Send + Sync> FromRequestParts<S> for PeerToken {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        bearer(&parts.headers)
            .map(|t| PeerToken(t.to_string()))
            .ok_or_else(|| ApiError::unauthorized("missing bearer token"))
    }
}

#[derive(PartialEq, Eq)]
enum Liveness {
    Live,
    Closed,
    IdleSince(Timestamp),
}

/// The logged-in user behind a request. Closed or idle sessions are refused.
pub struct CurrentUser {
    pub token: String,
    pub login: Login,
}

impl FromRequestParts<AppState> for CurrentUser {
    type Rejection = ApiError;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        let token = bearer(&parts.headers)
            .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?
            .to_string();
        let login = state
            .tokens()
            .resolve(&token)
            .ok_or_else(|| ApiError::unauthorized("unknown or expired token"))?;
        let session_ref = login.session_ref.clone();
        let status = state
            .read(move |store| {
                let session = store.get_session(&session_ref)?;
                let last = session.last_activity();
                Ok(if !session.is_open() {
                    Liveness::Closed
                } else if store.now() - last > store.config().session_timeout {
                    Liveness::IdleSince(last)
                } else {
                    Liveness::Live
                })
            })
            .await?;
        if let Liveness::IdleSince(last) = status {
            let session_ref = login.session_ref.clone();
            state
                .write(move |store, _| {
                    if store.get_session(&session_ref)?.is_open() {
                        store.close_session(&session_ref, last)?;
                        tracing::info!(session = %session_ref, "closed idle session");
                    }
                    Ok(())
                })
                .await?;
        }
        if status != Liveness::Live {
            state.tokens().revoke(&token);
            return Err(ApiError::unauthorized("session is closed"));
        }
        Ok(CurrentUser { token, login })
    }
}
