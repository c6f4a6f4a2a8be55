use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::Json;
use marginalia_core::federation::{
    DepositOutcome, DepositRequest, ExportBatch, FederatedAnnotation, FederationPeer,
    RegisterRequest, SyncRequest, SyncResponse,
};
use serde::{Deserialize, Serialize};

use super::{bearer, ApiJson, ApiQuery, AppState, CurrentUser, PeerToken};
use crate::error::{ApiError, ApiResult};

/// Registers a peer system. Only logged-in users may do this.
pub async fn register(
    State(state): State<AppState>,
    _me: CurrentUser,
    ApiJson(req): ApiJson<RegisterRequest>,
) -> ApiResult<(StatusCode, Json<FederationPeer>)> {
    let peer = state
        .write(move |store, _| {
            Ok(store.register_peer(&req.peer_id, &req.base_url, req.modes, req.token)?)
        })
        .await?;
    tracing::info!(peer = %peer.peer_id, "peer registered");
    Ok((StatusCode::CREATED, Json(peer)))
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReceptiveParams {
    #[serde(default)]
    pub q: String,
    /// Requesting peer. Without it the query is anonymous.
    pub peer: Option<String>,
}

/// Receptive search over shared annotations.
pub async fn annotations(
    State(state): State<AppState>,
    headers: HeaderMap,
    ApiQuery(params): ApiQuery<ReceptiveParams>,
) -> ApiResult<Json<Vec<FederatedAnnotation>>> {
    let requester = match params.peer {
        Some(peer) => {
            let token =
                bearer(&headers).ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
            Some((peer, token.to_string()))
        }
        None => None,
    };
    let found = state
        .read(move |store| {
            let requester = requester.as_ref().map(|(p, t)| (p.as_str(), t.as_str()));
            Ok(store.receptive_query(&params.q, requester)?)
        })
        .await?;
    Ok(Json(found))
}

pub async fn deposit(
    State(state): State<AppState>,
    PeerToken(token): PeerToken,
    ApiJson(req): ApiJson<DepositRequest>,
) -> ApiResult<Json<Vec<DepositOutcome>>> {
    let outcomes = state
        .write(move |store, _| {
            Ok(store.admissive_deposit(&req.peer_id, &token, req.annotations)?)
        })
        .await?;
    Ok(Json(outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportAccepted {
    pub accepted: usize,
}

/// Receiving end of an interpretative export from `batch.origin_system`.
pub async fn export_sink(
    State(state): State<AppState>,
    PeerToken(token): PeerToken,
    ApiJson(batch): ApiJson<ExportBatch>,
) -> ApiResult<Json<ExportAccepted>> {
    let accepted = state
        .read(move |store| Ok(store.accept_export(&batch.origin_system, &token, &batch)?))
        .await?;
    Ok(Json(ExportAccepted { accepted }))
}

pub async fn sync(
    State(state): State<AppState>,
    PeerToken(token): PeerToken,
    ApiJson(req): ApiJson<SyncRequest>,
) -> ApiResult<Json<SyncResponse>> {
    let response = state
        .write(move |store, _| Ok(store.serve_sync(&token, &req)?))
        .await?;
    Ok(Json(response))
}
