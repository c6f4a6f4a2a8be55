//! [`PeerTransport`] over plain HTTP.

use std::time::Duration;

use marginalia_core::federation::{
    ExportBatch, FederationPeer, PeerTransport, SyncRequest, SyncResponse,
};
use marginalia_core::{Error, Result};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ErrorBody;

/// Blocking HTTP client for the peer-facing `/fed/*` endpoints.
///
/// Calls block the current thread, so use it from a plain thread (or
/// `spawn_blocking`), never directly inside an async task.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::TransportFailure(e.to_string()))?;
        Ok(HttpTransport { client })
    }

    fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        peer: &FederationPeer,
        path: &str,
        body: &B,
    ) -> Result<R> {
        let url = format!("{}{path}", peer.base_url.trim_end_matches('/'));
        let response = self
            .client
            .post(&url)
            .bearer_auth(&peer.token)
            .json(body)
            .send()
            .map_err(|e| Error::TransportFailure(format!("{url}: {e}")))?;
        let response = check(&url, response)?;
        response
            .json()
            .map_err(|e| Error::TransportFailure(format!("{url}: bad response: {e}")))
    }
}

fn check(url: &str, response: Response) -> Result<Response> {
    let status = response.status();
    if status.is_success() {
        return Ok(response);
    }
    let detail = match response.json::<ErrorBody>() {
        Ok(body) => format!("{} {}", body.code, body.message),
        Err(_) => String::from("no error body"),
    };
    if status == StatusCode::UNAUTHORIZED {
        return Err(Error::Unauthorized(format!(
            "{url} refused the token: {detail}"
        )));
    }
    Err(Error::TransportFailure(format!(
        "{url} answered {status}: {detail}"
    )))
}

impl PeerTransport for HttpTransport {
    fn sync(&self, peer: &FederationPeer, request: &SyncRequest) -> Result<SyncResponse> {
        self.post(peer, "/fed/sync", request)
    }

    fn export(&self, peer: &FederationPeer, batch: &ExportBatch) -> Result<()> {
        let _: serde_json::Value = self.post(peer, "/fed/export-sink", batch)?;
        Ok(())
    }
}
