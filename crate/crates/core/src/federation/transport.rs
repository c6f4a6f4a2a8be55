use std::collections::HashMap;

use super::{ExportBatch, FederationPeer, SyncRequest, SyncResponse};
use crate::error::{Error, Result};
use crate::store::SharedStore;

/// Carries federation requests to a peer. The bearer token is `peer.token`.
pub trait PeerTransport {
    fn sync(&self, peer: &FederationPeer, request: &SyncRequest) -> Result<SyncResponse>;

    fn export(&self, peer: &FederationPeer, batch: &ExportBatch) -> Result<()>;
}

/// Delivers requests straight to stores living in the same process, keyed by
/// the peer's `base_url`. Unknown URLs behave like unreachable hosts.
#[derive(Default, Clone)]
pub struct InProcessTransport {
    nodes: HashMap<String, SharedStore>,
}

impl InProcessTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_node(mut self, base_url: impl Into<String>, node: SharedStore) -> Self {
        self.nodes.insert(base_url.into(), node);
        self
    }

    fn node(&self, peer: &FederationPeer) -> Result<&SharedStore> {
        self.nodes
            .get(&peer.base_url)
            .ok_or_else(|| Error::TransportFailure(format!("{} is unreachable", peer.base_url)))
    }
}

impl PeerTransport for InProcessTransport {
    fn sync(&self, peer: &FederationPeer, request: &SyncRequest) -> Result<SyncResponse> {
        self.node(peer)?.write().serve_sync(&peer.token, request)
    }

    fn export(&self, peer: &FederationPeer, batch: &ExportBatch) -> Result<()> {
        let node = self.node(peer)?.read();
        node.accept_export(&batch.origin_system, &peer.token, batch)?;
        Ok(())
    }
}
