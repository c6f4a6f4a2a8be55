//! HTTP portal and administrative CLI for a marginalia node.
//!
//! The portal routes user requests to the store, synthesizer, search,
//! analytics and federation layers of `marginalia-core`, and serves the
//! peer-facing `/fed/*` endpoints other nodes call.

pub mod api;
pub mod cli;
pub mod error;
pub mod node;
pub mod sessions;
pub mod transport;

pub use api::{router, AppState};
pub use error::{ApiError, ErrorBody};
pub use transport::HttpTransport;
