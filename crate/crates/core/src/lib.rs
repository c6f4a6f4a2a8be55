//! Annotation service core.
//!
//! Users annotate documents; annotations are stored in an append-only log,
//! widen document retrieval beyond the base index, travel between federated
//! systems, and feed per-user profiles and group/time analytics.
//!
//! * [`model`]: domain records, validation and anchor resolution
//! * [`store`]: transaction log, replay, in-memory indexes and visibility
//! * [`synthesizer`]: sessions, credentials, explicit and implicit profiles
//! * [`search`]: tokenizer, posting index, base and extended retrieval
//! * [`federation`]: receptive, admissive, interpretative and collaborative exchange
//! * [`analytics`]: group/time counts and relationship graphs

pub mod analytics;
pub mod error;
pub mod federation;
pub mod model;
pub mod search;
pub mod store;
pub mod synthesizer;

pub use error::{Error, Result};
