//! Repository service: deposit lifecycle over HTTP, content-addressed blob
//! storage, search, token auth, link checking and an OAI-PMH endpoint.

pub mod auth;
pub mod blob;
pub mod clock;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod http;
pub mod links;
pub mod oai;
pub mod repo;
pub mod search;

pub use auth::{Caller, Role, TokenEntry, TokenTable};
pub use blob::{BlobStore, ScrubReport};
pub use clock::{Clock, SteppingClock, SystemClock};
pub use config::{ConfigError, ServiceConfig};
pub use error::ServiceError;
pub use http::{router, serve, AppState, BackgroundServer};
pub use links::{Fetcher, HttpFetcher, Probe};
pub use oai::{oai_handle, OaiProvider, OaiRecord};
pub use repo::{DepositView, ExternalDocument, PublishOutcome, Repository, UploadOutcome};
pub use search::{SearchHit, SearchPage, SearchQuery};
