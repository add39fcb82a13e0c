//! HTTP service and command-line front end of the antisexism pipeline.
//!
//! State lives in a data directory of append-only JSON Lines files (see
//! [`store`]). [`app::App`] holds the operations; [`http`] and [`cli`] are
//! thin adapters over them.

pub mod app;
pub mod cli;
mod config;
mod error;
pub mod http;
pub mod models;
pub mod store;

pub use config::{AnnotatorToken, ServiceConfig};
pub use error::{ErrorBody, ServiceError};
