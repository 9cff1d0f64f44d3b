//! HTTP service for exploring sampling hyperparameters: generate text with a
//! chosen top-p / frequency penalty / presence penalty, rate it, and compare
//! against earlier runs of the same prompt.

pub mod api;
pub mod descriptions;
pub mod registry;

pub use api::{router, AppState};
pub use registry::{Provider, ProviderRegistry};
