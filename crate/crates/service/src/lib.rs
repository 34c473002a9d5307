//! HTTP service and command-line entry points for the layout editor.

pub mod app;
pub mod cli;
pub mod render;
pub mod store;

pub use app::{router, AppState};
pub use store::{Event, Store, StoreError};
