pub mod api;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod pipeline;
pub mod store;
pub mod synthetic;
