//! The `collab` pipeline: configuration, output locking and one function
//! per subcommand.

pub mod commands;
pub mod config;
pub mod lock;
pub mod report;

pub use commands::{Context, Scope};
pub use config::PipelineConfig;
pub use lock::OutputLock;
